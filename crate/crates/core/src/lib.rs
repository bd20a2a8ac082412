//! Simulation of an 802.11ac link under jamming with a tabular SARSA agent
//! that jointly picks MCS and transmit power, plus a Minstrel-style baseline.
//!
//! The stack, bottom-up:
//!
//! - [`sim`]: integer-µs clock, event queue, seeded RNG streams, node positions
//! - [`phy`]: VHT rate table, Friis + Nakagami channel, SINR, PER, airtime
//! - [`mac`]: packet queue, contention window ladder, backoff
//! - [`energy`]: radio-state energy and the battery
//! - [`jammer`]: non-carrier-sensing burst interferers
//! - [`link`]: the event-driven link advanced one 5 ms epoch at a time
//! - [`env`]: observations, actions, reward and terminal rules
//! - [`agents`]: SARSA, Minstrel and Q-table persistence
//! - [`config`] / [`harness`]: experiment files, training, test sweeps, CSV output

pub mod agents;
pub mod config;
pub mod energy;
pub mod env;
pub mod error;
pub mod harness;
pub mod jammer;
pub mod link;
pub mod mac;
pub mod phy;
pub mod sim;

pub use env::{ControlAction, LinkEnv, StateObservation, StepResult, Terminal};
pub use error::{ConfigError, EnvError, HarnessError, QTableError, SimError};
pub use link::{EpochOutcome, LinkConfig, LinkSim};
