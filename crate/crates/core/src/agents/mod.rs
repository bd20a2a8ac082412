//! Controllers: the SARSA learner, a Minstrel-style baseline and fixed actions.

pub mod minstrel;
pub mod qtable;
pub mod sarsa;

pub use minstrel::{MinstrelParams, MinstrelState};
pub use qtable::QTable;
pub use sarsa::{decay_epsilon, sarsa_update, select_action, SarsaAgent, SarsaParams, UpdateRule};
