//! The reinforcement-learning view of the link: discretized observations,
//! the flattened (power, MCS) action space, the weighted reward and the
//! episode terminal rules.

use serde::{Deserialize, Serialize};

use crate::error::EnvError;
use crate::link::{EpochOutcome, FixedController, LinkConfig, LinkSim};
use crate::mac::{CW_LADDER, CW_MAX};
use crate::sim::{EPOCH_US, US_PER_SEC};

pub const POWER_LEVELS: usize = 10;
pub const MCS_LEVELS: usize = 10;
pub const ACTION_COUNT: usize = POWER_LEVELS * MCS_LEVELS;

pub const QUEUE_LEVELS: usize = 10;
pub const CW_LEVELS: usize = CW_LADDER.len();
pub const BACKOFF_LEVELS: usize = 128;
pub const ACK_LEVELS: usize = 2;
pub const BATTERY_LEVELS: usize = 10;
pub const STATE_COUNT: usize = QUEUE_LEVELS * CW_LEVELS * BACKOFF_LEVELS * ACK_LEVELS * BATTERY_LEVELS;

/// Battery fraction below which a training episode ends.
pub const BATTERY_TERMINAL_FRACTION: f64 = 0.10;
/// Cumulative drop ratio above which a training episode ends.
pub const LOSS_TERMINAL_FRACTION: f64 = 0.05;

/// A transmit power level (1..=10 dBm) and an MCS index (0..=9).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ControlAction(u8);

impl ControlAction {
    pub fn new(power_dbm: u8, mcs: u8) -> Option<Self> {
        if (1..=10).contains(&power_dbm) && mcs <= 9 {
            Some(Self((power_dbm - 1) * 10 + mcs))
        } else {
            None
        }
    }

    pub fn from_index(index: usize) -> Result<Self, EnvError> {
        if index < ACTION_COUNT {
            Ok(Self(index as u8))
        } else {
            Err(EnvError::InvalidAction(index))
        }
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn power_dbm(self) -> u8 {
        self.0 / 10 + 1
    }

    pub fn mcs(self) -> u8 {
        self.0 % 10
    }

    pub fn all() -> impl Iterator<Item = ControlAction> {
        (0..ACTION_COUNT as u8).map(ControlAction)
    }
}

impl std::fmt::Display for ControlAction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} dBm/MCS{}", self.power_dbm(), self.mcs())
    }
}

/// The discretized tuple the agent sees at each epoch boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StateObservation {
    /// Queue occupancy bucket, 10..=100 step 10.
    pub n_t: u8,
    /// Index of the contention window in the 15..1023 ladder.
    pub c_w: u8,
    /// Discretized backoff, 0..=127.
    pub b_fs: u8,
    /// Whether the last aggregate was acknowledged.
    pub r_p: u8,
    /// Battery bucket, 10..=100 step 10.
    pub b_l: u8,
}

/// Maps a raw backoff draw (0..=1023) to one of 128 buckets.
pub fn discretize_backoff(slots: u32) -> Result<u8, EnvError> {
    if slots > CW_MAX {
        return Err(EnvError::BackoffOutOfRange(slots));
    }
    Ok((slots / 8) as u8)
}

/// `ceil(occupied / capacity * 10) * 10`, clamped to 10..=100.
pub fn queue_bucket(occupied: usize, capacity: usize) -> u8 {
    let tenths = (occupied * 10).div_ceil(capacity.max(1));
    (tenths.clamp(1, 10) as u8) * 10
}

impl StateObservation {
    /// Mixed-radix index in `0..STATE_COUNT`.
    pub fn index(&self) -> u32 {
        let n = (self.n_t / 10 - 1) as u32;
        let b = (self.b_l / 10 - 1) as u32;
        ((((n * CW_LEVELS as u32 + self.c_w as u32) * BACKOFF_LEVELS as u32 + self.b_fs as u32)
            * ACK_LEVELS as u32
            + self.r_p as u32)
            * BATTERY_LEVELS as u32)
            + b
    }

    pub fn from_index(index: u32) -> Result<Self, EnvError> {
        if index as usize >= STATE_COUNT {
            return Err(EnvError::InvalidState(index));
        }
        let mut rest = index;
        let mut digit = |radix: usize| {
            let d = rest % radix as u32;
            rest /= radix as u32;
            d as u8
        };
        let b = digit(BATTERY_LEVELS);
        let r_p = digit(ACK_LEVELS);
        let b_fs = digit(BACKOFF_LEVELS);
        let c_w = digit(CW_LEVELS);
        let n = digit(QUEUE_LEVELS);
        Ok(Self { n_t: (n + 1) * 10, c_w, b_fs, r_p, b_l: (b + 1) * 10 })
    }

    pub fn is_valid(&self) -> bool {
        let bucket = |v: u8| v.is_multiple_of(10) && (10..=100).contains(&v);
        bucket(self.n_t)
            && bucket(self.b_l)
            && (self.c_w as usize) < CW_LEVELS
            && (self.b_fs as usize) < BACKOFF_LEVELS
            && self.r_p <= 1
    }

    /// Builds the observation from an epoch's end-of-window counters.
    pub fn from_outcome(out: &EpochOutcome, queue_capacity: usize) -> Self {
        Self {
            n_t: queue_bucket(out.queue_len, queue_capacity),
            c_w: out.cw_index as u8,
            b_fs: discretize_backoff(out.last_backoff).expect("backoff bounded by CW_MAX"),
            r_p: out.last_ack as u8,
            b_l: out.battery_bucket,
        }
    }
}

/// Weighted throughput/energy reward:
/// `λ·(received·100/N_T) + (1−λ)·(−E_c·100/E_T)`.
pub fn reward(received: u64, energy_j: f64, total_packets: f64, total_energy_j: f64, lambda: f64) -> f64 {
    let thr = if total_packets > 0.0 { received as f64 * 100.0 / total_packets } else { 0.0 };
    lambda * thr + (1.0 - lambda) * (-energy_j * 100.0 / total_energy_j)
}

/// Throughput in Mbps: `packets · payload · 8 / (seconds · 10⁶)`.
pub fn throughput_mbps(packets: u64, payload_bytes: u32, seconds: f64) -> f64 {
    packets as f64 * payload_bytes as f64 * 8.0 / (seconds * 1e6)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Terminal {
    None,
    Battery,
    Loss,
}

impl Terminal {
    pub fn label(self) -> &'static str {
        match self {
            Terminal::None => "none",
            Terminal::Battery => "battery",
            Terminal::Loss => "loss",
        }
    }
}

/// Which energy total normalizes the energy term of the reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum EnergyNorm {
    /// Battery capacity; constant across episodes.
    #[default]
    Capacity,
    /// Remaining energy when the episode started.
    EpisodeStart,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum EpisodeMode {
    /// Battery and loss terminals are enforced.
    #[default]
    Training,
    /// No terminals; the episode runs to the time limit or full depletion.
    Evaluation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvParams {
    pub lambda: f64,
    pub energy_norm: EnergyNorm,
    pub mode: EpisodeMode,
}

impl Default for EnvParams {
    fn default() -> Self {
        Self { lambda: 0.8, energy_norm: EnergyNorm::Capacity, mode: EpisodeMode::Training }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub next_state: StateObservation,
    pub reward: f64,
    pub terminal: Terminal,
    /// The episode ended without a terminal state (time limit or, in
    /// evaluation, a fully drained battery).
    pub truncated: bool,
    pub info: EpochOutcome,
}

impl StepResult {
    pub fn done(&self) -> bool {
        self.terminal != Terminal::None || self.truncated
    }
}

/// Episode-level running totals.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTotals {
    pub steps: u64,
    pub arrivals: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub energy_j: f64,
    pub reward: f64,
}

impl EpisodeTotals {
    pub fn elapsed_s(&self) -> f64 {
        (self.steps * EPOCH_US) as f64 / US_PER_SEC as f64
    }

    pub fn loss_fraction(&self) -> f64 {
        if self.arrivals == 0 {
            0.0
        } else {
            self.dropped as f64 / self.arrivals as f64
        }
    }
}

/// Reset/step wrapper over one [`LinkSim`].
pub struct LinkEnv {
    link: LinkConfig,
    params: EnvParams,
    sim: LinkSim,
    state: StateObservation,
    totals: EpisodeTotals,
    energy_total: f64,
    max_steps: u64,
    finished: bool,
}

impl LinkEnv {
    pub fn new(link: LinkConfig, params: EnvParams, seed: u64) -> Self {
        let sim = LinkSim::new(link.clone(), seed);
        let max_steps = link.sim_time_us / EPOCH_US;
        let mut env = Self {
            energy_total: link.battery_j,
            link,
            params,
            sim,
            state: StateObservation { n_t: 10, c_w: 0, b_fs: 0, r_p: 0, b_l: 100 },
            totals: EpisodeTotals::default(),
            max_steps,
            finished: false,
        };
        env.state = env.initial_state();
        env
    }

    /// Starts a fresh episode on a new simulator seeded with `seed`.
    pub fn reset(&mut self, seed: u64) -> StateObservation {
        self.sim = LinkSim::new(self.link.clone(), seed);
        self.totals = EpisodeTotals::default();
        self.finished = false;
        self.energy_total = match self.params.energy_norm {
            EnergyNorm::Capacity => self.sim.battery().capacity(),
            EnergyNorm::EpisodeStart => self.sim.battery().remaining(),
        };
        self.state = self.initial_state();
        self.state
    }

    fn initial_state(&self) -> StateObservation {
        // b_fs starts at 0 until the first access; r_p starts unacknowledged.
        StateObservation {
            n_t: queue_bucket(self.sim.queue().occupancy(), self.link.queue_capacity),
            c_w: self.sim.contention().cw_index() as u8,
            b_fs: 0,
            r_p: 0,
            b_l: self.sim.battery().level_bucket(),
        }
    }

    pub fn observe(&self) -> StateObservation {
        self.state
    }

    pub fn params(&self) -> &EnvParams {
        &self.params
    }

    pub fn set_mode(&mut self, mode: EpisodeMode) {
        self.params.mode = mode;
    }

    pub fn link_config(&self) -> &LinkConfig {
        &self.link
    }

    pub fn sim(&self) -> &LinkSim {
        &self.sim
    }

    pub fn sim_mut(&mut self) -> &mut LinkSim {
        &mut self.sim
    }

    pub fn totals(&self) -> &EpisodeTotals {
        &self.totals
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    /// `N_T`: packets offered over the configured simulation time.
    pub fn total_packets(&self) -> f64 {
        self.link.arrival_rate_pps * self.link.sim_time_us as f64 / US_PER_SEC as f64
    }

    pub fn total_energy(&self) -> f64 {
        self.energy_total
    }

    /// Applies `action` for one epoch.
    pub fn step(&mut self, action: ControlAction) -> Result<StepResult, EnvError> {
        self.step_with(&mut FixedController(action))
    }

    /// Runs one epoch with an arbitrary per-frame controller (e.g. a rate-adaptation baseline).
    pub fn step_with(&mut self, ctrl: &mut dyn crate::link::RateController) -> Result<StepResult, EnvError> {
        if self.finished {
            return Err(EnvError::Terminated);
        }
        let out = self.sim.run_epoch(ctrl);
        let r = reward(out.delivered, out.energy_j, self.total_packets(), self.energy_total, self.params.lambda);

        let t = &mut self.totals;
        t.steps += 1;
        t.arrivals += out.arrivals;
        t.delivered += out.delivered;
        t.dropped += out.dropped();
        t.energy_j += out.energy_j;
        t.reward += r;

        let terminal = match self.params.mode {
            EpisodeMode::Training if out.battery_fraction < BATTERY_TERMINAL_FRACTION => Terminal::Battery,
            EpisodeMode::Training
                if t.arrivals > 0 && t.dropped as f64 > LOSS_TERMINAL_FRACTION * t.arrivals as f64 =>
            {
                Terminal::Loss
            }
            _ => Terminal::None,
        };
        let truncated = terminal == Terminal::None
            && (t.steps >= self.max_steps || (self.params.mode == EpisodeMode::Evaluation && out.depleted));
        self.finished = terminal != Terminal::None || truncated;
        self.state = StateObservation::from_outcome(&out, self.link.queue_capacity);
        Ok(StepResult { next_state: self.state, reward: r, terminal, truncated, info: out })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn backoff_buckets() {
        assert_eq!(discretize_backoff(0).unwrap(), 0);
        assert_eq!(discretize_backoff(1023).unwrap(), 127);
        assert_eq!(discretize_backoff(512).unwrap(), 64);
        assert_eq!(discretize_backoff(1024), Err(EnvError::BackoffOutOfRange(1024)));
    }

    #[test]
    fn queue_buckets() {
        assert_eq!(queue_bucket(2500, 5000), 50);
        assert_eq!(queue_bucket(0, 5000), 10);
        assert_eq!(queue_bucket(1, 5000), 10);
        assert_eq!(queue_bucket(501, 5000), 20);
        assert_eq!(queue_bucket(5000, 5000), 100);
    }

    #[test]
    fn state_index_extremes() {
        let min = StateObservation { n_t: 10, c_w: 0, b_fs: 0, r_p: 0, b_l: 10 };
        let max = StateObservation { n_t: 100, c_w: 6, b_fs: 127, r_p: 1, b_l: 100 };
        assert_eq!(min.index(), 0);
        assert_eq!(max.index(), 179_199);
        assert_eq!(STATE_COUNT, 179_200);
        assert!(StateObservation::from_index(179_200).is_err());
    }

    #[test]
    fn action_flattening() {
        let a = ControlAction::from_index(37).unwrap();
        assert_eq!((a.power_dbm(), a.mcs()), (4, 7));
        assert_eq!(ControlAction::new(4, 7), Some(a));
        assert_eq!(ControlAction::new(0, 3), None);
        assert_eq!(ControlAction::new(10, 10), None);
        assert!(ControlAction::from_index(100).is_err());
        assert_eq!(a.to_string(), "4 dBm/MCS7");
    }

    #[test]
    fn reward_examples() {
        assert_abs_diff_eq!(reward(600, 0.3, 600.0, 5.0, 1.0), 100.0, epsilon = 1e-12);
        assert_abs_diff_eq!(reward(0, 5.0, 600.0, 5.0, 0.0), -100.0, epsilon = 1e-12);
        assert_abs_diff_eq!(reward(300, 0.001, 600_000.0, 5.0, 0.8), 0.036, epsilon = 1e-12);
    }

    #[test]
    fn throughput_examples() {
        assert_eq!(throughput_mbps(0, 1472, 10.0), 0.0);
        assert_abs_diff_eq!(throughput_mbps(10_000, 1472, 10.0), 11.776, epsilon = 1e-12);
        assert_abs_diff_eq!(throughput_mbps(594_466, 1472, 10.0), 700.0, epsilon = 0.05);
    }

    fn small(battery_j: f64) -> LinkConfig {
        LinkConfig { battery_j, arrival_rate_pps: 6000.0, queue_capacity: 500, sim_time_us: US_PER_SEC, ..Default::default() }
    }

    #[test]
    fn battery_terminal_then_step_errors() {
        let mut env = LinkEnv::new(small(0.05), EnvParams::default(), 1);
        env.reset(1);
        let a = ControlAction::new(10, 5).unwrap();
        let last = loop {
            let r = env.step(a).unwrap();
            if r.done() {
                break r;
            }
        };
        assert_eq!(last.terminal, Terminal::Battery);
        assert!(last.info.battery_fraction < BATTERY_TERMINAL_FRACTION);
        assert_eq!(env.step(a).unwrap_err(), EnvError::Terminated);
        env.reset(2);
        assert!(env.step(a).is_ok());
    }

    #[test]
    fn loss_terminal_on_heavy_drops() {
        // MCS 9 at 1 dBm and 20 m cannot get through: everything retries out or overflows
        let cfg = LinkConfig { distance_m: 20.0, arrival_rate_pps: 60_000.0, queue_capacity: 100, ..small(5.0) };
        let mut env = LinkEnv::new(cfg, EnvParams::default(), 1);
        env.reset(1);
        let a = ControlAction::new(1, 9).unwrap();
        let last = loop {
            let r = env.step(a).unwrap();
            if r.done() {
                break r;
            }
        };
        assert_eq!(last.terminal, Terminal::Loss);
        assert!(env.totals().loss_fraction() > LOSS_TERMINAL_FRACTION);
    }

    #[test]
    fn evaluation_runs_to_depletion_without_terminals() {
        let mut env = LinkEnv::new(small(0.1), EnvParams { mode: EpisodeMode::Evaluation, ..Default::default() }, 1);
        env.reset(3);
        let a = ControlAction::new(10, 5).unwrap();
        let last = loop {
            let r = env.step(a).unwrap();
            assert_eq!(r.terminal, Terminal::None);
            if r.done() {
                break r;
            }
        };
        assert!(last.truncated && last.info.depleted);
    }

    #[test]
    fn time_limit_truncates() {
        let cfg = LinkConfig { sim_time_us: 50 * EPOCH_US, ..small(5.0) };
        let mut env = LinkEnv::new(cfg, EnvParams::default(), 1);
        env.reset(5);
        let a = ControlAction::new(10, 4).unwrap();
        let mut n = 0;
        loop {
            let r = env.step(a).unwrap();
            n += 1;
            if r.done() {
                assert!(r.truncated);
                break;
            }
        }
        assert_eq!(n, 50);
    }

    #[test]
    fn step_rewards_within_bounds() {
        for lambda in [0.0, 0.2, 0.5, 0.8, 1.0] {
            let mut env = LinkEnv::new(small(0.5), EnvParams { lambda, ..Default::default() }, 1);
            env.reset(9);
            loop {
                let r = env.step(ControlAction::new(10, 9).unwrap()).unwrap();
                assert!(r.reward >= -(1.0 - lambda) * 100.0 - 1e-12 && r.reward <= lambda * 100.0 + 1e-12);
                assert!(r.next_state.is_valid());
                if r.done() {
                    break;
                }
            }
        }
    }

    #[test]
    fn reset_gives_fresh_observation() {
        let mut env = LinkEnv::new(small(0.5), EnvParams::default(), 1);
        let s = env.reset(4);
        assert_eq!(s, StateObservation { n_t: 10, c_w: 0, b_fs: 0, r_p: 0, b_l: 100 });
        assert_eq!(env.total_packets(), 6000.0);
        assert_eq!(env.total_energy(), 0.5);
    }
}
