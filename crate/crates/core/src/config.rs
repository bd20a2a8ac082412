//! Experiment configuration files.
//!
//! A config is a TOML document whose keys are read as flat dotted paths:
//! `channel.frequency_hz = 5.2e9` and a `[channel]` table holding
//! `frequency_hz` are the same key. Every key is optional; `scale` picks the
//! defaults (`full` or `desk`) and the remaining keys override them. Unknown
//! keys are rejected.
//!
//! | key | type | meaning |
//! |---|---|---|
//! | `mode` | `"train"` / `"test"` | what `run` does |
//! | `scale` | `"full"` / `"desk"` | default profile |
//! | `seed` | integer | base seed |
//! | `episodes` | integer | training episodes |
//! | `test_episodes` | integer | episodes averaged per sweep point |
//! | `sim_time` | seconds | episode length |
//! | `agent.kind` | `"sarsa"` / `"minstrel"` / `"fixed"` | controller |
//! | `agent.lambda`, `agent.alpha`, `agent.gamma` | float | SARSA weights |
//! | `agent.epsilon`, `agent.epsilon_decay`, `agent.epsilon_floor` | float | exploration |
//! | `agent.update_rule` | `"standard"` / `"printed"` | SARSA backup form |
//! | `agent.power_dbm`, `agent.mcs` | integer | fixed action |
//! | `minstrel.lookaround`, `minstrel.interval_us`, `minstrel.ewma_weight`, `minstrel.power_dbm` | | baseline |
//! | `traffic.arrival_rate` | pkt/s or list | offered load; a list is a sweep |
//! | `traffic.payload_bytes`, `traffic.queue_capacity`, `traffic.max_delay_s` | | queue |
//! | `topology.distance` | meters or list | Tx-Rx distance |
//! | `topology.jammers` | 0..=2 or list | jammer count |
//! | `topology.mobility` | `"constant"` / `"random_walk"` | receiver mobility |
//! | `topology.walk_step_m`, `topology.walk_interval_s`, `topology.walk_area_m` | | random walk |
//! | `channel.*` | | `frequency_hz`, `bandwidth_hz`, `nakagami_m`, `fading`, `noise_figure_db`, `cca_threshold_dbm`, `per_width_db`, `min_sinr_db` |
//! | `energy.*` | | `battery_j`, `voltage`, `idle_a`, `busy_a`, `rx_a`, `sleep_a`, `tx_eta`, `tx_base_a` |
//! | `jammer.*` | | `tx_power_dbm`, `duty_cycle`, `burst_us`, `offset_m` |
//! | `mac.retry_limit`, `mac.max_aggregation` | integer | |
//! | `reward.energy_norm` | `"capacity"` / `"episode_start"` | energy normalizer |
//! | `output.qtable`, `output.csv` | path | default output files |
//!
//! In training a list of distances, rates or jammer counts is cycled one
//! entry per episode; in test mode the lists form a sweep grid.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::Value;

use crate::agents::{MinstrelParams, SarsaParams, UpdateRule};
use crate::env::{ControlAction, EnergyNorm, EnvParams, EpisodeMode};
use crate::error::ConfigError;
use crate::jammer::JammerConfig;
use crate::link::{LinkConfig, RxMobility};
use crate::phy::MCS_COUNT;
use crate::sim::US_PER_SEC;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Train,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scale {
    /// Ten-second episodes, 5 J battery, 5000-packet queue.
    Full,
    /// One-second episodes, 0.5 J battery, loads divided by ten, 500-packet queue.
    Desk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AgentKind {
    Sarsa,
    Minstrel,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub scale: Scale,
    pub seed: u64,
    pub episodes: usize,
    pub test_episodes: usize,
    pub agent: AgentKind,
    pub sarsa: SarsaParams,
    pub minstrel: MinstrelParams,
    pub fixed: ControlAction,
    pub arrival_rates: Vec<f64>,
    pub distances: Vec<f64>,
    pub jammer_counts: Vec<usize>,
    /// Template for every run; rate, distance and jammers are filled per point.
    pub link: LinkConfig,
    pub jammer: JammerConfig,
    pub energy_norm: EnergyNorm,
    pub qtable_path: Option<PathBuf>,
    pub csv_path: Option<PathBuf>,
}

/// Arrival-rate grid of the test sweeps at full scale, pkt/s.
pub fn full_rate_grid() -> Vec<f64> {
    (1..=12).map(|k| k as f64 * 5000.0).collect()
}

impl ExperimentConfig {
    pub fn defaults(mode: Mode, scale: Scale) -> Self {
        let load_div = match scale {
            Scale::Full => 1.0,
            Scale::Desk => 10.0,
        };
        let arrival_rates = match mode {
            Mode::Train => vec![60_000.0 / load_div],
            Mode::Test => full_rate_grid().into_iter().map(|r| r / load_div).collect(),
        };
        let jammer_counts = match mode {
            Mode::Train => vec![1],
            Mode::Test => vec![1, 2],
        };
        let mut link = LinkConfig::default();
        let mut sarsa = SarsaParams::throughput();
        let episodes;
        match scale {
            Scale::Full => {
                episodes = 1000;
            }
            Scale::Desk => {
                link.sim_time_us = US_PER_SEC;
                link.battery_j = 0.5;
                link.queue_capacity = 500;
                episodes = 1000;
                sarsa.epsilon_decay = 0.99996;
            }
        }
        Self {
            mode,
            scale,
            seed: 1,
            episodes,
            test_episodes: 30,
            agent: AgentKind::Sarsa,
            sarsa,
            minstrel: MinstrelParams::default(),
            fixed: ControlAction::new(10, 0).expect("valid"),
            arrival_rates,
            distances: vec![5.0, 10.0, 20.0],
            jammer_counts,
            link,
            jammer: JammerConfig::default(),
            energy_norm: EnergyNorm::Capacity,
            qtable_path: None,
            csv_path: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let doc: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Syntax(e.message().to_string()))?;
        let mut keys = Keys::default();
        flatten("", Value::Table(doc), &mut keys.0)?;

        let mode = match keys.take_str("mode")?.as_deref() {
            None | Some("train") => Mode::Train,
            Some("test") => Mode::Test,
            Some(other) => return Err(invalid("mode", format!("expected train or test, got {other}"))),
        };
        let scale = match keys.take_str("scale")?.as_deref() {
            None | Some("full") => Scale::Full,
            Some("desk") => Scale::Desk,
            Some(other) => return Err(invalid("scale", format!("expected full or desk, got {other}"))),
        };
        let mut c = Self::defaults(mode, scale);
        c.apply(&mut keys)?;
        if let Some(key) = keys.0.keys().next() {
            return Err(ConfigError::UnknownKey(key.clone()));
        }
        c.validate()?;
        Ok(c)
    }

    fn apply(&mut self, k: &mut Keys) -> Result<(), ConfigError> {
        set(&mut self.seed, k.take_u64("seed")?);
        set(&mut self.episodes, k.take_u64("episodes")?.map(|v| v as usize));
        set(&mut self.test_episodes, k.take_u64("test_episodes")?.map(|v| v as usize));
        if let Some(s) = k.take_f64("sim_time")? {
            if !(s > 0.0) {
                return Err(invalid("sim_time", "must be positive"));
            }
            self.link.sim_time_us = (s * US_PER_SEC as f64).round() as u64;
        }

        if let Some(kind) = k.take_str("agent.kind")? {
            self.agent = match kind.as_str() {
                "sarsa" => AgentKind::Sarsa,
                "minstrel" => AgentKind::Minstrel,
                "fixed" => AgentKind::Fixed,
                other => return Err(invalid("agent.kind", format!("expected sarsa, minstrel or fixed, got {other}"))),
            };
        }
        let s = &mut self.sarsa;
        set(&mut s.lambda, k.take_f64("agent.lambda")?);
        set(&mut s.alpha, k.take_f64("agent.alpha")?);
        set(&mut s.gamma, k.take_f64("agent.gamma")?);
        set(&mut s.epsilon, k.take_f64("agent.epsilon")?);
        set(&mut s.epsilon_decay, k.take_f64("agent.epsilon_decay")?);
        set(&mut s.epsilon_floor, k.take_f64("agent.epsilon_floor")?);
        if let Some(rule) = k.take_str("agent.update_rule")? {
            s.rule = match rule.as_str() {
                "standard" => UpdateRule::Standard,
                "printed" => UpdateRule::Printed,
                other => return Err(invalid("agent.update_rule", format!("expected standard or printed, got {other}"))),
            };
        }
        let power = k.take_u64("agent.power_dbm")?.unwrap_or(self.fixed.power_dbm() as u64);
        let mcs = k.take_u64("agent.mcs")?.unwrap_or(self.fixed.mcs() as u64);
        self.fixed = u8::try_from(power)
            .ok()
            .zip(u8::try_from(mcs).ok())
            .and_then(|(p, m)| ControlAction::new(p, m))
            .ok_or_else(|| invalid("agent.power_dbm", format!("({power} dBm, MCS {mcs}) is not a valid action")))?;

        let m = &mut self.minstrel;
        set(&mut m.lookaround, k.take_f64("minstrel.lookaround")?);
        set(&mut m.interval_us, k.take_u64("minstrel.interval_us")?);
        set(&mut m.ewma_weight, k.take_f64("minstrel.ewma_weight")?);
        if let Some(p) = k.take_u64("minstrel.power_dbm")? {
            m.power_dbm = u8::try_from(p).ok().filter(|p| (1..=10).contains(p)).ok_or_else(|| {
                invalid("minstrel.power_dbm", "must lie in 1..=10")
            })?;
        }

        set(&mut self.arrival_rates, k.take_f64_list("traffic.arrival_rate")?);
        let l = &mut self.link;
        set(&mut l.payload_bytes, k.take_u64("traffic.payload_bytes")?.map(|v| v as u32));
        set(&mut l.queue_capacity, k.take_u64("traffic.queue_capacity")?.map(|v| v as usize));
        if let Some(s) = k.take_f64("traffic.max_delay_s")? {
            l.max_delay_us = (s * US_PER_SEC as f64).round() as u64;
        }

        set(&mut self.distances, k.take_f64_list("topology.distance")?);
        set(
            &mut self.jammer_counts,
            k.take_f64_list("topology.jammers")?.map(|v| v.into_iter().map(|j| j as usize).collect()),
        );
        let walk_step = k.take_f64("topology.walk_step_m")?.unwrap_or(1.0);
        let walk_interval = k.take_f64("topology.walk_interval_s")?.unwrap_or(0.5);
        let walk_area = k.take_f64("topology.walk_area_m")?.unwrap_or(50.0);
        if let Some(mob) = k.take_str("topology.mobility")? {
            l.rx_mobility = match mob.as_str() {
                "constant" => RxMobility::Constant,
                "random_walk" => RxMobility::RandomWalk {
                    step_m: walk_step,
                    interval_us: (walk_interval * US_PER_SEC as f64).round() as u64,
                    area_m: walk_area,
                },
                other => return Err(invalid("topology.mobility", format!("expected constant or random_walk, got {other}"))),
            };
        }

        let ch = &mut l.channel;
        set(&mut ch.frequency_hz, k.take_f64("channel.frequency_hz")?);
        set(&mut ch.bandwidth_hz, k.take_f64("channel.bandwidth_hz")?);
        set(&mut ch.nakagami_m, k.take_f64("channel.nakagami_m")?);
        set(&mut ch.fading, k.take_bool("channel.fading")?);
        set(&mut ch.noise_figure_db, k.take_f64("channel.noise_figure_db")?);
        set(&mut ch.cca_threshold_dbm, k.take_f64("channel.cca_threshold_dbm")?);
        set(&mut ch.per_width_db, k.take_f64("channel.per_width_db")?);
        if let Some(v) = k.take_f64_list("channel.min_sinr_db")? {
            ch.min_sinr_db = <[f64; MCS_COUNT]>::try_from(v)
                .map_err(|_| invalid("channel.min_sinr_db", format!("expected {MCS_COUNT} thresholds")))?;
        }

        set(&mut l.battery_j, k.take_f64("energy.battery_j")?);
        let e = &mut l.energy;
        set(&mut e.voltage, k.take_f64("energy.voltage")?);
        set(&mut e.idle_a, k.take_f64("energy.idle_a")?);
        set(&mut e.busy_a, k.take_f64("energy.busy_a")?);
        set(&mut e.rx_a, k.take_f64("energy.rx_a")?);
        set(&mut e.sleep_a, k.take_f64("energy.sleep_a")?);
        set(&mut e.tx_eta, k.take_f64("energy.tx_eta")?);
        set(&mut e.tx_base_a, k.take_f64("energy.tx_base_a")?);

        let j = &mut self.jammer;
        set(&mut j.tx_power_dbm, k.take_f64("jammer.tx_power_dbm")?);
        set(&mut j.duty_cycle, k.take_f64("jammer.duty_cycle")?);
        set(&mut j.burst_us, k.take_u64("jammer.burst_us")?);
        set(&mut j.offset_y, k.take_f64("jammer.offset_m")?);

        if let Some(r) = k.take_u64("mac.retry_limit")? {
            l.retry_limit = u8::try_from(r).map_err(|_| invalid("mac.retry_limit", "too large"))?;
        }
        set(&mut l.max_aggregation, k.take_u64("mac.max_aggregation")?.map(|v| v as u32));

        if let Some(n) = k.take_str("reward.energy_norm")? {
            self.energy_norm = match n.as_str() {
                "capacity" => EnergyNorm::Capacity,
                "episode_start" => EnergyNorm::EpisodeStart,
                other => return Err(invalid("reward.energy_norm", format!("expected capacity or episode_start, got {other}"))),
            };
        }
        set(&mut self.qtable_path, k.take_str("output.qtable")?.map(PathBuf::from).map(Some));
        set(&mut self.csv_path, k.take_str("output.csv")?.map(PathBuf::from).map(Some));
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.sarsa.validate().map_err(|m| invalid("agent", m))?;
        self.link.energy.validate().map_err(|m| invalid("energy", m))?;
        self.jammer.validate().map_err(|m| invalid("jammer", m))?;
        if self.arrival_rates.is_empty() || self.arrival_rates.iter().any(|r| !(*r > 0.0)) {
            return Err(invalid("traffic.arrival_rate", "needs at least one positive rate"));
        }
        if self.distances.is_empty() || self.distances.iter().any(|d| !(*d > 0.0)) {
            return Err(invalid("topology.distance", "needs at least one positive distance"));
        }
        if self.jammer_counts.is_empty() || self.jammer_counts.iter().any(|&j| j > 2) {
            return Err(invalid("topology.jammers", "counts must lie in 0..=2"));
        }
        if !(self.link.battery_j > 0.0) {
            return Err(invalid("energy.battery_j", "must be positive"));
        }
        if self.link.queue_capacity == 0 {
            return Err(invalid("traffic.queue_capacity", "must be positive"));
        }
        if !(1..=64).contains(&self.link.max_aggregation) {
            return Err(invalid("mac.max_aggregation", "must lie in 1..=64"));
        }
        if self.link.channel.min_sinr_db.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("channel.min_sinr_db", "thresholds must increase with MCS"));
        }
        if self.link.channel.nakagami_m < 0.5 {
            return Err(invalid("channel.nakagami_m", "must be at least 0.5"));
        }
        if self.mode == Mode::Test && self.test_episodes == 0 {
            return Err(invalid("test_episodes", "must be positive"));
        }
        Ok(())
    }

    /// Link configuration for one operating point.
    pub fn link_for(&self, arrival_rate: f64, distance: f64, jammers: usize) -> LinkConfig {
        let mut link = self.link.clone();
        link.arrival_rate_pps = arrival_rate;
        link.distance_m = distance;
        link.jammers = (0..jammers)
            .map(|i| {
                let mut j = self.jammer;
                j.offset_y = if i % 2 == 0 { self.jammer.offset_y } else { -self.jammer.offset_y };
                j
            })
            .collect();
        link
    }

    pub fn env_params(&self, mode: EpisodeMode) -> EnvParams {
        EnvParams { lambda: self.sarsa.lambda, energy_norm: self.energy_norm, mode }
    }

    /// Short controller label used in CSV rows.
    pub fn controller_label(&self) -> String {
        match self.agent {
            AgentKind::Sarsa => format!("sarsa-{}", self.sarsa.lambda),
            AgentKind::Minstrel => "minstrel".to_string(),
            AgentKind::Fixed => format!("fixed-{}dBm-mcs{}", self.fixed.power_dbm(), self.fixed.mcs()),
        }
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn invalid(key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::InvalidValue { key: key.to_string(), msg: msg.into() }
}

fn flatten(prefix: &str, value: Value, out: &mut BTreeMap<String, Value>) -> Result<(), ConfigError> {
    match value {
        Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() { k } else { format!("{prefix}.{k}") };
                flatten(&key, v, out)?;
            }
        }
        v => {
            if out.insert(prefix.to_string(), v).is_some() {
                return Err(ConfigError::Syntax(format!("duplicate key `{prefix}`")));
            }
        }
    }
    Ok(())
}

#[derive(Default)]
struct Keys(BTreeMap<String, Value>);

impl Keys {
    fn take_f64(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.0.remove(key) {
            None => Ok(None),
            Some(Value::Float(f)) => Ok(Some(f)),
            Some(Value::Integer(i)) => Ok(Some(i as f64)),
            Some(v) => Err(invalid(key, format!("expected a number, got {}", v.type_str()))),
        }
    }

    fn take_u64(&mut self, key: &str) -> Result<Option<u64>, ConfigError> {
        match self.0.remove(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if i >= 0 => Ok(Some(i as u64)),
            Some(v) => Err(invalid(key, format!("expected a non-negative integer, got {v}"))),
        }
    }

    fn take_bool(&mut self, key: &str) -> Result<Option<bool>, ConfigError> {
        match self.0.remove(key) {
            None => Ok(None),
            Some(Value::Boolean(b)) => Ok(Some(b)),
            Some(v) => Err(invalid(key, format!("expected true or false, got {}", v.type_str()))),
        }
    }

    fn take_str(&mut self, key: &str) -> Result<Option<String>, ConfigError> {
        match self.0.remove(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(v) => Err(invalid(key, format!("expected a string, got {}", v.type_str()))),
        }
    }

    /// A number or a non-empty array of numbers.
    fn take_f64_list(&mut self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        let num = |v: &Value| match v {
            Value::Float(f) => Some(*f),
            Value::Integer(i) => Some(*i as f64),
            _ => None,
        };
        match self.0.remove(key) {
            None => Ok(None),
            Some(Value::Array(items)) => {
                let list: Option<Vec<f64>> = items.iter().map(num).collect();
                match list {
                    Some(l) if !l.is_empty() => Ok(Some(l)),
                    Some(_) => Err(invalid(key, "list must not be empty")),
                    None => Err(invalid(key, "list must hold numbers only")),
                }
            }
            Some(v) => num(&v).map(|x| Some(vec![x])).ok_or_else(|| invalid(key, "expected a number or a list")),
        }
    }
}
