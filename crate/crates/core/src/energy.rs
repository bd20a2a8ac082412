//! Transmitter radio energy accounting: per-state current draw, a linear TX
//! current model and battery bookkeeping.

use serde::{Deserialize, Serialize};

use crate::error::EnergyError;
use crate::sim::Micros;

pub const MIN_TX_POWER_DBM: f64 = 1.0;
pub const MAX_TX_POWER_DBM: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioEnergyParams {
    pub voltage: f64,
    pub idle_a: f64,
    pub busy_a: f64,
    pub rx_a: f64,
    pub sleep_a: f64,
    /// Power-amplifier efficiency of the linear TX current model.
    pub tx_eta: f64,
    pub tx_base_a: f64,
}

impl Default for RadioEnergyParams {
    fn default() -> Self {
        Self {
            voltage: 3.0,
            idle_a: 0.273,
            busy_a: 0.273,
            rx_a: 0.313,
            sleep_a: 0.033,
            tx_eta: 0.1,
            tx_base_a: 0.273,
        }
    }
}

impl RadioEnergyParams {
    pub fn validate(&self) -> Result<(), String> {
        let currents = [self.idle_a, self.busy_a, self.rx_a, self.sleep_a, self.tx_base_a];
        if currents.iter().any(|&c| !(c > 0.0)) || !(self.voltage > 0.0) {
            return Err("currents and voltage must be positive".into());
        }
        if !(self.tx_eta > 0.0 && self.tx_eta <= 1.0) {
            return Err("tx efficiency must be in (0, 1]".into());
        }
        if !(self.sleep_a < self.idle_a && self.idle_a < self.rx_a) {
            return Err("expected sleep < idle < rx current".into());
        }
        Ok(())
    }

    /// TX current demand for a nominal transmit power in dBm.
    pub fn tx_current(&self, power_dbm: f64) -> Result<f64, EnergyError> {
        if !(MIN_TX_POWER_DBM..=MAX_TX_POWER_DBM).contains(&power_dbm) {
            return Err(EnergyError::PowerOutOfRange(power_dbm));
        }
        let watts = 10f64.powf((power_dbm - 30.0) / 10.0);
        Ok(watts / (self.voltage * self.tx_eta) + self.tx_base_a)
    }

    pub fn current(&self, state: RadioState) -> Result<f64, EnergyError> {
        Ok(match state {
            RadioState::Idle => self.idle_a,
            RadioState::Busy => self.busy_a,
            RadioState::Rx => self.rx_a,
            RadioState::Sleep => self.sleep_a,
            RadioState::Tx { power_dbm } => self.tx_current(power_dbm as f64)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RadioState {
    Idle,
    /// Medium sensed busy (CCA).
    Busy,
    Tx { power_dbm: u8 },
    Rx,
    Sleep,
}

impl RadioState {
    fn slot(self) -> usize {
        match self {
            RadioState::Idle => 0,
            RadioState::Busy => 1,
            RadioState::Tx { .. } => 2,
            RadioState::Rx => 3,
            RadioState::Sleep => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Battery {
    capacity_j: f64,
    remaining_j: f64,
}

impl Battery {
    pub fn new(capacity_j: f64) -> Self {
        assert!(capacity_j > 0.0, "battery capacity must be positive");
        Self { capacity_j, remaining_j: capacity_j }
    }

    pub fn capacity(&self) -> f64 {
        self.capacity_j
    }

    pub fn remaining(&self) -> f64 {
        self.remaining_j
    }

    pub fn fraction(&self) -> f64 {
        self.remaining_j / self.capacity_j
    }

    pub fn is_depleted(&self) -> bool {
        self.remaining_j <= 0.0
    }

    /// Draws up to `joules`; returns what was actually drawn.
    pub fn draw(&mut self, joules: f64) -> f64 {
        let taken = joules.min(self.remaining_j).max(0.0);
        self.remaining_j -= taken;
        taken
    }

    /// Battery level in the 10..=100 step-10 buckets the agent observes.
    pub fn level_bucket(&self) -> u8 {
        let tenths = (self.fraction() * 10.0).ceil();
        (tenths.clamp(1.0, 10.0) as u8) * 10
    }
}

/// Energy for `duration` µs in `state`; does not touch the battery.
pub fn state_energy(params: &RadioEnergyParams, state: RadioState, duration: Micros) -> Result<f64, EnergyError> {
    Ok(params.current(state)? * params.voltage * duration as f64 * 1e-6)
}

/// Tracks the radio state timeline and charges the battery on every transition.
#[derive(Debug, Clone)]
pub struct EnergyMeter {
    params: RadioEnergyParams,
    battery: Battery,
    state: RadioState,
    since: Micros,
    consumed_j: f64,
    state_time: [Micros; 5],
}

impl EnergyMeter {
    pub fn new(params: RadioEnergyParams, battery: Battery, start: Micros) -> Self {
        Self {
            params,
            battery,
            state: RadioState::Idle,
            since: start,
            consumed_j: 0.0,
            state_time: [0; 5],
        }
    }

    /// Charges `duration` µs in `state`; returns joules drawn from the battery.
    pub fn accrue(&mut self, state: RadioState, duration: Micros) -> Result<f64, EnergyError> {
        let want = state_energy(&self.params, state, duration)?;
        let taken = self.battery.draw(want);
        self.consumed_j += taken;
        self.state_time[state.slot()] += duration;
        Ok(taken)
    }

    /// Settles the current state up to `t` and switches to `next`.
    pub fn transition(&mut self, next: RadioState, t: Micros) -> Result<f64, EnergyError> {
        let e = self.settle(t)?;
        self.state = next;
        Ok(e)
    }

    /// Charges the current state up to `t` without changing it.
    pub fn settle(&mut self, t: Micros) -> Result<f64, EnergyError> {
        let dur = t.saturating_sub(self.since);
        self.since = self.since.max(t);
        self.accrue(self.state, dur)
    }

    /// Time up to which energy has been charged.
    pub fn since(&self) -> Micros {
        self.since
    }

    pub fn state(&self) -> RadioState {
        self.state
    }

    pub fn battery(&self) -> &Battery {
        &self.battery
    }

    pub fn params(&self) -> &RadioEnergyParams {
        &self.params
    }

    /// Total joules drawn so far.
    pub fn consumed(&self) -> f64 {
        self.consumed_j
    }

    /// Time spent per state so far (idle, busy, tx, rx, sleep).
    pub fn state_time(&self) -> [Micros; 5] {
        self.state_time
    }

    pub fn accounted_time(&self) -> Micros {
        self.state_time.iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn tx_current_examples() {
        let p = RadioEnergyParams::default();
        assert_abs_diff_eq!(p.tx_current(10.0).unwrap(), 0.3063, epsilon = 5e-5);
        assert_abs_diff_eq!(p.tx_current(1.0).unwrap(), 0.2772, epsilon = 5e-5);
        for dbm in 1..10 {
            assert!(p.tx_current(dbm as f64 + 1.0).unwrap() > p.tx_current(dbm as f64).unwrap());
        }
        assert_eq!(p.tx_current(11.0), Err(EnergyError::PowerOutOfRange(11.0)));
        assert!(p.tx_current(0.5).is_err());
    }

    #[test]
    fn accrue_examples() {
        let p = RadioEnergyParams::default();
        let mut m = EnergyMeter::new(p, Battery::new(5.0), 0);
        assert_abs_diff_eq!(m.accrue(RadioState::Idle, 5_000).unwrap(), 4.095e-3, epsilon = 1e-12);
        assert_eq!(m.accrue(RadioState::Idle, 0).unwrap(), 0.0);
        let tx = m.accrue(RadioState::Tx { power_dbm: 10 }, 1_000).unwrap();
        assert_abs_diff_eq!(tx, 0.919e-3, epsilon = 1e-6);
        assert_abs_diff_eq!(m.consumed(), 5.0 - m.battery().remaining(), epsilon = 1e-15);
    }

    #[test]
    fn battery_floors_at_zero() {
        let mut m = EnergyMeter::new(RadioEnergyParams::default(), Battery::new(1e-3), 0);
        let got = m.accrue(RadioState::Idle, 5_000).unwrap();
        assert_eq!(got, 1e-3);
        assert!(m.battery().is_depleted());
        assert_eq!(m.accrue(RadioState::Idle, 5_000).unwrap(), 0.0);
    }

    #[test]
    fn level_buckets() {
        let mut b = Battery::new(1.0);
        assert_eq!(b.level_bucket(), 100);
        b.draw(0.45);
        assert_eq!(b.level_bucket(), 60);
        b.draw(0.51);
        assert_eq!(b.level_bucket(), 10);
        b.draw(1.0);
        assert_eq!(b.level_bucket(), 10);
    }

    #[test]
    fn transitions_partition_time() {
        let mut m = EnergyMeter::new(RadioEnergyParams::default(), Battery::new(5.0), 0);
        m.transition(RadioState::Tx { power_dbm: 5 }, 1_200).unwrap();
        m.transition(RadioState::Rx, 2_000).unwrap();
        m.transition(RadioState::Idle, 2_048).unwrap();
        m.settle(5_000).unwrap();
        assert_eq!(m.accounted_time(), 5_000);
        assert_eq!(m.state_time(), [1_200 + 2_952, 0, 800, 48, 0]);
    }

    #[test]
    fn default_params_valid() {
        assert!(RadioEnergyParams::default().validate().is_ok());
        let bad = RadioEnergyParams { sleep_a: 0.5, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
