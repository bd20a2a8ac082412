//! Hostile interferers that ignore carrier sense and emit fixed-length bursts
//! at random times.
//!
//! A schedule is materialized from the jammer's own seed stream before the
//! run starts, so nothing the transmitter does can move a burst. Over a
//! horizon `H` a jammer with duty cycle `d` and burst length `L` emits
//! `n = round(d * H / L)` bursts; the idle time left over is split into
//! `n + 1` gaps by uniform spacings. That is a Poisson (exponential-gap)
//! burst process conditioned on its burst count, so gaps are exponential in
//! shape with mean `L * (1 - d) / d` while the realized duty cycle matches
//! the configured one over the whole horizon.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::sim::{rng_substream, Micros, StreamId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JammerConfig {
    /// Position relative to the receiver, meters.
    pub offset_x: f64,
    pub offset_y: f64,
    pub tx_power_dbm: f64,
    pub duty_cycle: f64,
    pub burst_us: Micros,
}

impl Default for JammerConfig {
    fn default() -> Self {
        Self { offset_x: 0.0, offset_y: 10.0, tx_power_dbm: 10.0, duty_cycle: 0.2, burst_us: 500 }
    }
}

impl JammerConfig {
    /// Default placement of the `index`-th jammer: 10 m from the receiver,
    /// on alternating sides of the link.
    pub fn nth(index: usize) -> Self {
        let side = if index.is_multiple_of(2) { 1.0 } else { -1.0 };
        Self { offset_y: 10.0 * side, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.duty_cycle) {
            return Err(format!("duty cycle {} outside [0, 1]", self.duty_cycle));
        }
        if self.burst_us == 0 {
            return Err("burst length must be positive".into());
        }
        Ok(())
    }

    /// Mean idle gap between bursts, µs. Infinite when the jammer is off.
    pub fn mean_gap_us(&self) -> f64 {
        if self.duty_cycle <= 0.0 {
            f64::INFINITY
        } else {
            self.burst_us as f64 * (1.0 - self.duty_cycle) / self.duty_cycle
        }
    }
}

/// Immutable, sorted, non-overlapping burst intervals `[start, end)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JammerSchedule {
    bursts: Vec<(Micros, Micros)>,
    horizon: Micros,
}

impl JammerSchedule {
    pub fn materialize(cfg: &JammerConfig, horizon: Micros, seed: u64, index: u64) -> Self {
        let mut rng = rng_substream(seed, StreamId::Jammer, index);
        let burst = cfg.burst_us;
        let n = ((cfg.duty_cycle * horizon as f64 / burst as f64).round() as u64).min(horizon / burst);
        let idle = horizon - n * burst;
        let mut cuts: Vec<Micros> = (0..n).map(|_| rng.gen_range(0..=idle)).collect();
        cuts.sort_unstable();
        let bursts = cuts
            .iter()
            .enumerate()
            .map(|(k, &c)| {
                let start = c + k as Micros * burst;
                (start, start + burst)
            })
            .collect();
        Self { bursts, horizon }
    }

    pub fn always_on(horizon: Micros) -> Self {
        Self { bursts: vec![(0, horizon)], horizon }
    }

    pub fn silent(horizon: Micros) -> Self {
        Self { bursts: Vec::new(), horizon }
    }

    pub fn bursts(&self) -> &[(Micros, Micros)] {
        &self.bursts
    }

    pub fn horizon(&self) -> Micros {
        self.horizon
    }

    // index of the first burst ending after t
    fn first_ending_after(&self, t: Micros) -> usize {
        self.bursts.partition_point(|&(_, end)| end <= t)
    }

    pub fn is_active(&self, t: Micros) -> bool {
        self.bursts
            .get(self.first_ending_after(t))
            .is_some_and(|&(start, _)| start <= t)
    }

    /// True if any burst intersects `[start, end)`.
    pub fn overlaps(&self, start: Micros, end: Micros) -> bool {
        if end <= start {
            return false;
        }
        self.bursts
            .get(self.first_ending_after(start))
            .is_some_and(|&(s, _)| s < end)
    }

    /// The burst covering `t`, if any.
    pub fn burst_at(&self, t: Micros) -> Option<(Micros, Micros)> {
        self.bursts.get(self.first_ending_after(t)).copied().filter(|&(s, _)| s <= t)
    }

    /// Start of the first burst beginning at or after `t`.
    pub fn next_start(&self, t: Micros) -> Option<Micros> {
        let i = self.bursts.partition_point(|&(s, _)| s < t);
        self.bursts.get(i).map(|&(s, _)| s)
    }

    /// Busy time inside `[start, end)`.
    pub fn active_time(&self, start: Micros, end: Micros) -> Micros {
        let mut total = 0;
        for &(s, e) in &self.bursts[self.first_ending_after(start)..] {
            if s >= end {
                break;
            }
            total += e.min(end) - s.max(start);
        }
        total
    }

    /// Realized duty cycle over `[start, end)`.
    pub fn duty_cycle(&self, start: Micros, end: Micros) -> f64 {
        self.active_time(start, end) as f64 / (end - start) as f64
    }
}

/// Received power of each jammer active at `t`, given each jammer's power at the receiver.
pub fn interference_at(schedules: &[JammerSchedule], rx_power_dbm: &[f64], t: Micros) -> Vec<f64> {
    schedules
        .iter()
        .zip(rx_power_dbm)
        .filter(|(s, _)| s.is_active(t))
        .map(|(_, &p)| p)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phy::{rx_power_dbm, sinr_db};

    fn cfg(duty: f64) -> JammerConfig {
        JammerConfig { duty_cycle: duty, ..JammerConfig::default() }
    }

    #[test]
    fn zero_duty_is_silent() {
        let s = JammerSchedule::materialize(&cfg(0.0), 1_000_000, 1, 0);
        assert!(s.bursts().is_empty());
        assert!(interference_at(&[s], &[-56.77], 12_345).is_empty());
    }

    #[test]
    fn full_duty_always_active() {
        let s = JammerSchedule::materialize(&cfg(1.0), 1_000_000, 1, 0);
        let p = rx_power_dbm(10.0, 10.0, 5.2e9, None);
        for t in (0..1_000_000).step_by(997) {
            assert_eq!(interference_at(std::slice::from_ref(&s), &[p], t), vec![p]);
        }
    }

    #[test]
    fn two_active_jammers_sum_in_mw() {
        let h = 100_000;
        let s = [JammerSchedule::always_on(h), JammerSchedule::always_on(h)];
        let i = interference_at(&s, &[-53.0, -53.0], 10);
        assert_eq!(i.len(), 2);
        assert!(sinr_db(-50.0, &i, -200.0).abs() < 0.02);
    }

    #[test]
    fn bursts_sorted_disjoint_and_in_horizon() {
        let h = 2_000_000;
        let s = JammerSchedule::materialize(&cfg(0.35), h, 77, 1);
        for w in s.bursts().windows(2) {
            assert!(w[0].1 <= w[1].0);
        }
        assert!(s.bursts().iter().all(|&(a, b)| b - a == 500 && b <= h));
    }

    #[test]
    fn realized_duty_matches_configured() {
        for duty in [0.05, 0.2, 0.5, 0.9] {
            let s = JammerSchedule::materialize(&cfg(duty), 1_000_000, 3, 0);
            let got = s.duty_cycle(0, 1_000_000);
            assert!((got - duty).abs() <= 0.05 * duty, "{duty} -> {got}");
        }
    }

    #[test]
    fn gaps_have_exponential_mean() {
        let c = cfg(0.2);
        let s = JammerSchedule::materialize(&c, 10_000_000, 5, 0);
        let gaps: Vec<f64> = s.bursts().windows(2).map(|w| (w[1].0 - w[0].1) as f64).collect();
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
        assert!((mean / c.mean_gap_us() - 1.0).abs() < 0.05);
        // exponential: std ≈ mean
        let var = gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / gaps.len() as f64;
        assert!((var.sqrt() / mean - 1.0).abs() < 0.1);
    }

    #[test]
    fn overlap_queries() {
        let s = JammerSchedule { bursts: vec![(100, 200), (500, 600)], horizon: 1000 };
        assert!(!s.overlaps(0, 100));
        assert!(s.overlaps(0, 101));
        assert!(s.overlaps(199, 300));
        assert!(!s.overlaps(200, 500));
        assert!(s.is_active(100) && !s.is_active(200));
        assert_eq!(s.burst_at(550), Some((500, 600)));
        assert_eq!(s.next_start(101), Some(500));
        assert_eq!(s.active_time(150, 550), 100);
    }

    #[test]
    fn schedule_depends_only_on_seed() {
        let a = JammerSchedule::materialize(&cfg(0.2), 1_000_000, 9, 0);
        let b = JammerSchedule::materialize(&cfg(0.2), 1_000_000, 9, 0);
        let c = JammerSchedule::materialize(&cfg(0.2), 1_000_000, 9, 1);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
