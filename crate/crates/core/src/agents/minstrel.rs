//! Minstrel-style rate adaptation at a fixed transmit power.
//!
//! Per-rate MPDU success counts are collected over an update interval and
//! folded into an EWMA success probability. The best rate maximizes
//! `probability × phy rate`; a fixed fraction of frames instead samples a
//! random other rate so estimates stay fresh.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::ControlAction;
use crate::link::RateController;
use crate::phy::{McsTable, MCS_COUNT};
use crate::sim::{rng_stream, Micros, StreamId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinstrelParams {
    pub lookaround: f64,
    pub interval_us: Micros,
    /// Weight of the newest window in the EWMA.
    pub ewma_weight: f64,
    pub power_dbm: u8,
}

impl Default for MinstrelParams {
    fn default() -> Self {
        Self { lookaround: 0.1, interval_us: 100_000, ewma_weight: 0.25, power_dbm: 10 }
    }
}

pub fn ewma(prev: f64, sample: f64, weight: f64) -> f64 {
    (1.0 - weight) * prev + weight * sample
}

/// Index maximizing `score`, lowest index on ties; `None` if every score is `None`.
pub fn argmax_rate(scores: &[Option<f64>]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.iter().enumerate() {
        if let Some(v) = *s {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
    }
    best.map(|(i, _)| i)
}

#[derive(Debug, Clone)]
pub struct MinstrelState {
    params: MinstrelParams,
    rates: [f64; MCS_COUNT],
    prob: [Option<f64>; MCS_COUNT],
    attempts: [u64; MCS_COUNT],
    successes: [u64; MCS_COUNT],
    best: u8,
    next_update: Micros,
    rng: ChaCha8Rng,
}

impl MinstrelState {
    pub fn new(params: MinstrelParams, table: &McsTable, seed: u64) -> Self {
        let rates = std::array::from_fn(|i| table.phy_rate_mbps(i as u8));
        Self {
            params,
            rates,
            prob: [None; MCS_COUNT],
            attempts: [0; MCS_COUNT],
            successes: [0; MCS_COUNT],
            best: 0,
            next_update: params.interval_us,
            rng: rng_stream(seed, StreamId::Baseline),
        }
    }

    pub fn best_rate(&self) -> u8 {
        self.best
    }

    pub fn probability(&self, mcs: u8) -> Option<f64> {
        self.prob[mcs as usize]
    }

    /// Estimated throughput (Mbps) for each rate with data.
    pub fn throughput_estimates(&self) -> [Option<f64>; MCS_COUNT] {
        std::array::from_fn(|i| self.prob[i].map(|p| p * self.rates[i]))
    }

    /// Folds the current window into the EWMA and re-ranks rates.
    pub fn update_stats(&mut self) {
        for i in 0..MCS_COUNT {
            if self.attempts[i] == 0 {
                continue;
            }
            let ratio = self.successes[i] as f64 / self.attempts[i] as f64;
            self.prob[i] = Some(match self.prob[i] {
                Some(p) => ewma(p, ratio, self.params.ewma_weight),
                None => ratio,
            });
            self.attempts[i] = 0;
            self.successes[i] = 0;
        }
        self.best = argmax_rate(&self.throughput_estimates()).unwrap_or(self.best as usize) as u8;
    }

    pub fn record(&mut self, mcs: u8, attempted: u32, acked: u32) {
        self.attempts[mcs as usize] += attempted as u64;
        self.successes[mcs as usize] += acked as u64;
    }

    /// Rate for the next frame.
    pub fn choose_rate(&mut self, now: Micros) -> u8 {
        while now >= self.next_update {
            self.update_stats();
            self.next_update += self.params.interval_us;
        }
        if self.rng.gen::<f64>() < self.params.lookaround {
            let k = self.rng.gen_range(0..MCS_COUNT as u8 - 1);
            if k >= self.best {
                k + 1
            } else {
                k
            }
        } else {
            self.best
        }
    }
}

impl RateController for MinstrelState {
    fn choose(&mut self, now: Micros) -> ControlAction {
        let mcs = self.choose_rate(now);
        ControlAction::new(self.params.power_dbm, mcs).expect("valid power and mcs")
    }

    fn feedback(&mut self, action: ControlAction, attempted: u32, acked: u32, _now: Micros) {
        self.record(action.mcs(), attempted, acked);
    }
}
