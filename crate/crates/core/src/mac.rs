//! DCF MAC pieces: the FIFO packet queue with drop accounting, the
//! contention-window ladder, backoff draws and deterministic traffic.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::sim::{Micros, US_PER_SEC};

pub const CW_MIN: u32 = 15;
pub const CW_MAX: u32 = 1023;
/// The seven contention-window values, `2^k - 1` for k = 4..=10.
pub const CW_LADDER: [u32; 7] = [15, 31, 63, 127, 255, 511, 1023];
pub const DEFAULT_QUEUE_CAPACITY: usize = 5000;
pub const DEFAULT_MAX_DELAY_US: Micros = US_PER_SEC;
pub const DEFAULT_RETRY_LIMIT: u8 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Packet {
    pub arrival: Micros,
    pub retries: u8,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ArrivalTally {
    pub arrived: u64,
    pub queued: u64,
    pub dropped: u64,
}

/// Constant-rate arrivals: packet `k` arrives at `floor(k * 1e6 / rate)` µs.
#[derive(Debug, Clone)]
pub struct TrafficSource {
    rate_pps: f64,
    next_index: u64,
    origin: Micros,
}

impl TrafficSource {
    pub fn new(rate_pps: f64, origin: Micros) -> Self {
        assert!(rate_pps >= 0.0 && rate_pps.is_finite(), "arrival rate must be >= 0");
        Self { rate_pps, next_index: 0, origin }
    }

    pub fn rate(&self) -> f64 {
        self.rate_pps
    }

    /// Arrival time of the next packet not yet taken, if any.
    pub fn next_arrival(&self) -> Option<Micros> {
        if self.rate_pps <= 0.0 {
            return None;
        }
        Some(self.origin + (self.next_index as f64 * US_PER_SEC as f64 / self.rate_pps).floor() as Micros)
    }

    /// Takes every arrival with timestamp strictly before `until`.
    pub fn take_until(&mut self, until: Micros, mut each: impl FnMut(Micros)) {
        while let Some(t) = self.next_arrival() {
            if t >= until {
                break;
            }
            each(t);
            self.next_index += 1;
        }
    }
}

/// Bounded FIFO. Capacity counts packets handed to the PHY (in flight) too,
/// so retransmissions can always be put back at the head.
#[derive(Debug, Clone)]
pub struct PacketQueue {
    capacity: usize,
    max_delay: Micros,
    entries: VecDeque<Packet>,
    in_flight: usize,
}

impl PacketQueue {
    pub fn new(capacity: usize, max_delay: Micros) -> Self {
        Self { capacity, max_delay, entries: VecDeque::with_capacity(capacity), in_flight: 0 }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn in_flight(&self) -> usize {
        self.in_flight
    }

    /// Queued plus in-flight packets.
    pub fn occupancy(&self) -> usize {
        self.entries.len() + self.in_flight
    }

    /// Returns false (a drop) when the queue is full.
    pub fn push(&mut self, arrival: Micros) -> bool {
        if self.occupancy() >= self.capacity {
            return false;
        }
        self.entries.push_back(Packet { arrival, retries: 0 });
        true
    }

    /// Pulls all arrivals before `until` from `source`, counting overflow drops.
    pub fn enqueue_arrivals(&mut self, source: &mut TrafficSource, until: Micros) -> ArrivalTally {
        let mut tally = ArrivalTally::default();
        source.take_until(until, |t| {
            tally.arrived += 1;
            if self.push(t) {
                tally.queued += 1;
            } else {
                tally.dropped += 1;
            }
        });
        tally
    }

    /// Removes packets that have waited longer than the maximum delay.
    pub fn evict_expired(&mut self, now: Micros) -> u64 {
        let mut evicted = 0;
        // entries stay sorted by arrival: retries go back to the head
        while let Some(p) = self.entries.front() {
            if now.saturating_sub(p.arrival) > self.max_delay {
                self.entries.pop_front();
                evicted += 1;
            } else {
                break;
            }
        }
        evicted
    }

    /// Moves up to `n` head packets into flight.
    pub fn take_batch(&mut self, n: usize) -> Vec<Packet> {
        let k = n.min(self.entries.len());
        let batch: Vec<Packet> = self.entries.drain(..k).collect();
        self.in_flight += batch.len();
        batch
    }

    /// Settles an in-flight batch: `failed` packets go back to the head in order.
    pub fn complete_batch(&mut self, sent: usize, failed: Vec<Packet>) {
        debug_assert!(failed.len() <= sent && sent <= self.in_flight);
        self.in_flight -= sent;
        for p in failed.into_iter().rev() {
            self.entries.push_front(p);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Packet> {
        self.entries.iter()
    }
}

/// Uniform backoff in `[0, cw]` slots.
pub fn backoff_draw<R: Rng + ?Sized>(cw: u32, rng: &mut R) -> u32 {
    rng.gen_range(0..=cw)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ContentionState {
    cw_index: usize,
    pub backoff_remaining: u32,
    pub retry_count: u32,
    /// Most recent backoff draw, kept for observation.
    pub last_draw: u32,
}

impl ContentionState {
    pub fn cw(&self) -> u32 {
        CW_LADDER[self.cw_index]
    }

    pub fn cw_index(&self) -> usize {
        self.cw_index
    }

    pub fn on_success(&mut self) {
        self.cw_index = 0;
        self.retry_count = 0;
    }

    pub fn on_failure(&mut self) {
        self.cw_index = (self.cw_index + 1).min(CW_LADDER.len() - 1);
        self.retry_count += 1;
    }

    pub fn redraw<R: Rng + ?Sized>(&mut self, rng: &mut R) -> u32 {
        let b = backoff_draw(self.cw(), rng);
        self.backoff_remaining = b;
        self.last_draw = b;
        b
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxStats {
    pub arrivals: u64,
    pub delivered: u64,
    pub dropped_overflow: u64,
    pub dropped_expired: u64,
    pub dropped_retry: u64,
    pub retransmissions: u64,
    pub aggregates: u64,
    pub last_ack: bool,
}

impl TxStats {
    pub fn dropped(&self) -> u64 {
        self.dropped_overflow + self.dropped_expired + self.dropped_retry
    }
}
