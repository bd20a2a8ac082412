//! Discrete-event engine primitives: integer-microsecond clock, ordered
//! event queue, per-purpose RNG streams and a node registry with mobility.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::SimError;

/// Simulated time in microseconds.
pub type Micros = u64;

/// Length of one control epoch.
pub const EPOCH_US: Micros = 5_000;

pub const US_PER_SEC: Micros = 1_000_000;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SimClock {
    now: Micros,
}

impl SimClock {
    pub fn now(&self) -> Micros {
        self.now
    }

    /// Moves the clock forward. Never moves it backward.
    pub fn advance_to(&mut self, t: Micros) {
        debug_assert!(t >= self.now, "clock moved backward");
        self.now = self.now.max(t);
    }
}

struct Scheduled<E> {
    at: Micros,
    seq: u64,
    event: E,
}

impl<E> PartialEq for Scheduled<E> {
    fn eq(&self, other: &Self) -> bool {
        self.at == other.at && self.seq == other.seq
    }
}

impl<E> Eq for Scheduled<E> {}

impl<E> PartialOrd for Scheduled<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Scheduled<E> {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other.at.cmp(&self.at).then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Timestamp-ordered event queue; equal timestamps fire in insertion order.
pub struct EventQueue<E> {
    clock: SimClock,
    heap: BinaryHeap<Scheduled<E>>,
    next_seq: u64,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        Self {
            clock: SimClock::default(),
            heap: BinaryHeap::new(),
            next_seq: 0,
        }
    }

    pub fn now(&self) -> Micros {
        self.clock.now()
    }

    pub fn schedule(&mut self, at: Micros, event: E) -> Result<(), SimError> {
        if at < self.clock.now() {
            return Err(SimError::PastEvent { at, now: self.clock.now() });
        }
        self.heap.push(Scheduled { at, seq: self.next_seq, event });
        self.next_seq += 1;
        Ok(())
    }

    pub fn peek_time(&self) -> Option<Micros> {
        self.heap.peek().map(|s| s.at)
    }

    /// Pops the next event if it fires strictly before `limit`, advancing the clock to it.
    pub fn pop_before(&mut self, limit: Micros) -> Option<(Micros, E)> {
        if self.peek_time()? >= limit {
            return None;
        }
        let s = self.heap.pop()?;
        self.clock.advance_to(s.at);
        Some((s.at, s.event))
    }

    pub fn pop(&mut self) -> Option<(Micros, E)> {
        let s = self.heap.pop()?;
        self.clock.advance_to(s.at);
        Some((s.at, s.event))
    }

    /// Advances the clock with no event (e.g. to an epoch boundary).
    pub fn advance_to(&mut self, t: Micros) {
        self.clock.advance_to(t);
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

/// Purpose label of an RNG stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StreamId {
    Traffic = 1,
    Channel = 2,
    Backoff = 3,
    Jammer = 4,
    Exploration = 5,
    Mobility = 6,
    Baseline = 7,
}

/// A seeded random stream: same `(seed, stream)` reproduces the same draws.
pub fn rng_stream(seed: u64, stream: StreamId) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Sub-stream for an indexed entity (e.g. jammer #1) within a purpose.
pub fn rng_substream(seed: u64, stream: StreamId, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((stream as u64) << 32) | (index + 1));
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Bounds {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.min_x && x <= self.max_x && y >= self.min_y && y <= self.max_y
    }

    pub fn centered(x: f64, y: f64, side: f64) -> Self {
        let h = side / 2.0;
        Self { min_x: x - h, min_y: y - h, max_x: x + h, max_y: y + h }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Mobility {
    Constant,
    RandomWalk { step_m: f64, interval_us: Micros, bounds: Bounds },
}

#[derive(Debug, Clone)]
pub struct NodePosition {
    pub node_id: usize,
    pub x: f64,
    pub y: f64,
    pub mobility: Mobility,
    next_move: Micros,
}

impl NodePosition {
    pub fn new(node_id: usize, x: f64, y: f64, mobility: Mobility) -> Self {
        let next_move = match mobility {
            Mobility::Constant => Micros::MAX,
            Mobility::RandomWalk { interval_us, .. } => interval_us,
        };
        Self { node_id, x, y, mobility, next_move }
    }

    fn advance<R: Rng>(&mut self, t: Micros, rng: &mut R) {
        let Mobility::RandomWalk { step_m, interval_us, bounds } = self.mobility else {
            return;
        };
        while self.next_move <= t {
            let theta = rng.gen_range(0.0..std::f64::consts::TAU);
            let nx = self.x + step_m * theta.cos();
            let ny = self.y + step_m * theta.sin();
            // reflect off the walls
            self.x = reflect(nx, bounds.min_x, bounds.max_x);
            self.y = reflect(ny, bounds.min_y, bounds.max_y);
            self.next_move += interval_us.max(1);
        }
    }
}

fn reflect(v: f64, lo: f64, hi: f64) -> f64 {
    if v < lo {
        (2.0 * lo - v).min(hi)
    } else if v > hi {
        (2.0 * hi - v).max(lo)
    } else {
        v
    }
}

/// All nodes of one run. Random-walk nodes are advanced lazily on query.
pub struct NodeRegistry {
    nodes: Vec<NodePosition>,
    rng: ChaCha8Rng,
}

impl NodeRegistry {
    pub fn new(seed: u64) -> Self {
        Self { nodes: Vec::new(), rng: rng_stream(seed, StreamId::Mobility) }
    }

    pub fn add(&mut self, x: f64, y: f64, mobility: Mobility) -> usize {
        let id = self.nodes.len();
        self.nodes.push(NodePosition::new(id, x, y, mobility));
        id
    }

    pub fn position(&mut self, id: usize, t: Micros) -> Result<(f64, f64), SimError> {
        let rng = &mut self.rng;
        let node = self.nodes.get_mut(id).ok_or(SimError::UnknownNode(id))?;
        node.advance(t, rng);
        Ok((node.x, node.y))
    }

    /// Euclidean distance between two nodes at time `t`.
    pub fn distance(&mut self, a: usize, b: usize, t: Micros) -> Result<f64, SimError> {
        let (ax, ay) = self.position(a, t)?;
        let (bx, by) = self.position(b, t)?;
        Ok((ax - bx).hypot(ay - by))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_delay_event_fires_first() {
        let mut q = EventQueue::new();
        q.schedule(100, "later").unwrap();
        q.schedule(0, "now").unwrap();
        assert_eq!(q.pop(), Some((0, "now")));
        assert_eq!(q.pop(), Some((100, "later")));
    }

    #[test]
    fn ties_fire_in_insertion_order() {
        let mut q = EventQueue::new();
        for i in 0..10 {
            q.schedule(50, i).unwrap();
        }
        let order: Vec<_> = std::iter::from_fn(|| q.pop().map(|(_, e)| e)).collect();
        assert_eq!(order, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn past_event_rejected() {
        let mut q = EventQueue::new();
        q.schedule(10_000, ()).unwrap();
        q.pop();
        let err = q.schedule(9_999, ()).unwrap_err();
        assert!(err.to_string().contains("past event"));
    }

    #[test]
    fn pop_before_respects_limit() {
        let mut q = EventQueue::new();
        q.schedule(4_999, 'a').unwrap();
        q.schedule(5_000, 'b').unwrap();
        assert_eq!(q.pop_before(5_000), Some((4_999, 'a')));
        assert_eq!(q.pop_before(5_000), None);
        q.advance_to(5_000);
        assert_eq!(q.now(), 5_000);
    }

    #[test]
    fn distances() {
        let mut reg = NodeRegistry::new(1);
        let a = reg.add(0.0, 0.0, Mobility::Constant);
        let b = reg.add(10.0, 0.0, Mobility::Constant);
        let c = reg.add(3.0, 4.0, Mobility::Constant);
        assert_eq!(reg.distance(a, b, 0).unwrap(), 10.0);
        assert_eq!(reg.distance(a, c, 0).unwrap(), 5.0);
        assert_eq!(reg.distance(a, a, 0).unwrap(), 0.0);
        assert!(matches!(reg.distance(a, 9, 0), Err(SimError::UnknownNode(9))));
    }

    #[test]
    fn constant_mobility_never_moves() {
        let mut reg = NodeRegistry::new(3);
        let a = reg.add(1.5, -2.0, Mobility::Constant);
        for t in [0, 1_000_000, 50_000_000] {
            assert_eq!(reg.position(a, t).unwrap(), (1.5, -2.0));
        }
    }

    #[test]
    fn random_walk_stays_in_bounds() {
        let bounds = Bounds::centered(10.0, 0.0, 50.0);
        let mut reg = NodeRegistry::new(11);
        let a = reg.add(10.0, 0.0, Mobility::RandomWalk { step_m: 4.0, interval_us: 1_000, bounds });
        let mut moved = false;
        for k in 0..5_000u64 {
            let (x, y) = reg.position(a, k * 1_000).unwrap();
            assert!(bounds.contains(x, y), "({x}, {y})");
            moved |= (x, y) != (10.0, 0.0);
        }
        assert!(moved);
    }

    #[test]
    fn streams_reproduce_and_differ() {
        let a: Vec<u64> = rng_stream(42, StreamId::Traffic).sample_iter(rand::distributions::Standard).take(8).collect();
        let b: Vec<u64> = rng_stream(42, StreamId::Traffic).sample_iter(rand::distributions::Standard).take(8).collect();
        let c: Vec<u64> = rng_stream(42, StreamId::Backoff).sample_iter(rand::distributions::Standard).take(8).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let j0: u64 = rng_substream(42, StreamId::Jammer, 0).gen();
        let j1: u64 = rng_substream(42, StreamId::Jammer, 1).gen();
        assert_ne!(j0, j1);
    }
}
