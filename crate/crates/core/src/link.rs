//! One transmitter, one receiver, up to two jammers: the event-driven link
//! that the environment advances one 5 ms epoch at a time.
//!
//! Arrivals, DCF access, A-MPDU transmission and block-ACK settlement are
//! events on the shared queue. Jammer bursts are precomputed, so medium
//! busy periods seen by the transmitter's CCA are known intervals and the
//! backoff countdown is resolved against them directly instead of slot by
//! slot.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{Battery, EnergyMeter, RadioEnergyParams, RadioState};
use crate::env::ControlAction;
use crate::jammer::{JammerConfig, JammerSchedule};
use crate::mac::{
    ContentionState, PacketQueue, TrafficSource, TxStats, DEFAULT_MAX_DELAY_US, DEFAULT_QUEUE_CAPACITY,
    DEFAULT_RETRY_LIMIT,
};
use crate::phy::{
    self, rx_power_dbm, sinr_db, ChannelParams, FrameSpec, McsTable, NakagamiFading, PhyTiming, DEFAULT_PAYLOAD_BYTES,
    MAX_AGGREGATION,
};
use crate::sim::{rng_stream, Bounds, EventQueue, Micros, Mobility, NodeRegistry, StreamId, EPOCH_US, US_PER_SEC};

/// Signal-field bits protected by the preamble; a jammed preamble loses the whole frame.
const PREAMBLE_BITS: u64 = 24 * 8;

/// Receiver mobility as configured (positions are derived from the distance).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub enum RxMobility {
    #[default]
    Constant,
    RandomWalk { step_m: f64, interval_us: Micros, area_m: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkConfig {
    pub channel: ChannelParams,
    pub timing: PhyTiming,
    pub energy: RadioEnergyParams,
    pub battery_j: f64,
    pub queue_capacity: usize,
    pub max_delay_us: Micros,
    pub payload_bytes: u32,
    pub max_aggregation: u32,
    pub retry_limit: u8,
    pub arrival_rate_pps: f64,
    /// Transmitter-receiver distance, meters.
    pub distance_m: f64,
    pub rx_mobility: RxMobility,
    pub jammers: Vec<JammerConfig>,
    pub sim_time_us: Micros,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            channel: ChannelParams::default(),
            timing: PhyTiming::default(),
            energy: RadioEnergyParams::default(),
            battery_j: 5.0,
            queue_capacity: DEFAULT_QUEUE_CAPACITY,
            max_delay_us: DEFAULT_MAX_DELAY_US,
            payload_bytes: DEFAULT_PAYLOAD_BYTES,
            max_aggregation: MAX_AGGREGATION,
            retry_limit: DEFAULT_RETRY_LIMIT,
            arrival_rate_pps: 60_000.0,
            distance_m: 10.0,
            rx_mobility: RxMobility::Constant,
            jammers: vec![JammerConfig::nth(0)],
            sim_time_us: 10 * US_PER_SEC,
        }
    }
}

/// Picks the (power, MCS) for each frame and hears back how it went.
pub trait RateController {
    fn choose(&mut self, now: Micros) -> ControlAction;

    fn feedback(&mut self, _action: ControlAction, _attempted: u32, _acked: u32, _now: Micros) {}
}

/// Uses one action for every frame.
#[derive(Debug, Clone, Copy)]
pub struct FixedController(pub ControlAction);

impl RateController for FixedController {
    fn choose(&mut self, _now: Micros) -> ControlAction {
        self.0
    }
}

/// Counters for one epoch.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EpochOutcome {
    pub epoch: u64,
    pub start_us: Micros,
    pub end_us: Micros,
    pub arrivals: u64,
    pub delivered: u64,
    pub dropped_overflow: u64,
    pub dropped_expired: u64,
    pub dropped_retry: u64,
    pub aggregates: u64,
    pub energy_j: f64,
    /// Queued plus in-flight packets at the end of the epoch.
    pub queue_len: usize,
    pub last_ack: bool,
    pub cw: u32,
    pub cw_index: usize,
    pub last_backoff: u32,
    pub battery_fraction: f64,
    pub battery_bucket: u8,
    pub depleted: bool,
}

impl EpochOutcome {
    pub fn dropped(&self) -> u64 {
        self.dropped_overflow + self.dropped_expired + self.dropped_retry
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MacEvent {
    /// Packets may be waiting; start contention if idle.
    Wake,
    /// DIFS + backoff completed.
    AccessGranted,
    TxEnd,
    /// Block-ACK exchange finished; contend again.
    ExchangeEnd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MacPhase {
    Idle,
    Contending,
    Transmitting,
    AwaitingAck,
    Dormant,
}

struct InFlight {
    action: ControlAction,
    start: Micros,
    packets: Vec<crate::mac::Packet>,
}

pub struct LinkSim {
    cfg: LinkConfig,
    mcs: McsTable,
    events: EventQueue<MacEvent>,
    nodes: NodeRegistry,
    tx_node: usize,
    rx_node: usize,
    jammer_nodes: Vec<usize>,
    schedules: Vec<JammerSchedule>,
    /// Union of jammer bursts the transmitter senses as busy.
    cca_busy: Vec<(Micros, Micros)>,
    queue: PacketQueue,
    traffic: TrafficSource,
    contention: ContentionState,
    meter: EnergyMeter,
    fading: Option<NakagamiFading>,
    channel_rng: ChaCha8Rng,
    backoff_rng: ChaCha8Rng,
    phase: MacPhase,
    in_flight: Option<InFlight>,
    totals: TxStats,
    epoch: u64,
    current: EpochOutcome,
    wake_pending: bool,
}

impl LinkSim {
    pub fn new(cfg: LinkConfig, seed: u64) -> Self {
        let horizon = cfg.sim_time_us;
        let mut nodes = NodeRegistry::new(seed);
        let tx_node = nodes.add(0.0, 0.0, Mobility::Constant);
        let (rx_x, rx_y) = (cfg.distance_m, 0.0);
        let rx_mob = match cfg.rx_mobility {
            RxMobility::Constant => Mobility::Constant,
            RxMobility::RandomWalk { step_m, interval_us, area_m } => {
                Mobility::RandomWalk { step_m, interval_us, bounds: Bounds::centered(rx_x, rx_y, area_m) }
            }
        };
        let rx_node = nodes.add(rx_x, rx_y, rx_mob);
        let jammer_nodes: Vec<usize> = cfg
            .jammers
            .iter()
            .map(|j| nodes.add(rx_x + j.offset_x, rx_y + j.offset_y, Mobility::Constant))
            .collect();
        let schedules: Vec<JammerSchedule> = cfg
            .jammers
            .iter()
            .enumerate()
            .map(|(i, j)| JammerSchedule::materialize(j, horizon, seed, i as u64))
            .collect();

        let mut sensed = Vec::new();
        for (i, j) in cfg.jammers.iter().enumerate() {
            let d = nodes.distance(tx_node, jammer_nodes[i], 0).expect("registered");
            if rx_power_dbm(j.tx_power_dbm, d, cfg.channel.frequency_hz, None) >= cfg.channel.cca_threshold_dbm {
                sensed.extend_from_slice(schedules[i].bursts());
            }
        }
        let cca_busy = merge_intervals(sensed);

        let mut backoff_rng = rng_stream(seed, StreamId::Backoff);
        let mut contention = ContentionState::default();
        contention.redraw(&mut backoff_rng);

        let fading = cfg.channel.fading.then(|| NakagamiFading::new(cfg.channel.nakagami_m));
        let mut sim = Self {
            mcs: McsTable::new(cfg.channel.min_sinr_db),
            events: EventQueue::new(),
            nodes,
            tx_node,
            rx_node,
            jammer_nodes,
            schedules,
            cca_busy,
            queue: PacketQueue::new(cfg.queue_capacity, cfg.max_delay_us),
            traffic: TrafficSource::new(cfg.arrival_rate_pps, 0),
            contention,
            meter: EnergyMeter::new(cfg.energy, Battery::new(cfg.battery_j), 0),
            fading,
            channel_rng: rng_stream(seed, StreamId::Channel),
            backoff_rng,
            phase: MacPhase::Idle,
            in_flight: None,
            totals: TxStats::default(),
            epoch: 0,
            current: EpochOutcome::default(),
            wake_pending: false,
            cfg,
        };
        sim.arm_wake();
        sim
    }

    pub fn config(&self) -> &LinkConfig {
        &self.cfg
    }

    pub fn mcs_table(&self) -> &McsTable {
        &self.mcs
    }

    pub fn now(&self) -> Micros {
        self.events.now()
    }

    pub fn totals(&self) -> &TxStats {
        &self.totals
    }

    pub fn queue(&self) -> &PacketQueue {
        &self.queue
    }

    pub fn contention(&self) -> &ContentionState {
        &self.contention
    }

    pub fn meter(&self) -> &EnergyMeter {
        &self.meter
    }

    pub fn battery(&self) -> &Battery {
        self.meter.battery()
    }

    pub fn schedules(&self) -> &[JammerSchedule] {
        &self.schedules
    }

    pub fn epochs_run(&self) -> u64 {
        self.epoch
    }

    /// Current transmitter-receiver distance.
    pub fn distance(&mut self) -> f64 {
        let t = self.events.now();
        self.nodes.distance(self.tx_node, self.rx_node, t).expect("registered")
    }

    /// Received power of every jammer active at `t`, at the receiver.
    pub fn interference_at(&mut self, t: Micros) -> Vec<f64> {
        let mut out = Vec::new();
        for i in 0..self.schedules.len() {
            if self.schedules[i].is_active(t) {
                out.push(self.jammer_rx_power(i, t));
            }
        }
        out
    }

    fn jammer_rx_power(&mut self, i: usize, t: Micros) -> f64 {
        let d = self.nodes.distance(self.jammer_nodes[i], self.rx_node, t).expect("registered");
        rx_power_dbm(self.cfg.jammers[i].tx_power_dbm, d, self.cfg.channel.frequency_hz, None)
    }

    /// Advances exactly one epoch, driving frames with `ctrl`.
    pub fn run_epoch(&mut self, ctrl: &mut dyn RateController) -> EpochOutcome {
        let start = self.events.now();
        let end = start + EPOCH_US;
        self.current = EpochOutcome { epoch: self.epoch, start_us: start, end_us: end, ..Default::default() };
        let energy_before = self.meter.consumed();

        if self.battery().is_depleted() {
            self.go_dormant();
        }

        while let Some((t, ev)) = self.events.pop_before(end) {
            self.handle(t, ev, ctrl);
        }
        self.events.advance_to(end);
        self.pull_arrivals(end);
        self.evict(end);
        self.charge_until(end);
        if self.battery().is_depleted() {
            self.go_dormant();
        }

        let out = &mut self.current;
        out.energy_j = self.meter.consumed() - energy_before;
        out.queue_len = self.queue.occupancy();
        out.last_ack = self.totals.last_ack;
        out.cw = self.contention.cw();
        out.cw_index = self.contention.cw_index();
        out.last_backoff = self.contention.last_draw;
        out.battery_fraction = self.meter.battery().fraction();
        out.battery_bucket = self.meter.battery().level_bucket();
        out.depleted = self.meter.battery().is_depleted();
        self.epoch += 1;
        self.current
    }

    fn handle(&mut self, t: Micros, ev: MacEvent, ctrl: &mut dyn RateController) {
        if self.phase == MacPhase::Dormant {
            return;
        }
        match ev {
            MacEvent::Wake => {
                self.wake_pending = false;
                if self.phase == MacPhase::Idle {
                    self.pull_arrivals(t + 1);
                    self.evict(t);
                    if self.queue.is_empty() {
                        self.arm_wake();
                    } else {
                        self.begin_contention(t);
                    }
                }
            }
            MacEvent::AccessGranted => self.start_tx(t, ctrl),
            MacEvent::TxEnd => self.finish_tx(t, ctrl),
            MacEvent::ExchangeEnd => {
                self.charge_until(t);
                self.set_radio(RadioState::Idle, t);
                self.phase = MacPhase::Idle;
                self.pull_arrivals(t + 1);
                self.evict(t);
                if self.queue.is_empty() {
                    self.arm_wake();
                } else {
                    self.begin_contention(t);
                }
            }
        }
    }

    fn arm_wake(&mut self) {
        if self.wake_pending || self.phase == MacPhase::Dormant {
            return;
        }
        if let Some(next) = self.traffic.next_arrival() {
            let at = next.max(self.events.now());
            self.events.schedule(at, MacEvent::Wake).expect("future");
            self.wake_pending = true;
        }
    }

    fn begin_contention(&mut self, t: Micros) {
        self.phase = MacPhase::Contending;
        let done = self.access_time(t, self.contention.backoff_remaining);
        self.events.schedule(done, MacEvent::AccessGranted).expect("future");
    }

    /// When DIFS plus `slots` idle slots complete, starting at `t`, freezing
    /// the countdown during sensed jammer bursts.
    fn access_time(&self, t: Micros, slots: u32) -> Micros {
        let difs = self.cfg.timing.difs_us;
        let slot = self.cfg.timing.slot_us;
        let mut now = t;
        let mut left = slots as Micros;
        let mut i = self.cca_busy.partition_point(|&(_, e)| e <= now);
        loop {
            if let Some(&(s, e)) = self.cca_busy.get(i) {
                if s <= now {
                    now = e;
                    i += 1;
                    continue;
                }
                let need = difs + left * slot;
                if now + need <= s {
                    return now + need;
                }
                let idle = s - now;
                if idle > difs {
                    left -= ((idle - difs) / slot).min(left);
                }
                now = e;
                i += 1;
            } else {
                return now + difs + left * slot;
            }
        }
    }

    fn start_tx(&mut self, t: Micros, ctrl: &mut dyn RateController) {
        self.pull_arrivals(t + 1);
        self.evict(t);
        if self.battery().is_depleted() {
            self.go_dormant();
            return;
        }
        if self.queue.is_empty() {
            self.phase = MacPhase::Idle;
            self.arm_wake();
            return;
        }
        let action = ctrl.choose(t);
        let packets = self.queue.take_batch(self.cfg.max_aggregation as usize);
        let frame = self.frame(action, packets.len() as u32);
        let airtime = phy::airtime_us(&self.mcs, &self.cfg.timing, &frame);
        self.charge_until(t);
        self.set_radio(RadioState::Tx { power_dbm: action.power_dbm() }, t);
        self.phase = MacPhase::Transmitting;
        self.in_flight = Some(InFlight { action, start: t, packets });
        self.events.schedule(t + airtime, MacEvent::TxEnd).expect("future");
    }

    fn frame(&self, action: ControlAction, n: u32) -> FrameSpec {
        FrameSpec {
            mpdu_payload: self.cfg.payload_bytes,
            n_aggregated: n,
            mcs: action.mcs(),
            tx_power_dbm: action.power_dbm() as f64,
        }
    }

    fn finish_tx(&mut self, t: Micros, ctrl: &mut dyn RateController) {
        let InFlight { action, start, packets } = self.in_flight.take().expect("frame in flight");
        self.charge_until(t);
        let sent = packets.len();
        let acked_mask = self.receive(action, start, sent);
        let acked = acked_mask.iter().filter(|&&ok| ok).count();

        let mut failed = Vec::new();
        for (mut p, ok) in packets.into_iter().zip(acked_mask) {
            if ok {
                continue;
            }
            p.retries += 1;
            self.totals.retransmissions += 1;
            if p.retries > self.cfg.retry_limit {
                self.totals.dropped_retry += 1;
                self.current.dropped_retry += 1;
            } else {
                failed.push(p);
            }
        }
        self.queue.complete_batch(sent, failed);
        self.totals.delivered += acked as u64;
        self.current.delivered += acked as u64;
        self.totals.aggregates += 1;
        self.current.aggregates += 1;
        self.totals.last_ack = acked > 0;
        if acked > 0 {
            self.contention.on_success();
        } else {
            self.contention.on_failure();
        }
        self.contention.redraw(&mut self.backoff_rng);
        ctrl.feedback(action, sent as u32, acked as u32, t);

        // Receiver is on from end of frame until the block ACK (or its timeout).
        let timing = self.cfg.timing;
        self.set_radio(RadioState::Rx, t);
        self.phase = MacPhase::AwaitingAck;
        self.events
            .schedule(t + timing.sifs_us + timing.block_ack_us, MacEvent::ExchangeEnd)
            .expect("future");
    }

    /// Per-MPDU reception outcome of an aggregate that started at `start`.
    fn receive(&mut self, action: ControlAction, start: Micros, n: usize) -> Vec<bool> {
        let distance = self.nodes.distance(self.tx_node, self.rx_node, start).expect("registered");
        let fading = self.fading.as_ref().map(|f| f.sample(&mut self.channel_rng));
        let signal = rx_power_dbm(action.power_dbm() as f64, distance, self.cfg.channel.frequency_hz, fading);
        let noise = self.cfg.channel.noise_floor_dbm();
        let width = self.cfg.channel.per_width_db;
        let timing = self.cfg.timing;
        let frame = self.frame(action, 1);
        let mpdu_bits = frame.mpdu_bits(&timing);
        let rate = self.mcs.phy_rate_mbps(action.mcs());
        let jam_power: Vec<f64> = (0..self.schedules.len()).map(|i| self.jammer_rx_power(i, start)).collect();

        let interferers = |from: Micros, to: Micros, schedules: &[JammerSchedule]| -> Vec<f64> {
            schedules
                .iter()
                .zip(&jam_power)
                .filter(|(s, _)| s.overlaps(from, to))
                .map(|(_, &p)| p)
                .collect()
        };

        let pre_end = start + timing.preamble_us;
        let pre_sinr = sinr_db(signal, &interferers(start, pre_end, &self.schedules), noise);
        let pre_err = phy::per(&self.mcs, width, pre_sinr, 0, PREAMBLE_BITS);
        if self.channel_rng.gen::<f64>() < pre_err {
            return vec![false; n];
        }

        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            let from = pre_end + (k as f64 * mpdu_bits as f64 / rate).floor() as Micros;
            let to = pre_end + ((k + 1) as f64 * mpdu_bits as f64 / rate).ceil() as Micros;
            let sinr = sinr_db(signal, &interferers(from, to, &self.schedules), noise);
            let p = phy::per(&self.mcs, width, sinr, action.mcs(), mpdu_bits);
            out.push(self.channel_rng.gen::<f64>() >= p);
        }
        out
    }

    fn pull_arrivals(&mut self, until: Micros) {
        let tally = self.queue.enqueue_arrivals(&mut self.traffic, until);
        self.totals.arrivals += tally.arrived;
        self.totals.dropped_overflow += tally.dropped;
        self.current.arrivals += tally.arrived;
        self.current.dropped_overflow += tally.dropped;
    }

    fn evict(&mut self, now: Micros) {
        let n = self.queue.evict_expired(now);
        self.totals.dropped_expired += n;
        self.current.dropped_expired += n;
    }

    fn set_radio(&mut self, state: RadioState, t: Micros) {
        self.meter.transition(state, t).expect("tx power in action range");
    }

    /// Charges the battery up to `t`, splitting idle time into idle and
    /// CCA-busy periods.
    fn charge_until(&mut self, t: Micros) {
        let from = self.meter.since();
        if t <= from {
            return;
        }
        let state = self.meter.state();
        if !matches!(state, RadioState::Idle | RadioState::Busy) {
            self.meter.settle(t).expect("tx power in action range");
            return;
        }
        let mut cursor = from;
        let mut i = self.cca_busy.partition_point(|&(_, e)| e <= cursor);
        while cursor < t {
            let (next_state, until) = match self.cca_busy.get(i) {
                Some(&(s, e)) if s <= cursor => (RadioState::Busy, e.min(t)),
                Some(&(s, _)) => (RadioState::Idle, s.min(t)),
                None => (RadioState::Idle, t),
            };
            self.meter.transition(next_state, cursor).expect("idle/busy");
            self.meter.settle(until).expect("idle/busy");
            if next_state == RadioState::Busy {
                i += 1;
            }
            cursor = until;
        }
        self.meter.transition(RadioState::Idle, t).expect("idle");
    }

    fn go_dormant(&mut self) {
        if self.phase == MacPhase::Dormant {
            return;
        }
        // a frame on the air is abandoned and its MPDUs stay queued
        if let Some(f) = self.in_flight.take() {
            let n = f.packets.len();
            self.queue.complete_batch(n, f.packets);
        }
        self.phase = MacPhase::Dormant;
    }
}

fn merge_intervals(mut v: Vec<(Micros, Micros)>) -> Vec<(Micros, Micros)> {
    v.sort_unstable();
    let mut out: Vec<(Micros, Micros)> = Vec::with_capacity(v.len());
    for (s, e) in v {
        match out.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => out.push((s, e)),
        }
    }
    out
}
