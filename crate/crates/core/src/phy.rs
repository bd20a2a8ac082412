//! VHT physical layer: MCS rate table, Friis path loss with Nakagami fading,
//! SINR, a logistic packet-error model and frame airtime.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Thermal noise density at 290 K, dBm/Hz.
pub const THERMAL_NOISE_DBM_HZ: f64 = -174.0;

/// Distances below this are clamped before evaluating Friis.
pub const MIN_DISTANCE_M: f64 = 0.1;

/// Number of VHT MCS indices with a single spatial stream.
pub const MCS_COUNT: usize = 10;

/// Default MPDU payload (UDP datagram) in bytes.
pub const DEFAULT_PAYLOAD_BYTES: u32 = 1472;

/// Maximum MPDUs per A-MPDU.
pub const MAX_AGGREGATION: u32 = 64;

/// Bit-error probability at `min_sinr`. Anchors the logistic so a 1500 B
/// frame sees roughly 10% PER exactly at the MCS threshold.
const BER_AT_THRESHOLD: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Modulation {
    Bpsk,
    Qpsk,
    Qam16,
    Qam64,
    Qam256,
}

impl Modulation {
    pub fn bits_per_symbol(self) -> u32 {
        match self {
            Modulation::Bpsk => 1,
            Modulation::Qpsk => 2,
            Modulation::Qam16 => 4,
            Modulation::Qam64 => 6,
            Modulation::Qam256 => 8,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Modulation::Bpsk => "BPSK",
            Modulation::Qpsk => "QPSK",
            Modulation::Qam16 => "16-QAM",
            Modulation::Qam64 => "64-QAM",
            Modulation::Qam256 => "256-QAM",
        }
    }
}

/// One row of the VHT rate table (160 MHz, 1 spatial stream, 800 ns GI).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McsEntry {
    pub index: u8,
    pub modulation: Modulation,
    /// Coding rate as (numerator, denominator).
    pub coding_rate: (u32, u32),
    pub phy_rate_mbps: f64,
    pub min_sinr_db: f64,
}

/// Data subcarriers of a 160 MHz VHT channel.
pub const DATA_SUBCARRIERS_160: u32 = 468;
/// OFDM symbol duration with 800 ns guard interval, µs.
pub const SYMBOL_US: f64 = 4.0;

const MCS_SHAPE: [(Modulation, (u32, u32)); MCS_COUNT] = [
    (Modulation::Bpsk, (1, 2)),
    (Modulation::Qpsk, (1, 2)),
    (Modulation::Qpsk, (3, 4)),
    (Modulation::Qam16, (1, 2)),
    (Modulation::Qam16, (3, 4)),
    (Modulation::Qam64, (2, 3)),
    (Modulation::Qam64, (3, 4)),
    (Modulation::Qam64, (5, 6)),
    (Modulation::Qam256, (3, 4)),
    (Modulation::Qam256, (5, 6)),
];

/// Default per-MCS SINR thresholds in dB.
pub const DEFAULT_MIN_SINR_DB: [f64; MCS_COUNT] =
    [5.0, 8.0, 11.0, 14.0, 18.0, 22.0, 24.0, 26.0, 30.0, 32.0];

/// The ten-entry VHT rate table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McsTable {
    entries: [McsEntry; MCS_COUNT],
}

impl McsTable {
    pub fn new(min_sinr_db: [f64; MCS_COUNT]) -> Self {
        let entries = std::array::from_fn(|i| {
            let (modulation, (num, den)) = MCS_SHAPE[i];
            let bits = DATA_SUBCARRIERS_160 * modulation.bits_per_symbol() * num;
            McsEntry {
                index: i as u8,
                modulation,
                coding_rate: (num, den),
                phy_rate_mbps: bits as f64 / den as f64 / SYMBOL_US,
                min_sinr_db: min_sinr_db[i],
            }
        });
        Self { entries }
    }

    pub fn get(&self, mcs: u8) -> &McsEntry {
        &self.entries[mcs as usize]
    }

    pub fn phy_rate_mbps(&self, mcs: u8) -> f64 {
        self.entries[mcs as usize].phy_rate_mbps
    }

    pub fn min_sinr_db(&self, mcs: u8) -> f64 {
        self.entries[mcs as usize].min_sinr_db
    }

    pub fn entries(&self) -> &[McsEntry] {
        &self.entries
    }
}

impl Default for McsTable {
    fn default() -> Self {
        Self::new(DEFAULT_MIN_SINR_DB)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub frequency_hz: f64,
    pub bandwidth_hz: f64,
    pub nakagami_m: f64,
    pub fading: bool,
    pub noise_figure_db: f64,
    pub cca_threshold_dbm: f64,
    /// Width of the logistic BER transition, dB.
    pub per_width_db: f64,
    pub min_sinr_db: [f64; MCS_COUNT],
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            frequency_hz: 5.2e9,
            bandwidth_hz: 160e6,
            nakagami_m: 1.5,
            fading: true,
            noise_figure_db: 7.0,
            cca_threshold_dbm: -82.0,
            per_width_db: 1.5,
            min_sinr_db: DEFAULT_MIN_SINR_DB,
        }
    }
}

impl ChannelParams {
    pub fn noise_floor_dbm(&self) -> f64 {
        THERMAL_NOISE_DBM_HZ + 10.0 * self.bandwidth_hz.log10() + self.noise_figure_db
    }
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

/// Free-space path loss in dB. Distance is clamped to [`MIN_DISTANCE_M`].
pub fn friis_loss_db(distance_m: f64, frequency_hz: f64) -> f64 {
    let d = distance_m.max(MIN_DISTANCE_M);
    20.0 * (4.0 * std::f64::consts::PI * d * frequency_hz / SPEED_OF_LIGHT).log10()
}

/// Received power: transmit power minus Friis loss, plus an optional fading
/// power factor (linear, mean 1).
pub fn rx_power_dbm(tx_power_dbm: f64, distance_m: f64, frequency_hz: f64, fading: Option<f64>) -> f64 {
    let base = tx_power_dbm - friis_loss_db(distance_m, frequency_hz);
    match fading {
        Some(factor) => base + 10.0 * factor.log10(),
        None => base,
    }
}

/// Nakagami-m power fading: the power gain is Gamma(m, 1/m) distributed with unit mean.
#[derive(Debug, Clone)]
pub struct NakagamiFading {
    gamma: Gamma<f64>,
}

impl NakagamiFading {
    pub fn new(m: f64) -> Self {
        assert!(m >= 0.5, "nakagami m must be >= 0.5");
        Self {
            gamma: Gamma::new(m, 1.0 / m).expect("valid gamma parameters"),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.gamma.sample(rng)
    }
}

/// SINR in dB with interferers summed in the mW domain.
pub fn sinr_db(signal_dbm: f64, interferers_dbm: &[f64], noise_floor_dbm: f64) -> f64 {
    let interference: f64 = interferers_dbm.iter().map(|&p| dbm_to_mw(p)).sum();
    mw_to_dbm(dbm_to_mw(signal_dbm) / (dbm_to_mw(noise_floor_dbm) + interference))
}

/// Logistic bit-error curve. Saturates at 0.5 far below the threshold and
/// passes through `BER_AT_THRESHOLD` at `min_sinr_db`.
pub fn ber(sinr_db: f64, min_sinr_db: f64, width_db: f64) -> f64 {
    let offset = (0.5 / BER_AT_THRESHOLD - 1.0).ln();
    0.5 / (1.0 + ((sinr_db - min_sinr_db) / width_db + offset).exp())
}

/// Packet error rate: `1 - (1 - BER)^bits`.
pub fn per(table: &McsTable, width_db: f64, sinr_db: f64, mcs: u8, frame_bits: u64) -> f64 {
    let b = ber(sinr_db, table.min_sinr_db(mcs), width_db);
    // ln_1p keeps precision when BER is tiny.
    let p = 1.0 - (frame_bits as f64 * (-b).ln_1p()).exp();
    p.clamp(0.0, 1.0)
}

/// Timing constants of the PHY/MAC exchange, µs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhyTiming {
    pub preamble_us: u64,
    /// MAC header + FCS + A-MPDU delimiter added to each MPDU, bytes.
    pub mpdu_overhead_bytes: u32,
    pub slot_us: u64,
    pub sifs_us: u64,
    pub difs_us: u64,
    /// Duration of the block-ACK response including its preamble.
    pub block_ack_us: u64,
}

impl Default for PhyTiming {
    fn default() -> Self {
        Self {
            preamble_us: 44,
            mpdu_overhead_bytes: 40,
            slot_us: 9,
            sifs_us: 16,
            difs_us: 34,
            block_ack_us: 32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameSpec {
    pub mpdu_payload: u32,
    pub n_aggregated: u32,
    pub mcs: u8,
    pub tx_power_dbm: f64,
}

impl FrameSpec {
    pub fn mpdu_bits(&self, timing: &PhyTiming) -> u64 {
        (self.mpdu_payload + timing.mpdu_overhead_bytes) as u64 * 8
    }

    pub fn total_bits(&self, timing: &PhyTiming) -> u64 {
        self.mpdu_bits(timing) * self.n_aggregated as u64
    }
}

/// Payload portion of the airtime (no preamble), µs, rounded up.
pub fn payload_time_us(table: &McsTable, timing: &PhyTiming, frame: &FrameSpec) -> u64 {
    // Mbps == bits per µs.
    (frame.total_bits(timing) as f64 / table.phy_rate_mbps(frame.mcs)).ceil() as u64
}

/// Frame airtime: preamble + ceil(bits / rate).
pub fn airtime_us(table: &McsTable, timing: &PhyTiming, frame: &FrameSpec) -> u64 {
    timing.preamble_us + payload_time_us(table, timing, frame)
}
