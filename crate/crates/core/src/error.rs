use std::path::PathBuf;

use thiserror::Error;

use crate::sim::Micros;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("past event: scheduled at {at} us but clock is at {now} us")]
    PastEvent { at: Micros, now: Micros },
    #[error("unknown node id {0}")]
    UnknownNode(usize),
}

#[derive(Debug, Error, PartialEq)]
pub enum EnergyError {
    #[error("transmit power {0} dBm outside action range 1..=10")]
    PowerOutOfRange(f64),
}

#[derive(Debug, Error, PartialEq)]
pub enum EnvError {
    #[error("episode already terminated; call reset first")]
    Terminated,
    #[error("backoff {0} outside 0..=1023")]
    BackoffOutOfRange(u32),
    #[error("invalid action index {0}")]
    InvalidAction(usize),
    #[error("invalid state index {0}")]
    InvalidState(u32),
    #[error(transparent)]
    Energy(#[from] EnergyError),
}

#[derive(Debug, Error)]
pub enum QTableError {
    #[error("q-table i/o on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("not a q-table file (bad magic bytes)")]
    BadMagic,
    #[error("q-table format version {found} not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("q-table truncated: expected {expected} records, file holds {found}")]
    Truncated { expected: u64, found: u64 },
    #[error("q-table record {index} out of range (state {state}, action {action})")]
    BadRecord { index: u64, state: u32, action: u8 },
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config syntax: {0}")]
    Syntax(String),
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("config key `{key}`: {msg}")]
    InvalidValue { key: String, msg: String },
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    QTable(#[from] QTableError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("writing {path}: {msg}")]
    Output { path: PathBuf, msg: String },
    #[error("reading {path}: {msg}")]
    Input { path: PathBuf, msg: String },
    #[error("unknown figure id `{0}`")]
    UnknownFigure(String),
    #[error("no data")]
    NoData,
    #[error("{0}")]
    Invalid(String),
}
