use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::env::ACTION_COUNT;
use crate::error::QTableError;

pub const QTABLE_MAGIC: [u8; 4] = *b"LRQT";
pub const QTABLE_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8;
const RECORD_LEN: usize = 4 + 1 + 8;

/// Sparse state-action values; unvisited pairs read as 0.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QTable {
    entries: HashMap<(u32, u8), f64>,
}

impl QTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, state: u32, action: u8) -> f64 {
        self.entries.get(&(state, action)).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, state: u32, action: u8, value: f64) {
        self.entries.insert((state, action), value);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of distinct states with at least one stored value.
    pub fn visited_states(&self) -> usize {
        let mut states: Vec<u32> = self.entries.keys().map(|&(s, _)| s).collect();
        states.sort_unstable();
        states.dedup();
        states.len()
    }

    /// Greedy action among `0..n_actions`; ties go to the lowest index.
    pub fn best_action(&self, state: u32, n_actions: usize) -> u8 {
        let mut best = 0u8;
        let mut best_q = self.get(state, 0);
        for a in 1..n_actions as u8 {
            let q = self.get(state, a);
            if q > best_q {
                best = a;
                best_q = q;
            }
        }
        best
    }

    pub fn max_value(&self, state: u32, n_actions: usize) -> f64 {
        self.get(state, self.best_action(state, n_actions))
    }

    /// Entries sorted by (state, action).
    pub fn sorted_entries(&self) -> Vec<((u32, u8), f64)> {
        let mut v: Vec<_> = self.entries.iter().map(|(&k, &q)| (k, q)).collect();
        v.sort_unstable_by_key(|&(k, _)| k);
        v
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let entries = self.sorted_entries();
        let mut buf = Vec::with_capacity(HEADER_LEN + RECORD_LEN * entries.len());
        buf.extend_from_slice(&QTABLE_MAGIC);
        buf.extend_from_slice(&QTABLE_VERSION.to_le_bytes());
        buf.extend_from_slice(&(entries.len() as u64).to_le_bytes());
        for ((s, a), q) in entries {
            buf.extend_from_slice(&s.to_le_bytes());
            buf.push(a);
            buf.extend_from_slice(&q.to_le_bytes());
        }
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, QTableError> {
        if bytes.len() < 4 || bytes[..4] != QTABLE_MAGIC {
            return Err(QTableError::BadMagic);
        }
        if bytes.len() < HEADER_LEN {
            return Err(QTableError::Truncated { expected: 0, found: 0 });
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != QTABLE_VERSION {
            return Err(QTableError::VersionMismatch { found: version, expected: QTABLE_VERSION });
        }
        let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        let body = &bytes[HEADER_LEN..];
        let found = (body.len() / RECORD_LEN) as u64;
        if found != count || !body.len().is_multiple_of(RECORD_LEN) {
            return Err(QTableError::Truncated { expected: count, found });
        }
        let mut table = QTable::new();
        for (i, rec) in body.chunks_exact(RECORD_LEN).enumerate() {
            let state = u32::from_le_bytes(rec[0..4].try_into().unwrap());
            let action = rec[4];
            let q = f64::from_le_bytes(rec[5..13].try_into().unwrap());
            if action as usize >= ACTION_COUNT || !q.is_finite() {
                return Err(QTableError::BadRecord { index: i as u64, state, action });
            }
            table.set(state, action, q);
        }
        Ok(table)
    }

    pub fn save(&self, path: &Path) -> Result<(), QTableError> {
        let io = |source| QTableError::Io { path: path.to_path_buf(), source };
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        w.write_all(&self.to_bytes()).map_err(io)?;
        w.flush().map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self, QTableError> {
        let io = |source| QTableError::Io { path: path.to_path_buf(), source };
        let mut bytes = Vec::new();
        BufReader::new(File::open(path).map_err(io)?).read_to_end(&mut bytes).map_err(io)?;
        Self::from_bytes(&bytes)
    }
}
