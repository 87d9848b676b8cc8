//! Binary snapshot dumps: for each snapshot, `n` rows of `(p_y, q_y)` as
//! little-endian `f64`, preceded by nothing. The JSON sidecar carries the
//! metadata needed to read them back.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ChainState;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub n: usize,
    pub dt: f64,
    pub times: Vec<f64>,
    pub seed: u64,
    pub kernel_preset: String,
    pub layout: String,
}

impl SnapshotMeta {
    pub fn new(n: usize, dt: f64, times: Vec<f64>, seed: u64, kernel_preset: impl Into<String>) -> Self {
        SnapshotMeta {
            n,
            dt,
            times,
            seed,
            kernel_preset: kernel_preset.into(),
            layout: "snapshot-major, rows (p_y, q_y), f64 little-endian".into(),
        }
    }
}

fn sidecar(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Binary payload and JSON sidecar text for `states`.
pub fn encode_snapshots(states: &[ChainState], meta: &SnapshotMeta) -> Result<(Vec<u8>, String)> {
    if states.len() != meta.times.len() {
        return Err(Error::param("snapshots", "one time per snapshot required"));
    }
    let mut out = Vec::with_capacity(16 * meta.n * states.len());
    for s in states {
        if s.len() != meta.n {
            return Err(Error::param("snapshots", "state length differs from n"));
        }
        for (p, q) in s.p.iter().zip(&s.q) {
            out.extend_from_slice(&p.to_le_bytes());
            out.extend_from_slice(&q.to_le_bytes());
        }
    }
    Ok((out, serde_json::to_string_pretty(meta)?))
}

/// Writes `path` (binary) and `path` with a `.json` extension (sidecar).
pub fn write_snapshots(path: &Path, states: &[ChainState], meta: &SnapshotMeta) -> Result<()> {
    let (bytes, sidecar_text) = encode_snapshots(states, meta)?;
    let mut out = BufWriter::new(fs::File::create(path)?);
    out.write_all(&bytes)?;
    out.flush()?;
    fs::write(sidecar(path), sidecar_text)?;
    Ok(())
}

pub fn read_snapshots(path: &Path) -> Result<(SnapshotMeta, Vec<ChainState>)> {
    let meta: SnapshotMeta = serde_json::from_str(&fs::read_to_string(sidecar(path))?)?;
    let bytes = fs::read(path)?;
    let per = meta.n * 16;
    if bytes.len() != per * meta.times.len() {
        return Err(Error::param(
            "snapshots",
            format!("file has {} bytes, sidecar implies {}", bytes.len(), per * meta.times.len()),
        ));
    }
    let word = |c: &[u8]| f64::from_le_bytes(c.try_into().expect("8-byte chunk"));
    let states = bytes
        .chunks(per.max(1))
        .zip(&meta.times)
        .map(|(block, &t)| {
            let mut s = ChainState::zeros(meta.n);
            for (i, row) in block.chunks(16).enumerate() {
                s.p[i] = word(&row[..8]);
                s.q[i] = word(&row[8..]);
            }
            s.t_micro = t;
            s
        })
        .collect();
    Ok((meta, states))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snap.bin");
        let states: Vec<ChainState> = (0..3)
            .map(|k| ChainState {
                p: (0..8).map(|i| (i * k) as f64 * 0.1).collect(),
                q: (0..8).map(|i| -(i as f64) + k as f64).collect(),
                t_micro: k as f64,
            })
            .collect();
        let meta = SnapshotMeta::new(8, 0.5, vec![0.0, 1.0, 2.0], 11, "nn_unpinned");
        write_snapshots(&path, &states, &meta).unwrap();
        assert_eq!(fs::metadata(&path).unwrap().len(), 3 * 8 * 16);
        let (m, back) = read_snapshots(&path).unwrap();
        assert_eq!(m, meta);
        assert_eq!(back, states);
    }
}
