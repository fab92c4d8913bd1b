//! Real-world temporal edge lists (`SRC DST TIMESTAMP` per line).

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use stim_core::graph::{SnapshotGraph, Tvg};

use crate::error::{io_err, parse_err, Result, StimError};

/// How timestamps map to snapshot indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Binning {
    /// `t = ⌊timestamp / width⌋`.
    Width(u64),
    /// Splits `[min, max]` into this many equal-width bins.
    Bins(usize),
}

pub const DEFAULT_BINS: usize = 60;

#[derive(Debug, Clone)]
pub struct Ingested {
    pub tvg: Tvg,
    /// Edge records parsed, self-loops included.
    pub records: usize,
    pub self_loops: usize,
    /// Original node id of each dense id.
    pub original_ids: Vec<u64>,
    pub bin_width: u64,
}

/// Parses an edge list and bins it into snapshots. Node ids are remapped
/// densely in increasing order of their original value; every node seen on
/// any line is part of every snapshot.
pub fn ingest_temporal_edge_list(path: &Path, binning: Binning) -> Result<Ingested> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut records: Vec<(u64, u64, u64)> = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('%') {
            continue;
        }
        let fields: Vec<u64> = line
            .split_whitespace()
            .map(|tok| tok.parse().map_err(|e| parse_err(path, idx + 1, format!("`{tok}`: {e}"))))
            .collect::<Result<_>>()?;
        let [src, dst, ts] = fields[..] else {
            return Err(parse_err(path, idx + 1, "expected `SRC DST TIMESTAMP`"));
        };
        records.push((src, dst, ts));
    }
    from_records(&records, binning).map_err(|e| match e {
        StimError::Format(m) => StimError::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Builds the TVG from already-parsed `(src, dst, timestamp)` records.
pub fn from_records(records: &[(u64, u64, u64)], binning: Binning) -> Result<Ingested> {
    if records.is_empty() {
        return Err(StimError::Format("empty temporal edge list".into()));
    }
    let mut ids: BTreeMap<u64, usize> = BTreeMap::new();
    for &(s, d, _) in records {
        ids.insert(s, 0);
        ids.insert(d, 0);
    }
    for (dense, v) in ids.values_mut().enumerate() {
        *v = dense;
    }
    let min_ts = records.iter().map(|r| r.2).min().expect("non-empty");
    let max_ts = records.iter().map(|r| r.2).max().expect("non-empty");
    let (width, offset) = match binning {
        Binning::Width(w) if w > 0 => (w, 0),
        Binning::Width(_) => return Err(StimError::Format("bin width must be positive".into())),
        Binning::Bins(0) => return Err(StimError::Format("bin count must be positive".into())),
        Binning::Bins(b) => ((max_ts - min_ts + 1).div_ceil(b as u64), min_ts),
    };
    let steps = ((max_ts - offset) / width + 1) as usize;
    let n = ids.len();
    let mut per_step: Vec<Vec<(usize, usize)>> = vec![Vec::new(); steps];
    let mut self_loops = 0;
    for &(s, d, ts) in records {
        let (u, v) = (ids[&s], ids[&d]);
        if u == v {
            self_loops += 1;
            continue;
        }
        per_step[((ts - offset) / width) as usize].push((u, v));
    }
    let snaps = per_step
        .into_iter()
        .enumerate()
        .map(|(t, edges)| SnapshotGraph::from_edges(n, t, edges))
        .collect::<stim_core::Result<Vec<_>>>()?;
    Ok(Ingested {
        tvg: Tvg::new(n, snaps)?,
        records: records.len(),
        self_loops,
        original_ids: ids.into_keys().collect(),
        bin_width: width,
    })
}

/// The `count` lowest-degree nodes of snapshot 0, ties by id.
pub fn select_real_seeds(tvg: &Tvg, count: usize) -> Vec<usize> {
    let g = tvg.snapshot(0);
    let mut order: Vec<usize> = (0..tvg.num_nodes()).collect();
    order.sort_by_key(|&i| (g.degree(i), i));
    order.truncate(count.min(order.len()));
    order
}

/// Seed-set size for real-world TVGs: `⌊0.02·N⌋`.
pub fn real_seed_count(n: usize) -> usize {
    (0.02 * n as f64 + 1e-9).floor() as usize
}
