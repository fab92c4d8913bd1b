//! Plain-text TVG files.
//!
//! ```text
//! N T
//! t u v
//! ...
//! ```
//!
//! One line per temporal edge, whitespace-separated decimal integers. Duplicate
//! and reversed lines collapse to one undirected edge.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use stim_core::graph::{SnapshotGraph, Tvg};

use crate::error::{io_err, parse_err, Result};

/// Serializes `tvg`, edges ordered by `(t, u, v)` with `u < v`.
pub fn write_tvg<W: Write>(tvg: &Tvg, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{} {}", tvg.num_nodes(), tvg.num_steps())?;
    for (t, g) in tvg.snapshots().iter().enumerate() {
        for (u, v) in g.edges() {
            writeln!(out, "{t} {u} {v}")?;
        }
    }
    out.flush()
}

pub fn read_tvg<R: Read>(input: R, origin: &Path) -> Result<Tvg> {
    let mut lines = BufReader::new(input).lines().enumerate();
    let (n, steps) = loop {
        let Some((idx, line)) = lines.next() else {
            return Err(parse_err(origin, 1, "missing `N T` header"));
        };
        let line = line.map_err(io_err(origin))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let nums = parse_ints(line, origin, idx + 1)?;
        if nums.len() != 2 {
            return Err(parse_err(origin, idx + 1, "header must be `N T`"));
        }
        break (nums[0], nums[1]);
    };
    if steps == 0 {
        return Err(parse_err(origin, 1, "T must be positive"));
    }
    let mut per_step: Vec<Vec<(usize, usize)>> = vec![Vec::new(); steps];
    for (idx, line) in lines {
        let line = line.map_err(io_err(origin))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let nums = parse_ints(line, origin, idx + 1)?;
        let [t, u, v] = nums[..] else {
            return Err(parse_err(origin, idx + 1, "edge lines must be `t u v`"));
        };
        if t >= steps || u >= n || v >= n || u == v {
            return Err(parse_err(origin, idx + 1, format!("edge `{line}` is out of range or a self-loop")));
        }
        per_step[t].push((u, v));
    }
    let snaps = per_step
        .into_iter()
        .enumerate()
        .map(|(t, edges)| SnapshotGraph::from_edges(n, t, edges))
        .collect::<stim_core::Result<Vec<_>>>()?;
    Ok(Tvg::new(n, snaps)?)
}

fn parse_ints(line: &str, origin: &Path, lineno: usize) -> Result<Vec<usize>> {
    line.split_whitespace()
        .map(|tok| tok.parse::<usize>().map_err(|e| parse_err(origin, lineno, format!("`{tok}`: {e}"))))
        .collect()
}

pub fn save_tvg(tvg: &Tvg, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    write_tvg(tvg, BufWriter::new(file)).map_err(io_err(path))
}

pub fn load_tvg(path: &Path) -> Result<Tvg> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    read_tvg(file, path)
}
