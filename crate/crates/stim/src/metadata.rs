//! Node-type sidecar files: one line `t node_id node_type is_cyclic` per
//! node and step.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use stim_core::synth::NodeType;

use crate::error::{io_err, parse_err, Result, StimError};

/// Ground-truth node types per step plus the cyclic flags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeMetadata {
    pub types: Vec<Vec<NodeType>>,
    pub cyclic: Vec<bool>,
}

pub fn write_metadata<W: Write>(meta: &NodeMetadata, mut out: W) -> std::io::Result<()> {
    for (t, row) in meta.types.iter().enumerate() {
        for (i, ty) in row.iter().enumerate() {
            writeln!(out, "{t} {i} {} {}", ty.index(), u8::from(meta.cyclic[i]))?;
        }
    }
    out.flush()
}

pub fn save_metadata(meta: &NodeMetadata, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    write_metadata(meta, BufWriter::new(file)).map_err(io_err(path))
}

/// Reads a sidecar for a TVG with `n` nodes and `steps` snapshots; every
/// `(t, node)` pair must appear exactly once.
pub fn load_metadata(path: &Path, n: usize, steps: usize) -> Result<NodeMetadata> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut types: Vec<Vec<Option<NodeType>>> = vec![vec![None; n]; steps];
    let mut cyclic: Vec<Option<bool>> = vec![None; n];
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(io_err(path))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let nums: Vec<usize> = line
            .split_whitespace()
            .map(|tok| tok.parse().map_err(|e| parse_err(path, lineno, format!("`{tok}`: {e}"))))
            .collect::<Result<_>>()?;
        let [t, i, ty, cyc] = nums[..] else {
            return Err(parse_err(path, lineno, "expected `t node_id node_type is_cyclic`"));
        };
        if t >= steps || i >= n || cyc > 1 {
            return Err(parse_err(path, lineno, "step, node or cyclic flag out of range"));
        }
        let ty = NodeType::from_index(ty).ok_or_else(|| parse_err(path, lineno, format!("unknown node type {ty}")))?;
        if types[t][i].replace(ty).is_some() {
            return Err(parse_err(path, lineno, format!("duplicate entry for step {t}, node {i}")));
        }
        let flag = cyc == 1;
        if *cyclic[i].get_or_insert(flag) != flag {
            return Err(parse_err(path, lineno, format!("node {i} changes its cyclic flag")));
        }
    }
    let missing = || StimError::Format(format!("{}: incomplete node metadata", path.display()));
    Ok(NodeMetadata {
        types: types
            .into_iter()
            .map(|row| row.into_iter().collect::<Option<Vec<_>>>())
            .collect::<Option<Vec<_>>>()
            .ok_or_else(missing)?,
        cyclic: cyclic.into_iter().collect::<Option<Vec<_>>>().ok_or_else(missing)?,
    })
}
