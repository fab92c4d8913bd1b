//! Text checkpoints: version line, hyperparameter header, reward
//! normalizer, then every parameter matrix by name.
//!
//! ```text
//! stim-checkpoint 1
//! hyper batch=8 raw_features=4 embed_dim=128 flow_dim=32 layers=2 gamma=0.9 v_min=-1 v_max=1 n_atoms=11
//! normalizer w_dif=1 w_inf=0.5 dif=<lo>,<hi> inf=<lo>,<hi>
//! param w1 128 128
//! <one row of values per line>
//! ```
//!
//! Floats use Rust's shortest round-trip formatting, so save → load is exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use stim_core::diffusion::RewardNormalizer;
use stim_core::model::{AtomSupport, StimHyper, StimModel, StimParams};
use stim_core::nn::ParamStore;

use crate::error::{io_err, parse_err, Result, StimError};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "stim-checkpoint";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: StimModel,
    pub normalizer: RewardNormalizer,
}

fn fmt_bounds(b: Option<(f64, f64)>) -> String {
    match b {
        Some((lo, hi)) => format!("{lo},{hi}"),
        None => "none".into(),
    }
}

pub fn to_text(ck: &Checkpoint) -> String {
    let h = &ck.model.hyper;
    let n = &ck.normalizer;
    let mut s = String::new();
    let _ = writeln!(s, "{MAGIC} {FORMAT_VERSION}");
    let _ = writeln!(
        s,
        "hyper batch={} raw_features={} embed_dim={} flow_dim={} layers={} gamma={} v_min={} v_max={} n_atoms={}",
        h.batch, h.raw_features, h.embed_dim, h.flow_dim, h.layers, h.gamma, h.support.v_min, h.support.v_max, h.support.n_atoms
    );
    let _ = writeln!(
        s,
        "normalizer w_dif={} w_inf={} dif={} inf={}",
        n.w_dif,
        n.w_inf,
        fmt_bounds(n.dif_bounds),
        fmt_bounds(n.inf_bounds)
    );
    for (name, m) in ck.model.params.params() {
        let _ = writeln!(s, "param {name} {} {}", m.rows(), m.cols());
        for r in 0..m.rows() {
            let row: Vec<String> = m.row(r).iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "{}", row.join(" "));
        }
    }
    s
}

pub fn save_checkpoint(ck: &Checkpoint, path: &Path) -> Result<()> {
    fs::write(path, to_text(ck)).map_err(io_err(path))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    from_text(&text, path)
}

fn key_values<'a>(line: &'a str, tag: &str, path: &Path, lineno: usize) -> Result<Vec<(&'a str, &'a str)>> {
    let rest = line
        .strip_prefix(tag)
        .ok_or_else(|| parse_err(path, lineno, format!("expected `{tag}` line")))?;
    rest.split_whitespace()
        .map(|kv| kv.split_once('=').ok_or_else(|| parse_err(path, lineno, format!("`{kv}` is not key=value"))))
        .collect()
}

fn lookup<T: std::str::FromStr>(kvs: &[(&str, &str)], key: &str, path: &Path, lineno: usize) -> Result<T> {
    let raw = kvs
        .iter()
        .find(|(k, _)| *k == key)
        .map(|(_, v)| *v)
        .ok_or_else(|| parse_err(path, lineno, format!("missing `{key}`")))?;
    raw.parse().map_err(|_| parse_err(path, lineno, format!("bad value for `{key}`: {raw}")))
}

fn parse_bounds(raw: &str, path: &Path, lineno: usize) -> Result<Option<(f64, f64)>> {
    if raw == "none" {
        return Ok(None);
    }
    let (lo, hi) = raw.split_once(',').ok_or_else(|| parse_err(path, lineno, "bounds must be `lo,hi`"))?;
    let lo: f64 = lo.parse().map_err(|_| parse_err(path, lineno, "bad lower bound"))?;
    let hi: f64 = hi.parse().map_err(|_| parse_err(path, lineno, "bad upper bound"))?;
    Ok(Some((lo, hi)))
}

pub fn from_text(text: &str, path: &Path) -> Result<Checkpoint> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let mut next = |what: &str| lines.next().ok_or_else(|| StimError::Format(format!("{}: truncated before {what}", path.display())));

    let (ln, first) = next("version")?;
    let version: u32 = first
        .strip_prefix(MAGIC)
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| parse_err(path, ln, "not a stim checkpoint"))?;
    if version != FORMAT_VERSION {
        return Err(parse_err(path, ln, format!("unsupported checkpoint version {version}")));
    }

    let (ln, line) = next("hyper")?;
    let kv = key_values(line, "hyper", path, ln)?;
    let hyper = StimHyper {
        batch: lookup(&kv, "batch", path, ln)?,
        raw_features: lookup(&kv, "raw_features", path, ln)?,
        embed_dim: lookup(&kv, "embed_dim", path, ln)?,
        flow_dim: lookup(&kv, "flow_dim", path, ln)?,
        layers: lookup(&kv, "layers", path, ln)?,
        gamma: lookup(&kv, "gamma", path, ln)?,
        support: AtomSupport {
            v_min: lookup(&kv, "v_min", path, ln)?,
            v_max: lookup(&kv, "v_max", path, ln)?,
            n_atoms: lookup(&kv, "n_atoms", path, ln)?,
        },
    };
    hyper.validate()?;

    let (ln, line) = next("normalizer")?;
    let kv = key_values(line, "normalizer", path, ln)?;
    let normalizer = RewardNormalizer {
        w_dif: lookup(&kv, "w_dif", path, ln)?,
        w_inf: lookup(&kv, "w_inf", path, ln)?,
        dif_bounds: parse_bounds(&lookup::<String>(&kv, "dif", path, ln)?, path, ln)?,
        inf_bounds: parse_bounds(&lookup::<String>(&kv, "inf", path, ln)?, path, ln)?,
        frozen: false,
    };

    let mut entries = Vec::new();
    while let Some((ln, line)) = lines.next() {
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        let ["param", name, rows, cols] = parts[..] else {
            return Err(parse_err(path, ln, "expected `param NAME ROWS COLS`"));
        };
        let rows: usize = rows.parse().map_err(|_| parse_err(path, ln, "bad row count"))?;
        let cols: usize = cols.parse().map_err(|_| parse_err(path, ln, "bad column count"))?;
        let mut values = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (rl, row) = lines.next().ok_or_else(|| parse_err(path, ln, format!("truncated parameter {name}")))?;
            let before = values.len();
            for tok in row.split_whitespace() {
                values.push(tok.parse::<f64>().map_err(|_| parse_err(path, rl, format!("bad value `{tok}`")))?);
            }
            if values.len() - before != cols {
                return Err(parse_err(path, rl, format!("expected {cols} values")));
            }
        }
        entries.push((name.to_string(), rows, cols, values));
    }
    let mut params = StimParams::zeros(&hyper);
    params.load_flat(&entries)?;
    Ok(Checkpoint { model: StimModel::from_params(hyper, params)?, normalizer })
}
