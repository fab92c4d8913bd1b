//! Dataset directories: a `manifest.csv` plus one TVG file and one metadata
//! sidecar per instance.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use stim_core::diffusion::Instance;
use stim_core::graph::{FeatureConfig, PreparedTvg, Tvg};
use stim_core::synth::{generate_tvg, valid_window, EpisodeWindow, SynthConfig};
use stim_core::split_seed;

use crate::error::{io_err, Result, StimError};
use crate::ingest::{real_seed_count, select_real_seeds};
use crate::metadata::{load_metadata, save_metadata, NodeMetadata};
use crate::tvg_format::{load_tvg, save_tvg};

pub const MANIFEST: &str = "manifest.csv";
const MANIFEST_HEADER: [&str; 7] = ["id", "tvg", "meta", "perturb_prob", "seeds", "window_start", "window_length"];

/// One TVG on disk, before feature preparation.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetEntry {
    pub tvg: Tvg,
    pub meta: Option<NodeMetadata>,
    pub seeds: Vec<usize>,
    pub window: EpisodeWindow,
    pub perturb_prob: Option<f64>,
}

impl DatasetEntry {
    /// A metadata-free TVG (e.g. ingested from real data): seeds are the
    /// `⌊0.02·N⌋` lowest-degree nodes and the window follows the synthetic
    /// rule with `p_v = 0.4`.
    pub fn real_world(tvg: Tvg) -> Result<Self> {
        let seeds = select_real_seeds(&tvg, real_seed_count(tvg.num_nodes()));
        let window = valid_window(tvg.num_steps(), SynthConfig::default().p_v)?;
        Ok(DatasetEntry { tvg, meta: None, seeds, window, perturb_prob: None })
    }

    pub fn to_instance(&self, id: usize, features: FeatureConfig) -> Instance {
        let n = self.tvg.num_nodes();
        Instance {
            id,
            data: PreparedTvg::new(self.tvg.clone(), features),
            cyclic: self.meta.as_ref().map_or_else(|| vec![false; n], |m| m.cyclic.clone()),
            node_types: self.meta.as_ref().map(|m| m.types.clone()),
            seeds: self.seeds.clone(),
            window: self.window,
        }
    }
}

/// Generates `count` TVGs; TVG `k` uses generator seed `split_seed(seed, k)`.
pub fn generate_entries(base: &SynthConfig, count: usize, seed: u64) -> Result<Vec<DatasetEntry>> {
    (0..count)
        .map(|k| {
            let cfg = SynthConfig { rng_seed: split_seed(seed, k as u64), ..base.clone() };
            let syn = generate_tvg(&cfg)?;
            Ok(DatasetEntry {
                meta: Some(NodeMetadata { types: syn.node_type_table(), cyclic: syn.cyclic.clone() }),
                seeds: syn.seeds,
                window: syn.window,
                perturb_prob: Some(syn.perturb_prob),
                tvg: syn.tvg,
            })
        })
        .collect()
}

pub fn save_dataset(entries: &[DatasetEntry], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let manifest = dir.join(MANIFEST);
    let mut w = csv::Writer::from_path(&manifest)?;
    w.write_record(MANIFEST_HEADER)?;
    for (k, e) in entries.iter().enumerate() {
        let tvg_name = format!("tvg_{k:04}.tvg");
        save_tvg(&e.tvg, &dir.join(&tvg_name))?;
        let meta_name = match &e.meta {
            Some(m) => {
                let name = format!("tvg_{k:04}.meta");
                save_metadata(m, &dir.join(&name))?;
                name
            }
            None => String::new(),
        };
        let seeds: Vec<String> = e.seeds.iter().map(|s| s.to_string()).collect();
        w.write_record([
            k.to_string(),
            tvg_name,
            meta_name,
            e.perturb_prob.map(|p| p.to_string()).unwrap_or_default(),
            seeds.join(" "),
            e.window.start.to_string(),
            e.window.length.to_string(),
        ])?;
    }
    w.flush().map_err(io_err(&manifest))?;
    Ok(())
}

/// Loads a dataset directory, or a single TVG file treated as real-world data.
pub fn load_dataset(path: &Path) -> Result<Vec<DatasetEntry>> {
    if path.is_file() {
        return Ok(vec![DatasetEntry::real_world(load_tvg(path)?)?]);
    }
    let manifest = path.join(MANIFEST);
    let mut r = csv::Reader::from_path(&manifest)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != MANIFEST_HEADER {
        return Err(StimError::Format(format!("{}: unexpected header {header:?}", manifest.display())));
    }
    let mut entries = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| StimError::Format(format!("{}: row {}: bad {what}", manifest.display(), row + 2));
        let tvg = load_tvg(&path.join(&rec[1]))?;
        let meta = if rec[2].is_empty() {
            None
        } else {
            Some(load_metadata(&path.join(&rec[2]), tvg.num_nodes(), tvg.num_steps())?)
        };
        let perturb_prob = if rec[3].is_empty() { None } else { Some(rec[3].parse().map_err(|_| bad("perturb_prob"))?) };
        let seeds: Vec<usize> =
            rec[4].split_whitespace().map(|s| s.parse().map_err(|_| bad("seeds"))).collect::<Result<_>>()?;
        if seeds.iter().any(|&s| s >= tvg.num_nodes()) {
            return Err(bad("seeds"));
        }
        let window = EpisodeWindow {
            start: rec[5].parse().map_err(|_| bad("window_start"))?,
            length: rec[6].parse().map_err(|_| bad("window_length"))?,
        };
        if window.length == 0 || window.end() > tvg.num_steps() {
            return Err(bad("window"));
        }
        entries.push(DatasetEntry { tvg, meta, seeds, window, perturb_prob });
    }
    if entries.is_empty() {
        return Err(StimError::Format(format!("{}: dataset is empty", manifest.display())));
    }
    Ok(entries)
}

pub fn to_instances(entries: &[DatasetEntry], features: FeatureConfig) -> Vec<Instance> {
    entries.iter().enumerate().map(|(k, e)| e.to_instance(k, features)).collect()
}

/// SHA-256 over the manifest and every file it references (or over the
/// single TVG file).
pub fn dataset_hash(path: &Path) -> Result<String> {
    let mut files: Vec<PathBuf> = Vec::new();
    if path.is_file() {
        files.push(path.to_path_buf());
    } else {
        let manifest = path.join(MANIFEST);
        files.push(manifest.clone());
        let mut r = csv::Reader::from_path(&manifest)?;
        for rec in r.records() {
            let rec = rec?;
            files.push(path.join(&rec[1]));
            if !rec[2].is_empty() {
                files.push(path.join(&rec[2]));
            }
        }
    }
    let mut hasher = Sha256::new();
    for f in files {
        hasher.update(fs::read(&f).map_err(io_err(&f))?);
    }
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_dataset_roundtrips() {
        let cfg = SynthConfig { n_min: 20, n_max: 30, t_min: 6, t_max: 8, ..SynthConfig::default() };
        let entries = generate_entries(&cfg, 3, 9).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&entries, dir.path()).unwrap();
        let back = load_dataset(dir.path()).unwrap();
        assert_eq!(back, entries);
        let h1 = dataset_hash(dir.path()).unwrap();
        assert_eq!(h1.len(), 64);
        assert_eq!(h1, dataset_hash(dir.path()).unwrap());
    }

    #[test]
    fn single_file_is_real_world() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.tvg");
        let mut text = String::from("100 10\n");
        for t in 0..10 {
            for i in 0..99 {
                text.push_str(&format!("{t} {i} {}\n", i + 1));
            }
        }
        fs::write(&p, text).unwrap();
        let entries = load_dataset(&p).unwrap();
        assert_eq!(entries.len(), 1);
        let e = &entries[0];
        assert!(e.meta.is_none());
        assert_eq!(e.seeds, vec![0, 99]);
        assert_eq!(e.window, EpisodeWindow { start: 5, length: 4 });
        let inst = e.to_instance(0, FeatureConfig::default());
        assert!(inst.node_types.is_none() && inst.cyclic.iter().all(|c| !c));
    }
}
