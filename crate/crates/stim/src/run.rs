//! Training runs on disk: checkpoints, the training curve and a run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use stim_core::diffusion::{Instance, RewardNormalizer};
use stim_core::model::StimModel;
use stim_core::rng_from_seed;
use stim_core::training::{CurvePoint, Trainer};

use crate::checkpoint::{save_checkpoint, Checkpoint};
use crate::config::RunConfig;
use crate::error::{io_err, Result};

pub const CURVE_FILE: &str = "training_curve.csv";
pub const MODEL_FILE: &str = "model.ckpt";
pub const RUN_MANIFEST_FILE: &str = "run_manifest.txt";

pub fn write_curve(curve: &[CurvePoint], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["episode", "score", "moving_avg", "epsilon", "alpha", "loss", "updates"])?;
    for p in curve {
        w.write_record([
            p.episode.to_string(),
            p.score.to_string(),
            p.moving_avg.to_string(),
            p.epsilon.to_string(),
            p.alpha.to_string(),
            p.loss.map(|l| l.to_string()).unwrap_or_default(),
            p.updates.to_string(),
        ])?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone)]
pub struct RunManifest<'a> {
    pub command: &'a str,
    pub seed: u64,
    pub dataset: &'a Path,
    pub dataset_hash: &'a str,
    pub episodes: usize,
    pub config: &'a RunConfig,
}

pub fn write_run_manifest(m: &RunManifest<'_>, path: &Path) -> Result<()> {
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    let body = format!(
        "command = {}\nseed = {}\ndataset = {}\ndataset_sha256 = {}\nepisodes = {}\n\n# configuration\n{}",
        m.command,
        m.seed,
        m.dataset.display(),
        m.dataset_hash,
        m.episodes,
        m.config.to_text()
    );
    f.write_all(body.as_bytes()).map_err(io_err(path))?;
    Ok(())
}

/// Result of [`train_to_dir`].
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub curve: Vec<CurvePoint>,
    pub model_path: PathBuf,
}

/// Trains a fresh model on `instances` for `episodes` episodes, writing
/// periodic checkpoints, the final `model.ckpt` and the training curve to
/// `out`. `on_point` is called after every episode.
pub fn train_to_dir(
    instances: &[Instance],
    cfg: &RunConfig,
    episodes: usize,
    seed: u64,
    out: &Path,
    on_point: &mut dyn FnMut(&CurvePoint),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    fs::create_dir_all(out).map_err(io_err(out))?;
    let mut train = cfg.train.clone();
    train.total_episodes = episodes;
    train.seed = seed;
    let model = StimModel::new(cfg.hyper, &mut rng_from_seed(seed))?;
    let mut trainer = Trainer::new(instances, train, cfg.diffusion, model)?;
    trainer.normalizer =
        RewardNormalizer { w_dif: cfg.diffusion_weight, w_inf: cfg.influence_weight, ..RewardNormalizer::default() };
    while trainer.episodes_done() < episodes {
        let point = trainer.train_episode()?;
        on_point(&point);
        let done = trainer.episodes_done();
        if cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0 && done < episodes {
            let ck = Checkpoint { model: trainer.model.clone(), normalizer: trainer.normalizer.clone() };
            save_checkpoint(&ck, &out.join(format!("checkpoint_{done:05}.ckpt")))?;
        }
    }
    let checkpoint = Checkpoint { model: trainer.model.clone(), normalizer: trainer.normalizer.clone() };
    let model_path = out.join(MODEL_FILE);
    save_checkpoint(&checkpoint, &model_path)?;
    write_curve(&trainer.curve, &out.join(CURVE_FILE))?;
    Ok(TrainOutcome { checkpoint, curve: trainer.curve, model_path })
}
