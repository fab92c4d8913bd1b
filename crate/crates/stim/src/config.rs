//! Flat `key = value` run configuration named after the training table.
//!
//! Blank lines and `#` comments are ignored; unknown keys are an error.

use std::fs;
use std::path::Path;

use stim_core::diffusion::DiffusionConfig;
use stim_core::graph::FeatureConfig;
use stim_core::model::StimHyper;
use stim_core::training::{OptimizerKind, TrainConfig};

use crate::error::{io_err, parse_err, Result, StimError};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub hyper: StimHyper,
    pub train: TrainConfig,
    pub diffusion: DiffusionConfig,
    /// Weight of the diffusion term of the reward.
    pub diffusion_weight: f64,
    /// Weight of the influence term of the reward.
    pub influence_weight: f64,
    /// Write an intermediate checkpoint every this many episodes (0 = never).
    pub checkpoint_every: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            hyper: StimHyper::default(),
            train: TrainConfig::default(),
            diffusion: DiffusionConfig::default(),
            diffusion_weight: 1.0,
            influence_weight: 0.5,
            checkpoint_every: 500,
        }
    }
}

/// Every accepted key, in the order `to_text` writes them.
pub const KEYS: [&str; 23] = [
    "batch_size",
    "learning_rate",
    "min_learning_rate",
    "exploration_start",
    "exploration_end",
    "decay_factor",
    "ge_layers",
    "discount_factor",
    "raw_features",
    "embedding_size",
    "flow_size",
    "v_min",
    "v_max",
    "num_atoms",
    "diffusion_weight",
    "influence_weight",
    "replay_capacity",
    "replay_interval",
    "positive_threshold",
    "optimizer",
    "psi",
    "m_c",
    "checkpoint_every",
];

impl RunConfig {
    pub fn feature_config(&self) -> Result<FeatureConfig> {
        match self.hyper.raw_features {
            4 => Ok(FeatureConfig::default()),
            3 => Ok(FeatureConfig { eigenvector: false, ..FeatureConfig::default() }),
            c => Err(StimError::Format(format!("raw_features must be 3 or 4, got {c}"))),
        }
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String> {
            v.parse().map_err(|_| format!("cannot parse `{v}`"))
        }
        match key {
            "batch_size" => self.hyper.batch = num(value)?,
            "learning_rate" => self.train.alpha = num(value)?,
            "min_learning_rate" => self.train.alpha_min = num(value)?,
            "exploration_start" => self.train.epsilon_start = num(value)?,
            "exploration_end" => self.train.epsilon_end = num(value)?,
            "decay_factor" => self.train.beta = num(value)?,
            "ge_layers" => self.hyper.layers = num(value)?,
            "discount_factor" => self.hyper.gamma = num(value)?,
            "raw_features" => self.hyper.raw_features = num(value)?,
            "embedding_size" => self.hyper.embed_dim = num(value)?,
            "flow_size" => self.hyper.flow_dim = num(value)?,
            "v_min" => self.hyper.support.v_min = num(value)?,
            "v_max" => self.hyper.support.v_max = num(value)?,
            "num_atoms" => self.hyper.support.n_atoms = num(value)?,
            "diffusion_weight" => self.diffusion_weight = num(value)?,
            "influence_weight" => self.influence_weight = num(value)?,
            "replay_capacity" => self.train.replay_capacity = num(value)?,
            "replay_interval" => self.train.replay_interval = num(value)?,
            "positive_threshold" => self.train.positive_threshold = num(value)?,
            "optimizer" => {
                self.train.optimizer = match value {
                    "sgd" => OptimizerKind::Sgd,
                    "adam" => OptimizerKind::Adam,
                    other => return Err(format!("unknown optimizer `{other}` (sgd | adam)")),
                }
            }
            "psi" => self.diffusion.psi = num(value)?,
            "m_c" => self.diffusion.m_c = num(value)?,
            "checkpoint_every" => self.checkpoint_every = num(value)?,
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| parse_err(origin, idx + 1, "expected `key = value`"))?;
            cfg.set(key.trim(), value.trim()).map_err(|m| parse_err(origin, idx + 1, m))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::parse(&text, path)
    }

    pub fn validate(&self) -> Result<()> {
        self.hyper.validate()?;
        self.train.validate()?;
        self.diffusion.validate()?;
        self.feature_config()?;
        if self.diffusion_weight < 0.0 || self.influence_weight < 0.0 {
            return Err(StimError::Format("reward weights must be non-negative".into()));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let h = &self.hyper;
        let t = &self.train;
        let optimizer = match t.optimizer {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        };
        let values = [
            h.batch.to_string(),
            t.alpha.to_string(),
            t.alpha_min.to_string(),
            t.epsilon_start.to_string(),
            t.epsilon_end.to_string(),
            t.beta.to_string(),
            h.layers.to_string(),
            h.gamma.to_string(),
            h.raw_features.to_string(),
            h.embed_dim.to_string(),
            h.flow_dim.to_string(),
            h.support.v_min.to_string(),
            h.support.v_max.to_string(),
            h.support.n_atoms.to_string(),
            self.diffusion_weight.to_string(),
            self.influence_weight.to_string(),
            t.replay_capacity.to_string(),
            t.replay_interval.to_string(),
            t.positive_threshold.to_string(),
            optimizer.to_string(),
            self.diffusion.psi.to_string(),
            self.diffusion.m_c.to_string(),
            self.checkpoint_every.to_string(),
        ];
        KEYS.iter().zip(values).map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_training_table() {
        let c = RunConfig::default();
        assert_eq!(c.hyper.batch, 8);
        assert_eq!(c.train.alpha, 1e-4);
        assert_eq!(c.train.alpha_min, 1e-6);
        assert_eq!((c.train.epsilon_start, c.train.epsilon_end), (0.8, 0.3));
        assert_eq!(c.train.beta, 0.999);
        assert_eq!(c.hyper.layers, 2);
        assert_eq!(c.hyper.gamma, 0.9);
        assert_eq!(c.hyper.raw_features, 4);
        assert_eq!(c.hyper.embed_dim, 128);
        assert_eq!((c.hyper.support.v_min, c.hyper.support.v_max, c.hyper.support.n_atoms), (-1.0, 1.0, 11));
        assert_eq!((c.diffusion_weight, c.influence_weight), (1.0, 0.5));
    }

    #[test]
    fn parse_overrides_and_roundtrips() {
        let text = "# desk run\nembedding_size = 32\noptimizer = adam  # faster\n\nlearning_rate=0.001\n";
        let c = RunConfig::parse(text, Path::new("run.cfg")).unwrap();
        assert_eq!(c.hyper.embed_dim, 32);
        assert_eq!(c.train.optimizer, OptimizerKind::Adam);
        assert_eq!(c.train.alpha, 1e-3);
        assert_eq!(RunConfig::parse(&c.to_text(), Path::new("x")).unwrap(), c);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let err = RunConfig::parse("batch_size = 8\nlearning_rat = 1\n", Path::new("run.cfg")).unwrap_err();
        assert!(err.to_string().contains("run.cfg:2:") && err.to_string().contains("learning_rat"), "{err}");
        assert!(RunConfig::parse("batch_size = eight\n", Path::new("c")).is_err());
        assert!(RunConfig::parse("raw_features = 5\n", Path::new("c")).is_err());
        assert!(RunConfig::parse("just words\n", Path::new("c")).is_err());
    }
}
