//! Distributional Q-learning over a set of training TVGs.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use rand::Rng;

use crate::agents::StimAgent;
use crate::diffusion::{run_episode, DiffusionConfig, Episode, Instance, RewardNormalizer, Transition};
use crate::error::{Error, Result};
use crate::model::{expected_q, project_target, window_inputs, StimModel, TrainingBatch};
use crate::nn::{Adam, Optimizer, Sgd};
use crate::{rng_from_seed, split_seed, StimRng};

/// Parameter update rule used by the trainer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OptimizerKind {
    #[default]
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Initial learning rate.
    pub alpha: f64,
    pub alpha_min: f64,
    /// Per-batch learning-rate decay factor.
    pub beta: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub replay_capacity: usize,
    /// A buffered episode is replayed after every this many simulations.
    pub replay_interval: usize,
    /// Minimum final informed fraction for an episode to enter the buffer.
    pub positive_threshold: f64,
    pub total_episodes: usize,
    pub optimizer: OptimizerKind,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            alpha: 1e-4,
            alpha_min: 1e-6,
            beta: 0.999,
            epsilon_start: 0.8,
            epsilon_end: 0.3,
            replay_capacity: 25,
            replay_interval: 3,
            positive_threshold: 0.4,
            total_episodes: 2000,
            optimizer: OptimizerKind::Sgd,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if !(self.alpha_min >= 0.0 && self.alpha_min <= self.alpha) {
            return bad("alpha_min must lie in [0, alpha]");
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return bad("beta must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.positive_threshold) {
            return bad("positive threshold must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) || !(0.0..=1.0).contains(&self.epsilon_end) {
            return bad("epsilon bounds must lie in [0, 1]");
        }
        if self.replay_interval == 0 {
            return bad("replay interval must be positive");
        }
        Ok(())
    }

    /// Exploration rate for `episode` out of `total_episodes`.
    pub fn epsilon_for_episode(&self, episode: usize) -> f64 {
        let progress = if self.total_episodes > 1 {
            episode as f64 / (self.total_episodes - 1) as f64
        } else {
            0.0
        };
        epsilon_between(progress, self.epsilon_start, self.epsilon_end)
    }
}

/// `max(α·β, α_min)`.
pub fn decay_learning_rate(alpha: f64, beta: f64, alpha_min: f64) -> f64 {
    (alpha * beta).max(alpha_min)
}

/// Linear exploration schedule from 0.8 down to 0.3.
pub fn epsilon_at(progress: f64) -> f64 {
    epsilon_between(progress, 0.8, 0.3)
}

fn epsilon_between(progress: f64, start: f64, end: f64) -> f64 {
    let p = progress.clamp(0.0, 1.0);
    start + (end - start) * p
}

/// Bounded FIFO of the most recent positive episodes.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    threshold: f64,
    episodes: VecDeque<Episode>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, threshold: f64) -> Self {
        ReplayBuffer { capacity, threshold, episodes: VecDeque::with_capacity(capacity) }
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Episode> {
        self.episodes.iter()
    }

    /// Stores `ep` iff its score reaches the threshold, evicting the oldest
    /// entry when full.
    pub fn maybe_store(&mut self, ep: Episode) -> bool {
        if ep.score < self.threshold || self.capacity == 0 {
            return false;
        }
        if self.episodes.len() == self.capacity {
            self.episodes.pop_front();
        }
        self.episodes.push_back(ep);
        true
    }

    pub fn sample(&self, rng: &mut StimRng) -> Option<&Episode> {
        if self.episodes.is_empty() {
            None
        } else {
            self.episodes.get(rng.random_range(0..self.episodes.len()))
        }
    }
}

/// One row of the training curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub episode: usize,
    pub score: f64,
    /// Mean score over the last (up to) 25 episodes.
    pub moving_avg: f64,
    pub epsilon: f64,
    /// Learning rate after the episode's updates.
    pub alpha: f64,
    /// Mean batch loss of the episode's own updates.
    pub loss: Option<f64>,
    /// Gradient updates applied so far, replay included.
    pub updates: usize,
}

pub const CURVE_WINDOW: usize = 25;

/// Moving average of `values` over a trailing window.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for i in 0..values.len() {
        sum += values[i];
        if i >= window {
            sum -= values[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

#[derive(Debug, Clone)]
enum OptimizerState {
    Sgd(Sgd),
    Adam(Adam),
}

/// Stateful training loop; call [`Trainer::train_episode`] repeatedly or
/// [`Trainer::run`] once.
#[derive(Debug, Clone)]
pub struct Trainer<'d> {
    pub cfg: TrainConfig,
    pub diffusion: DiffusionConfig,
    dataset: &'d [Instance],
    pub model: StimModel,
    pub normalizer: RewardNormalizer,
    pub alpha: f64,
    pub buffer: ReplayBuffer,
    pub curve: Vec<CurvePoint>,
    pub updates: usize,
    optimizer: OptimizerState,
    rng: StimRng,
    scores: Vec<f64>,
}

impl<'d> Trainer<'d> {
    pub fn new(dataset: &'d [Instance], cfg: TrainConfig, diffusion: DiffusionConfig, model: StimModel) -> Result<Self> {
        cfg.validate()?;
        diffusion.validate()?;
        if dataset.is_empty() {
            return Err(Error::InvalidConfig("training needs at least one TVG".into()));
        }
        for (i, inst) in dataset.iter().enumerate() {
            if inst.id != i {
                return Err(Error::InvalidConfig(alloc::format!("instance at position {i} has id {}", inst.id)));
            }
        }
        let optimizer = match cfg.optimizer {
            OptimizerKind::Sgd => OptimizerState::Sgd(Sgd),
            OptimizerKind::Adam => OptimizerState::Adam(Adam::default()),
        };
        Ok(Trainer {
            alpha: cfg.alpha,
            buffer: ReplayBuffer::new(cfg.replay_capacity, cfg.positive_threshold),
            rng: rng_from_seed(split_seed(cfg.seed, u64::MAX)),
            cfg,
            diffusion,
            dataset,
            model,
            normalizer: RewardNormalizer::default(),
            curve: Vec::new(),
            updates: 0,
            optimizer,
            scores: Vec::new(),
        })
    }

    pub fn episodes_done(&self) -> usize {
        self.curve.len()
    }

    /// Simulates one ε-greedy episode, learns from it, stores it if
    /// positive and, on schedule, replays a buffered episode.
    pub fn train_episode(&mut self) -> Result<CurvePoint> {
        let episode_idx = self.curve.len();
        let epsilon = self.cfg.epsilon_for_episode(episode_idx);
        let inst = &self.dataset[self.rng.random_range(0..self.dataset.len())];
        let mut ep_rng = rng_from_seed(split_seed(self.cfg.seed, episode_idx as u64));
        let episode = {
            let mut agent = StimAgent::new(&self.model, epsilon);
            run_episode(inst, inst.window, &mut agent, &self.diffusion, &mut self.normalizer, &mut ep_rng)?
        };
        let losses = self.learn_from(&episode)?;
        let score = episode.score;
        self.buffer.maybe_store(episode);
        if (episode_idx + 1) % self.cfg.replay_interval == 0 {
            if let Some(replayed) = self.buffer.sample(&mut self.rng).cloned() {
                self.learn_from(&replayed)?;
            }
        }
        self.scores.push(score);
        let lo = self.scores.len().saturating_sub(CURVE_WINDOW);
        let recent = &self.scores[lo..];
        let point = CurvePoint {
            episode: episode_idx,
            score,
            moving_avg: recent.iter().sum::<f64>() / recent.len() as f64,
            epsilon,
            alpha: self.alpha,
            loss: if losses.is_empty() { None } else { Some(losses.iter().sum::<f64>() / losses.len() as f64) },
            updates: self.updates,
        };
        self.curve.push(point);
        Ok(point)
    }

    /// Runs the remaining episodes up to `cfg.total_episodes`.
    pub fn run(&mut self) -> Result<()> {
        while self.curve.len() < self.cfg.total_episodes {
            self.train_episode()?;
        }
        Ok(())
    }

    /// Applies one gradient step per window of `B` contiguous acting
    /// transitions; returns the batch losses.
    pub fn learn_from(&mut self, episode: &Episode) -> Result<Vec<f64>> {
        let inst = &self.dataset[episode.instance_id];
        let mut losses = Vec::new();
        for batch in update_batches(&self.model, inst, &episode.transitions)? {
            let (loss, grads) = self.model.loss_and_gradients(&batch)?;
            match &mut self.optimizer {
                OptimizerState::Sgd(o) => o.step(&mut self.model.params, &grads, self.alpha),
                OptimizerState::Adam(o) => o.step(&mut self.model.params, &grads, self.alpha),
            }
            self.alpha = decay_learning_rate(self.alpha, self.cfg.beta, self.cfg.alpha_min);
            self.updates += 1;
            losses.push(loss);
        }
        Ok(losses)
    }
}

/// Builds the update batches of one recorded episode with targets computed
/// by the current parameters.
///
/// Only the leading run of transitions that activated a node is used (once
/// the Retain set empties it cannot refill). The last acting transition is
/// treated as terminal. The next-state distributions of a window starting at
/// step `s` come from a forward pass over steps `s+1 ..= s+B`.
pub fn update_batches<'a>(
    model: &StimModel,
    inst: &'a Instance,
    transitions: &[Transition],
) -> Result<Vec<TrainingBatch<'a>>> {
    let acting = transitions.iter().take_while(|t| t.action.is_some()).count();
    if acting == 0 {
        return Ok(Vec::new());
    }
    let b = model.hyper.batch.min(acting);
    let support = model.hyper.support;
    let gamma = model.hyper.gamma;
    let mut batches = Vec::with_capacity(acting - b + 1);
    for k in 0..=acting - b {
        let window = &transitions[k..k + b];
        let start = window[0].step;
        let inputs = window_inputs(&inst.data, start, b);
        let next_q = model.forward(&window_inputs(&inst.data, start + 1, b))?;
        let mut actions = Vec::with_capacity(b);
        let mut targets = Vec::with_capacity(b);
        for (j, tr) in window.iter().enumerate() {
            actions.push(tr.action.expect("acting prefix"));
            let terminal = tr.terminal || k + j + 1 == acting || tr.next_retain.is_empty();
            let target = if terminal {
                project_target(tr.reward, true, next_q.distribution(j, 0), gamma, &support)
            } else {
                let best = tr
                    .next_retain
                    .iter()
                    .map(|&a| a as usize)
                    .fold(None::<(usize, f64)>, |acc, a| {
                        let q = expected_q(next_q.distribution(j, a), &support);
                        match acc {
                            Some((_, bq)) if bq >= q => acc,
                            _ => Some((a, q)),
                        }
                    })
                    .expect("non-empty next mask")
                    .0;
                project_target(tr.reward, false, next_q.distribution(j, best), gamma, &support)
            };
            targets.push(target);
        }
        batches.push(TrainingBatch { inputs, actions, targets });
    }
    Ok(batches)
}
