//! Stochastic diffusion environment.
//!
//! Nodes are Neutral, Retain or Informed. Each step the agent activates one
//! Retain node; it becomes Informed and every Neutral neighbor independently
//! moves to Retain with the transmission probability `φ`. The score of an
//! episode is the informed fraction at the end of the activation window.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::agents::Policy;
use crate::error::{Error, Result};
use crate::graph::{FeatureConfig, PreparedTvg, SnapshotGraph};
use crate::math;
use crate::synth::{EpisodeWindow, NodeType, SyntheticTvg};
use crate::StimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeState {
    Neutral,
    Retain,
    Informed,
}

/// Cap on the degree ratio `μ` for isolated receivers or overflowing ratios.
pub const MU_MAX: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionConfig {
    /// Diffusion rate `ψ`.
    pub psi: f64,
    /// Transmission multiplier towards cyclic receivers.
    pub m_c: f64,
    /// Clamp `φ` to `[0, 1]`.
    pub clamp_phi: bool,
    /// Test hook: replaces `φ` by a constant.
    pub forced_phi: Option<f64>,
}

impl Default for DiffusionConfig {
    fn default() -> Self {
        DiffusionConfig { psi: 0.002, m_c: 3.0, clamp_phi: true, forced_phi: None }
    }
}

impl DiffusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.psi > 0.0) {
            return Err(Error::InvalidConfig(alloc::format!("psi = {} must be positive", self.psi)));
        }
        if !(self.m_c >= 1.0) {
            return Err(Error::InvalidConfig(alloc::format!("m_c = {} must be >= 1", self.m_c)));
        }
        Ok(())
    }
}

/// `φ_ij = ψ·e^μ` (times `m_c` for cyclic receivers) with `μ = d_i / d_j`
/// on normalized degrees.
pub fn transmission_probability(d_sender: f64, d_receiver: f64, receiver_cyclic: bool, cfg: &DiffusionConfig) -> f64 {
    if let Some(p) = cfg.forced_phi {
        return p;
    }
    let ratio = d_sender / d_receiver;
    let mu = if d_receiver <= 0.0 || !ratio.is_finite() { MU_MAX } else { ratio };
    let mut phi = cfg.psi * math::exp(mu);
    if receiver_cyclic {
        phi *= cfg.m_c;
    }
    if cfg.clamp_phi {
        phi = phi.clamp(0.0, 1.0);
    }
    phi
}

/// Neutral nodes adjacent to at least one Retain node.
pub fn influence_count(g: &SnapshotGraph, states: &[NodeState]) -> usize {
    assert_eq!(states.len(), g.num_nodes(), "state vector length");
    (0..g.num_nodes())
        .filter(|&i| {
            states[i] == NodeState::Neutral
                && g.neighbors(i).iter().any(|&j| states[j as usize] == NodeState::Retain)
        })
        .count()
}

/// One TVG together with everything an episode on it needs.
#[derive(Debug, Clone)]
pub struct Instance {
    /// Position in its dataset; used to key per-instance caches and replay.
    pub id: usize,
    pub data: PreparedTvg,
    pub cyclic: Vec<bool>,
    /// Ground-truth node types per step, synthetic TVGs only.
    pub node_types: Option<Vec<Vec<NodeType>>>,
    pub seeds: Vec<usize>,
    pub window: EpisodeWindow,
}

impl Instance {
    /// Wraps a generated TVG, keeping its ground-truth node types.
    pub fn from_synthetic(id: usize, syn: &SyntheticTvg, features: FeatureConfig) -> Self {
        Instance {
            id,
            data: PreparedTvg::new(syn.tvg.clone(), features),
            cyclic: syn.cyclic.clone(),
            node_types: Some(syn.node_type_table()),
            seeds: syn.seeds.clone(),
            window: syn.window,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.data.num_nodes()
    }

    pub fn node_types_at(&self, t: usize) -> Option<&[NodeType]> {
        self.node_types.as_ref().map(|table| table[t].as_slice())
    }
}

/// Read-only view of the environment handed to agents.
#[derive(Debug, Clone, Copy)]
pub struct Observation<'a> {
    pub instance: &'a Instance,
    pub step: usize,
    pub states: &'a [NodeState],
    pub informed_fraction: f64,
    pub influence_count: usize,
}

impl<'a> Observation<'a> {
    pub fn snapshot(&self) -> &'a SnapshotGraph {
        self.instance.data.tvg().snapshot(self.step)
    }

    #[inline]
    pub fn is_retain(&self, node: usize) -> bool {
        self.states[node] == NodeState::Retain
    }

    /// Action mask: Retain nodes in increasing id order.
    pub fn retain_nodes(&self) -> impl Iterator<Item = usize> + 'a {
        let states = self.states;
        (0..states.len()).filter(move |&i| states[i] == NodeState::Retain)
    }

    pub fn node_types(&self) -> Option<&'a [NodeType]> {
        self.instance.node_types_at(self.step)
    }
}

/// Running min/max normalization of the two reward terms.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardNormalizer {
    pub w_dif: f64,
    pub w_inf: f64,
    /// `(min, max)` of the diffusion term seen so far.
    pub dif_bounds: Option<(f64, f64)>,
    /// `(min, max)` of the influence term seen so far.
    pub inf_bounds: Option<(f64, f64)>,
    /// When set, bounds are not updated and out-of-range samples are clipped.
    pub frozen: bool,
}

impl Default for RewardNormalizer {
    fn default() -> Self {
        RewardNormalizer { w_dif: 1.0, w_inf: 0.5, dif_bounds: None, inf_bounds: None, frozen: false }
    }
}

fn widen(bounds: &mut Option<(f64, f64)>, v: f64) {
    *bounds = Some(match *bounds {
        None => (v, v),
        Some((lo, hi)) => (lo.min(v), hi.max(v)),
    });
}

fn unit_scale(bounds: Option<(f64, f64)>, v: f64) -> f64 {
    match bounds {
        Some((lo, hi)) if hi > lo => ((v - lo) / (hi - lo)).clamp(0.0, 1.0),
        _ => 0.0,
    }
}

impl RewardNormalizer {
    pub fn frozen_copy(&self) -> Self {
        RewardNormalizer { frozen: true, ..self.clone() }
    }

    /// Updates the bounds (unless frozen) and returns the final reward in
    /// `[0, 1]`.
    pub fn reward(&mut self, dif: f64, inf: f64) -> f64 {
        if !self.frozen {
            widen(&mut self.dif_bounds, dif);
            widen(&mut self.inf_bounds, inf);
        }
        let dif_norm = self.w_dif * unit_scale(self.dif_bounds, dif);
        let inf_norm = self.w_inf * unit_scale(self.inf_bounds, inf);
        let total = self.w_dif + self.w_inf;
        if total > 0.0 {
            ((dif_norm + inf_norm) / total).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }
}

/// Scalars the reward is computed from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub informed_fraction: f64,
    /// Influence count divided by `N`.
    pub influence_fraction: f64,
}

impl From<&Observation<'_>> for StepStats {
    fn from(o: &Observation<'_>) -> Self {
        StepStats {
            informed_fraction: o.informed_fraction,
            influence_fraction: o.influence_count as f64 / o.states.len().max(1) as f64,
        }
    }
}

/// Influence reward between two consecutive observations.
pub fn compute_reward(prev: StepStats, next: StepStats, norm: &mut RewardNormalizer) -> f64 {
    norm.reward(
        next.informed_fraction - prev.informed_fraction,
        next.influence_fraction - prev.influence_fraction,
    )
}

/// Mutable state of one episode.
#[derive(Debug, Clone)]
pub struct DiffusionEnv<'a> {
    instance: &'a Instance,
    cfg: DiffusionConfig,
    window: EpisodeWindow,
    step: usize,
    states: Vec<NodeState>,
    informed: usize,
    influence: usize,
    steps_taken: usize,
}

/// Result of one environment step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub newly_retained: usize,
    pub done: bool,
}

impl<'a> DiffusionEnv<'a> {
    /// Places the seed set in Retain and fast-forwards to the window start
    /// (states cannot change before the first activation).
    pub fn new(instance: &'a Instance, cfg: DiffusionConfig, window: EpisodeWindow) -> Result<Self> {
        let t = instance.data.num_steps();
        if window.length == 0 || window.end() > t {
            return Err(Error::Contract(alloc::format!("window {window:?} does not fit T = {t}")));
        }
        let n = instance.num_nodes();
        let mut states = vec![NodeState::Neutral; n];
        for &s in &instance.seeds {
            states[s] = NodeState::Retain;
        }
        let mut env =
            DiffusionEnv { instance, cfg, window, step: window.start, states, informed: 0, influence: 0, steps_taken: 0 };
        env.influence = influence_count(env.current_snapshot(), &env.states);
        Ok(env)
    }

    fn current_snapshot(&self) -> &'a SnapshotGraph {
        let t = self.step.min(self.instance.data.num_steps() - 1);
        self.instance.data.tvg().snapshot(t)
    }

    pub fn observation(&self) -> Observation<'_> {
        Observation {
            instance: self.instance,
            step: self.step.min(self.instance.data.num_steps() - 1),
            states: &self.states,
            informed_fraction: self.informed as f64 / self.states.len() as f64,
            influence_count: self.influence,
        }
    }

    pub fn states(&self) -> &[NodeState] {
        &self.states
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn is_done(&self) -> bool {
        self.steps_taken >= self.window.length
    }

    pub fn informed_count(&self) -> usize {
        self.informed
    }

    /// Activates `node` (or idles when `None`) on the current snapshot, then
    /// advances one step.
    pub fn step(&mut self, node: Option<usize>, rng: &mut StimRng) -> Result<StepOutcome> {
        if self.is_done() {
            return Err(Error::Contract("episode window already exhausted".into()));
        }
        let mut newly_retained = 0;
        if let Some(node) = node {
            if node >= self.states.len() || self.states[node] != NodeState::Retain {
                return Err(Error::Contract(alloc::format!("node {node} is not in Retain state")));
            }
            let g = self.current_snapshot();
            let d_sender = g.normalized_degree(node);
            self.states[node] = NodeState::Informed;
            self.informed += 1;
            for &j in g.neighbors(node) {
                let j = j as usize;
                if self.states[j] != NodeState::Neutral {
                    continue;
                }
                let phi =
                    transmission_probability(d_sender, g.normalized_degree(j), self.instance.cyclic[j], &self.cfg);
                if rng.random::<f64>() < phi {
                    self.states[j] = NodeState::Retain;
                    newly_retained += 1;
                }
            }
        }
        self.step += 1;
        self.steps_taken += 1;
        self.influence = influence_count(self.current_snapshot(), &self.states);
        Ok(StepOutcome { newly_retained, done: self.is_done() })
    }
}

/// One recorded step of an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    /// Snapshot index at which the action was taken.
    pub step: usize,
    pub action: Option<usize>,
    pub action_type: Option<NodeType>,
    pub reward: f64,
    pub terminal: bool,
    pub informed_fraction: f64,
    pub influence_count: usize,
    /// Retain nodes after the step: the action mask of the next state.
    pub next_retain: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub instance_id: usize,
    pub window: EpisodeWindow,
    pub transitions: Vec<Transition>,
    /// Final informed fraction.
    pub score: f64,
}

/// Runs one episode of `policy` on `instance` over `window`.
pub fn run_episode(
    instance: &Instance,
    window: EpisodeWindow,
    policy: &mut dyn Policy,
    cfg: &DiffusionConfig,
    normalizer: &mut RewardNormalizer,
    rng: &mut StimRng,
) -> Result<Episode> {
    let mut env = DiffusionEnv::new(instance, *cfg, window)?;
    let mut transitions = Vec::with_capacity(window.length);
    while !env.is_done() {
        let obs = env.observation();
        let prev = StepStats::from(&obs);
        let step = obs.step;
        let decision = policy.decide(&obs, rng)?;
        let action = decision.node;
        let action_type = action.and_then(|a| instance.node_types_at(step).map(|t| t[a]));
        env.step(action, rng)?;
        let next = env.observation();
        let reward = compute_reward(prev, StepStats::from(&next), normalizer);
        transitions.push(Transition {
            step,
            action,
            action_type,
            reward,
            terminal: env.is_done(),
            informed_fraction: next.informed_fraction,
            influence_count: next.influence_count,
            next_retain: next.retain_nodes().map(|i| i as u32).collect(),
        });
    }
    let score = env.observation().informed_fraction;
    Ok(Episode { instance_id: instance.id, window, transitions, score })
}
