//! Artificial TVG generator with cyclic nodes.
//!
//! Snapshot 0 is a preferential-attachment graph. A small fraction of nodes is
//! marked cyclic: their degree grows by a fixed fraction of their current
//! connections each step until a high-connectivity threshold, then shrinks
//! back to a low threshold and restarts. Every other node receives small
//! random edge perturbations.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{SnapshotGraph, Tvg};
use crate::math;
use crate::StimRng;

/// Normalized-degree threshold separating low from high connectivity.
pub const HIGH_DEGREE_THRESHOLD: f64 = 0.4;

/// Five-class node taxonomy of the synthetic TVGs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeType {
    /// Normal node with low connectivity and no low cyclic neighbor (type 0).
    Normal = 0,
    /// Cyclic node with low connectivity (type 1).
    CyclicLow = 1,
    /// Normal low-connectivity node adjacent to a type-1 node (type 2).
    CyclicNeighbor = 2,
    /// Normal node with high connectivity (type 3).
    Hub = 3,
    /// Cyclic node with high connectivity (type 4).
    CyclicHigh = 4,
}

impl NodeType {
    pub const ALL: [NodeType; 5] =
        [NodeType::Normal, NodeType::CyclicLow, NodeType::CyclicNeighbor, NodeType::Hub, NodeType::CyclicHigh];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<NodeType> {
        NodeType::ALL.get(i).copied()
    }
}

/// Growth or shrinking phase of a cyclic node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CycleStage {
    Growth,
    Shrinking,
}

/// Per-node metadata at one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeMeta {
    pub is_cyclic: bool,
    /// `Some` for cyclic nodes: the stage applied on the transition out of
    /// this step.
    pub stage: Option<CycleStage>,
    pub node_type: NodeType,
}

/// How the activation window of an episode is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowMode {
    /// Start at `⌊T/2⌋`, run `⌊p_v·T⌋` steps (capped at `T`).
    Fixed,
    /// `k ~ U[1, T/2]`, `q ~ U[5, ⌊p_v·T⌋]`, clipped to the TVG.
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_min: usize,
    pub n_max: usize,
    pub t_min: usize,
    pub t_max: usize,
    pub cyclic_fraction: f64,
    /// Per-TVG perturbation probability is drawn uniformly from this range.
    pub perturb_prob_range: (f64, f64),
    /// Fraction of current connections a cyclic node gains or loses per step.
    pub p_c: f64,
    /// Fraction of `T` covered by the activation window.
    pub p_v: f64,
    /// Seed set size as a fraction of `N` (rounded up).
    pub seed_fraction: f64,
    /// Edges attached per new node in the preferential-attachment phase.
    pub attach_edges: usize,
    /// Normalized degree at which a growing cyclic node starts shrinking.
    pub cycle_high: f64,
    /// Normalized degree at which a shrinking cyclic node starts growing.
    pub cycle_low: f64,
    pub window_mode: WindowMode,
    pub rng_seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_min: 500,
            n_max: 1000,
            t_min: 30,
            t_max: 60,
            cyclic_fraction: 0.02,
            perturb_prob_range: (0.01, 0.07),
            p_c: 0.15,
            p_v: 0.40,
            seed_fraction: 0.02,
            attach_edges: 2,
            cycle_high: 0.6,
            cycle_low: 0.05,
            window_mode: WindowMode::Fixed,
            rng_seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let frac = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidConfig(alloc::format!("{name} = {v} outside [0, 1]")))
            }
        };
        if self.n_min < 3 {
            return Err(Error::InvalidConfig(alloc::format!("n_min = {} < 3", self.n_min)));
        }
        if self.n_min > self.n_max {
            return Err(Error::InvalidConfig("n_min > n_max".into()));
        }
        if self.t_min > self.t_max || self.t_min < 2 {
            return Err(Error::InvalidConfig("need 2 <= t_min <= t_max".into()));
        }
        frac("cyclic_fraction", self.cyclic_fraction)?;
        frac("perturb_prob_range.0", self.perturb_prob_range.0)?;
        frac("perturb_prob_range.1", self.perturb_prob_range.1)?;
        if self.perturb_prob_range.0 > self.perturb_prob_range.1 {
            return Err(Error::InvalidConfig("perturb_prob_range is reversed".into()));
        }
        frac("p_c", self.p_c)?;
        frac("p_v", self.p_v)?;
        frac("seed_fraction", self.seed_fraction)?;
        frac("cycle_high", self.cycle_high)?;
        frac("cycle_low", self.cycle_low)?;
        if self.cycle_low >= self.cycle_high {
            return Err(Error::InvalidConfig("cycle_low must be below cycle_high".into()));
        }
        if self.attach_edges == 0 || self.attach_edges + 1 > self.n_min {
            return Err(Error::InvalidConfig("attach_edges must be in 1..n_min".into()));
        }
        Ok(())
    }

    /// Number of cyclic nodes for a TVG with `n` nodes.
    pub fn cyclic_count(&self, n: usize) -> usize {
        ceil_fraction(self.cyclic_fraction, n)
    }

    /// Seed set size for a TVG with `n` nodes.
    pub fn seed_count(&self, n: usize) -> usize {
        ceil_fraction(self.seed_fraction, n)
    }
}

fn ceil_fraction(f: f64, n: usize) -> usize {
    // Guards against 0.02 * 500 = 10.000000000000002 style round-off.
    (math::ceil(f * n as f64 - 1e-9).max(0.0) as usize).min(n)
}

/// A generated TVG with its ground-truth metadata.
#[derive(Debug, Clone)]
pub struct SyntheticTvg {
    pub tvg: Tvg,
    pub cyclic: Vec<bool>,
    /// `meta[t][i]` for every step and node.
    pub meta: Vec<Vec<NodeMeta>>,
    pub perturb_prob: f64,
    pub seeds: Vec<usize>,
    pub window: EpisodeWindow,
}

impl SyntheticTvg {
    pub fn node_types(&self, t: usize) -> Vec<NodeType> {
        self.meta[t].iter().map(|m| m.node_type).collect()
    }

    pub fn node_type_table(&self) -> Vec<Vec<NodeType>> {
        (0..self.meta.len()).map(|t| self.node_types(t)).collect()
    }
}

/// Steps in which the agent may activate nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpisodeWindow {
    pub start: usize,
    pub length: usize,
}

impl EpisodeWindow {
    #[inline]
    pub fn end(&self) -> usize {
        self.start + self.length
    }
}

/// Fixed window: starts at `⌊T/2⌋` and ends at `min(⌊T/2⌋ + ⌊p_v·T⌋, T)`.
/// A zero-length window is reported as [`Error::Degenerate`].
pub fn valid_window(num_steps: usize, p_v: f64) -> Result<EpisodeWindow> {
    if num_steps < 2 {
        return Err(Error::Degenerate(alloc::format!("T = {num_steps} < 2")));
    }
    let start = num_steps / 2;
    let span = math::floor(p_v * num_steps as f64 + 1e-9) as usize;
    let end = (start + span).min(num_steps);
    let length = end - start;
    if length == 0 {
        return Err(Error::Degenerate(alloc::format!("empty activation window for T = {num_steps}")));
    }
    Ok(EpisodeWindow { start, length })
}

/// Random window: `k ~ U[1, ⌊T/2⌋]`, `q ~ U[5, ⌊p_v·T⌋]`, with `k + q ≤ T`.
pub fn random_window(num_steps: usize, p_v: f64, rng: &mut StimRng) -> Result<EpisodeWindow> {
    if num_steps < 2 {
        return Err(Error::Degenerate(alloc::format!("T = {num_steps} < 2")));
    }
    let start = rng.random_range(1..=num_steps / 2);
    let q_max = (math::floor(p_v * num_steps as f64 + 1e-9) as usize).max(1);
    let q_min = 5.min(q_max);
    let length = rng.random_range(q_min..=q_max).min(num_steps - start);
    if length == 0 {
        return Err(Error::Degenerate("empty activation window".into()));
    }
    Ok(EpisodeWindow { start, length })
}

/// Window according to `mode`.
pub fn episode_window(num_steps: usize, p_v: f64, mode: WindowMode, rng: &mut StimRng) -> Result<EpisodeWindow> {
    match mode {
        WindowMode::Fixed => valid_window(num_steps, p_v),
        WindowMode::Random => random_window(num_steps, p_v, rng),
    }
}

/// Applies the five-class taxonomy to one snapshot.
pub fn classify_nodes(g: &SnapshotGraph, cyclic: &[bool]) -> Vec<NodeType> {
    let n = g.num_nodes();
    assert_eq!(cyclic.len(), n, "cyclic flag vector length");
    let high: Vec<bool> = (0..n).map(|i| g.normalized_degree(i) >= HIGH_DEGREE_THRESHOLD).collect();
    let low_cyclic: Vec<bool> = (0..n).map(|i| cyclic[i] && !high[i]).collect();
    (0..n)
        .map(|i| match (cyclic[i], high[i]) {
            (true, true) => NodeType::CyclicHigh,
            (true, false) => NodeType::CyclicLow,
            (false, true) => NodeType::Hub,
            (false, false) => {
                if g.neighbors(i).iter().any(|&j| low_cyclic[j as usize]) {
                    NodeType::CyclicNeighbor
                } else {
                    NodeType::Normal
                }
            }
        })
        .collect()
}

/// Lowest-degree nodes adjacent to at least one cyclic node (ties by id).
/// When fewer than `count` such nodes exist the remainder is filled with the
/// globally lowest-degree unselected nodes.
pub fn select_seed_set(g0: &SnapshotGraph, cyclic: &[bool], count: usize) -> Vec<usize> {
    let n = g0.num_nodes();
    let count = count.min(n);
    let mut candidates: Vec<usize> =
        (0..n).filter(|&i| g0.neighbors(i).iter().any(|&j| cyclic[j as usize])).collect();
    candidates.sort_by_key(|&i| (g0.degree(i), i));
    candidates.truncate(count);
    if candidates.len() < count {
        let mut taken = vec![false; n];
        candidates.iter().for_each(|&i| taken[i] = true);
        let mut rest: Vec<usize> = (0..n).filter(|&i| !taken[i]).collect();
        rest.sort_by_key(|&i| (g0.degree(i), i));
        candidates.extend(rest.into_iter().take(count - candidates.len()));
    }
    candidates
}

/// Preferential attachment: a clique on `m + 1` nodes, then each new node
/// links to `m` distinct existing nodes chosen proportionally to degree.
pub fn preferential_attachment(n: usize, m: usize, rng: &mut StimRng) -> Vec<Vec<u32>> {
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n];
    let core = (m + 1).min(n);
    // Each endpoint appears once per incident edge.
    let mut endpoints: Vec<u32> = Vec::new();
    for u in 0..core {
        for v in (u + 1)..core {
            adj[u].push(v as u32);
            adj[v].push(u as u32);
            endpoints.push(u as u32);
            endpoints.push(v as u32);
        }
    }
    let mut chosen: Vec<u32> = Vec::with_capacity(m);
    for new in core..n {
        chosen.clear();
        while chosen.len() < m {
            let pick = *endpoints.choose(rng).expect("non-empty endpoint list");
            if !chosen.contains(&pick) {
                chosen.push(pick);
            }
        }
        for &t in &chosen {
            adj[new].push(t);
            adj[t as usize].push(new as u32);
            endpoints.push(t);
            endpoints.push(new as u32);
        }
    }
    for list in adj.iter_mut() {
        list.sort_unstable();
    }
    adj
}

fn insert_sorted(list: &mut Vec<u32>, v: u32) -> bool {
    match list.binary_search(&v) {
        Ok(_) => false,
        Err(pos) => {
            list.insert(pos, v);
            true
        }
    }
}

fn remove_sorted(list: &mut Vec<u32>, v: u32) -> bool {
    match list.binary_search(&v) {
        Ok(pos) => {
            list.remove(pos);
            true
        }
        Err(_) => false,
    }
}

fn add_edge(adj: &mut [Vec<u32>], u: usize, v: usize) -> bool {
    if insert_sorted(&mut adj[u], v as u32) {
        insert_sorted(&mut adj[v], u as u32);
        true
    } else {
        false
    }
}

fn remove_edge(adj: &mut [Vec<u32>], u: usize, v: usize) {
    remove_sorted(&mut adj[u], v as u32);
    remove_sorted(&mut adj[v], u as u32);
}

/// Uniform non-cyclic non-neighbor of `u`, by rejection sampling with a
/// linear-scan fallback. Returns `None` when none exists.
fn random_free_partner(adj: &[Vec<u32>], cyclic: &[bool], u: usize, rng: &mut StimRng) -> Option<usize> {
    let n = adj.len();
    for _ in 0..32 {
        let v = rng.random_range(0..n);
        if v != u && !cyclic[v] && adj[u].binary_search(&(v as u32)).is_err() {
            return Some(v);
        }
    }
    let free: Vec<usize> =
        (0..n).filter(|&v| v != u && !cyclic[v] && adj[u].binary_search(&(v as u32)).is_err()).collect();
    free.choose(rng).copied()
}

fn cyclic_step_size(p_c: f64, degree: usize) -> usize {
    (math::ceil(p_c * degree as f64 - 1e-9) as usize).max(1)
}

/// Generates one TVG with its metadata, seed set and activation window.
///
/// Retries with a fresh draw (up to 64 times) when the instance is
/// degenerate, e.g. its activation window is empty.
pub fn generate_tvg(cfg: &SynthConfig) -> Result<SyntheticTvg> {
    cfg.validate()?;
    let mut rng = crate::rng_from_seed(cfg.rng_seed);
    let mut last_err = Error::Degenerate("no attempt made".into());
    for _ in 0..64 {
        match generate_once(cfg, &mut rng) {
            Ok(s) => return Ok(s),
            Err(e @ Error::Degenerate(_)) => last_err = e,
            Err(e) => return Err(e),
        }
    }
    Err(last_err)
}

fn generate_once(cfg: &SynthConfig, rng: &mut StimRng) -> Result<SyntheticTvg> {
    let n = rng.random_range(cfg.n_min..=cfg.n_max);
    let steps = rng.random_range(cfg.t_min..=cfg.t_max);
    let perturb_prob = rng.random_range(cfg.perturb_prob_range.0..=cfg.perturb_prob_range.1);
    let window = episode_window(steps, cfg.p_v, cfg.window_mode, rng)?;

    let mut adj = preferential_attachment(n, cfg.attach_edges, rng);
    let mut cyclic = vec![false; n];
    let ids: Vec<usize> = (0..n).collect();
    for &i in ids.choose_multiple(rng, cfg.cyclic_count(n)) {
        cyclic[i] = true;
    }
    let cyclic_ids: Vec<usize> = (0..n).filter(|&i| cyclic[i]).collect();
    let mut stage: Vec<Option<CycleStage>> =
        (0..n).map(|i| cyclic[i].then_some(CycleStage::Growth)).collect();

    let norm = |deg: usize| if n > 1 { deg as f64 / (n - 1) as f64 } else { 0.0 };
    let mut snapshots = Vec::with_capacity(steps);
    let mut meta = Vec::with_capacity(steps);
    for t in 0..steps {
        // Decide the stage applied on the transition out of step t.
        for &c in &cyclic_ids {
            let d = norm(adj[c].len());
            stage[c] = match stage[c] {
                Some(CycleStage::Growth) if d >= cfg.cycle_high => Some(CycleStage::Shrinking),
                Some(CycleStage::Shrinking) if d <= cfg.cycle_low => Some(CycleStage::Growth),
                s => s,
            };
        }
        let g = SnapshotGraph::from_adjacency_lists(t, adj.clone());
        let types = classify_nodes(&g, &cyclic);
        meta.push(
            (0..n)
                .map(|i| NodeMeta { is_cyclic: cyclic[i], stage: stage[i], node_type: types[i] })
                .collect::<Vec<_>>(),
        );
        snapshots.push(g);
        if t + 1 == steps {
            break;
        }

        // Normal nodes: one add-or-delete on a non-cyclic edge with probability p.
        for u in 0..n {
            if cyclic[u] || !rng.random_bool(perturb_prob) {
                continue;
            }
            if rng.random_bool(0.5) {
                if let Some(v) = random_free_partner(&adj, &cyclic, u, rng) {
                    add_edge(&mut adj, u, v);
                }
            } else {
                let normal_nb: Vec<u32> = adj[u].iter().copied().filter(|&v| !cyclic[v as usize]).collect();
                if let Some(&v) = normal_nb.choose(rng) {
                    remove_edge(&mut adj, u, v as usize);
                }
            }
        }

        // Cyclic nodes: gain or lose p_c of their connections (at least one).
        for &c in &cyclic_ids {
            let k = cyclic_step_size(cfg.p_c, adj[c].len());
            match stage[c] {
                Some(CycleStage::Growth) => {
                    for _ in 0..k {
                        match random_free_partner(&adj, &cyclic, c, rng) {
                            Some(v) => {
                                add_edge(&mut adj, c, v);
                            }
                            None => break,
                        }
                    }
                }
                Some(CycleStage::Shrinking) => {
                    let mut normal_nb: Vec<u32> =
                        adj[c].iter().copied().filter(|&v| !cyclic[v as usize]).collect();
                    // Keep at least one edge.
                    let removable = k.min(adj[c].len().saturating_sub(1)).min(normal_nb.len());
                    for _ in 0..removable {
                        let idx = rng.random_range(0..normal_nb.len());
                        let v = normal_nb.swap_remove(idx);
                        remove_edge(&mut adj, c, v as usize);
                    }
                }
                None => unreachable!("cyclic node without stage"),
            }
        }
    }

    let tvg = Tvg::new(n, snapshots)?;
    let seeds = select_seed_set(tvg.snapshot(0), &cyclic, cfg.seed_count(n));
    if seeds.is_empty() {
        return Err(Error::Degenerate("empty seed set".into()));
    }
    Ok(SyntheticTvg { tvg, cyclic, meta, perturb_prob, seeds, window })
}
