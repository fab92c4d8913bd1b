//! Action-selection policies.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::diffusion::Observation;
use crate::error::{Error, Result};
use crate::model::{expected_q, trailing_inputs, StimModel};
use crate::nn::Matrix;
use crate::synth::NodeType;
use crate::StimRng;

/// Why a node was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecisionBasis {
    Degree,
    RuleTier(u8),
    ExpectedQ,
    Random,
    NoOp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AgentDecision {
    /// Node to activate; `None` idles for the step.
    pub node: Option<usize>,
    pub basis: DecisionBasis,
}

impl AgentDecision {
    pub const NO_OP: AgentDecision = AgentDecision { node: None, basis: DecisionBasis::NoOp };

    fn pick(node: usize, basis: DecisionBasis) -> Self {
        AgentDecision { node: Some(node), basis }
    }
}

/// A policy that acts on environment observations.
pub trait Policy {
    fn name(&self) -> &str;
    fn decide(&mut self, obs: &Observation<'_>, rng: &mut StimRng) -> Result<AgentDecision>;
}

/// Highest-degree Retain node, lowest id on ties.
fn highest_degree(obs: &Observation<'_>, candidates: impl Iterator<Item = usize>) -> Option<usize> {
    let g = obs.snapshot();
    let mut best: Option<(usize, usize)> = None;
    for i in candidates {
        let d = g.degree(i);
        if best.is_none_or(|(_, bd)| d > bd) {
            best = Some((i, d));
        }
    }
    best.map(|(i, _)| i)
}

/// Activates the Retain node with the highest degree.
pub fn greedy_select(obs: &Observation<'_>) -> AgentDecision {
    match highest_degree(obs, obs.retain_nodes()) {
        Some(i) => AgentDecision::pick(i, DecisionBasis::Degree),
        None => AgentDecision::NO_OP,
    }
}

/// Rule-based policy built on the generator's ground-truth node types:
/// any high-degree cyclic node first, then any neighbor of a cyclic node,
/// then the highest-degree node.
pub fn oracle_select(obs: &Observation<'_>, types: &[NodeType]) -> Result<AgentDecision> {
    if types.len() != obs.states.len() {
        return Err(Error::Shape(alloc::format!("{} node types for {} nodes", types.len(), obs.states.len())));
    }
    for (tier, wanted) in [(1u8, NodeType::CyclicHigh), (2, NodeType::CyclicNeighbor)] {
        if let Some(i) = obs.retain_nodes().find(|&i| types[i] == wanted) {
            return Ok(AgentDecision::pick(i, DecisionBasis::RuleTier(tier)));
        }
    }
    Ok(match highest_degree(obs, obs.retain_nodes()) {
        Some(i) => AgentDecision::pick(i, DecisionBasis::RuleTier(3)),
        None => AgentDecision::NO_OP,
    })
}

/// ε-greedy choice over the Retain mask given per-node expected returns.
pub fn epsilon_greedy(obs: &Observation<'_>, q_values: &[f64], epsilon: f64, rng: &mut StimRng) -> AgentDecision {
    let mask: Vec<usize> = obs.retain_nodes().collect();
    if mask.is_empty() {
        return AgentDecision::NO_OP;
    }
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        let &i = mask.choose(rng).expect("non-empty mask");
        return AgentDecision::pick(i, DecisionBasis::Random);
    }
    let mut best = mask[0];
    for &i in &mask[1..] {
        if q_values[i] > q_values[best] {
            best = i;
        }
    }
    AgentDecision::pick(best, DecisionBasis::ExpectedQ)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct GreedyAgent;

impl Policy for GreedyAgent {
    fn name(&self) -> &str {
        "greedy"
    }

    fn decide(&mut self, obs: &Observation<'_>, _rng: &mut StimRng) -> Result<AgentDecision> {
        Ok(greedy_select(obs))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct OracleAgent;

impl Policy for OracleAgent {
    fn name(&self) -> &str {
        "oracle"
    }

    fn decide(&mut self, obs: &Observation<'_>, _rng: &mut StimRng) -> Result<AgentDecision> {
        let types = obs
            .node_types()
            .ok_or_else(|| Error::Unsupported("the oracle agent needs node type metadata".into()))?;
        oracle_select(obs, types)
    }
}

/// Uniform choice over the Retain set.
#[derive(Debug, Clone, Copy, Default)]
pub struct RandomAgent;

impl Policy for RandomAgent {
    fn name(&self) -> &str {
        "random"
    }

    fn decide(&mut self, obs: &Observation<'_>, rng: &mut StimRng) -> Result<AgentDecision> {
        let mask: Vec<usize> = obs.retain_nodes().collect();
        Ok(match mask.choose(rng) {
            Some(&i) => AgentDecision::pick(i, DecisionBasis::Random),
            None => AgentDecision::NO_OP,
        })
    }
}

/// Never activates anything.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdleAgent;

impl Policy for IdleAgent {
    fn name(&self) -> &str {
        "idle"
    }

    fn decide(&mut self, _obs: &Observation<'_>, _rng: &mut StimRng) -> Result<AgentDecision> {
        Ok(AgentDecision::NO_OP)
    }
}

/// The learned policy: scores every node with the STIM network over the
/// `B` snapshots ending at the current step and acts ε-greedily on the
/// expected returns.
///
/// Node features do not include diffusion states, so the scores depend only
/// on the instance and the step. They are cached under `(instance id, step)`
/// for as long as the agent lives; build a new agent after every parameter
/// update.
#[derive(Debug, Clone)]
pub struct StimAgent<'m> {
    model: &'m StimModel,
    pub epsilon: f64,
    q_cache: BTreeMap<(usize, usize), Vec<f64>>,
    embed_cache: BTreeMap<(usize, usize), Matrix>,
}

impl<'m> StimAgent<'m> {
    pub fn new(model: &'m StimModel, epsilon: f64) -> Self {
        StimAgent { model, epsilon, q_cache: BTreeMap::new(), embed_cache: BTreeMap::new() }
    }

    pub fn model(&self) -> &StimModel {
        self.model
    }

    /// Expected return of every node at the observation's step.
    pub fn q_values(&mut self, obs: &Observation<'_>) -> Result<&[f64]> {
        let key = (obs.instance.id, obs.step);
        if !self.q_cache.contains_key(&key) {
            let data = &obs.instance.data;
            let b = self.model.hyper.batch;
            let inputs = trailing_inputs(data, obs.step, b);
            let mut embeddings = Vec::with_capacity(b);
            for (k, input) in inputs.iter().enumerate() {
                let t = (obs.step + k + 1).saturating_sub(b);
                let ekey = (obs.instance.id, t);
                if !self.embed_cache.contains_key(&ekey) {
                    self.embed_cache.insert(ekey, self.model.embed(input)?);
                }
                embeddings.push(self.embed_cache[&ekey].clone());
            }
            let probs = self.model.forward_last_with_embeddings(&inputs, embeddings)?;
            let support = self.model.hyper.support;
            let q = (0..probs.rows()).map(|i| expected_q(probs.row(i), &support)).collect();
            self.q_cache.insert(key, q);
        }
        Ok(&self.q_cache[&key])
    }
}

impl Policy for StimAgent<'_> {
    fn name(&self) -> &str {
        "stim"
    }

    fn decide(&mut self, obs: &Observation<'_>, rng: &mut StimRng) -> Result<AgentDecision> {
        if obs.retain_nodes().next().is_none() {
            return Ok(AgentDecision::NO_OP);
        }
        let epsilon = self.epsilon;
        if epsilon >= 1.0 {
            return Ok(epsilon_greedy(obs, &[], epsilon, rng));
        }
        let q = self.q_values(obs)?.to_vec();
        Ok(epsilon_greedy(obs, &q, epsilon, rng))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::{Instance, NodeState};
    use crate::graph::{FeatureConfig, PreparedTvg, SnapshotGraph, Tvg};
    use crate::model::{AtomSupport, StimHyper};
    use crate::synth::EpisodeWindow;
    use alloc::vec;

    fn star_instance(types: Option<Vec<NodeType>>) -> Instance {
        // Node 0 has degree 3, node 4 degree 2, others 1 or 2.
        let edges = [(0, 1), (0, 2), (0, 3), (3, 4), (4, 5)];
        let g = SnapshotGraph::from_edges(6, 0, edges.to_vec()).unwrap();
        let g2 = SnapshotGraph::from_edges(6, 1, edges.to_vec()).unwrap();
        let data = PreparedTvg::new(Tvg::new(6, vec![g, g2]).unwrap(), FeatureConfig::default());
        Instance {
            id: 0,
            data,
            cyclic: vec![false; 6],
            node_types: types.map(|t| vec![t.clone(), t]),
            seeds: vec![],
            window: EpisodeWindow { start: 0, length: 1 },
        }
    }

    fn obs<'a>(inst: &'a Instance, states: &'a [NodeState]) -> Observation<'a> {
        Observation { instance: inst, step: 0, states, informed_fraction: 0.0, influence_count: 0 }
    }

    fn states_with(retain: &[usize]) -> Vec<NodeState> {
        let mut s = vec![NodeState::Neutral; 6];
        for &i in retain {
            s[i] = NodeState::Retain;
        }
        s
    }

    #[test]
    fn greedy_examples() {
        let inst = star_instance(None);
        let s = states_with(&[1, 4]);
        assert_eq!(greedy_select(&obs(&inst, &s)).node, Some(4));
        let s = states_with(&[]);
        assert_eq!(greedy_select(&obs(&inst, &s)), AgentDecision::NO_OP);
        // Nodes 3 and 4 both have degree 2: lowest id wins.
        let s = states_with(&[4, 3]);
        assert_eq!(greedy_select(&obs(&inst, &s)).node, Some(3));
    }

    #[test]
    fn oracle_examples() {
        use NodeType::*;
        let types = vec![Hub, Normal, CyclicNeighbor, CyclicHigh, Normal, Hub];
        let inst = star_instance(Some(types));
        let s = states_with(&[0, 2, 3]);
        assert_eq!(OracleAgent.decide(&obs(&inst, &s), &mut crate::rng_from_seed(0)).unwrap().node, Some(3));
        let s = states_with(&[2, 5]);
        assert_eq!(OracleAgent.decide(&obs(&inst, &s), &mut crate::rng_from_seed(0)).unwrap().node, Some(2));
        let s = states_with(&[1, 4]);
        let d = OracleAgent.decide(&obs(&inst, &s), &mut crate::rng_from_seed(0)).unwrap();
        assert_eq!(d, AgentDecision { node: Some(4), basis: DecisionBasis::RuleTier(3) });
    }

    #[test]
    fn oracle_without_types_is_unsupported() {
        let inst = star_instance(None);
        let s = states_with(&[1]);
        let err = OracleAgent.decide(&obs(&inst, &s), &mut crate::rng_from_seed(0)).unwrap_err();
        assert!(matches!(err, Error::Unsupported(_)));
    }

    #[test]
    fn full_exploration_is_uniform() {
        let inst = star_instance(None);
        let s = states_with(&[0, 1, 2, 3, 4, 5]);
        let o = obs(&inst, &s);
        let mut rng = crate::rng_from_seed(11);
        let q = [0.0; 6];
        let mut counts = [0usize; 6];
        let draws = 10_000;
        for _ in 0..draws {
            counts[epsilon_greedy(&o, &q, 1.0, &mut rng).node.unwrap()] += 1;
        }
        let expected = draws as f64 / 6.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // χ²(5) upper 1% quantile.
        assert!(chi2 < 15.086, "chi2 = {chi2}, counts {counts:?}");
    }

    #[test]
    fn singleton_mask_ignores_q() {
        let inst = star_instance(None);
        let s = states_with(&[5]);
        let q = [9.0, 9.0, 9.0, 9.0, 9.0, -9.0];
        let d = epsilon_greedy(&obs(&inst, &s), &q, 0.0, &mut crate::rng_from_seed(0));
        assert_eq!(d.node, Some(5));
    }

    #[test]
    fn argmax_over_hand_set_distributions() {
        let support = AtomSupport::default();
        // 0.65·z_10 + 0.35·z_0 = 0.3; 0.4·z_10 + 0.6·z_0 = -0.2.
        let mut a = [0.0; 11];
        a[10] = 0.65;
        a[0] = 0.35;
        let mut b = [0.0; 11];
        b[10] = 0.4;
        b[0] = 0.6;
        let qa = expected_q(&a, &support);
        let qb = expected_q(&b, &support);
        assert!((qa - 0.3).abs() < 1e-12 && (qb + 0.2).abs() < 1e-12);
        let inst = star_instance(None);
        let s = states_with(&[1, 2]);
        let mut q = [0.0; 6];
        q[1] = qb;
        q[2] = qa;
        let d = epsilon_greedy(&obs(&inst, &s), &q, 0.0, &mut crate::rng_from_seed(0));
        assert_eq!(d, AgentDecision { node: Some(2), basis: DecisionBasis::ExpectedQ });
    }

    #[test]
    fn stim_agent_respects_mask_and_caches() {
        let inst = star_instance(None);
        let hyper = StimHyper { batch: 2, embed_dim: 4, flow_dim: 3, ..StimHyper::default() };
        let model = StimModel::new(hyper, &mut crate::rng_from_seed(3)).unwrap();
        let mut agent = StimAgent::new(&model, 0.0);
        let s = states_with(&[1, 4]);
        let o = obs(&inst, &s);
        let d = agent.decide(&o, &mut crate::rng_from_seed(0)).unwrap();
        assert!(matches!(d.node, Some(1) | Some(4)));
        let q1 = agent.q_values(&o).unwrap().to_vec();
        let direct = model.forward_last(&trailing_inputs(&inst.data, 0, 2)).unwrap();
        for (i, q) in q1.iter().enumerate() {
            assert!((q - expected_q(direct.row(i), &hyper.support)).abs() < 1e-12);
        }
        let o1 = Observation { step: 1, ..o };
        let q2 = agent.q_values(&o1).unwrap().to_vec();
        let direct = model.forward_last(&trailing_inputs(&inst.data, 1, 2)).unwrap();
        for (i, q) in q2.iter().enumerate() {
            assert!((q - expected_q(direct.row(i), &hyper.support)).abs() < 1e-12);
        }
    }
}
