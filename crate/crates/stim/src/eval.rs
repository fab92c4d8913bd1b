//! Evaluation harness: mean informed fraction per agent, per-TVG means and
//! the type confusion matrix against the oracle.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use stim_core::agents::{OracleAgent, Policy};
use stim_core::diffusion::{run_episode, DiffusionConfig, DiffusionEnv, Episode, Instance, RewardNormalizer};
use stim_core::synth::NodeType;
use stim_core::{rng_from_seed, split_seed, Error as CoreError};

use crate::error::{io_err, Result, StimError};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub agent: String,
    /// Simulations per repeat.
    pub simulations: usize,
    pub seed: u64,
    /// Mean score of each repeat.
    pub repeat_means: Vec<f64>,
    /// Mean of the repeat means.
    pub mean: f64,
    /// Standard deviation of single-simulation scores over all repeats.
    pub std_dev: f64,
}

impl EvalReport {
    /// Standard error of `mean` treating every simulation as independent.
    pub fn std_error(&self) -> f64 {
        let total = (self.simulations * self.repeat_means.len()).max(1) as f64;
        self.std_dev / total.sqrt()
    }
}

fn stream_seed(seed: u64, repeat: usize, sim: usize) -> u64 {
    split_seed(split_seed(seed, repeat as u64), sim as u64)
}

/// Runs `repeats × sims` episodes of `policy`; each simulation draws its TVG
/// uniformly from `instances` and plays that TVG's episode window.
///
/// `on_episode` sees every finished episode with its global index.
pub fn evaluate(
    policy: &mut dyn Policy,
    instances: &[Instance],
    sims: usize,
    repeats: usize,
    seed: u64,
    diffusion: &DiffusionConfig,
    on_episode: &mut dyn FnMut(usize, &Episode) -> Result<()>,
) -> Result<EvalReport> {
    if instances.is_empty() || sims == 0 || repeats == 0 {
        return Err(StimError::Format("evaluation needs instances, sims > 0 and repeats > 0".into()));
    }
    let mut normalizer = RewardNormalizer::default().frozen_copy();
    let mut repeat_means = Vec::with_capacity(repeats);
    let (mut sum, mut sum_sq, mut count) = (0.0, 0.0, 0usize);
    for r in 0..repeats {
        let mut acc = 0.0;
        for s in 0..sims {
            let mut rng = rng_from_seed(stream_seed(seed, r, s));
            let inst = &instances[rng.random_range(0..instances.len())];
            let ep = run_episode(inst, inst.window, policy, diffusion, &mut normalizer, &mut rng)?;
            on_episode(r * sims + s, &ep)?;
            acc += ep.score;
            sum += ep.score;
            sum_sq += ep.score * ep.score;
            count += 1;
        }
        repeat_means.push(acc / sims as f64);
    }
    let mean = repeat_means.iter().sum::<f64>() / repeats as f64;
    let overall = sum / count as f64;
    let std_dev = (sum_sq / count as f64 - overall * overall).max(0.0).sqrt();
    Ok(EvalReport { agent: policy.name().to_string(), simulations: sims, seed, repeat_means, mean, std_dev })
}

/// Mean score of `sims` episodes on one TVG.
pub fn evaluate_instance(
    policy: &mut dyn Policy,
    inst: &Instance,
    sims: usize,
    seed: u64,
    diffusion: &DiffusionConfig,
) -> Result<f64> {
    let report = evaluate(policy, std::slice::from_ref(inst), sims, 1, seed, diffusion, &mut |_, _| Ok(()))?;
    Ok(report.mean)
}

pub fn write_report(report: &EvalReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["agent", "seed", "repeat", "simulations", "mean_informed_fraction"])?;
    for (r, m) in report.repeat_means.iter().enumerate() {
        w.write_record([&report.agent, &report.seed.to_string(), &r.to_string(), &report.simulations.to_string(), &m.to_string()])?;
    }
    w.write_record([
        &report.agent,
        &report.seed.to_string(),
        "all",
        &(report.simulations * report.repeat_means.len()).to_string(),
        &report.mean.to_string(),
    ])?;
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Episode log CSV writer (`episode_id, step, chosen_node, chosen_node_type,
/// reward, informed_fraction, influence_count`).
pub struct EpisodeLog<W: Write> {
    writer: csv::Writer<W>,
}

impl<W: Write> EpisodeLog<W> {
    pub fn new(out: W) -> Result<Self> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record([
            "episode_id",
            "step",
            "chosen_node",
            "chosen_node_type",
            "reward",
            "informed_fraction",
            "influence_count",
        ])?;
        Ok(EpisodeLog { writer })
    }

    pub fn append(&mut self, episode_id: usize, ep: &Episode) -> Result<()> {
        for t in &ep.transitions {
            self.writer.write_record([
                episode_id.to_string(),
                t.step.to_string(),
                t.action.map(|a| a.to_string()).unwrap_or_default(),
                t.action_type.map(|ty| ty.index().to_string()).unwrap_or_default(),
                t.reward.to_string(),
                t.informed_fraction.to_string(),
                t.influence_count.to_string(),
            ])?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.writer.flush().map_err(|e| StimError::Io { path: "episode log".into(), source: e })
    }
}

/// Tallies of (oracle type, agent type) over shared decision points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix5 {
    pub counts: [[u64; 5]; 5],
}

impl ConfusionMatrix5 {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Entry `(i, j)` as a fraction of all decision points.
    pub fn fractions(&self) -> [[f64; 5]; 5] {
        let total = self.total().max(1) as f64;
        self.counts.map(|row| row.map(|c| c as f64 / total))
    }

    pub fn column_mass(&self, j: usize) -> f64 {
        self.fractions().iter().map(|row| row[j]).sum()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["oracle_type", "agent_type_0", "agent_type_1", "agent_type_2", "agent_type_3", "agent_type_4"])?;
        for (i, row) in self.fractions().iter().enumerate() {
            let mut rec = vec![i.to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(io_err(path))?;
        Ok(())
    }
}

/// Drives episodes with `agent` and, at every state where both act, asks the
/// oracle what it would have chosen in that same state.
pub fn confusion_vs_oracle(
    agent: &mut dyn Policy,
    instances: &[Instance],
    sims: usize,
    seed: u64,
    diffusion: &DiffusionConfig,
) -> Result<ConfusionMatrix5> {
    if instances.is_empty() {
        return Err(StimError::Format("confusion matrix needs at least one TVG".into()));
    }
    let mut matrix = ConfusionMatrix5::default();
    let mut oracle = OracleAgent;
    let mut oracle_rng = rng_from_seed(0);
    for s in 0..sims {
        let mut rng = rng_from_seed(stream_seed(seed, 0, s));
        let inst = &instances[rng.random_range(0..instances.len())];
        let mut env = DiffusionEnv::new(inst, *diffusion, inst.window)?;
        while !env.is_done() {
            let obs = env.observation();
            let types: &[NodeType] = obs
                .node_types()
                .ok_or_else(|| CoreError::Unsupported("confusion matrix needs node type metadata".into()))?;
            let chosen = agent.decide(&obs, &mut rng)?;
            let reference = oracle.decide(&obs, &mut oracle_rng)?;
            if let (Some(a), Some(o)) = (chosen.node, reference.node) {
                matrix.counts[types[o].index()][types[a].index()] += 1;
            }
            env.step(chosen.node, &mut rng)?;
        }
    }
    Ok(matrix)
}
