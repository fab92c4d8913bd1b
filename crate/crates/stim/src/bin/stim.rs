use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use stim::bench::{benchmark_timing, fit_samples, size_summary, write_samples};
use stim::checkpoint::{load_checkpoint, Checkpoint};
use stim::config::RunConfig;
use stim::dataset::{dataset_hash, generate_entries, load_dataset, save_dataset, to_instances};
use stim::eval::{confusion_vs_oracle, evaluate, write_report, EpisodeLog};
use stim::ingest::{ingest_temporal_edge_list, Binning, DEFAULT_BINS};
use stim::run::{train_to_dir, write_run_manifest, RunManifest, RUN_MANIFEST_FILE};
use stim::tvg_format::save_tvg;
use stim_core::agents::{GreedyAgent, OracleAgent, Policy, RandomAgent, StimAgent};
use stim_core::graph::FeatureConfig;
use stim_core::synth::SynthConfig;

#[derive(Parser)]
#[command(name = "stim", version, about = "Spatio-temporal influence maximization on time-varying graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum AgentArg {
    Greedy,
    Oracle,
    Stim,
    Random,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic TVG dataset directory.
    Generate {
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 500)]
        nodes_min: usize,
        #[arg(long, default_value_t = 1000)]
        nodes_max: usize,
        #[arg(long, default_value_t = 30)]
        steps_min: usize,
        #[arg(long, default_value_t = 60)]
        steps_max: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a STIM model.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 2000)]
        episodes: usize,
        /// `key = value` configuration; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mean informed fraction of an agent over repeated simulation runs.
    Evaluate {
        #[arg(long, value_enum)]
        agent: AgentArg,
        /// Checkpoint, required for `--agent stim`.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 2000)]
        sims: usize,
        #[arg(long, default_value_t = 5)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        report: PathBuf,
        /// Optional per-step episode log.
        #[arg(long)]
        episode_log: Option<PathBuf>,
    },
    /// Node-type confusion matrix of STIM against the oracle.
    Confusion {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 2000)]
        sims: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert a `SRC DST TIMESTAMP` edge list into a TVG file.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BINS, conflicts_with = "bin_width")]
        bins: usize,
        /// Snapshot width in timestamp units, instead of a bin count.
        #[arg(long)]
        bin_width: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time the forward pass on synthetic TVGs of several sizes.
    Benchmark {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1000,2000,3000,4000,5000")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        reps: usize,
        #[arg(long, default_value_t = 2)]
        attach_edges: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn features_of(ck: &Checkpoint) -> Result<FeatureConfig> {
    Ok(RunConfig { hyper: ck.model.hyper, ..RunConfig::default() }.feature_config()?)
}

fn command_line() -> String {
    std::env::args().collect::<Vec<_>>().join(" ")
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Generate { count, nodes_min, nodes_max, steps_min, steps_max, seed, out } => {
            let base =
                SynthConfig { n_min: nodes_min, n_max: nodes_max, t_min: steps_min, t_max: steps_max, ..SynthConfig::default() };
            let entries = generate_entries(&base, count, seed)?;
            save_dataset(&entries, &out)?;
            println!("wrote {count} TVGs to {}", out.display());
        }
        Command::Train { data, episodes, config, seed, out } => {
            let cfg = match &config {
                Some(p) => RunConfig::load(p)?,
                None => RunConfig::default(),
            };
            let entries = load_dataset(&data)?;
            let instances = to_instances(&entries, cfg.feature_config()?);
            let every = (episodes / 20).max(1);
            let outcome = train_to_dir(&instances, &cfg, episodes, seed, &out, &mut |p| {
                if (p.episode + 1) % every == 0 {
                    eprintln!("episode {:>6}  score {:.4}  avg {:.4}  eps {:.3}", p.episode + 1, p.score, p.moving_avg, p.epsilon);
                }
            })?;
            let hash = dataset_hash(&data)?;
            let cmd = command_line();
            let manifest =
                RunManifest { command: &cmd, seed, dataset: &data, dataset_hash: &hash, episodes, config: &cfg };
            write_run_manifest(&manifest, &out.join(RUN_MANIFEST_FILE))?;
            println!("model written to {}", outcome.model_path.display());
        }
        Command::Evaluate { agent, model, data, sims, instances, seed, report, episode_log } => {
            let entries = load_dataset(&data)?;
            let checkpoint = match (&model, agent) {
                (Some(p), _) => Some(load_checkpoint(p)?),
                (None, AgentArg::Stim) => bail!("--agent stim needs --model"),
                (None, _) => None,
            };
            let features = match &checkpoint {
                Some(ck) => features_of(ck)?,
                None => FeatureConfig::default(),
            };
            let insts = to_instances(&entries, features);
            let cfg = RunConfig::default();
            let mut log = match &episode_log {
                Some(p) => Some(EpisodeLog::new(fs::File::create(p).with_context(|| p.display().to_string())?)?),
                None => None,
            };
            let mut greedy = GreedyAgent;
            let mut oracle = OracleAgent;
            let mut random = RandomAgent;
            let mut stim_agent = checkpoint.as_ref().map(|ck| StimAgent::new(&ck.model, 0.0));
            let policy: &mut dyn Policy = match agent {
                AgentArg::Greedy => &mut greedy,
                AgentArg::Oracle => &mut oracle,
                AgentArg::Random => &mut random,
                AgentArg::Stim => stim_agent.as_mut().expect("checkpoint loaded above"),
            };
            let result = evaluate(policy, &insts, sims, instances, seed, &cfg.diffusion, &mut |id, ep| match &mut log {
                Some(l) => l.append(id, ep),
                None => Ok(()),
            })?;
            if let Some(l) = log {
                l.finish()?;
            }
            write_report(&result, &report)?;
            println!("{}: mean informed fraction {:.6} (std err {:.6})", result.agent, result.mean, result.std_error());
        }
        Command::Confusion { model, data, sims, seed, out } => {
            let ck = load_checkpoint(&model)?;
            let insts = to_instances(&load_dataset(&data)?, features_of(&ck)?);
            let mut agent = StimAgent::new(&ck.model, 0.0);
            let matrix = confusion_vs_oracle(&mut agent, &insts, sims, seed, &RunConfig::default().diffusion)?;
            matrix.write_csv(&out)?;
            println!("{} shared decision points; type-1 column mass {:.4}", matrix.total(), matrix.column_mass(1));
        }
        Command::Ingest { input, bins, bin_width, out } => {
            let binning = match bin_width {
                Some(w) => Binning::Width(w),
                None => Binning::Bins(bins),
            };
            let ing = ingest_temporal_edge_list(&input, binning)?;
            save_tvg(&ing.tvg, &out)?;
            println!(
                "{} nodes, {} temporal edge records ({} self-loops dropped), {} snapshots of width {}",
                ing.tvg.num_nodes(),
                ing.records,
                ing.self_loops,
                ing.tvg.num_steps(),
                ing.bin_width
            );
        }
        Command::Benchmark { model, sizes, reps, attach_edges, seed, out } => {
            if sizes.len() < 2 {
                bail!("--sizes needs at least two values");
            }
            let ck = load_checkpoint(&model)?;
            let samples = benchmark_timing(&ck.model, features_of(&ck)?, &sizes, attach_edges, reps, seed)?;
            let fit = fit_samples(&samples)?;
            write_samples(&samples, &fit, &out)?;
            for s in size_summary(&samples) {
                println!("N={:>6}  |E|={:>9.0}  {:.4}s ± {:.4}s", s.nodes, s.edges, s.mean_seconds, s.std_seconds);
            }
            println!("fit: slope {:.3e} s/edge, intercept {:.4} s, R² {:.4}", fit.slope, fit.intercept, fit.r_squared);
        }
    }
    Ok(())
}
