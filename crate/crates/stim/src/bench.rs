//! Inference timing of the STIM forward pass against snapshot edge count.

use std::path::Path;
use std::time::Instant;

use stim_core::graph::{FeatureConfig, PreparedTvg};
use stim_core::model::{window_inputs, StimModel};
use stim_core::split_seed;
use stim_core::synth::{generate_tvg, SynthConfig};

use crate::error::{io_err, Result, StimError};

/// One timed batch forward pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingSample {
    pub nodes: usize,
    /// Mean undirected edge count over the batch's snapshots.
    pub edges: f64,
    pub attach_edges: usize,
    pub rep: usize,
    pub seconds: f64,
}

/// Ordinary least-squares line `seconds ≈ slope·edges + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(points: &[(f64, f64)]) -> Result<LinearFit> {
    if points.len() < 2 {
        return Err(StimError::Format("a line fit needs at least two points".into()));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(StimError::Format("all x values are equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = points.iter().map(|p| (p.1 - slope * p.0 - intercept).powi(2)).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(LinearFit { slope, intercept, r_squared })
}

/// A synthetic TVG with exactly `nodes` nodes and `steps` snapshots.
pub fn timing_tvg(nodes: usize, steps: usize, attach_edges: usize, seed: u64, features: FeatureConfig) -> Result<PreparedTvg> {
    let cfg = SynthConfig {
        n_min: nodes,
        n_max: nodes,
        t_min: steps,
        t_max: steps,
        attach_edges,
        rng_seed: seed,
        ..SynthConfig::default()
    };
    Ok(PreparedTvg::new(generate_tvg(&cfg)?.tvg, features))
}

/// Times `reps` forward passes over one batch of `B` snapshots for a TVG of
/// each size. Feature preparation is excluded; only inference is timed.
pub fn benchmark_timing(
    model: &StimModel,
    features: FeatureConfig,
    sizes: &[usize],
    attach_edges: usize,
    reps: usize,
    seed: u64,
) -> Result<Vec<TimingSample>> {
    let b = model.hyper.batch;
    let mut samples = Vec::with_capacity(sizes.len() * reps);
    for (k, &nodes) in sizes.iter().enumerate() {
        let data = timing_tvg(nodes, b.max(4), attach_edges, split_seed(seed, k as u64), features)?;
        let edges = (0..b).map(|t| data.tvg().snapshot(t).num_edges()).sum::<usize>() as f64 / b as f64;
        let inputs = window_inputs(&data, 0, b);
        // Warm-up pass so that allocation effects do not land on rep 0.
        std::hint::black_box(model.forward(&inputs)?);
        for rep in 0..reps {
            let start = Instant::now();
            std::hint::black_box(model.forward(&inputs)?);
            samples.push(TimingSample { nodes, edges, attach_edges, rep, seconds: start.elapsed().as_secs_f64() });
        }
    }
    Ok(samples)
}

/// Fit over the per-size mean times.
pub fn fit_samples(samples: &[TimingSample]) -> Result<LinearFit> {
    let points: Vec<(f64, f64)> = size_summary(samples).iter().map(|s| (s.edges, s.mean_seconds)).collect();
    linear_fit(&points)
}

/// Mean and standard deviation of repeated runs at one size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SizeSummary {
    pub nodes: usize,
    pub attach_edges: usize,
    pub edges: f64,
    pub mean_seconds: f64,
    pub std_seconds: f64,
}

pub fn size_summary(samples: &[TimingSample]) -> Vec<SizeSummary> {
    let mut out: Vec<SizeSummary> = Vec::new();
    let mut groups: Vec<Vec<&TimingSample>> = Vec::new();
    for s in samples {
        match out.iter().position(|o| o.nodes == s.nodes && o.attach_edges == s.attach_edges) {
            Some(i) => groups[i].push(s),
            None => {
                out.push(SizeSummary {
                    nodes: s.nodes,
                    attach_edges: s.attach_edges,
                    edges: s.edges,
                    mean_seconds: 0.0,
                    std_seconds: 0.0,
                });
                groups.push(vec![s]);
            }
        }
    }
    for (o, g) in out.iter_mut().zip(&groups) {
        let n = g.len() as f64;
        o.mean_seconds = g.iter().map(|s| s.seconds).sum::<f64>() / n;
        o.std_seconds = (g.iter().map(|s| (s.seconds - o.mean_seconds).powi(2)).sum::<f64>() / n).sqrt();
    }
    out
}

pub fn write_samples(samples: &[TimingSample], fit: &LinearFit, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["nodes", "edges", "attach_edges", "rep", "seconds"])?;
    for s in samples {
        w.write_record([
            s.nodes.to_string(),
            s.edges.to_string(),
            s.attach_edges.to_string(),
            s.rep.to_string(),
            s.seconds.to_string(),
        ])?;
    }
    w.flush().map_err(io_err(path))?;
    drop(w);
    let fit_path = path.with_extension("fit.csv");
    let mut w = csv::Writer::from_path(&fit_path)?;
    w.write_record(["slope", "intercept", "r_squared"])?;
    w.write_record([fit.slope.to_string(), fit.intercept.to_string(), fit.r_squared.to_string()])?;
    w.flush().map_err(io_err(&fit_path))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use stim_core::model::StimHyper;
    use stim_core::rng_from_seed;

    #[test]
    fn exact_line_has_unit_r_squared() {
        let pts: Vec<(f64, f64)> = (0..6).map(|i| (i as f64 * 1000.0, 0.5 + 2e-4 * i as f64 * 1000.0)).collect();
        let fit = linear_fit(&pts).unwrap();
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!((fit.slope - 2e-4).abs() < 1e-15);
        assert!((fit.intercept - 0.5).abs() < 1e-12);
    }

    #[test]
    fn constant_x_is_rejected() {
        assert!(linear_fit(&[(1.0, 1.0), (1.0, 2.0)]).is_err());
        assert!(linear_fit(&[(1.0, 1.0)]).is_err());
    }

    #[test]
    fn repeated_sizes_give_positive_times_and_spread() {
        let hyper = StimHyper { embed_dim: 8, flow_dim: 4, batch: 2, ..StimHyper::default() };
        let model = StimModel::new(hyper, &mut rng_from_seed(0)).unwrap();
        let samples = benchmark_timing(&model, FeatureConfig::default(), &[60, 60, 120], 2, 3, 1).unwrap();
        assert_eq!(samples.len(), 9);
        assert!(samples.iter().all(|s| s.seconds > 0.0 && s.edges > 0.0));
        let summary = size_summary(&samples);
        assert_eq!(summary.len(), 2);
        assert!(summary.iter().all(|s| s.std_seconds >= 0.0 && s.std_seconds.is_finite()));
    }
}
