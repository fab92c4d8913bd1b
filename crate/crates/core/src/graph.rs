//! Time-varying graph model: fixed node set, one sparse symmetric snapshot
//! per step, plus the per-snapshot kernels the rest of the crate consumes.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::nn::Matrix;

/// Undirected simple graph over nodes `0..N`, stored as sorted adjacency
/// lists in compressed-row form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnapshotGraph {
    step: usize,
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
}

impl SnapshotGraph {
    /// Builds a snapshot from an undirected edge list. Duplicate and reversed
    /// edges collapse to one; self-loops and out-of-range endpoints are
    /// rejected.
    pub fn from_edges(
        num_nodes: usize,
        step: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut adj: Vec<Vec<u32>> = vec![Vec::new(); num_nodes];
        for (u, v) in edges {
            if u >= num_nodes || v >= num_nodes {
                return Err(Error::InvalidGraph(alloc::format!(
                    "edge ({u},{v}) outside node range 0..{num_nodes}"
                )));
            }
            if u == v {
                return Err(Error::InvalidGraph(alloc::format!("self-loop on node {u}")));
            }
            adj[u].push(v as u32);
            adj[v].push(u as u32);
        }
        Ok(Self::from_adjacency_lists(step, adj))
    }

    /// Freezes per-node neighbor lists. Lists are sorted and deduplicated;
    /// the caller guarantees symmetry and absence of self-loops.
    pub fn from_adjacency_lists(step: usize, mut adj: Vec<Vec<u32>>) -> Self {
        let mut offsets = Vec::with_capacity(adj.len() + 1);
        offsets.push(0);
        let total: usize = adj.iter().map(Vec::len).sum();
        let mut neighbors = Vec::with_capacity(total);
        for list in adj.iter_mut() {
            list.sort_unstable();
            list.dedup();
            neighbors.extend_from_slice(list);
            offsets.push(neighbors.len());
        }
        SnapshotGraph { step, offsets, neighbors }
    }

    pub fn empty(num_nodes: usize, step: usize) -> Self {
        SnapshotGraph { step, offsets: vec![0; num_nodes + 1], neighbors: Vec::new() }
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Number of undirected edges.
    #[inline]
    pub fn num_edges(&self) -> usize {
        self.neighbors.len() / 2
    }

    #[inline]
    pub fn step_index(&self) -> usize {
        self.step
    }

    pub(crate) fn set_step_index(&mut self, step: usize) {
        self.step = step;
    }

    #[inline]
    pub fn neighbors(&self, node: usize) -> &[u32] {
        &self.neighbors[self.offsets[node]..self.offsets[node + 1]]
    }

    #[inline]
    pub fn degree(&self, node: usize) -> usize {
        self.offsets[node + 1] - self.offsets[node]
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.num_nodes()).map(|i| self.degree(i)).collect()
    }

    /// Degree divided by `N − 1` (0 for single-node graphs).
    #[inline]
    pub fn normalized_degree(&self, node: usize) -> f64 {
        let n = self.num_nodes();
        if n <= 1 {
            0.0
        } else {
            self.degree(node) as f64 / (n - 1) as f64
        }
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&(v as u32)).is_ok()
    }

    /// Iterates undirected edges once each as `(u, v)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_nodes()).flat_map(move |u| {
            self.neighbors(u).iter().map(|&v| v as usize).filter(move |&v| u < v).map(move |v| (u, v))
        })
    }

    /// Checks symmetry, ordering and the no-self-loop invariant.
    pub fn validate(&self) -> Result<()> {
        let n = self.num_nodes();
        for u in 0..n {
            let nb = self.neighbors(u);
            for w in nb.windows(2) {
                if w[0] >= w[1] {
                    return Err(Error::InvalidGraph(alloc::format!("unsorted or duplicate neighbors at {u}")));
                }
            }
            for &v in nb {
                let v = v as usize;
                if v >= n || v == u || !self.has_edge(v, u) {
                    return Err(Error::InvalidGraph(alloc::format!("asymmetric or invalid edge ({u},{v})")));
                }
            }
        }
        Ok(())
    }
}

/// Time-varying graph: `T` snapshots over a fixed set of `N` nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tvg {
    num_nodes: usize,
    snapshots: Vec<SnapshotGraph>,
}

impl Tvg {
    pub fn new(num_nodes: usize, mut snapshots: Vec<SnapshotGraph>) -> Result<Self> {
        if snapshots.is_empty() {
            return Err(Error::InvalidGraph("a TVG needs at least one snapshot".into()));
        }
        for (t, s) in snapshots.iter_mut().enumerate() {
            if s.num_nodes() != num_nodes {
                return Err(Error::InvalidGraph(alloc::format!(
                    "snapshot {t} has {} nodes, expected {num_nodes}",
                    s.num_nodes()
                )));
            }
            s.set_step_index(t);
        }
        Ok(Tvg { num_nodes, snapshots })
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    #[inline]
    pub fn num_steps(&self) -> usize {
        self.snapshots.len()
    }

    #[inline]
    pub fn snapshot(&self, t: usize) -> &SnapshotGraph {
        &self.snapshots[t]
    }

    pub fn snapshots(&self) -> &[SnapshotGraph] {
        &self.snapshots
    }

    /// Total number of (step, edge) pairs.
    pub fn temporal_edge_count(&self) -> usize {
        self.snapshots.iter().map(SnapshotGraph::num_edges).sum()
    }
}

/// `D̃^{-1/2} (A + I) D̃^{-1/2}` in compressed-row form. Each row stores the
/// diagonal entry alongside the neighbor entries, sorted by column.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    offsets: Vec<usize>,
    cols: Vec<u32>,
    values: Vec<f64>,
}

impl NormalizedAdjacency {
    pub fn build(g: &SnapshotGraph) -> Self {
        let n = g.num_nodes();
        let inv_sqrt: Vec<f64> = (0..n).map(|i| 1.0 / math::sqrt((g.degree(i) + 1) as f64)).collect();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut cols = Vec::with_capacity(2 * g.num_edges() + n);
        let mut values = Vec::with_capacity(2 * g.num_edges() + n);
        offsets.push(0);
        for i in 0..n {
            let mut diag_done = false;
            for &j in g.neighbors(i) {
                if !diag_done && (j as usize) > i {
                    cols.push(i as u32);
                    values.push(inv_sqrt[i] * inv_sqrt[i]);
                    diag_done = true;
                }
                cols.push(j);
                values.push(inv_sqrt[i] * inv_sqrt[j as usize]);
            }
            if !diag_done {
                cols.push(i as u32);
                values.push(inv_sqrt[i] * inv_sqrt[i]);
            }
            offsets.push(cols.len());
        }
        NormalizedAdjacency { offsets, cols, values }
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Number of stored entries, `2|E| + N`.
    #[inline]
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Stored `(column, value)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.offsets[i]..self.offsets[i + 1];
        self.cols[range.clone()].iter().zip(&self.values[range]).map(|(&c, &v)| (c as usize, v))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.num_nodes()).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    /// Sparse-dense product `Â · x`.
    pub fn matmul(&self, x: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(self.num_nodes(), x.cols());
        self.matmul_into(x, &mut out);
        out
    }

    pub fn matmul_into(&self, x: &Matrix, out: &mut Matrix) {
        assert_eq!(x.rows(), self.num_nodes(), "normalized adjacency product row mismatch");
        let k = x.cols();
        let src = x.as_slice();
        let dst = out.as_mut_slice();
        dst.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.num_nodes() {
            let o = &mut dst[i * k..(i + 1) * k];
            for idx in self.offsets[i]..self.offsets[i + 1] {
                let j = self.cols[idx] as usize;
                let w = self.values[idx];
                for (ov, &xv) in o.iter_mut().zip(&src[j * k..(j + 1) * k]) {
                    *ov += w * xv;
                }
            }
        }
    }

    pub fn to_dense(&self) -> Matrix {
        let n = self.num_nodes();
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for (j, v) in self.row(i) {
                m.set(i, j, v);
            }
        }
        m
    }
}

/// Row sums of the normalized adjacency: the degree input of the embedding.
pub fn normalized_degree_vector(g: &SnapshotGraph) -> Vec<f64> {
    NormalizedAdjacency::build(g).row_sums()
}

/// Power-iteration result for [`eigenvector_centrality`].
#[derive(Debug, Clone, PartialEq)]
pub struct Centrality {
    /// Max-normalized dominant eigenvector estimate.
    pub values: Vec<f64>,
    /// Estimated dominant eigenvalue of `A`.
    pub eigenvalue: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Set when the graph has no edges; `values` is then all zeros.
    pub degenerate: bool,
}

pub const DEFAULT_EIGEN_TOL: f64 = 1e-8;
pub const DEFAULT_EIGEN_MAX_ITER: usize = 1000;

/// Eigenvector centrality by power iteration, max-normalized to `[0, 1]`.
///
/// Iterates on `A + I`, which has the same eigenvectors as `A` but a strictly
/// dominant top eigenvalue on bipartite graphs (stars, paths) where plain
/// power iteration on `A` oscillates.
pub fn eigenvector_centrality(g: &SnapshotGraph, tol: f64, max_iter: usize) -> Centrality {
    let n = g.num_nodes();
    if g.num_edges() == 0 {
        return Centrality {
            values: vec![0.0; n],
            eigenvalue: 0.0,
            iterations: 0,
            converged: true,
            degenerate: true,
        };
    }
    let mut v = vec![1.0; n];
    let mut next = vec![0.0; n];
    let mut lambda = 0.0;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        for i in 0..n {
            next[i] = v[i] + g.neighbors(i).iter().map(|&j| v[j as usize]).sum::<f64>();
        }
        let max = next.iter().cloned().fold(0.0, f64::max);
        lambda = max - 1.0;
        let mut diff: f64 = 0.0;
        for i in 0..n {
            let x = next[i] / max;
            diff = diff.max((x - v[i]).abs());
            v[i] = x;
        }
        if diff < tol {
            converged = true;
            break;
        }
    }
    // Rayleigh quotient on A for the final estimate.
    let num: f64 = (0..n).map(|i| v[i] * g.neighbors(i).iter().map(|&j| v[j as usize]).sum::<f64>()).sum();
    let den: f64 = v.iter().map(|x| x * x).sum();
    if den > 0.0 {
        lambda = num / den;
    }
    Centrality { values: v, eigenvalue: lambda, iterations, converged, degenerate: false }
}

/// Options for [`build_feature_matrix`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureConfig {
    /// Trailing window length for the degree mean / std-dev columns.
    pub window: usize,
    /// Include the eigenvector-centrality column (`C = 4`); without it `C = 3`.
    pub eigenvector: bool,
    pub eigen_tol: f64,
    pub eigen_max_iter: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            window: 5,
            eigenvector: true,
            eigen_tol: DEFAULT_EIGEN_TOL,
            eigen_max_iter: DEFAULT_EIGEN_MAX_ITER,
        }
    }
}

impl FeatureConfig {
    pub fn num_features(&self) -> usize {
        if self.eigenvector {
            4
        } else {
            3
        }
    }
}

/// Raw node features at step `t`, one row per node.
///
/// Columns: normalized degree, eigenvector centrality (optional), mean and
/// population std-dev of the normalized degree over steps
/// `max(0, t − window + 1)..=t`.
pub fn build_feature_matrix(tvg: &Tvg, t: usize, cfg: &FeatureConfig) -> Matrix {
    let n = tvg.num_nodes();
    let g = tvg.snapshot(t);
    let start = (t + 1).saturating_sub(cfg.window.max(1));
    let len = (t - start + 1) as f64;
    let c = cfg.num_features();
    let eig = cfg.eigenvector.then(|| eigenvector_centrality(g, cfg.eigen_tol, cfg.eigen_max_iter).values);
    let mut m = Matrix::zeros(n, c);
    for i in 0..n {
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for s in start..=t {
            let d = tvg.snapshot(s).normalized_degree(i);
            sum += d;
            sum_sq += d * d;
        }
        let mean = sum / len;
        let var = (sum_sq / len - mean * mean).max(0.0);
        let row = m.row_mut(i);
        let mut col = 0;
        row[col] = g.normalized_degree(i);
        col += 1;
        if let Some(e) = &eig {
            row[col] = e[i];
            col += 1;
        }
        row[col] = mean;
        row[col + 1] = math::sqrt(var);
    }
    m
}

/// Per-step data derived once from a TVG and shared by the environment and
/// the agents: normalized adjacencies, embedding degree vectors and raw
/// feature matrices for every step.
#[derive(Debug, Clone)]
pub struct PreparedTvg {
    tvg: Tvg,
    adjacency: Vec<NormalizedAdjacency>,
    degree_inputs: Vec<Vec<f64>>,
    features: Vec<Matrix>,
    feature_config: FeatureConfig,
}

impl PreparedTvg {
    pub fn new(tvg: Tvg, feature_config: FeatureConfig) -> Self {
        let adjacency: Vec<_> = tvg.snapshots().iter().map(NormalizedAdjacency::build).collect();
        let degree_inputs = adjacency.iter().map(NormalizedAdjacency::row_sums).collect();
        let features = (0..tvg.num_steps()).map(|t| build_feature_matrix(&tvg, t, &feature_config)).collect();
        PreparedTvg { tvg, adjacency, degree_inputs, features, feature_config }
    }

    #[inline]
    pub fn tvg(&self) -> &Tvg {
        &self.tvg
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.tvg.num_nodes()
    }

    #[inline]
    pub fn num_steps(&self) -> usize {
        self.tvg.num_steps()
    }

    #[inline]
    pub fn adjacency(&self, t: usize) -> &NormalizedAdjacency {
        &self.adjacency[t]
    }

    #[inline]
    pub fn degree_input(&self, t: usize) -> &[f64] {
        &self.degree_inputs[t]
    }

    #[inline]
    pub fn features(&self, t: usize) -> &Matrix {
        &self.features[t]
    }

    pub fn feature_config(&self) -> &FeatureConfig {
        &self.feature_config
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(n: usize, edges: &[(usize, usize)]) -> SnapshotGraph {
        SnapshotGraph::from_edges(n, 0, edges.iter().copied()).unwrap()
    }

    fn star(leaves: usize) -> SnapshotGraph {
        let edges: Vec<_> = (1..=leaves).map(|l| (0, l)).collect();
        graph(leaves + 1, &edges)
    }

    // Dense evaluation of D̃^{-1/2}(A+I)D̃^{-1/2}, independent of the sparse path.
    fn dense_normalized(g: &SnapshotGraph) -> Vec<Vec<f64>> {
        let n = g.num_nodes();
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            a[i][i] = 1.0;
            for &j in g.neighbors(i) {
                a[i][j as usize] = 1.0;
            }
        }
        let deg: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
        (0..n).map(|i| (0..n).map(|j| a[i][j] / (deg[i] * deg[j]).sqrt()).collect()).collect()
    }

    #[test]
    fn from_edges_dedups_and_rejects_bad_edges() {
        let g = graph(3, &[(0, 1), (1, 0), (0, 1), (1, 2)]);
        assert_eq!(g.num_edges(), 2);
        g.validate().unwrap();
        assert!(SnapshotGraph::from_edges(3, 0, [(1, 1)]).is_err());
        assert!(SnapshotGraph::from_edges(3, 0, [(0, 3)]).is_err());
    }

    #[test]
    fn normalized_adjacency_small_cases() {
        let single = NormalizedAdjacency::build(&SnapshotGraph::empty(1, 0));
        assert_eq!(single.to_dense().as_slice(), &[1.0]);

        let pair = NormalizedAdjacency::build(&graph(2, &[(0, 1)]));
        assert!(pair.to_dense().as_slice().iter().all(|&v| (v - 0.5).abs() < 1e-15));

        let tri = graph(3, &[(0, 1), (1, 2), (0, 2)]);
        let norm = NormalizedAdjacency::build(&tri);
        let dense = dense_normalized(&tri);
        assert_eq!(norm.nnz(), 2 * 3 + 3);
        for i in 0..3 {
            for j in 0..3 {
                assert!((norm.get(i, j) - 1.0 / 3.0).abs() < 1e-15);
                assert!((dense[i][j] - 1.0 / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn normalized_degree_small_cases() {
        assert_eq!(normalized_degree_vector(&SnapshotGraph::empty(1, 0)), vec![1.0]);
        for d in normalized_degree_vector(&graph(2, &[(0, 1)])) {
            assert!((d - 1.0).abs() < 1e-12);
        }
        let tri = normalized_degree_vector(&graph(3, &[(0, 1), (1, 2), (0, 2)]));
        for (d, dense) in tri.iter().zip(dense_normalized(&graph(3, &[(0, 1), (1, 2), (0, 2)]))) {
            let oracle: f64 = dense.iter().sum();
            assert!((d - 1.0).abs() < 1e-12 && (d - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn eigenvector_centrality_examples() {
        let k3 = eigenvector_centrality(&graph(3, &[(0, 1), (1, 2), (0, 2)]), 1e-8, 1000);
        assert!(k3.converged && !k3.degenerate);
        assert!(k3.values.iter().all(|&v| (v - 1.0).abs() < 1e-9));

        let s = eigenvector_centrality(&star(4), 1e-10, 10_000);
        assert!(s.converged);
        assert!((s.values[0] - 1.0).abs() < 1e-9);
        for leaf in 1..=4 {
            assert!((s.values[leaf] - 0.5).abs() < 1e-8, "{:?}", s.values);
        }
        assert!((s.eigenvalue - 2.0).abs() < 1e-8);

        let empty = eigenvector_centrality(&SnapshotGraph::empty(4, 0), 1e-8, 1000);
        assert!(empty.degenerate);
        assert_eq!(empty.values, vec![0.0; 4]);
    }

    #[test]
    fn eigenvector_centrality_unconverged_flag() {
        let c = eigenvector_centrality(&star(4), 1e-15, 2);
        assert!(!c.converged);
        assert_eq!(c.iterations, 2);
    }

    fn degree_trace_tvg() -> Tvg {
        // Node 0 has degree 1, 2, 3, 4, 5 across five steps on N = 6.
        let snaps = (0..5)
            .map(|t| SnapshotGraph::from_edges(6, t, (1..=t + 1).map(|j| (0, j))).unwrap())
            .collect();
        Tvg::new(6, snaps).unwrap()
    }

    #[test]
    fn feature_statistics_over_window() {
        let tvg = degree_trace_tvg();
        let cfg = FeatureConfig::default();
        let f = build_feature_matrix(&tvg, 4, &cfg);
        assert_eq!(f.shape(), (6, 4));
        assert!((f.get(0, 0) - 1.0).abs() < 1e-15);
        assert!((f.get(0, 2) - 3.0 / 5.0).abs() < 1e-12);
        assert!((f.get(0, 3) - 2f64.sqrt() / 5.0).abs() < 1e-12);

        let f0 = build_feature_matrix(&tvg, 0, &cfg);
        assert_eq!(f0.get(0, 2), f0.get(0, 0));
        assert_eq!(f0.get(0, 3), 0.0);

        // Node 1 is adjacent to node 0 at every step: constant degree 1.
        assert_eq!(f.get(1, 3), 0.0);
    }

    #[test]
    fn three_feature_mode_drops_centrality() {
        let tvg = degree_trace_tvg();
        let cfg = FeatureConfig { eigenvector: false, ..FeatureConfig::default() };
        let f = build_feature_matrix(&tvg, 4, &cfg);
        assert_eq!(f.shape(), (6, 3));
        assert!((f.get(0, 1) - 3.0 / 5.0).abs() < 1e-12);
    }

    #[test]
    fn tvg_rejects_mismatched_snapshots() {
        let a = SnapshotGraph::empty(3, 0);
        let b = SnapshotGraph::empty(4, 1);
        assert!(Tvg::new(3, vec![a, b]).is_err());
        assert!(Tvg::new(3, vec![]).is_err());
    }
}
