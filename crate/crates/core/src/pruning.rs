//! Magnitude pruning from search statistics.
//!
//! Each edge gets the weight `(n_e + λ) / (n_v + λ·outdeg(v))`, where `n_v`
//! counts expansions of its source and `n_e` counts the times the edge led to
//! a distance computation during those expansions. Edges below a threshold
//! tuned on validation queries are removed.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::dataset::Matrix;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::search::{beam_search, check_queries, check_search_params, derive_seed, evaluate, AllKeep};
use crate::trainer::{mean_reward, RewardConfig, SearchParams, ValScore};

/// Default smoothing constant.
pub const DEFAULT_LAMBDA: f64 = 0.1;

/// Number of quantile thresholds tried besides zero.
pub const N_QUANTILES: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeUsage {
    /// Per edge id.
    pub edge_counts: Vec<u64>,
    /// Per vertex: number of expansions.
    pub vertex_counts: Vec<u64>,
}

impl EdgeUsage {
    pub fn zeros(g: &Graph) -> Self {
        Self {
            edge_counts: vec![0; g.n_edges()],
            vertex_counts: vec![0; g.n_vertices()],
        }
    }

    fn merge(mut self, other: Self) -> Self {
        for (a, b) in self.edge_counts.iter_mut().zip(other.edge_counts) {
            *a += b;
        }
        for (a, b) in self.vertex_counts.iter_mut().zip(other.vertex_counts) {
            *a += b;
        }
        self
    }
}

/// Runs all-keep search for every query and counts expansions and
/// distance-evaluating edges.
pub fn collect_usage(g: &Graph, base: &Matrix<f32>, queries: &Matrix<f32>, k: usize, ef: usize) -> Result<EdgeUsage> {
    check_search_params(k, ef)?;
    if base.rows() != g.n_vertices() {
        return Err(Error::invalid(format!(
            "graph has {} vertices but base has {} rows",
            g.n_vertices(),
            base.rows()
        )));
    }
    if !queries.is_empty() && queries.dim() != base.dim() {
        return Err(Error::DimMismatch {
            expected: base.dim(),
            actual: queries.dim(),
        });
    }
    let usage = (0..queries.rows())
        .into_par_iter()
        .fold(
            || EdgeUsage::zeros(g),
            |mut acc, i| {
                let t = beam_search(g, base, &AllKeep, queries.row(i), k, ef, derive_seed(0, i as u64));
                for step in &t.steps {
                    acc.vertex_counts[step.vertex as usize] += 1;
                }
                for (_, e) in t.evaluating_edges(g) {
                    acc.edge_counts[e as usize] += 1;
                }
                acc
            },
        )
        .reduce(|| EdgeUsage::zeros(g), EdgeUsage::merge);
    Ok(usage)
}

/// Per-edge weights, indexed by edge id.
pub fn edge_weights(usage: &EdgeUsage, g: &Graph, lambda: f64) -> Result<Vec<f64>> {
    if usage.edge_counts.len() != g.n_edges() || usage.vertex_counts.len() != g.n_vertices() {
        return Err(Error::invalid("usage counts do not match the graph"));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
    }
    let mut w = vec![0.0; g.n_edges()];
    for v in 0..g.n_vertices() as u32 {
        let denom = usage.vertex_counts[v as usize] as f64 + lambda * g.outdegree(v) as f64;
        for e in g.edge_range(v) {
            w[e] = (usage.edge_counts[e] as f64 + lambda) / denom;
        }
    }
    Ok(w)
}

/// Keeps edges with `weight >= threshold`.
pub fn prune_by_threshold(g: &Graph, weights: &[f64], threshold: f64) -> Graph {
    assert_eq!(weights.len(), g.n_edges(), "one weight per edge");
    g.retain_edges(|e| weights[e] >= threshold)
}

/// Zero followed by the distinct nearest-rank quantiles at levels `i / 64`.
pub fn threshold_candidates(weights: &[f64]) -> Vec<f64> {
    let mut sorted: Vec<f64> = weights.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut out = vec![0.0];
    if sorted.is_empty() {
        return out;
    }
    let n = sorted.len();
    for i in 1..=N_QUANTILES {
        let rank = (i * n).div_ceil(N_QUANTILES).max(1);
        let t = sorted[rank - 1];
        if t > *out.last().unwrap() {
            out.push(t);
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct PruneOutcome {
    pub graph: Graph,
    pub threshold: f64,
    pub score: ValScore,
    /// Every tried threshold with its validation score, ascending.
    pub sweep: Vec<(f64, ValScore)>,
}

/// Sweeps [`threshold_candidates`] and returns the pruned graph with the
/// highest validation mean reward; ties go to the smaller threshold.
pub fn tune_threshold_and_prune(
    g: &Graph,
    weights: &[f64],
    base: &Matrix<f32>,
    val_queries: &Matrix<f32>,
    val_gt: &[u32],
    search: SearchParams,
    reward: &RewardConfig,
) -> Result<PruneOutcome> {
    if weights.len() != g.n_edges() {
        return Err(Error::invalid("one weight per edge required"));
    }
    check_queries(base, val_queries, val_gt)?;
    let mut best: Option<(f64, ValScore, Graph)> = None;
    let mut sweep = Vec::new();
    for t in threshold_candidates(weights) {
        let pruned = prune_by_threshold(g, weights, t);
        let report = evaluate(&pruned, base, &AllKeep, val_queries, val_gt, search.k, search.ef, 0)?;
        let score = ValScore {
            reward: mean_reward(&report, reward),
            recall: report.recall_at_1,
            mean_dcs: report.mean_dcs,
        };
        sweep.push((t, score));
        if best.as_ref().is_none_or(|b| score.reward > b.1.reward) {
            best = Some((t, score, pruned));
        }
    }
    let (threshold, score, graph) = best.expect("zero is always a candidate");
    Ok(PruneOutcome {
        graph,
        threshold,
        score,
        sweep,
    })
}

/// `src,dst,weight` rows in edge order.
pub fn weights_csv(g: &Graph, weights: &[f64]) -> String {
    let mut s = String::from("src,dst,weight\n");
    for ((src, dst), w) in g.edges().zip(weights) {
        let _ = writeln!(s, "{src},{dst},{w}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_complete;

    fn line(points: &[f32]) -> Matrix<f32> {
        let rows: Vec<[f32; 1]> = points.iter().map(|&p| [p]).collect();
        Matrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn arithmetic_example() {
        let lists: Vec<Vec<u32>> = std::iter::once((1..=10).collect()).chain((0..10).map(|_| vec![])).collect();
        let g = Graph::from_adjacency(&lists, 0).unwrap();
        let mut usage = EdgeUsage::zeros(&g);
        usage.vertex_counts[0] = 99;
        usage.edge_counts[0] = 9;
        let w = edge_weights(&usage, &g, 0.1).unwrap();
        assert_eq!(w[0], 9.1 / 100.0);
        assert!((w[0] - 0.091).abs() < 1e-15);
    }

    #[test]
    fn unvisited_vertex_weight() {
        let lists: Vec<Vec<u32>> = std::iter::once((1..=10).collect()).chain((0..10).map(|_| vec![])).collect();
        let g = Graph::from_adjacency(&lists, 0).unwrap();
        let w = edge_weights(&EdgeUsage::zeros(&g), &g, 0.1).unwrap();
        assert!(w.iter().all(|&x| (x - 0.1).abs() < 1e-15));
    }

    #[test]
    fn star_usage() {
        let base = line(&[0.0, 5.0, 10.0, 15.0]);
        let g = Graph::from_adjacency(&[vec![1, 2, 3], vec![], vec![], vec![]], 0).unwrap();
        let u = collect_usage(&g, &base, &line(&[10.0]), 1, 1).unwrap();
        assert_eq!(u.vertex_counts[0], 1);
        assert_eq!(u.edge_counts, vec![1, 1, 1]);
        let none = collect_usage(&g, &base, &Matrix::empty(1), 1, 1).unwrap();
        assert_eq!(none, EdgeUsage::zeros(&g));
    }

    #[test]
    fn edges_to_visited_targets_not_counted() {
        // 0 -> {1, 2}, 1 -> {2}: expanding 1 finds 2 already evaluated
        let base = line(&[0.0, 2.0, 3.0]);
        let g = Graph::from_adjacency(&[vec![1, 2], vec![2], vec![]], 0).unwrap();
        let u = collect_usage(&g, &base, &line(&[1.9]), 1, 2).unwrap();
        assert_eq!(u.edge_counts, vec![1, 1, 0]);
        for v in 0..3u32 {
            let s: u64 = g.edge_range(v).map(|e| u.edge_counts[e]).sum();
            assert!(s <= u.vertex_counts[v as usize] * g.outdegree(v) as u64);
        }
    }

    #[test]
    fn thresholds_nest() {
        let g = build_complete(12, 0).unwrap();
        let w: Vec<f64> = (0..g.n_edges()).map(|e| ((e * 37) % 101) as f64 / 100.0 + 0.01).collect();
        let cands = threshold_candidates(&w);
        assert_eq!(cands[0], 0.0);
        assert!(cands.windows(2).all(|p| p[0] < p[1]));
        let graphs: Vec<Graph> = cands.iter().map(|&t| prune_by_threshold(&g, &w, t)).collect();
        assert_eq!(graphs[0], g);
        for p in graphs.windows(2) {
            assert!(p[1].is_subgraph_of(&p[0]));
        }
        let empty = prune_by_threshold(&g, &w, 10.0);
        assert_eq!(empty.n_edges(), 0);
    }

    #[test]
    fn tuned_reward_dominates_unpruned() {
        let base = line(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        let g = build_complete(6, 0).unwrap();
        let q = line(&[0.1, 2.2, 4.9, 3.1]);
        let gt = crate::dataset::brute_force_gt(&base, &q).unwrap();
        let u = collect_usage(&g, &base, &q, 1, 1).unwrap();
        let w = edge_weights(&u, &g, DEFAULT_LAMBDA).unwrap();
        let cfg = RewardConfig::new(10).unwrap();
        let out = tune_threshold_and_prune(&g, &w, &base, &q, &gt, SearchParams { k: 1, ef: 1 }, &cfg).unwrap();
        assert!(out.graph.is_subgraph_of(&g));
        assert_eq!(out.sweep[0].0, 0.0);
        assert!(out.score.reward >= out.sweep[0].1.reward);
        assert!(weights_csv(&g, &w).starts_with("src,dst,weight\n0,1,"));
    }
}
