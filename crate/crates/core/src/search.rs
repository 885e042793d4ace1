//! Beam search over a [`Graph`] with a pluggable edge agent.
//!
//! Every expansion pops the closest unexpanded candidate, shows its out-edges
//! to the agent, and evaluates the kept, not-yet-visited targets. The search
//! stops once the closest candidate is farther than the worst entry of a
//! full result set of size `max(ef, k)`, or when no candidates remain.
//!
//! Distance computations (DCS) are counted as 1 for the start vertex plus
//! 1 per newly visited neighbor, so `dcs == visited.len()` always holds.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::Matrix;
use crate::distance::{sq_l2, Scored};
use crate::error::{Error, Result};
use crate::graph::{degree_histogram, Graph, GraphStats};
use crate::policy::EdgeDecision;

/// Fixed-capacity bitset over vertex ids.
#[derive(Debug, Clone)]
pub struct VisitedSet {
    words: Vec<u64>,
}

impl VisitedSet {
    pub fn new(n: usize) -> Self {
        Self {
            words: vec![0; n.div_ceil(64)],
        }
    }

    /// Returns `true` if `v` was not present before.
    #[inline]
    pub fn insert(&mut self, v: u32) -> bool {
        let (w, b) = (v as usize / 64, v % 64);
        let fresh = self.words[w] & (1 << b) == 0;
        self.words[w] |= 1 << b;
        fresh
    }

    #[inline]
    pub fn contains(&self, v: u32) -> bool {
        self.words[v as usize / 64] & (1 << (v % 64)) != 0
    }

    pub fn clear(&mut self) {
        self.words.fill(0);
    }
}

/// What the agent sees at one expansion.
pub struct SearchState<'a> {
    pub query: &'a [f32],
    pub current: u32,
    pub neighbors: &'a [u32],
    /// Edge id of `neighbors[0]`; the out-edges are consecutive ids.
    pub first_edge: usize,
    pub visited: &'a VisitedSet,
    pub candidates: &'a BinaryHeap<Reverse<Scored>>,
}

/// Decides which out-edges of the expanded vertex the search may follow.
///
/// Implementations push exactly one decision per out-edge, in order.
pub trait EdgeAgent: Sync {
    fn decide(&self, state: &SearchState<'_>, rng: &mut ChaCha8Rng, out: &mut Vec<EdgeDecision>);
}

/// Keeps every edge.
#[derive(Debug, Clone, Copy, Default)]
pub struct AllKeep;

impl EdgeAgent for AllKeep {
    fn decide(&self, state: &SearchState<'_>, _rng: &mut ChaCha8Rng, out: &mut Vec<EdgeDecision>) {
        out.extend((0..state.neighbors.len()).map(|i| EdgeDecision::fixed(state.first_edge + i, true)));
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SearchStep {
    pub vertex: u32,
    pub kept: Vec<u32>,
    pub dropped: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SearchTrace {
    /// Distance-evaluated vertices in evaluation order, start first.
    pub visited: Vec<u32>,
    pub steps: Vec<SearchStep>,
    /// Stochastic (non-frozen) decisions on edges whose target was still
    /// unvisited when the decision was made, in order. Other decisions have
    /// no effect on the session.
    pub decisions: Vec<EdgeDecision>,
    pub dcs: usize,
    pub hops: usize,
    /// Best results, closest first.
    pub topk: Vec<Scored>,
}

impl SearchTrace {
    pub fn top1(&self) -> Option<u32> {
        self.topk.first().map(|s| s.id)
    }

    /// Kept edges that led to a distance computation, as `(step, edge)`
    /// pairs in evaluation order. Kept edges whose target was already
    /// evaluated are skipped.
    pub fn evaluating_edges(&self, g: &Graph) -> Vec<(usize, u32)> {
        let mut out = Vec::with_capacity(self.visited.len().saturating_sub(1));
        let mut next = 1;
        for (i, step) in self.steps.iter().enumerate() {
            for &e in &step.kept {
                if self.visited.get(next) == Some(&g.edge_target(e as usize)) {
                    out.push((i, e));
                    next += 1;
                }
            }
        }
        out
    }
}

/// Beam search with a freshly seeded agent RNG.
pub fn beam_search(
    g: &Graph,
    base: &Matrix<f32>,
    agent: &dyn EdgeAgent,
    q: &[f32],
    k: usize,
    ef: usize,
    seed: u64,
) -> SearchTrace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    beam_search_with_rng(g, base, agent, q, k, ef, &mut rng)
}

pub fn beam_search_with_rng(
    g: &Graph,
    base: &Matrix<f32>,
    agent: &dyn EdgeAgent,
    q: &[f32],
    k: usize,
    ef: usize,
    rng: &mut ChaCha8Rng,
) -> SearchTrace {
    debug_assert!(k >= 1 && ef >= 1);
    let width = ef.max(k);
    let start = g.start();
    let mut visited = VisitedSet::new(g.n_vertices());
    visited.insert(start);
    let d0 = Scored::new(sq_l2(q, base.row(start as usize)), start);
    let mut candidates = BinaryHeap::new();
    candidates.push(Reverse(d0));
    let mut results = BinaryHeap::new();
    results.push(d0);

    let mut trace = SearchTrace {
        visited: vec![start],
        dcs: 1,
        ..Default::default()
    };
    let mut decisions = Vec::new();

    while let Some(&Reverse(c)) = candidates.peek() {
        if results.len() >= width && c.dist > results.peek().map_or(f64::INFINITY, |w: &Scored| w.dist) {
            break;
        }
        candidates.pop();
        trace.hops += 1;

        let range = g.edge_range(c.id);
        decisions.clear();
        {
            let state = SearchState {
                query: q,
                current: c.id,
                neighbors: g.neighbors(c.id),
                first_edge: range.start,
                visited: &visited,
                candidates: &candidates,
            };
            agent.decide(&state, rng, &mut decisions);
        }
        debug_assert_eq!(decisions.len(), range.len());

        let mut step = SearchStep {
            vertex: c.id,
            ..Default::default()
        };
        for d in &decisions {
            let t = g.edge_target(d.edge as usize);
            // a decision on an already visited target cannot change the session
            if !d.frozen && !visited.contains(t) {
                trace.decisions.push(*d);
            }
            if !d.keep {
                step.dropped.push(d.edge);
                continue;
            }
            step.kept.push(d.edge);
            if !visited.insert(t) {
                continue;
            }
            let s = Scored::new(sq_l2(q, base.row(t as usize)), t);
            trace.visited.push(t);
            trace.dcs += 1;
            candidates.push(Reverse(s));
            if results.len() < width || s < *results.peek().unwrap() {
                results.push(s);
                if results.len() > width {
                    results.pop();
                }
            }
        }
        trace.steps.push(step);
    }

    let mut top = results.into_sorted_vec();
    top.truncate(k);
    trace.topk = top;
    trace
}

/// Greedy descent: beam search with `ef = k = 1`.
pub fn greedy_search(g: &Graph, base: &Matrix<f32>, agent: &dyn EdgeAgent, q: &[f32], seed: u64) -> SearchTrace {
    beam_search(g, base, agent, q, 1, 1, seed)
}

/// Per-stream seed derived from a global seed (splitmix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One trace per query; query `i` uses seed `derive_seed(seed, i)`.
pub fn search_many(
    g: &Graph,
    base: &Matrix<f32>,
    agent: &dyn EdgeAgent,
    queries: &Matrix<f32>,
    k: usize,
    ef: usize,
    seed: u64,
) -> Vec<SearchTrace> {
    (0..queries.rows())
        .into_par_iter()
        .map(|i| beam_search(g, base, agent, queries.row(i), k, ef, derive_seed(seed, i as u64)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueryRecord {
    pub found: bool,
    pub dcs: usize,
    pub hops: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub recall_at_1: f64,
    pub mean_dcs: f64,
    pub mean_hops: f64,
    pub stats: GraphStats,
    pub records: Vec<QueryRecord>,
}

impl EvalReport {
    /// Per-query rows: `query_id,found,dcs,hops`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("query_id,found,dcs,hops\n");
        for (i, r) in self.records.iter().enumerate() {
            let _ = writeln!(s, "{i},{},{},{}", r.found as u8, r.dcs, r.hops);
        }
        s
    }
}

pub(crate) fn check_queries(base: &Matrix<f32>, queries: &Matrix<f32>, gt: &[u32]) -> Result<()> {
    if queries.is_empty() {
        return Err(Error::invalid("query set is empty"));
    }
    if queries.dim() != base.dim() {
        return Err(Error::DimMismatch {
            expected: base.dim(),
            actual: queries.dim(),
        });
    }
    if gt.len() != queries.rows() {
        return Err(Error::invalid(format!(
            "{} ground-truth ids for {} queries",
            gt.len(),
            queries.rows()
        )));
    }
    Ok(())
}

pub(crate) fn check_search_params(k: usize, ef: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if ef < k {
        return Err(Error::invalid(format!("ef ({ef}) must be >= k ({k})")));
    }
    Ok(())
}

/// Recall@1, mean DCS, mean hops and visit statistics over a query set.
#[allow(clippy::too_many_arguments)]
pub fn evaluate(
    g: &Graph,
    base: &Matrix<f32>,
    agent: &dyn EdgeAgent,
    queries: &Matrix<f32>,
    gt: &[u32],
    k: usize,
    ef: usize,
    seed: u64,
) -> Result<EvalReport> {
    check_queries(base, queries, gt)?;
    check_search_params(k, ef)?;
    if base.rows() != g.n_vertices() {
        return Err(Error::invalid(format!(
            "graph has {} vertices but base has {} rows",
            g.n_vertices(),
            base.rows()
        )));
    }
    let outcomes: Vec<(QueryRecord, Vec<u32>)> = (0..queries.rows())
        .into_par_iter()
        .map(|i| {
            let t = beam_search(g, base, agent, queries.row(i), k, ef, derive_seed(seed, i as u64));
            let rec = QueryRecord {
                found: t.top1() == Some(gt[i]),
                dcs: t.dcs,
                hops: t.hops,
            };
            (rec, t.steps.iter().map(|s| s.vertex).collect())
        })
        .collect();

    let n = g.n_vertices();
    let mut stats = GraphStats {
        outdegree_histogram: degree_histogram(g),
        visit_counts: vec![0; n],
        nn_counts: vec![0; n],
    };
    for &id in gt {
        stats.nn_counts[id as usize] += 1;
    }
    let mut records = Vec::with_capacity(outcomes.len());
    for (rec, expanded) in outcomes {
        for v in expanded {
            stats.visit_counts[v as usize] += 1;
        }
        records.push(rec);
    }
    let nq = records.len() as f64;
    Ok(EvalReport {
        recall_at_1: records.iter().filter(|r| r.found).count() as f64 / nq,
        mean_dcs: records.iter().map(|r| r.dcs as f64).sum::<f64>() / nq,
        mean_hops: records.iter().map(|r| r.hops as f64).sum::<f64>() / nq,
        stats,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_complete;

    struct KeepNone;

    impl EdgeAgent for KeepNone {
        fn decide(&self, s: &SearchState<'_>, _: &mut ChaCha8Rng, out: &mut Vec<EdgeDecision>) {
            out.extend((0..s.neighbors.len()).map(|i| EdgeDecision::fixed(s.first_edge + i, false)));
        }
    }

    fn line(points: &[f32]) -> Matrix<f32> {
        let rows: Vec<[f32; 1]> = points.iter().map(|&p| [p]).collect();
        Matrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn star_graph() {
        // start 0 -> {1, 2, 3}; the query sits on vertex 2
        let base = line(&[0.0, 5.0, 10.0, 15.0]);
        let g = Graph::from_adjacency(&[vec![1, 2, 3], vec![], vec![], vec![]], 0).unwrap();
        let t = beam_search(&g, &base, &AllKeep, &[10.0], 1, 1, 0);
        assert_eq!(t.top1(), Some(2));
        assert_eq!(t.dcs, 4);
        // start plus the empty expansion of vertex 2
        assert_eq!(t.hops, 2);
        assert_eq!(t.visited, vec![0, 1, 2, 3]);
    }

    #[test]
    fn agent_keeping_nothing() {
        let base = line(&[0.0, 5.0, 10.0]);
        let g = build_complete(3, 0).unwrap();
        let t = beam_search(&g, &base, &KeepNone, &[10.0], 1, 4, 0);
        assert_eq!(t.top1(), Some(0));
        assert_eq!(t.dcs, 1);
        assert_eq!(t.hops, 1);
        assert_eq!(t.steps[0].dropped.len(), 2);
    }

    #[test]
    fn greedy_start_is_nn() {
        let base = line(&[0.0, 5.0, 10.0]);
        let g = build_complete(3, 0).unwrap();
        let t = greedy_search(&g, &base, &AllKeep, &[-1.0], 0);
        assert_eq!(t.top1(), Some(0));
        assert_eq!(t.hops, 1);
    }

    #[test]
    fn greedy_path() {
        let base = line(&[0.0, 1.0, 2.0]);
        let g = Graph::from_adjacency(&[vec![1], vec![2], vec![]], 0).unwrap();
        let t = greedy_search(&g, &base, &AllKeep, &[2.0], 0);
        assert_eq!(t.visited, vec![0, 1, 2]);
        assert_eq!(t.top1(), Some(2));
        assert_eq!(t.hops, 3);
    }

    #[test]
    fn topk_sorted_and_sized() {
        let base = line(&[0.0, 1.0, 2.0, 3.0, 4.0]);
        let g = build_complete(5, 0).unwrap();
        let t = beam_search(&g, &base, &AllKeep, &[2.2], 3, 3, 0);
        let ids: Vec<u32> = t.topk.iter().map(|s| s.id).collect();
        assert_eq!(ids, vec![2, 3, 1]);
    }

    #[test]
    fn evaluate_errors_and_perfect_recall() {
        let base = line(&[0.0, 1.0, 2.0, 3.0]);
        let g = build_complete(4, 0).unwrap();
        let q = line(&[0.1, 2.9]);
        let r = evaluate(&g, &base, &AllKeep, &q, &[0, 3], 1, 4, 0).unwrap();
        assert_eq!(r.recall_at_1, 1.0);
        assert_eq!(r.stats.nn_counts, vec![1, 0, 0, 1]);
        assert!(r.to_csv().starts_with("query_id,found,dcs,hops\n0,1,"));
        let empty = Matrix::empty(1);
        assert!(evaluate(&g, &base, &AllKeep, &empty, &[], 1, 4, 0).is_err());
        assert!(evaluate(&g, &base, &AllKeep, &q, &[0], 1, 4, 0).is_err());
        assert!(evaluate(&g, &base, &AllKeep, &q, &[0, 3], 2, 1, 0).is_err());
    }

    #[test]
    fn visited_set() {
        let mut v = VisitedSet::new(130);
        assert!(v.insert(129));
        assert!(!v.insert(129));
        assert!(v.contains(129) && !v.contains(0));
        v.clear();
        assert!(!v.contains(129));
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
        assert_eq!(derive_seed(5, 9), derive_seed(5, 9));
    }
}
