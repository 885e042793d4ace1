//! Directed similarity graphs over base-vector ids.
//!
//! Adjacency is stored flat: the out-edges of vertex `v` occupy
//! `offsets[v]..offsets[v + 1]` of `neighbors`, and an edge's id is its
//! position in that flat array. Optional per-edge state (keep probability
//! and frozen flag) is indexed by the same ids.

use std::collections::{BTreeMap, BinaryHeap};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{write_bytes, Matrix};
use crate::distance::{sq_l2, Scored};
use crate::error::{Error, Result};
use crate::search::VisitedSet;

/// Keep probability assigned to fresh edges; equals the policy's initial
/// output `sigmoid(2)`.
pub const INITIAL_KEEP_PROB: f64 = 0.880_797_077_977_882_4;

/// Learned state of one edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeState {
    pub prob: f64,
    pub frozen: bool,
}

impl EdgeState {
    pub fn new(prob: f64) -> Self {
        Self {
            prob,
            frozen: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
    start: u32,
    edge_state: Option<Vec<EdgeState>>,
}

impl Graph {
    /// Builds a graph from per-vertex neighbor lists and checks every invariant.
    pub fn from_adjacency(lists: &[Vec<u32>], start: u32) -> Result<Self> {
        let mut offsets = Vec::with_capacity(lists.len() + 1);
        offsets.push(0);
        let mut neighbors = Vec::with_capacity(lists.iter().map(Vec::len).sum());
        for l in lists {
            neighbors.extend_from_slice(l);
            offsets.push(neighbors.len());
        }
        let g = Self {
            offsets,
            neighbors,
            start,
            edge_state: None,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn n_vertices(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn n_edges(&self) -> usize {
        self.neighbors.len()
    }

    pub fn start(&self) -> u32 {
        self.start
    }

    pub fn set_start(&mut self, start: u32) -> Result<()> {
        if start as usize >= self.n_vertices() {
            return Err(Error::InvalidGraph(format!(
                "start vertex {start} out of range"
            )));
        }
        self.start = start;
        Ok(())
    }

    #[inline]
    pub fn neighbors(&self, v: u32) -> &[u32] {
        let v = v as usize;
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    /// Ids of the out-edges of `v`.
    #[inline]
    pub fn edge_range(&self, v: u32) -> std::ops::Range<usize> {
        let v = v as usize;
        self.offsets[v]..self.offsets[v + 1]
    }

    #[inline]
    pub fn edge_target(&self, e: usize) -> u32 {
        self.neighbors[e]
    }

    pub fn outdegree(&self, v: u32) -> usize {
        self.edge_range(v).len()
    }

    pub fn mean_outdegree(&self) -> f64 {
        self.n_edges() as f64 / self.n_vertices() as f64
    }

    /// Source vertex of every edge, indexed by edge id.
    pub fn edge_sources(&self) -> Vec<u32> {
        let mut src = Vec::with_capacity(self.n_edges());
        for v in 0..self.n_vertices() {
            src.extend(std::iter::repeat_n(v as u32, self.outdegree(v as u32)));
        }
        src
    }

    /// `(source, target)` pairs in edge-id order.
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        (0..self.n_vertices() as u32)
            .flat_map(move |v| self.neighbors(v).iter().map(move |&t| (v, t)))
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn flat_neighbors(&self) -> &[u32] {
        &self.neighbors
    }

    pub fn has_edge(&self, u: u32, v: u32) -> bool {
        self.neighbors(u).contains(&v)
    }

    pub fn edge_state(&self) -> Option<&[EdgeState]> {
        self.edge_state.as_deref()
    }

    pub fn edge_state_mut(&mut self) -> Option<&mut [EdgeState]> {
        self.edge_state.as_deref_mut()
    }

    pub fn set_edge_state(&mut self, state: Vec<EdgeState>) -> Result<()> {
        if state.len() != self.n_edges() {
            return Err(Error::InvalidGraph(format!(
                "{} edge states for {} edges",
                state.len(),
                self.n_edges()
            )));
        }
        self.edge_state = Some(state);
        Ok(())
    }

    pub fn clear_edge_state(&mut self) {
        self.edge_state = None;
    }

    /// Copy with every edge given probability `prob` and unfrozen.
    pub fn with_uniform_state(&self, prob: f64) -> Self {
        let mut g = self.clone();
        g.edge_state = Some(vec![EdgeState::new(prob); self.n_edges()]);
        g
    }

    /// Checks id ranges, self-loops, duplicate edges, start vertex and
    /// edge-state shape.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_vertices();
        if n == 0 {
            return Err(Error::InvalidGraph("graph has no vertices".into()));
        }
        if self.offsets[0] != 0 || *self.offsets.last().unwrap() != self.neighbors.len() {
            return Err(Error::InvalidGraph("offsets do not cover neighbor array".into()));
        }
        if self.offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidGraph("offsets are not monotone".into()));
        }
        if self.start as usize >= n {
            return Err(Error::InvalidGraph(format!(
                "start vertex {} out of range (n = {n})",
                self.start
            )));
        }
        let mut seen = VisitedSet::new(n);
        for v in 0..n as u32 {
            seen.clear();
            for &t in self.neighbors(v) {
                if t as usize >= n {
                    return Err(Error::InvalidGraph(format!(
                        "edge {v}->{t} points outside the graph"
                    )));
                }
                if t == v {
                    return Err(Error::InvalidGraph(format!("self-loop at {v}")));
                }
                if !seen.insert(t) {
                    return Err(Error::InvalidGraph(format!("duplicate edge {v}->{t}")));
                }
            }
        }
        if let Some(state) = &self.edge_state {
            if state.len() != self.n_edges() {
                return Err(Error::InvalidGraph("edge state length mismatch".into()));
            }
            if let Some(s) = state.iter().find(|s| !(0.0..=1.0).contains(&s.prob)) {
                return Err(Error::InvalidGraph(format!(
                    "edge probability {} outside [0, 1]",
                    s.prob
                )));
            }
        }
        Ok(())
    }

    /// Subgraph keeping edges for which `keep(edge_id)` holds; edge state
    /// of surviving edges is carried over.
    pub fn retain_edges(&self, mut keep: impl FnMut(usize) -> bool) -> Self {
        let mut offsets = Vec::with_capacity(self.offsets.len());
        offsets.push(0);
        let mut neighbors = Vec::new();
        let mut state = self.edge_state.as_ref().map(|_| Vec::new());
        for v in 0..self.n_vertices() as u32 {
            for e in self.edge_range(v) {
                if keep(e) {
                    neighbors.push(self.neighbors[e]);
                    if let (Some(out), Some(src)) = (state.as_mut(), self.edge_state.as_ref()) {
                        out.push(src[e]);
                    }
                }
            }
            offsets.push(neighbors.len());
        }
        Self {
            offsets,
            neighbors,
            start: self.start,
            edge_state: state,
        }
    }

    /// Whether every edge of `self` is also an edge of `other` (same vertex count).
    pub fn is_subgraph_of(&self, other: &Graph) -> bool {
        self.n_vertices() == other.n_vertices()
            && (0..self.n_vertices() as u32)
                .all(|v| self.neighbors(v).iter().all(|&t| other.has_edge(v, t)))
    }
}

/// Every ordered pair `(i, j)`, `i != j`, as an edge; all edges start at
/// [`INITIAL_KEEP_PROB`].
pub fn build_complete(n: usize, start: u32) -> Result<Graph> {
    if n == 0 {
        return Err(Error::invalid("complete graph needs at least one vertex"));
    }
    let lists: Vec<Vec<u32>> = (0..n as u32)
        .map(|i| (0..n as u32).filter(|&j| j != i).collect())
        .collect();
    let mut g = Graph::from_adjacency(&lists, start)?;
    g.edge_state = Some(vec![EdgeState::new(INITIAL_KEEP_PROB); g.n_edges()]);
    Ok(g)
}

/// Beam search over a growing adjacency list; returns the `ef` closest
/// vertices found, ascending.
fn construction_search(
    lists: &[Vec<u32>],
    base: &Matrix<f32>,
    q: &[f32],
    entry: u32,
    ef: usize,
    visited: &mut VisitedSet,
) -> Vec<Scored> {
    visited.clear();
    visited.insert(entry);
    let d0 = Scored::new(sq_l2(q, base.row(entry as usize)), entry);
    let mut candidates = BinaryHeap::new();
    candidates.push(std::cmp::Reverse(d0));
    let mut results = BinaryHeap::new();
    results.push(d0);
    while let Some(std::cmp::Reverse(c)) = candidates.pop() {
        if results.len() >= ef && c.dist > results.peek().unwrap().dist {
            break;
        }
        for &t in &lists[c.id as usize] {
            if !visited.insert(t) {
                continue;
            }
            let s = Scored::new(sq_l2(q, base.row(t as usize)), t);
            if results.len() < ef || s < *results.peek().unwrap() {
                candidates.push(std::cmp::Reverse(s));
                results.push(s);
                if results.len() > ef {
                    results.pop();
                }
            }
        }
    }
    results.into_sorted_vec()
}

/// Flat navigable small-world graph built by incremental insertion.
///
/// Points are inserted in a seed-determined random order. Each new point is
/// linked in both directions to the `m` nearest vertices found by a beam of
/// width `ef_construction`; lists that outgrow `2 * m` keep their nearest
/// entries. The first inserted point becomes the start vertex.
pub fn build_nsw(base: &Matrix<f32>, m: usize, ef_construction: usize, seed: u64) -> Result<Graph> {
    if base.is_empty() {
        return Err(Error::invalid("cannot build a graph over an empty base set"));
    }
    if m == 0 {
        return Err(Error::invalid("M must be at least 1"));
    }
    if ef_construction < m {
        return Err(Error::invalid(format!(
            "ef_construction ({ef_construction}) must be >= M ({m})"
        )));
    }
    let n = base.rows();
    let mut order: Vec<u32> = (0..n as u32).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let max_degree = 2 * m;
    let mut lists: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut visited = VisitedSet::new(n);
    let start = order[0];
    for &x in &order[1..] {
        let q = base.row(x as usize);
        let found = construction_search(&lists, base, q, start, ef_construction, &mut visited);
        for s in found.into_iter().take(m) {
            let nb = s.id;
            lists[x as usize].push(nb);
            lists[nb as usize].push(x);
            if lists[nb as usize].len() > max_degree {
                let anchor = base.row(nb as usize);
                let mut scored: Vec<Scored> = lists[nb as usize]
                    .iter()
                    .map(|&t| Scored::new(sq_l2(anchor, base.row(t as usize)), t))
                    .collect();
                scored.sort();
                scored.truncate(max_degree);
                lists[nb as usize] = scored.into_iter().map(|s| s.id).collect();
            }
        }
    }
    Graph::from_adjacency(&lists, start)
}

/// Keeps the edges with probability at least 0.5 and drops the edge state.
pub fn extract_deterministic(g: &Graph) -> Result<Graph> {
    let state = g
        .edge_state()
        .ok_or_else(|| Error::InvalidGraph("graph carries no edge probabilities".into()))?;
    let mut out = g.retain_edges(|e| state[e].prob >= 0.5);
    out.edge_state = None;
    Ok(out)
}

/// Removes every edge that never led a trace to a new vertex. Kept edges
/// pointing at an already evaluated vertex count as unused.
pub fn prune_unvisited(g: &Graph, traces: &[crate::search::SearchTrace]) -> Result<Graph> {
    let mut used = vec![false; g.n_edges()];
    for trace in traces {
        for step in &trace.steps {
            if step.vertex as usize >= g.n_vertices() {
                return Err(Error::InvalidGraph(format!(
                    "trace expands vertex {} outside the graph",
                    step.vertex
                )));
            }
            let range = g.edge_range(step.vertex);
            for &e in step.kept.iter().chain(&step.dropped) {
                if !range.contains(&(e as usize)) {
                    return Err(Error::InvalidGraph(format!(
                        "trace edge {e} is not an out-edge of vertex {}",
                        step.vertex
                    )));
                }
            }
        }
        for (_, e) in trace.evaluating_edges(g) {
            used[e as usize] = true;
        }
    }
    Ok(g.retain_edges(|e| used[e]))
}

pub fn degree_histogram(g: &Graph) -> BTreeMap<usize, usize> {
    let mut h = BTreeMap::new();
    for v in 0..g.n_vertices() as u32 {
        *h.entry(g.outdegree(v)).or_insert(0) += 1;
    }
    h
}

/// Structural and search-usage statistics of a graph.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GraphStats {
    pub outdegree_histogram: BTreeMap<usize, usize>,
    /// Expansions per vertex, summed over queries.
    pub visit_counts: Vec<u64>,
    /// Number of queries for which each vertex is the exact nearest neighbor.
    pub nn_counts: Vec<u64>,
}

impl GraphStats {
    pub fn histogram_csv(&self) -> String {
        let mut s = String::from("outdegree,count\n");
        for (d, c) in &self.outdegree_histogram {
            let _ = writeln!(s, "{d},{c}");
        }
        s
    }

    pub fn visits_csv(&self) -> String {
        let mut s = String::from("vertex,visits,nn_count\n");
        for (v, (a, b)) in self.visit_counts.iter().zip(&self.nn_counts).enumerate() {
            let _ = writeln!(s, "{v},{a},{b}");
        }
        s
    }
}

const MAGIC: &[u8; 8] = b"SIMGRAPH";
pub const GRAPH_FORMAT_VERSION: u32 = 1;
const FLAG_EDGE_STATE: u32 = 1;

/// Binary graph file, all integers little-endian:
///
/// ```text
/// magic "SIMGRAPH" | version u32 | flags u32 | n_vertices u64 | n_edges u64
/// | start u32 | offsets (n+1) x u64 | neighbors n_edges x u32
/// | [flags & 1] probs n_edges x f64 | frozen n_edges x u8
/// ```
pub fn serialize(g: &Graph) -> Vec<u8> {
    let n = g.n_vertices();
    let m = g.n_edges();
    let mut out = Vec::with_capacity(36 + 8 * (n + 1) + 13 * m);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&GRAPH_FORMAT_VERSION.to_le_bytes());
    let flags = if g.edge_state.is_some() { FLAG_EDGE_STATE } else { 0 };
    out.extend_from_slice(&flags.to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&(m as u64).to_le_bytes());
    out.extend_from_slice(&g.start.to_le_bytes());
    for &o in &g.offsets {
        out.extend_from_slice(&(o as u64).to_le_bytes());
    }
    for &t in &g.neighbors {
        out.extend_from_slice(&t.to_le_bytes());
    }
    if let Some(state) = &g.edge_state {
        for s in state {
            out.extend_from_slice(&s.prob.to_le_bytes());
        }
        out.extend(state.iter().map(|s| s.frozen as u8));
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Format {
                offset: self.pos as u64,
                msg: format!("unexpected end of graph file (need {n} bytes)"),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn count(&mut self) -> Result<usize> {
        let at = self.pos;
        let v = self.u64()?;
        // every counted item occupies at least one byte
        if v > self.bytes.len() as u64 {
            return Err(Error::Format {
                offset: at as u64,
                msg: format!("implausible count {v}"),
            });
        }
        Ok(v as usize)
    }
}

pub fn deserialize(bytes: &[u8]) -> Result<Graph> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Format {
            offset: 0,
            msg: "not a graph file (bad magic)".into(),
        });
    }
    let version = r.u32()?;
    if version != GRAPH_FORMAT_VERSION {
        return Err(Error::Version {
            found: version,
            expected: GRAPH_FORMAT_VERSION,
        });
    }
    let flags = r.u32()?;
    if flags & !FLAG_EDGE_STATE != 0 {
        return Err(Error::Format {
            offset: 12,
            msg: format!("unknown flags {flags:#x}"),
        });
    }
    let n = r.count()?;
    let m = r.count()?;
    let start = r.u32()?;
    let mut offsets = Vec::with_capacity(n + 1);
    for _ in 0..=n {
        offsets.push(r.u64()? as usize);
    }
    let neighbors = r
        .take(4 * m)?
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let edge_state = if flags & FLAG_EDGE_STATE != 0 {
        let probs: Vec<f64> = r
            .take(8 * m)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let frozen = r.take(m)?;
        Some(
            probs
                .into_iter()
                .zip(frozen)
                .map(|(prob, &f)| EdgeState {
                    prob,
                    frozen: f != 0,
                })
                .collect(),
        )
    } else {
        None
    };
    if r.pos != bytes.len() {
        return Err(Error::Format {
            offset: r.pos as u64,
            msg: "trailing bytes after graph".into(),
        });
    }
    let g = Graph {
        offsets,
        neighbors,
        start,
        edge_state,
    };
    g.validate()?;
    Ok(g)
}

pub fn save_graph(path: impl AsRef<Path>, g: &Graph) -> Result<()> {
    write_bytes(path.as_ref(), &serialize(g))
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<Graph> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    deserialize(&bytes)
}
