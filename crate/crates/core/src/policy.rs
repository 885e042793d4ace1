//! Edge-scoring policy network.
//!
//! An edge `(u, v)` is encoded as the concatenation `[x_u; x_v]` and mapped to
//! a keep probability by
//!
//! ```text
//! p = sigmoid(w3 · elu(W2 · elu(W1 · x + b1) + b2) + b3)
//! ```
//!
//! Gradients are computed by hand. For a decision `b` with advantage `A` the
//! per-decision objective is `A * log pi(b | x) + c * H(p)`; its derivative
//! with respect to the output logit `z` is `A * (b - p) - c * z * p * (1 - p)`.

use std::path::Path;

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{write_bytes, Matrix};
use crate::error::{Error, Result};
use crate::graph::{EdgeState, Graph};
use crate::search::{EdgeAgent, SearchState};

/// Probabilities are clamped into `[PROB_EPS, 1 - PROB_EPS]` before taking logs.
pub const PROB_EPS: f64 = 1e-6;
pub const DEFAULT_HIDDEN: usize = 256;
/// Output bias at initialization; `sigmoid(2) ~ 0.88`.
pub const INITIAL_OUTPUT_BIAS: f64 = 2.0;

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn elu(z: f64) -> f64 {
    if z >= 0.0 {
        z
    } else {
        z.exp_m1()
    }
}

#[inline]
fn elu_grad(z: f64) -> f64 {
    if z >= 0.0 {
        1.0
    } else {
        z.exp()
    }
}

/// Binary entropy in nats, with `0 ln 0 = 0`.
pub fn entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -p * p.ln() - (1.0 - p) * (1.0 - p).ln()
}

/// `ln P(keep)` under Bernoulli(p), with `p` clamped away from 0 and 1.
pub fn log_prob(p: f64, keep: bool) -> f64 {
    let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
    if keep {
        p.ln()
    } else {
        (1.0 - p).ln()
    }
}

/// d/dz of `advantage * log pi(keep) + entropy_coef * H(sigmoid(z))`.
#[inline]
pub fn decision_logit_grad(keep: bool, p: f64, z: f64, advantage: f64, entropy_coef: f64) -> f64 {
    let b = if keep { 1.0 } else { 0.0 };
    advantage * (b - p) - entropy_coef * z * p * (1.0 - p)
}

/// Per-dimension affine input normalization, shared by both halves of an edge feature.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureNorm {
    pub mean: Vec<f64>,
    pub inv_std: Vec<f64>,
}

impl FeatureNorm {
    /// Standardizes with the mean and standard deviation of `base`.
    pub fn fit(base: &Matrix<f32>) -> Self {
        let d = base.dim();
        let n = base.rows().max(1) as f64;
        let mut mean = vec![0.0; d];
        for row in base.iter_rows() {
            for (m, &x) in mean.iter_mut().zip(row) {
                *m += x as f64;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for row in base.iter_rows() {
            for ((v, &x), m) in var.iter_mut().zip(row).zip(&mean) {
                *v += (x as f64 - m).powi(2);
            }
        }
        let inv_std = var
            .into_iter()
            .map(|v| {
                let sd = (v / n).sqrt();
                if sd > 1e-12 {
                    1.0 / sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, inv_std }
    }

    fn apply(&self, x: &mut [f64]) {
        let d = self.mean.len();
        for (i, v) in x.iter_mut().enumerate() {
            let j = i % d;
            *v = (*v - self.mean[j]) * self.inv_std[j];
        }
    }
}

/// Weights of the three-layer network. The same struct doubles as a
/// gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    /// `hidden x 2d`
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    /// `hidden x hidden`
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    pub w3: Array1<f64>,
    pub b3: f64,
    /// Fixed input transform; not trained.
    pub norm: Option<FeatureNorm>,
}

pub type PolicyGrad = PolicyParams;

impl PolicyParams {
    pub fn zeros(dim: usize, hidden: usize) -> Self {
        Self {
            w1: Array2::zeros((hidden, 2 * dim)),
            b1: Array1::zeros(hidden),
            w2: Array2::zeros((hidden, hidden)),
            b2: Array1::zeros(hidden),
            w3: Array1::zeros(hidden),
            b3: 0.0,
            norm: None,
        }
    }

    /// Uniform `±1/sqrt(fan_in)` weights and biases; the output bias is
    /// [`INITIAL_OUTPUT_BIAS`].
    pub fn init(dim: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros(dim, hidden);
        let mut fill = |xs: &mut [f64], fan_in: usize| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for x in xs {
                *x = rng.random_range(-bound..bound);
            }
        };
        fill(p.w1.as_slice_mut().unwrap(), 2 * dim);
        fill(p.b1.as_slice_mut().unwrap(), 2 * dim);
        fill(p.w2.as_slice_mut().unwrap(), hidden);
        fill(p.b2.as_slice_mut().unwrap(), hidden);
        fill(p.w3.as_slice_mut().unwrap(), hidden);
        p.b3 = INITIAL_OUTPUT_BIAS;
        p
    }

    pub fn with_norm(mut self, norm: FeatureNorm) -> Self {
        self.norm = Some(norm);
        self
    }

    pub fn dim(&self) -> usize {
        self.w1.ncols() / 2
    }

    pub fn hidden(&self) -> usize {
        self.w1.nrows()
    }

    /// Zero tensor of the same shape, without normalization.
    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.dim(), self.hidden())
    }

    pub fn tensors(&self) -> [&[f64]; 6] {
        [
            self.w1.as_slice().unwrap(),
            self.b1.as_slice().unwrap(),
            self.w2.as_slice().unwrap(),
            self.b2.as_slice().unwrap(),
            self.w3.as_slice().unwrap(),
            std::slice::from_ref(&self.b3),
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 6] {
        [
            self.w1.as_slice_mut().unwrap(),
            self.b1.as_slice_mut().unwrap(),
            self.w2.as_slice_mut().unwrap(),
            self.b2.as_slice_mut().unwrap(),
            self.w3.as_slice_mut().unwrap(),
            std::slice::from_mut(&mut self.b3),
        ]
    }

    pub fn n_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    pub fn max_abs(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .fold(0.0, |m, x| m.max(x.abs()))
    }

    fn add_scaled(&mut self, other: &PolicyGrad, scale: f64) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
    }
}

/// `[source; target]` as one feature vector.
pub fn edge_features(source: &[f32], target: &[f32]) -> Vec<f64> {
    source.iter().chain(target).map(|&x| x as f64).collect()
}

fn normalized(params: &PolicyParams, x: &[f64]) -> Vec<f64> {
    let mut x = x.to_vec();
    if let Some(n) = &params.norm {
        n.apply(&mut x);
    }
    x
}

/// Output logit for one feature vector.
pub fn logit(params: &PolicyParams, features: &[f64]) -> f64 {
    let x = Array1::from(normalized(params, features));
    let a1 = (params.w1.dot(&x) + &params.b1).mapv(elu);
    let a2 = (params.w2.dot(&a1) + &params.b2).mapv(elu);
    params.w3.dot(&a2) + params.b3
}

/// Keep probability for one feature vector.
pub fn forward(params: &PolicyParams, features: &[f64]) -> f64 {
    sigmoid(logit(params, features))
}

/// Intermediate activations of a batched forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub z1: Array2<f64>,
    pub a1: Array2<f64>,
    pub z2: Array2<f64>,
    pub a2: Array2<f64>,
    pub logits: Array1<f64>,
    pub probs: Array1<f64>,
}

/// Layers two and three given the first-layer pre-activations.
fn forward_from_z1(params: &PolicyParams, z1: Array2<f64>) -> ForwardPass {
    let a1 = z1.mapv(elu);
    let z2 = a1.dot(&params.w2.t()) + &params.b2;
    let a2 = z2.mapv(elu);
    let logits = a2.dot(&params.w3) + params.b3;
    let probs = logits.mapv(sigmoid);
    ForwardPass {
        z1,
        a1,
        z2,
        a2,
        logits,
        probs,
    }
}

/// Forward pass over a batch of feature rows (`n x 2d`).
pub fn forward_batch(params: &PolicyParams, x: ArrayView2<f64>) -> ForwardPass {
    let z1 = x.dot(&params.w1.t()) + &params.b1;
    forward_from_z1(params, z1)
}

/// Gradients of layers two and three plus `b1`; returns the first-layer
/// pre-activation gradient so the caller can form `dW1`.
fn backward_to_z1(params: &PolicyParams, pass: &ForwardPass, dlogit: &Array1<f64>, grad: &mut PolicyGrad) -> Array2<f64> {
    grad.w3 += &pass.a2.t().dot(dlogit);
    grad.b3 += dlogit.sum();
    let da2 = dlogit
        .view()
        .insert_axis(Axis(1))
        .dot(&params.w3.view().insert_axis(Axis(0)));
    let dz2 = da2 * pass.z2.mapv(elu_grad);
    grad.w2 += &dz2.t().dot(&pass.a1);
    grad.b2 += &dz2.sum_axis(Axis(0));
    let da1 = dz2.dot(&params.w2);
    let dz1 = da1 * pass.z1.mapv(elu_grad);
    grad.b1 += &dz1.sum_axis(Axis(0));
    dz1
}

/// Gradient of `sum_i dlogit[i] * logit(x_i)` with respect to every weight.
pub fn backward(params: &PolicyParams, x: ArrayView2<f64>, pass: &ForwardPass, dlogit: &Array1<f64>) -> PolicyGrad {
    let mut grad = params.zeros_like();
    let dz1 = backward_to_z1(params, pass, dlogit, &mut grad);
    grad.w1 += &dz1.t().dot(&x);
    grad
}

/// One training example for [`grad`].
#[derive(Debug, Clone)]
pub struct GradSample {
    pub features: Vec<f64>,
    pub keep: bool,
    pub advantage: f64,
}

/// Exact gradient of `sum [advantage * log pi(keep | x) + entropy_coef * H(pi(.|x))]`.
pub fn grad(params: &PolicyParams, batch: &[GradSample], entropy_coef: f64) -> Result<PolicyGrad> {
    let d2 = 2 * params.dim();
    if !entropy_coef.is_finite() {
        return Err(Error::invalid("entropy coefficient is not finite"));
    }
    let mut x = Array2::zeros((batch.len(), d2));
    for (i, s) in batch.iter().enumerate() {
        if s.features.len() != d2 {
            return Err(Error::DimMismatch {
                expected: d2,
                actual: s.features.len(),
            });
        }
        if !s.advantage.is_finite() || s.features.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite gradient input"));
        }
        x.row_mut(i).assign(&Array1::from(normalized(params, &s.features)));
    }
    let pass = forward_batch(params, x.view());
    let dlogit = Array1::from_iter(batch.iter().enumerate().map(|(i, s)| {
        decision_logit_grad(s.keep, pass.probs[i], pass.logits[i], s.advantage, entropy_coef)
    }));
    Ok(backward(params, x.view(), &pass, &dlogit))
}

/// One Bernoulli keep/drop decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeDecision {
    pub edge: u32,
    pub prob: f64,
    pub keep: bool,
    pub log_prob: f64,
    /// Deterministic decision; carries no gradient.
    pub frozen: bool,
}

impl EdgeDecision {
    pub fn fixed(edge: usize, keep: bool) -> Self {
        Self {
            edge: edge as u32,
            prob: if keep { 1.0 } else { 0.0 },
            keep,
            log_prob: 0.0,
            frozen: true,
        }
    }

    pub fn sample(edge: usize, prob: f64, rng: &mut impl Rng) -> Self {
        let keep = rng.random::<f64>() < prob;
        Self {
            edge: edge as u32,
            prob,
            keep,
            log_prob: log_prob(prob, keep),
            frozen: false,
        }
    }

    pub fn entropy(&self) -> f64 {
        if self.frozen {
            0.0
        } else {
            entropy(self.prob)
        }
    }
}

/// Decision for edge `e`: frozen edges are deterministic, the rest sampled
/// with keep probability `prob`.
#[inline]
fn decide_edge(e: usize, prob: f64, state: Option<&[EdgeState]>, rng: &mut impl Rng) -> EdgeDecision {
    match state.map(|s| s[e]) {
        Some(s) if s.frozen => EdgeDecision::fixed(e, s.prob >= 0.5),
        _ => EdgeDecision::sample(e, prob, rng),
    }
}

/// Samples one decision per out-edge of the expanded vertex, evaluating the
/// network for each edge.
pub fn sample_mask(
    params: &PolicyParams,
    base: &Matrix<f32>,
    edge_state: Option<&[EdgeState]>,
    state: &SearchState<'_>,
    rng: &mut impl Rng,
) -> Vec<EdgeDecision> {
    let src = base.row(state.current as usize);
    state
        .neighbors
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let p = forward(params, &edge_features(src, base.row(t as usize)));
            decide_edge(state.first_edge + i, p, edge_state, rng)
        })
        .collect()
}

/// Agent that runs the network at every expansion.
pub struct PolicyAgent<'a> {
    pub params: &'a PolicyParams,
    pub base: &'a Matrix<f32>,
    pub edge_state: Option<&'a [EdgeState]>,
}

impl EdgeAgent for PolicyAgent<'_> {
    fn decide(&self, state: &SearchState<'_>, rng: &mut ChaCha8Rng, out: &mut Vec<EdgeDecision>) {
        out.extend(sample_mask(self.params, self.base, self.edge_state, state, rng));
    }
}

/// Agent backed by precomputed per-edge probabilities.
///
/// Edge features depend only on the two endpoint vectors, so the keep
/// probability of every edge can be computed once per parameter update;
/// the cache must be rebuilt whenever the parameters change.
pub struct CachedPolicyAgent<'a> {
    pub probs: &'a [f64],
    pub edge_state: Option<&'a [EdgeState]>,
}

impl EdgeAgent for CachedPolicyAgent<'_> {
    fn decide(&self, state: &SearchState<'_>, rng: &mut ChaCha8Rng, out: &mut Vec<EdgeDecision>) {
        for i in 0..state.neighbors.len() {
            let e = state.first_edge + i;
            out.push(decide_edge(e, self.probs[e], self.edge_state, rng));
        }
    }
}

const EDGE_CHUNK: usize = 4096;

/// Scores every edge of a graph in bulk.
///
/// The first layer splits into a source half and a target half, so it is
/// computed once per vertex and gathered per edge.
pub struct EdgeScorer<'a> {
    graph: &'a Graph,
    sources: Vec<u32>,
    /// Base vectors in `f64`, normalized if the policy carries a transform.
    vectors: Array2<f64>,
}

/// Logits and probabilities of every edge, indexed by edge id.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeScores {
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

impl<'a> EdgeScorer<'a> {
    pub fn new(graph: &'a Graph, base: &Matrix<f32>, norm: Option<&FeatureNorm>) -> Result<Self> {
        if base.rows() != graph.n_vertices() {
            return Err(Error::invalid(format!(
                "graph has {} vertices but base has {} rows",
                graph.n_vertices(),
                base.rows()
            )));
        }
        let d = base.dim();
        let mut vectors = Array2::from_shape_vec(
            (base.rows(), d),
            base.as_slice().iter().map(|&x| x as f64).collect(),
        )
        .map_err(|e| Error::invalid(e.to_string()))?;
        if let Some(n) = norm {
            for mut row in vectors.rows_mut() {
                n.apply(row.as_slice_mut().unwrap());
            }
        }
        Ok(Self {
            graph,
            sources: graph.edge_sources(),
            vectors,
        })
    }

    fn projections(&self, params: &PolicyParams) -> (Array2<f64>, Array2<f64>) {
        let d = params.dim();
        let w_src = params.w1.slice(s![.., ..d]);
        let w_dst = params.w1.slice(s![.., d..]);
        (self.vectors.dot(&w_src.t()), self.vectors.dot(&w_dst.t()))
    }

    fn z1_rows(&self, params: &PolicyParams, proj: &(Array2<f64>, Array2<f64>), edges: &[usize]) -> Array2<f64> {
        let h = params.hidden();
        let mut z1 = Array2::zeros((edges.len(), h));
        for (r, &e) in edges.iter().enumerate() {
            let src = proj.0.row(self.sources[e] as usize);
            let dst = proj.1.row(self.graph.edge_target(e) as usize);
            let mut row = z1.row_mut(r);
            for j in 0..h {
                row[j] = src[j] + dst[j] + params.b1[j];
            }
        }
        z1
    }

    pub fn forward(&self, params: &PolicyParams) -> EdgeScores {
        let proj = self.projections(params);
        let m = self.graph.n_edges();
        let mut logits = Vec::with_capacity(m);
        let ids: Vec<usize> = (0..m).collect();
        for chunk in ids.chunks(EDGE_CHUNK) {
            let pass = forward_from_z1(params, self.z1_rows(params, &proj, chunk));
            logits.extend(pass.logits.iter().copied());
        }
        let probs = logits.iter().map(|&z| sigmoid(z)).collect();
        EdgeScores { logits, probs }
    }

    /// Gradient of `sum_e dlogit[e] * logit(e)`; edges with zero weight are skipped.
    pub fn backward(&self, params: &PolicyParams, dlogit: &[f64]) -> PolicyGrad {
        assert_eq!(dlogit.len(), self.graph.n_edges());
        let proj = self.projections(params);
        let n = self.vectors.nrows();
        let h = params.hidden();
        let mut grad = params.zeros_like();
        let mut g_src = Array2::<f64>::zeros((n, h));
        let mut g_dst = Array2::<f64>::zeros((n, h));
        let active: Vec<usize> = (0..dlogit.len()).filter(|&e| dlogit[e] != 0.0).collect();
        for chunk in active.chunks(EDGE_CHUNK) {
            let pass = forward_from_z1(params, self.z1_rows(params, &proj, chunk));
            let dl = Array1::from_iter(chunk.iter().map(|&e| dlogit[e]));
            let dz1 = backward_to_z1(params, &pass, &dl, &mut grad);
            for (r, &e) in chunk.iter().enumerate() {
                let row = dz1.row(r);
                let mut gs = g_src.row_mut(self.sources[e] as usize);
                gs += &row;
                let mut gd = g_dst.row_mut(self.graph.edge_target(e) as usize);
                gd += &row;
            }
        }
        let d = params.dim();
        grad.w1
            .slice_mut(s![.., ..d])
            .assign(&g_src.t().dot(&self.vectors));
        grad.w1
            .slice_mut(s![.., d..])
            .assign(&g_dst.t().dot(&self.vectors));
        grad
    }
}

/// Gradient-ascent update rule.
pub trait Optimizer: Send {
    fn step(&mut self, params: &mut PolicyParams, grad: &PolicyGrad);
}

#[derive(Debug, Clone)]
pub struct Sgd {
    pub lr: f64,
}

impl Optimizer for Sgd {
    fn step(&mut self, params: &mut PolicyParams, grad: &PolicyGrad) {
        params.add_scaled(grad, self.lr);
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Option<PolicyParams>,
    v: Option<PolicyParams>,
    t: i32,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: None,
            v: None,
            t: 0,
        }
    }
}

impl Optimizer for Adam {
    fn step(&mut self, params: &mut PolicyParams, grad: &PolicyGrad) {
        let m = self.m.get_or_insert_with(|| grad.zeros_like());
        let v = self.v.get_or_insert_with(|| grad.zeros_like());
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        let tensors = params
            .tensors_mut()
            .into_iter()
            .zip(grad.tensors())
            .zip(m.tensors_mut())
            .zip(v.tensors_mut());
        for (((p, g), m), v) in tensors {
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                p[i] += self.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + self.eps);
            }
        }
    }
}

const CKPT_MAGIC: &[u8; 8] = b"SIMGPOL\0";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Checkpoint layout (little-endian):
///
/// ```text
/// magic "SIMGPOL\0" | version u32 | dim u32 | hidden u32 | has_norm u32
/// | w1 (hidden x 2d) | b1 | w2 (hidden x hidden) | b2 | w3 | b3
/// | [has_norm] mean (d) | inv_std (d)
/// ```
///
/// All tensors are row-major `f32`.
pub fn encode_checkpoint(params: &PolicyParams) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + 4 * params.n_params());
    out.extend_from_slice(CKPT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(params.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(params.hidden() as u32).to_le_bytes());
    out.extend_from_slice(&(params.norm.is_some() as u32).to_le_bytes());
    let mut put = |xs: &[f64]| {
        for &x in xs {
            out.extend_from_slice(&(x as f32).to_le_bytes());
        }
    };
    for t in params.tensors() {
        put(t);
    }
    if let Some(n) = &params.norm {
        put(&n.mean);
        put(&n.inv_std);
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<PolicyParams> {
    let fmt = |offset: usize, msg: &str| Error::Format {
        offset: offset as u64,
        msg: msg.to_string(),
    };
    if bytes.len() < 24 || &bytes[..8] != CKPT_MAGIC {
        return Err(fmt(0, "not a policy checkpoint"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let version = word(8);
    if version != CHECKPOINT_VERSION {
        return Err(Error::Version {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let (dim, hidden, has_norm) = (word(12) as usize, word(16) as usize, word(20) != 0);
    let mut params = PolicyParams::zeros(dim, hidden);
    let norm_len = if has_norm { 2 * dim } else { 0 };
    let expected = 24 + 4 * (params.n_params() + norm_len);
    if bytes.len() != expected {
        return Err(fmt(
            bytes.len().min(expected),
            &format!("checkpoint is {} bytes, expected {expected}", bytes.len()),
        ));
    }
    let mut vals = bytes[24..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64);
    for t in params.tensors_mut() {
        for x in t.iter_mut() {
            *x = vals.next().unwrap();
        }
    }
    if has_norm {
        let mean = vals.by_ref().take(dim).collect();
        let inv_std = vals.take(dim).collect();
        params.norm = Some(FeatureNorm { mean, inv_std });
    }
    Ok(params)
}

pub fn save_checkpoint(path: impl AsRef<Path>, params: &PolicyParams) -> Result<()> {
    write_bytes(path.as_ref(), &encode_checkpoint(params))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<PolicyParams> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
