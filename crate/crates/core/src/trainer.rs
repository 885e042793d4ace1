//! Policy-gradient refinement of a similarity graph.
//!
//! Each training query runs one search session with the stochastic edge
//! agent. A session that returns the true nearest neighbor earns
//! `max(dcs_max - dcs, 1)`, otherwise 0. Advantages are taken against a
//! per-query moving-average baseline, and the policy is updated by gradient
//! ascent on `advantage * log pi + entropy_coef * H`. After every epoch the
//! probabilities are thresholded into a plain graph, scored on validation
//! queries, and the best such graph (the initial one included) is kept.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Matrix, Split};
use crate::error::{Error, Result};
use crate::graph::{extract_deterministic, EdgeState, Graph};
use crate::policy::{
    decision_logit_grad, Adam, CachedPolicyAgent, EdgeDecision, EdgeScorer, EdgeScores,
    FeatureNorm, Optimizer, PolicyGrad, PolicyParams, Sgd, DEFAULT_HIDDEN,
};
use crate::search::{
    beam_search, check_queries, check_search_params, derive_seed, evaluate, AllKeep, EdgeAgent,
    EvalReport, SearchTrace,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardConfig {
    /// Distance-computation budget.
    pub dcs_max: usize,
}

impl RewardConfig {
    pub fn new(dcs_max: usize) -> Result<Self> {
        if dcs_max == 0 {
            return Err(Error::invalid("dcs_max must be at least 1"));
        }
        Ok(Self { dcs_max })
    }
}

/// `found * max(dcs_max - dcs, 1)`.
pub fn reward_value(found: bool, dcs: usize, cfg: &RewardConfig) -> f64 {
    if !found {
        return 0.0;
    }
    (cfg.dcs_max as f64 - dcs as f64).max(1.0)
}

pub fn compute_reward(trace: &SearchTrace, gt_id: u32, cfg: &RewardConfig) -> f64 {
    reward_value(trace.top1() == Some(gt_id), trace.dcs, cfg)
}

/// Mean session reward of an evaluation run.
pub fn mean_reward(report: &EvalReport, cfg: &RewardConfig) -> f64 {
    let total: f64 = report
        .records
        .iter()
        .map(|r| reward_value(r.found, r.dcs, cfg))
        .sum();
    total / report.records.len() as f64
}

/// One query's search trajectory and its reward.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub query: usize,
    pub trace: SearchTrace,
    pub reward: f64,
}

impl Session {
    pub fn decisions(&self) -> &[EdgeDecision] {
        &self.trace.decisions
    }

    /// `log pi(trajectory)`: sum of per-decision log-probabilities.
    pub fn log_prob(&self) -> f64 {
        self.decisions().iter().map(|d| d.log_prob).sum()
    }
}

/// Per-query moving average of observed rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineTable {
    values: Vec<f64>,
    decay: f64,
}

impl BaselineTable {
    pub fn new(n_queries: usize, decay: f64) -> Self {
        Self {
            values: vec![0.0; n_queries],
            decay,
        }
    }

    pub fn get(&self, query: usize) -> f64 {
        self.values[query]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `b <- decay * b + (1 - decay) * reward`
    pub fn observe(&mut self, query: usize, reward: f64) {
        let b = &mut self.values[query];
        *b = self.decay * *b + (1.0 - self.decay) * reward;
    }
}

/// One session per listed query; session `i` is seeded with `derive_seed(seed, i)`.
#[allow(clippy::too_many_arguments)]
pub fn rollout_batch(
    g: &Graph,
    base: &Matrix<f32>,
    agent: &dyn EdgeAgent,
    queries: &Matrix<f32>,
    query_ids: &[usize],
    gt: &[u32],
    cfg: &RewardConfig,
    k: usize,
    ef: usize,
    seed: u64,
) -> Vec<Session> {
    query_ids
        .par_iter()
        .enumerate()
        .map(|(i, &q)| {
            let trace = beam_search(g, base, agent, queries.row(q), k, ef, derive_seed(seed, i as u64));
            let reward = compute_reward(&trace, gt[q], cfg);
            Session {
                query: q,
                trace,
                reward,
            }
        })
        .collect()
}

/// Per-edge weight on the output logit implied by a batch of sessions:
/// `(1/B) * sum_sessions sum_decisions d/dz [A log pi + c H]`.
pub fn session_logit_weights(
    sessions: &[Session],
    baselines: &BaselineTable,
    scores: &EdgeScores,
    entropy_coef: f64,
) -> Vec<f64> {
    let mut w = vec![0.0; scores.probs.len()];
    if sessions.is_empty() {
        return w;
    }
    let scale = 1.0 / sessions.len() as f64;
    for s in sessions {
        let adv = s.reward - baselines.get(s.query);
        for d in s.decisions() {
            let e = d.edge as usize;
            w[e] += scale * decision_logit_grad(d.keep, scores.probs[e], scores.logits[e], adv, entropy_coef);
        }
    }
    w
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateSummary {
    pub mean_reward: f64,
    pub mean_advantage: f64,
    pub decisions: usize,
}

/// One policy-gradient step followed by the baseline update.
///
/// `scores` must be the edge scores of the current `params`.
pub fn update(
    params: &mut PolicyParams,
    scorer: &EdgeScorer<'_>,
    scores: &EdgeScores,
    sessions: &[Session],
    baselines: &mut BaselineTable,
    entropy_coef: f64,
    optimizer: &mut dyn Optimizer,
) -> UpdateSummary {
    let weights = session_logit_weights(sessions, baselines, scores, entropy_coef);
    let n = sessions.len().max(1) as f64;
    let summary = UpdateSummary {
        mean_reward: sessions.iter().map(|s| s.reward).sum::<f64>() / n,
        mean_advantage: sessions
            .iter()
            .map(|s| s.reward - baselines.get(s.query))
            .sum::<f64>()
            / n,
        decisions: sessions.iter().map(|s| s.decisions().len()).sum(),
    };
    if weights.iter().any(|&w| w != 0.0) {
        let grad: PolicyGrad = scorer.backward(params, &weights);
        optimizer.step(params, &grad);
    }
    for s in sessions {
        baselines.observe(s.query, s.reward);
    }
    summary
}

/// Edges whose probability stays beyond `hi` (or below `lo`) for `patience`
/// consecutive checks become deterministic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreezeRule {
    pub lo: f64,
    pub hi: f64,
    pub patience: usize,
}

impl Default for FreezeRule {
    fn default() -> Self {
        Self {
            lo: 0.01,
            hi: 0.99,
            patience: 5,
        }
    }
}

/// Consecutive overconfident checks per edge (positive: above `hi`,
/// negative: below `lo`).
#[derive(Debug, Clone, PartialEq)]
pub struct FreezeTracker {
    streak: Vec<i64>,
}

impl FreezeTracker {
    pub fn new(n_edges: usize) -> Self {
        Self {
            streak: vec![0; n_edges],
        }
    }
}

/// Applies one check; returns the number of newly frozen edges.
pub fn freeze_overconfident(
    state: &mut [EdgeState],
    tracker: &mut FreezeTracker,
    probs: &[f64],
    rule: &FreezeRule,
) -> usize {
    let mut frozen = 0;
    for ((s, streak), &p) in state.iter_mut().zip(&mut tracker.streak).zip(probs) {
        if s.frozen {
            continue;
        }
        *streak = if p > rule.hi {
            (*streak).max(0) + 1
        } else if p < rule.lo {
            (*streak).min(0) - 1
        } else {
            0
        };
        if streak.unsigned_abs() as usize >= rule.patience {
            s.frozen = true;
            s.prob = if *streak > 0 { 1.0 } else { 0.0 };
            frozen += 1;
        }
    }
    frozen
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub optimizer: OptimizerKind,
    pub entropy_coef: f64,
    /// When set, the entropy coefficient moves linearly from `entropy_coef`
    /// in the first epoch to this value in the last one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entropy_coef_final: Option<f64>,
    pub baseline_decay: f64,
    pub freeze: FreezeRule,
    pub hidden: usize,
    pub normalize_inputs: bool,
    #[serde(skip)]
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 500,
            lr: 1e-3,
            optimizer: OptimizerKind::Adam,
            entropy_coef: 0.01,
            entropy_coef_final: None,
            baseline_decay: 0.9,
            freeze: FreezeRule::default(),
            hidden: DEFAULT_HIDDEN,
            normalize_inputs: false,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be at least 1"));
        }
        if self.hidden == 0 {
            return Err(Error::invalid("hidden width must be at least 1"));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.baseline_decay) {
            return Err(Error::invalid("baseline decay must lie in [0, 1)"));
        }
        let final_ok = self.entropy_coef_final.is_none_or(|c| c.is_finite() && c >= 0.0);
        if !(self.entropy_coef.is_finite() && self.entropy_coef >= 0.0 && final_ok) {
            return Err(Error::invalid("entropy coefficient must be non-negative"));
        }
        let f = &self.freeze;
        if !(0.0 <= f.lo && f.lo < 0.5 && 0.5 < f.hi && f.hi <= 1.0) || f.patience == 0 {
            return Err(Error::invalid("freeze rule needs lo < 0.5 < hi and patience >= 1"));
        }
        Ok(())
    }

    /// Entropy coefficient used during `epoch` (1-based).
    pub fn entropy_at(&self, epoch: usize) -> f64 {
        match self.entropy_coef_final {
            Some(end) if self.epochs > 1 => {
                let t = (epoch.clamp(1, self.epochs) - 1) as f64 / (self.epochs - 1) as f64;
                self.entropy_coef + t * (end - self.entropy_coef)
            }
            _ => self.entropy_coef,
        }
    }

    fn optimizer(&self) -> Box<dyn Optimizer> {
        match self.optimizer {
            OptimizerKind::Adam => Box::new(Adam::new(self.lr)),
            OptimizerKind::Sgd => Box::new(Sgd { lr: self.lr }),
        }
    }
}

/// Search parameters shared by rollouts and validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchParams {
    pub k: usize,
    pub ef: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_reward: f64,
    pub val_reward: f64,
    pub val_recall: f64,
    pub val_mean_dcs: f64,
    pub kept_fraction: f64,
    pub frozen_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingLog {
    pub records: Vec<EpochRecord>,
}

impl TrainingLog {
    pub const HEADER: &'static str =
        "epoch,train_mean_reward,val_mean_reward,val_recall,val_mean_dcs,kept_fraction,frozen_fraction";

    pub fn row(r: &EpochRecord) -> String {
        format!(
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            r.epoch,
            r.train_reward,
            r.val_reward,
            r.val_recall,
            r.val_mean_dcs,
            r.kept_fraction,
            r.frozen_fraction
        )
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::HEADER);
        s.push('\n');
        for r in &self.records {
            let _ = writeln!(s, "{}", Self::row(r));
        }
        s
    }
}

/// Validation summary of one candidate graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValScore {
    pub reward: f64,
    pub recall: f64,
    pub mean_dcs: f64,
}

pub fn score_graph(
    g: &Graph,
    ds: &Dataset,
    split: Split,
    search: SearchParams,
    reward: &RewardConfig,
) -> Result<ValScore> {
    let report = evaluate(
        g,
        &ds.base,
        &AllKeep,
        ds.queries(split),
        ds.require_gt(split)?,
        search.k,
        search.ef,
        0,
    )?;
    Ok(ValScore {
        reward: mean_reward(&report, reward),
        recall: report.recall_at_1,
        mean_dcs: report.mean_dcs,
    })
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Best-validation deterministic graph.
    pub graph: Graph,
    pub best_epoch: usize,
    pub best: ValScore,
    pub initial: ValScore,
    pub log: TrainingLog,
    pub params: PolicyParams,
    /// Input graph carrying the final learned edge state.
    pub learned: Graph,
}

/// Called after every epoch with the record just logged.
pub type EpochHook<'a> = dyn FnMut(&EpochRecord) + 'a;

pub fn train(
    g0: &Graph,
    ds: &Dataset,
    search: SearchParams,
    reward: &RewardConfig,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    train_with_hook(g0, ds, search, reward, cfg, &mut |_| {})
}

pub fn train_with_hook(
    g0: &Graph,
    ds: &Dataset,
    search: SearchParams,
    reward: &RewardConfig,
    cfg: &TrainConfig,
    hook: &mut EpochHook<'_>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    check_search_params(search.k, search.ef)?;
    RewardConfig::new(reward.dcs_max)?;
    g0.validate()?;
    let train_gt = ds.require_gt(Split::Train)?;
    let val_gt = ds.require_gt(Split::Val)?;
    check_queries(&ds.base, &ds.val, val_gt)?;
    if cfg.epochs > 0 {
        check_queries(&ds.base, &ds.train, train_gt)?;
    }

    let initial_graph = match g0.edge_state() {
        Some(_) => extract_deterministic(g0)?,
        None => g0.clone(),
    };
    let initial = score_graph(&initial_graph, ds, Split::Val, search, reward)?;
    let mut best = (0usize, initial, initial_graph);

    let mut learned = match g0.edge_state() {
        Some(_) => g0.clone(),
        None => g0.with_uniform_state(crate::graph::INITIAL_KEEP_PROB),
    };
    let mut params = PolicyParams::init(ds.dim(), cfg.hidden, derive_seed(cfg.seed, u64::MAX));
    if cfg.normalize_inputs {
        params = params.with_norm(FeatureNorm::fit(&ds.base));
    }
    let topology = learned.clone();
    let scorer = EdgeScorer::new(&topology, &ds.base, params.norm.as_ref())?;
    let mut scores = scorer.forward(&params);
    let mut optimizer = cfg.optimizer();
    let mut baselines = BaselineTable::new(ds.train.rows(), cfg.baseline_decay);
    let mut tracker = FreezeTracker::new(learned.n_edges());
    let mut log = TrainingLog::default();
    let mut order: Vec<usize> = (0..ds.train.rows()).collect();
    let n_edges = learned.n_edges().max(1) as f64;

    for epoch in 1..=cfg.epochs {
        let epoch_seed = derive_seed(cfg.seed, epoch as u64);
        let entropy_coef = cfg.entropy_at(epoch);
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(epoch_seed));
        let mut reward_sum = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let sessions = {
                let agent = CachedPolicyAgent {
                    probs: &scores.probs,
                    edge_state: learned.edge_state(),
                };
                rollout_batch(
                    &topology,
                    &ds.base,
                    &agent,
                    &ds.train,
                    batch,
                    train_gt,
                    reward,
                    search.k,
                    search.ef,
                    derive_seed(epoch_seed, b as u64),
                )
            };
            let summary = update(
                &mut params,
                &scorer,
                &scores,
                &sessions,
                &mut baselines,
                entropy_coef,
                optimizer.as_mut(),
            );
            reward_sum += summary.mean_reward * sessions.len() as f64;
            scores = scorer.forward(&params);
        }
        let train_reward = reward_sum / ds.train.rows() as f64;
        if !train_reward.is_finite() || !params.is_finite() {
            return Err(Error::Divergence { epoch });
        }

        let state = learned.edge_state_mut().expect("learned graph carries edge state");
        for (s, &p) in state.iter_mut().zip(&scores.probs) {
            if !s.frozen {
                s.prob = p;
            }
        }
        let candidate = extract_deterministic(&learned)?;
        let val = score_graph(&candidate, ds, Split::Val, search, reward)?;
        if !val.reward.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        let state = learned.edge_state_mut().unwrap();
        freeze_overconfident(state, &mut tracker, &scores.probs, &cfg.freeze);
        let frozen = state.iter().filter(|s| s.frozen).count() as f64;
        let record = EpochRecord {
            epoch,
            train_reward,
            val_reward: val.reward,
            val_recall: val.recall,
            val_mean_dcs: val.mean_dcs,
            kept_fraction: candidate.n_edges() as f64 / n_edges,
            frozen_fraction: frozen / n_edges,
        };
        hook(&record);
        log.records.push(record);
        if val.reward > best.1.reward {
            best = (epoch, val, candidate);
        }
    }

    let (best_epoch, best_score, graph) = best;
    Ok(TrainOutcome {
        graph,
        best_epoch,
        best: best_score,
        initial,
        log,
        params,
        learned,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_schedule() {
        let mut c = TrainConfig {
            epochs: 5,
            entropy_coef: 0.4,
            ..Default::default()
        };
        assert_eq!(c.entropy_at(3), 0.4);
        c.entropy_coef_final = Some(0.0);
        let got: Vec<f64> = (1..=5).map(|e| c.entropy_at(e)).collect();
        assert_eq!(got, vec![0.4, 0.30000000000000004, 0.2, 0.09999999999999998, 0.0]);
        c.entropy_coef_final = Some(-1.0);
        assert!(c.validate().is_err());
    }
    use crate::dataset::{synth_clusters, SynthSpec};
    use crate::graph::{build_complete, build_nsw};

    fn trace(top: u32, dcs: usize) -> SearchTrace {
        SearchTrace {
            dcs,
            topk: vec![crate::distance::Scored::new(0.0, top)],
            ..Default::default()
        }
    }

    #[test]
    fn reward_examples() {
        let cfg = RewardConfig::new(150).unwrap();
        assert_eq!(compute_reward(&trace(3, 10), 4, &cfg), 0.0);
        assert_eq!(compute_reward(&trace(4, 128), 4, &cfg), 22.0);
        assert_eq!(compute_reward(&trace(4, 200), 4, &cfg), 1.0);
        assert!(RewardConfig::new(0).is_err());
    }

    #[test]
    fn baseline_recurrence() {
        let mut b = BaselineTable::new(2, 0.9);
        b.observe(1, 10.0);
        b.observe(1, 20.0);
        let expected = 0.9 * (0.9 * 0.0 + 0.1 * 10.0) + 0.1 * 20.0;
        assert!((b.get(1) - expected).abs() < 1e-12);
        assert_eq!(b.get(0), 0.0);
    }

    #[test]
    fn freezing_rules() {
        let rule = FreezeRule::default();
        let mut state = vec![EdgeState::new(0.5); 3];
        let mut tracker = FreezeTracker::new(3);
        for i in 0..rule.patience {
            let osc = if i % 2 == 0 { 0.995 } else { 0.985 };
            let n = freeze_overconfident(&mut state, &mut tracker, &[0.999, 0.001, osc], &rule);
            assert_eq!(n, if i + 1 == rule.patience { 2 } else { 0 });
        }
        assert!(state[0].frozen && state[0].prob == 1.0);
        assert!(state[1].frozen && state[1].prob == 0.0);
        assert!(!state[2].frozen);
    }

    #[test]
    fn zero_advantage_and_entropy_leaves_params() {
        let ds = synth_clusters(&SynthSpec::new(3, 5, 4, 0.3, 1).with_queries(6, 0, 0)).unwrap();
        let g = build_complete(15, 0).unwrap();
        let mut params = PolicyParams::init(4, 8, 0);
        let scorer = EdgeScorer::new(&g, &ds.base, None).unwrap();
        let scores = scorer.forward(&params);
        let mut baselines = BaselineTable::new(6, 0.9);
        let cfg = RewardConfig::new(10).unwrap();
        let agent = CachedPolicyAgent {
            probs: &scores.probs,
            edge_state: None,
        };
        let sessions = rollout_batch(&g, &ds.base, &agent, &ds.train, &[0, 1, 2], ds.gt_train.as_ref().unwrap(), &cfg, 1, 1, 3);
        for s in &sessions {
            baselines.values[s.query] = s.reward;
        }
        let before = params.clone();
        update(&mut params, &scorer, &scores, &sessions, &mut baselines, 0.0, &mut Sgd { lr: 1.0 });
        assert_eq!(params, before);
    }

    #[test]
    fn positive_advantage_raises_kept_probabilities() {
        let ds = synth_clusters(&SynthSpec::new(3, 5, 4, 0.3, 2).with_queries(1, 0, 0)).unwrap();
        let g = build_complete(15, 0).unwrap();
        let mut params = PolicyParams::init(4, 8, 1);
        let scorer = EdgeScorer::new(&g, &ds.base, None).unwrap();
        let scores = scorer.forward(&params);
        let agent = CachedPolicyAgent {
            probs: &scores.probs,
            edge_state: None,
        };
        let cfg = RewardConfig::new(100).unwrap();
        let sessions = rollout_batch(&g, &ds.base, &agent, &ds.train, &[0], ds.gt_train.as_ref().unwrap(), &cfg, 1, 1, 0);
        assert!(sessions[0].reward > 0.0);
        let mut baselines = BaselineTable::new(1, 0.9);
        update(&mut params, &scorer, &scores, &sessions, &mut baselines, 0.0, &mut Sgd { lr: 1e-3 });
        let after = scorer.forward(&params);
        let kept: Vec<usize> = sessions[0].decisions().iter().filter(|d| d.keep).map(|d| d.edge as usize).collect();
        let mean = |p: &[f64]| kept.iter().map(|&e| p[e]).sum::<f64>() / kept.len() as f64;
        assert!(mean(&after.probs) > mean(&scores.probs));
    }

    #[test]
    fn zero_epochs_returns_initial_graph() {
        let ds = synth_clusters(&SynthSpec::new(4, 10, 6, 0.4, 5).with_queries(20, 20, 0)).unwrap();
        let g0 = build_nsw(&ds.base, 3, 8, 1).unwrap();
        let cfg = TrainConfig {
            epochs: 0,
            hidden: 8,
            ..Default::default()
        };
        let out = train(&g0, &ds, SearchParams { k: 1, ef: 4 }, &RewardConfig::new(40).unwrap(), &cfg).unwrap();
        assert_eq!(out.graph, g0);
        assert!(out.log.records.is_empty());
        assert_eq!(out.best_epoch, 0);
    }

    #[test]
    fn all_frozen_means_zero_gradient() {
        let ds = synth_clusters(&SynthSpec::new(2, 5, 3, 0.3, 5).with_queries(4, 0, 0)).unwrap();
        let mut g = build_complete(10, 0).unwrap();
        for s in g.edge_state_mut().unwrap() {
            s.frozen = true;
            s.prob = 1.0;
        }
        let params = PolicyParams::init(3, 4, 0);
        let scorer = EdgeScorer::new(&g, &ds.base, None).unwrap();
        let scores = scorer.forward(&params);
        let agent = CachedPolicyAgent {
            probs: &scores.probs,
            edge_state: g.edge_state(),
        };
        let cfg = RewardConfig::new(30).unwrap();
        let sessions = rollout_batch(&g, &ds.base, &agent, &ds.train, &[0, 1, 2, 3], ds.gt_train.as_ref().unwrap(), &cfg, 1, 1, 0);
        let baselines = BaselineTable::new(4, 0.9);
        let w = session_logit_weights(&sessions, &baselines, &scores, 0.5);
        assert!(w.iter().all(|&x| x == 0.0));
        assert!(sessions.iter().all(|s| s.log_prob() == 0.0));
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            batch_size: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            freeze: FreezeRule {
                lo: 0.6,
                hi: 0.99,
                patience: 5,
            },
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
