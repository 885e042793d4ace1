//! Independent oracles shared by the integration tests and the acceptance run.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use simgraph::dataset::{brute_force_gt, Matrix};
use simgraph::graph::{build_complete, extract_deterministic, prune_unvisited, EdgeState, Graph};
use simgraph::policy::{grad, CachedPolicyAgent, GradSample, PolicyParams};
use simgraph::pruning::{collect_usage, edge_weights, tune_threshold_and_prune, DEFAULT_LAMBDA};
use simgraph::search::{beam_search, evaluate, AllKeep};
use simgraph::trainer::{compute_reward, RewardConfig, SearchParams};

pub fn dist(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (f64::from(*x) - f64::from(*y)).powi(2)).sum()
}

fn key_lt(a: (f64, u32), b: (f64, u32)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

pub struct Reference {
    pub topk: Vec<(f64, u32)>,
    pub visited: Vec<u32>,
    pub hops: usize,
}

/// Plain best-first search over linear-scan lists, no agent involved.
pub fn reference_search(adj: &[Vec<u32>], start: u32, pts: &[Vec<f32>], q: &[f32], k: usize, ef: usize) -> Reference {
    let width = ef.max(k);
    let mut seen = vec![false; adj.len()];
    seen[start as usize] = true;
    let s = (dist(q, &pts[start as usize]), start);
    let mut cand = vec![s];
    let mut res = vec![s];
    let mut visited = vec![start];
    let mut hops = 0;
    let worst = |r: &[(f64, u32)]| *r.iter().reduce(|a, b| if key_lt(*a, *b) { b } else { a }).unwrap();
    loop {
        let Some(ci) = (0..cand.len()).reduce(|a, b| if key_lt(cand[b], cand[a]) { b } else { a }) else {
            break;
        };
        let c = cand[ci];
        if res.len() >= width && c.0 > worst(&res).0 {
            break;
        }
        cand.swap_remove(ci);
        hops += 1;
        for &t in &adj[c.1 as usize] {
            if seen[t as usize] {
                continue;
            }
            seen[t as usize] = true;
            visited.push(t);
            let e = (dist(q, &pts[t as usize]), t);
            cand.push(e);
            if res.len() < width || key_lt(e, worst(&res)) {
                res.push(e);
                if res.len() > width {
                    let w = worst(&res);
                    res.retain(|x| *x != w);
                }
            }
        }
    }
    res.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    res.truncate(k);
    Reference { topk: res, visited, hops }
}

pub struct Instance {
    pub adj: Vec<Vec<u32>>,
    pub start: u32,
    pub pts: Vec<Vec<f32>>,
    pub q: Vec<f32>,
}

/// Random digraph with random (sometimes lattice, hence tied) coordinates.
pub fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let n = rng.random_range(1..=60);
    let dim = rng.random_range(1..=8);
    let lattice = rng.random_bool(0.5);
    let coord = |rng: &mut ChaCha8Rng| {
        if lattice {
            rng.random_range(-2i32..=2) as f32
        } else {
            rng.random_range(-1.0f32..1.0)
        }
    };
    let pts: Vec<Vec<f32>> = (0..n).map(|_| (0..dim).map(|_| coord(rng)).collect()).collect();
    let q: Vec<f32> = (0..dim).map(|_| coord(rng)).collect();
    let density = rng.random_range(0.0..0.5);
    let adj = (0..n)
        .map(|u| {
            let mut out: Vec<u32> = (0..n as u32).filter(|&v| v != u as u32 && rng.random_bool(density)).collect();
            for i in (1..out.len()).rev() {
                out.swap(i, rng.random_range(0..=i));
            }
            out
        })
        .collect();
    let start = rng.random_range(0..n as u32);
    Instance { adj, start, pts, q }
}

/// Number of instances on which the all-keep search disagrees with the reference.
pub fn search_mismatches(n_instances: u64, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = 0;
    for case in 0..n_instances {
        let inst = random_instance(&mut rng);
        let k = rng.random_range(1..=4);
        let ef = rng.random_range(1..=12);
        let g = Graph::from_adjacency(&inst.adj, inst.start).unwrap();
        let base = Matrix::from_rows(&inst.pts).unwrap();
        let got = beam_search(&g, &base, &AllKeep, &inst.q, k, ef, case);
        let want = reference_search(&inst.adj, inst.start, &inst.pts, &inst.q, k, ef);
        let same_topk = got.topk.len() == want.topk.len()
            && got.topk.iter().zip(&want.topk).all(|(a, b)| a.dist.to_bits() == b.0.to_bits() && a.id == b.1);
        if !(same_topk && got.visited == want.visited && got.dcs == want.visited.len() && got.hops == want.hops) {
            bad += 1;
        }
    }
    bad
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, dim: usize, lattice: bool) -> Matrix<f32> {
    let data = (0..rows * dim)
        .map(|_| {
            if lattice {
                rng.random_range(-1i32..=1) as f32
            } else {
                rng.random_range(-1.0f32..1.0)
            }
        })
        .collect();
    Matrix::new(dim, data).unwrap()
}

/// Nearest base index by exhaustive double-precision scan; lowest index wins ties.
pub fn oracle_nn(base: &Matrix<f32>, q: &[f32]) -> u32 {
    let mut best = (f64::INFINITY, 0u32);
    for i in 0..base.rows() {
        let d = dist(base.row(i), q);
        if d < best.0 {
            best = (d, i as u32);
        }
    }
    best.1
}

/// Trials on which `brute_force_gt` disagrees with the oracle.
pub fn gt_mismatches(trials: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..trials)
        .filter(|trial| {
            let dim = rng.random_range(1..=16);
            let lattice = trial % 2 == 0;
            let rows = rng.random_range(1..=80);
            let base = random_matrix(&mut rng, rows, dim, lattice);
            let queries = random_matrix(&mut rng, 25, dim, lattice);
            let gt = brute_force_gt(&base, &queries).unwrap();
            let want: Vec<u32> = queries.iter_rows().map(|q| oracle_nn(&base, q)).collect();
            gt != want
        })
        .count()
}

/// Recall@1 of a full-width beam on a complete graph over `n_queries` random queries.
pub fn complete_graph_recall(n_queries: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 300;
    let base = random_matrix(&mut rng, n, 8, false);
    let queries = random_matrix(&mut rng, n_queries, 8, false);
    let want: Vec<u32> = queries.iter_rows().map(|q| oracle_nn(&base, q)).collect();
    let g = build_complete(n, 17).unwrap();
    let report = evaluate(&g, &base, &AllKeep, &queries, &want, 1, n, 0).unwrap();
    (report.recall_at_1, report.mean_dcs)
}

fn elu(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        z.exp() - 1.0
    }
}

fn layer(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let n = x.len();
    b.iter()
        .enumerate()
        .map(|(i, bi)| elu(bi + w[i * n..(i + 1) * n].iter().zip(x).map(|(a, c)| a * c).sum::<f64>()))
        .collect()
}

/// Objective from a flat parameter vector laid out as w1, b1, w2, b2, w3, b3.
fn objective(theta: &[f64], dim: usize, hidden: usize, batch: &[GradSample], c: f64) -> f64 {
    let d2 = 2 * dim;
    let (w1, rest) = theta.split_at(hidden * d2);
    let (b1, rest) = rest.split_at(hidden);
    let (w2, rest) = rest.split_at(hidden * hidden);
    let (b2, rest) = rest.split_at(hidden);
    let (w3, b3) = rest.split_at(hidden);
    batch
        .iter()
        .map(|s| {
            let a2 = layer(w2, b2, &layer(w1, b1, &s.features));
            let z = b3[0] + w3.iter().zip(&a2).map(|(a, b)| a * b).sum::<f64>();
            let p = 1.0 / (1.0 + (-z).exp());
            let lp = if s.keep { p.ln() } else { (1.0 - p).ln() };
            let h = -p * p.ln() - (1.0 - p) * (1.0 - p).ln();
            s.advantage * lp + c * h
        })
        .sum()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Relative error between `grad` and central differences, one entry per
/// random instance with `d <= 8`, `h <= 16`.
pub fn gradient_errors(n_instances: u64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_instances)
        .map(|case| {
            let dim = rng.random_range(1..=8);
            let hidden = rng.random_range(1..=16);
            let mut params = PolicyParams::init(dim, hidden, case);
            params.b3 = rng.random_range(-2.0..2.0);
            let batch: Vec<GradSample> = (0..rng.random_range(1..=6))
                .map(|_| GradSample {
                    features: (0..2 * dim).map(|_| rng.random_range(-1.5..1.5)).collect(),
                    keep: rng.random_bool(0.5),
                    advantage: rng.random_range(-3.0..3.0),
                })
                .collect();
            let c = rng.random_range(0.0..0.5);

            let analytic: Vec<f64> = grad(&params, &batch, c).unwrap().tensors().concat();
            let theta: Vec<f64> = params.tensors().concat();
            let eps = 1e-6;
            let numeric: Vec<f64> = (0..theta.len())
                .map(|i| {
                    let mut up = theta.clone();
                    let mut down = theta.clone();
                    up[i] += eps;
                    down[i] -= eps;
                    (objective(&up, dim, hidden, &batch, c) - objective(&down, dim, hidden, &batch, c)) / (2.0 * eps)
                })
                .collect();
            let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, b)| a - b).collect();
            norm(&diff) / norm(&analytic).max(norm(&numeric)).max(1e-12)
        })
        .collect()
}

pub fn random_graph(rng: &mut ChaCha8Rng, n: usize) -> Graph {
    let density = rng.random_range(0.05..0.6);
    let adj: Vec<Vec<u32>> = (0..n as u32)
        .map(|u| (0..n as u32).filter(|&v| v != u && rng.random_bool(density)).collect())
        .collect();
    Graph::from_adjacency(&adj, rng.random_range(0..n as u32)).unwrap()
}

pub fn random_points(rng: &mut ChaCha8Rng, rows: usize, dim: usize) -> Matrix<f32> {
    Matrix::new(dim, (0..rows * dim).map(|_| rng.random_range(-1.0f32..1.0)).collect()).unwrap()
}

pub fn random_probs(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    (0..m).map(|_| rng.random_range(0.0..1.0)).collect()
}

/// Random graphs whose derived graphs are not edge-subsets of their inputs.
pub fn subgraph_violations(n_graphs: u64, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = 0;
    for case in 0..n_graphs {
        let n = rng.random_range(2..=30);
        let dim = rng.random_range(1..=4);
        let base = random_points(&mut rng, n, dim);
        let mut g = random_graph(&mut rng, n);
        let probs = random_probs(&mut rng, g.n_edges());
        g.set_edge_state(probs.iter().map(|&p| EdgeState::new(p)).collect()).unwrap();

        let det = extract_deterministic(&g).unwrap();
        let det_ok = det.is_subgraph_of(&g) && det.n_edges() == probs.iter().filter(|&&p| p >= 0.5).count();

        let agent = CachedPolicyAgent {
            probs: &probs,
            edge_state: g.edge_state(),
        };
        let queries = random_points(&mut rng, 8, dim);
        let traces: Vec<_> = queries
            .iter_rows()
            .enumerate()
            .map(|(i, q)| beam_search(&g, &base, &agent, q, 1, 2, case * 8 + i as u64))
            .collect();
        let pruned = prune_unvisited(&g, &traces).unwrap();

        let usage = collect_usage(&det, &base, &queries, 1, 2).unwrap();
        let w = edge_weights(&usage, &det, DEFAULT_LAMBDA).unwrap();
        let gt = brute_force_gt(&base, &queries).unwrap();
        let tuned = tune_threshold_and_prune(
            &det,
            &w,
            &base,
            &queries,
            &gt,
            SearchParams { k: 1, ef: 2 },
            &RewardConfig::new(20).unwrap(),
        )
        .unwrap();
        if !(det_ok && pruned.is_subgraph_of(&g) && tuned.graph.is_subgraph_of(&det)) {
            bad += 1;
        }
    }
    bad
}

pub struct RewardFuzz {
    pub traces: usize,
    pub found: usize,
    pub violations: usize,
}

/// Sessions of a random stochastic agent on random graphs, 100 per graph,
/// checked against the reward's range and definition.
pub fn reward_fuzz(n_graphs: u64, seed: u64) -> RewardFuzz {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = RewardFuzz {
        traces: 0,
        found: 0,
        violations: 0,
    };
    for case in 0..n_graphs {
        let n = rng.random_range(1..=40);
        let dim = rng.random_range(1..=4);
        let base = random_points(&mut rng, n, dim);
        let g = random_graph(&mut rng, n);
        let probs = random_probs(&mut rng, g.n_edges());
        let agent = CachedPolicyAgent {
            probs: &probs,
            edge_state: None,
        };
        let queries = random_points(&mut rng, 100, dim);
        let gt = brute_force_gt(&base, &queries).unwrap();
        let cfg = RewardConfig::new(rng.random_range(2..=60)).unwrap();
        let top = cfg.dcs_max as f64 - 1.0;
        for (i, q) in queries.iter_rows().enumerate() {
            let ef = rng.random_range(1..=4);
            let t = beam_search(&g, &base, &agent, q, 1, ef, case * 100 + i as u64);
            let r = compute_reward(&t, gt[i], &cfg);
            let ok = if t.top1() == Some(gt[i]) {
                out.found += 1;
                (1.0..=top).contains(&r) && r == (cfg.dcs_max as f64 - t.dcs as f64).max(1.0)
            } else {
                r == 0.0
            };
            out.violations += usize::from(!ok);
            out.traces += 1;
        }
    }
    out
}
