use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use common::{oracle_nn, random_matrix};
use simgraph::graph::{build_nsw, Graph};
use simgraph::policy::EdgeDecision;
use simgraph::search::{beam_search, AllKeep};

mod common;

#[test]
fn brute_force_gt_matches_double_oracle() {
    assert_eq!(common::gt_mismatches(200, 11), 0);
}

#[test]
fn full_beam_on_complete_graph_is_exact() {
    assert_eq!(common::complete_graph_recall(1000, 12), (1.0, 300.0));
}

#[test]
fn sampled_keep_rate_matches_probability() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let draws = 100_000;
    let kept = (0..draws).filter(|&e| EdgeDecision::sample(e, 0.3, &mut rng).keep).count();
    let rate = kept as f64 / draws as f64;
    assert!((rate - 0.3).abs() <= 0.01, "rate {rate}");
}

fn reachable(g: &Graph) -> usize {
    let mut seen = vec![false; g.n_vertices()];
    let mut queue = VecDeque::from([g.start()]);
    seen[g.start() as usize] = true;
    let mut count = 1;
    while let Some(v) = queue.pop_front() {
        for &t in g.neighbors(v) {
            if !seen[t as usize] {
                seen[t as usize] = true;
                count += 1;
                queue.push_back(t);
            }
        }
    }
    count
}

#[test]
fn nsw_is_connected_and_searchable() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let base = random_matrix(&mut rng, 200, 8, false);
    let g = build_nsw(&base, 4, 32, 5).unwrap();
    assert_eq!(reachable(&g), 200);
    let hits = (0..200)
        .filter(|&i| {
            let q = base.row(i);
            let t = beam_search(&g, &base, &AllKeep, q, 1, 64, 0);
            t.top1() == Some(oracle_nn(&base, q))
        })
        .count();
    assert!(hits >= 198, "{hits}/200");
}
