use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{PretrainError, WalkConfig};
use crate::exec::derive_seed;
use crate::graph::EdgeSet;

/// Unnormalized second-order transition weights out of `cur`, having arrived
/// from `prev`: `1/p` back to `prev`, `1` to common neighbors, `1/q` outward.
pub fn transition_weights(adj: &[Vec<usize>], prev: usize, cur: usize, p: f64, q: f64) -> Vec<(usize, f64)> {
    adj[cur]
        .iter()
        .map(|&x| {
            let w = if x == prev {
                1.0 / p
            } else if adj[prev].binary_search(&x).is_ok() {
                1.0
            } else {
                1.0 / q
            };
            (x, w)
        })
        .collect()
}

/// One walk of at most `length` nodes; stops early at a dead end.
pub fn biased_walk<R: Rng>(adj: &[Vec<usize>], start: usize, length: usize, p: f64, q: f64, rng: &mut R) -> Vec<usize> {
    let mut walk = Vec::with_capacity(length);
    walk.push(start);
    let unbiased = p == 1.0 && q == 1.0;
    while walk.len() < length {
        let cur = walk[walk.len() - 1];
        let nbrs = &adj[cur];
        if nbrs.is_empty() {
            break;
        }
        let next = if walk.len() == 1 || unbiased {
            nbrs[rng.random_range(0..nbrs.len())]
        } else {
            let prev = walk[walk.len() - 2];
            let weights = transition_weights(adj, prev, cur, p, q);
            let total: f64 = weights.iter().map(|(_, w)| w).sum();
            let mut u = rng.random::<f64>() * total;
            let mut chosen = weights[weights.len() - 1].0;
            for &(x, w) in &weights {
                if u < w {
                    chosen = x;
                    break;
                }
                u -= w;
            }
            chosen
        };
        walk.push(next);
    }
    walk
}

/// `walks_per_node` rounds; each round visits every node once in a seeded
/// shuffled order. Each walk draws from its own generator, so the result is
/// independent of the execution mode.
pub fn generate_walks(edges: &EdgeSet, cfg: &WalkConfig) -> Result<Vec<Vec<usize>>, PretrainError> {
    cfg.validate()?;
    if edges.is_empty() {
        return Err(PretrainError::EmptyGraph);
    }
    let adj = edges.adjacency();
    let n = edges.num_nodes();
    let mut walks = Vec::with_capacity(n * cfg.walks_per_node);
    for round in 0..cfg.walks_per_node as u64 {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[0, round])));
        walks.extend(cfg.exec.map_slice(&order, |&start| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[1, round, start as u64]));
            biased_walk(&adj, start, cfg.walk_length, cfg.p, cfg.q, &mut rng)
        }));
    }
    Ok(walks)
}
