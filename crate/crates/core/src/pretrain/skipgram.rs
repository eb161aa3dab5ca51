use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{PretrainError, WalkConfig};
use crate::embedding::EmbeddingTable;
use crate::exec::derive_seed;
use crate::math::{dot, sigmoid};
use crate::sampler::UnigramSampler;

#[derive(Debug, Clone)]
pub struct SkipGramOutput {
    pub table: EmbeddingTable,
    /// Nodes that never appeared in a training pair; their rows keep the
    /// seeded uniform initialization.
    pub untrained: Vec<usize>,
}

/// `(center, context)` pairs within a fixed symmetric window.
pub fn context_pairs(walk: &[usize], window: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
    (0..walk.len()).flat_map(move |i| {
        let lo = i.saturating_sub(window);
        let hi = (i + window + 1).min(walk.len());
        (lo..hi).filter(move |&j| j != i).map(move |j| (walk[i], walk[j]))
    })
}

/// Skip-gram with negative sampling. Sequential, so the output is a pure
/// function of the walks and the config.
pub fn skipgram_train(
    walks: &[Vec<usize>],
    num_nodes: usize,
    degrees: &[usize],
    cfg: &WalkConfig,
) -> Result<SkipGramOutput, PretrainError> {
    cfg.validate()?;
    if walks.is_empty() {
        return Err(PretrainError::NoWalks);
    }
    let dim = cfg.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[2]));
    let half = 0.5 / dim as f64;
    let input: Vec<f64> = (0..num_nodes * dim).map(|_| rng.random_range(-half..half)).collect();
    let mut input = EmbeddingTable::from_vec(num_nodes, dim, input);
    let mut output = EmbeddingTable::zeros(num_nodes, dim);

    let mut trained = vec![false; num_nodes];
    let total_pairs: usize = walks
        .iter()
        .map(|w| context_pairs(w, cfg.window).count())
        .sum::<usize>()
        * cfg.epochs;
    let sampler = UnigramSampler::from_degrees(degrees);
    let min_lr = cfg.learning_rate * 1e-4;

    let mut hidden_grad = vec![0.0; dim];
    let mut seen = 0usize;
    for _ in 0..cfg.epochs {
        for walk in walks {
            for (center, context) in context_pairs(walk, cfg.window) {
                let progress = seen as f64 / total_pairs.max(1) as f64;
                let lr = (cfg.learning_rate * (1.0 - progress)).max(min_lr);
                seen += 1;
                trained[center] = true;
                trained[context] = true;

                hidden_grad.fill(0.0);
                let h = input.row(center).to_vec();
                let mut update = |target: usize, label: f64, out: &mut EmbeddingTable| {
                    let o = out.row_mut(target);
                    let g = (label - sigmoid(dot(&h, o))) * lr;
                    for ((acc, ov), hv) in hidden_grad.iter_mut().zip(o.iter_mut()).zip(&h) {
                        *acc += g * *ov;
                        *ov += g * hv;
                    }
                };
                update(context, 1.0, &mut output);
                if let Some(s) = &sampler {
                    for _ in 0..cfg.neg_samples {
                        let neg = s.sample(&mut rng);
                        if neg != context {
                            update(neg, 0.0, &mut output);
                        }
                    }
                }
                for (v, g) in input.row_mut(center).iter_mut().zip(&hidden_grad) {
                    *v += g;
                }
            }
        }
    }

    let untrained = (0..num_nodes).filter(|&i| !trained[i]).collect();
    Ok(SkipGramOutput {
        table: input,
        untrained,
    })
}
