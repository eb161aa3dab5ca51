//! Planted-partition temporal graphs with a recency (self-excitation) effect.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::{Interaction, Labels, TemporalGraph};

/// Pairs eligible for a recency repeat.
pub const RECENT_WINDOW: usize = 100;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid synthetic config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n: usize,
    pub k: usize,
    pub n_events: usize,
    /// Probability that a fresh event stays inside one community.
    pub p_in: f64,
    /// A fresh event is replaced by a repeat of a recent pair with
    /// probability `recency_boost / (1 + recency_boost)`.
    pub recency_boost: f64,
    pub horizon: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n: 200,
            k: 4,
            n_events: 20_000,
            p_in: 0.9,
            recency_boost: 1.0,
            horizon: 1000.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidConfig(m.to_string()));
        if self.k < 2 {
            return bad("k must be at least 2");
        }
        if self.n < self.k {
            return bad("n must be at least k");
        }
        // intra-community events need two members in some community
        if self.n / self.k < 2 && self.p_in > 0.0 {
            return bad("communities need at least 2 nodes");
        }
        if !(self.p_in > 0.5 && self.p_in <= 1.0) {
            return bad("p_in must be in (0.5, 1]");
        }
        if self.n_events == 0 {
            return bad("n_events must be at least 1");
        }
        if !(self.recency_boost >= 0.0 && self.recency_boost.is_finite()) {
            return bad("recency_boost must be non-negative");
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad("horizon must be positive");
        }
        Ok(())
    }

    pub fn repeat_probability(&self) -> f64 {
        self.recency_boost / (1.0 + self.recency_boost)
    }
}

/// Community of each node: even blocks, remainder to the last community.
pub fn community_of(n: usize, k: usize) -> Vec<usize> {
    let size = n / k;
    (0..n).map(|i| (i / size).min(k - 1)).collect()
}

pub fn generate(cfg: &SynthConfig) -> Result<TemporalGraph, SynthError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let community = community_of(cfg.n, cfg.k);
    let mut members = vec![Vec::new(); cfg.k];
    for (node, &c) in community.iter().enumerate() {
        members[c].push(node);
    }

    let mut times: Vec<f64> = (0..cfg.n_events).map(|_| rng.random::<f64>() * cfg.horizon).collect();
    times.sort_by(f64::total_cmp);

    let repeat_p = cfg.repeat_probability();
    let mut recent: std::collections::VecDeque<(usize, usize)> = std::collections::VecDeque::with_capacity(RECENT_WINDOW);
    let mut events = Vec::with_capacity(cfg.n_events);
    for t in times {
        let pair = if !recent.is_empty() && rng.random::<f64>() < repeat_p {
            recent[rng.random_range(0..recent.len())]
        } else if rng.random::<f64>() < cfg.p_in {
            let m = &members[rng.random_range(0..cfg.k)];
            let a = rng.random_range(0..m.len());
            let mut b = rng.random_range(0..m.len() - 1);
            if b >= a {
                b += 1;
            }
            (m[a], m[b])
        } else {
            let ca = rng.random_range(0..cfg.k);
            let mut cb = rng.random_range(0..cfg.k - 1);
            if cb >= ca {
                cb += 1;
            }
            let (ma, mb) = (&members[ca], &members[cb]);
            (ma[rng.random_range(0..ma.len())], mb[rng.random_range(0..mb.len())])
        };
        let (s, d) = if rng.random::<bool>() { pair } else { (pair.1, pair.0) };
        events.push(Interaction::new(s, d, t));
        if recent.len() == RECENT_WINDOW {
            recent.pop_front();
        }
        recent.push_back(pair);
    }

    let graph = TemporalGraph::new(cfg.n, events).expect("generated events are valid");
    let labels = Labels::from_assignment(community);
    Ok(graph.with_labels(labels).expect("one label per node"))
}
