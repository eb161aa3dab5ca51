//! Structural pretraining of the frozen initial features: second-order
//! biased random walks over the static projection, then skip-gram with
//! negative sampling.

mod skipgram;
mod walks;

use thiserror::Error;

use crate::embedding::EmbeddingTable;
use crate::exec::Exec;
use crate::graph::EdgeSet;

pub use skipgram::{context_pairs, skipgram_train, SkipGramOutput};
pub use walks::{biased_walk, generate_walks, transition_weights};

#[derive(Debug, Error)]
pub enum PretrainError {
    #[error("invalid walk config: {0}")]
    InvalidConfig(String),
    #[error("edge set is empty")]
    EmptyGraph,
    #[error("no walks to train on")]
    NoWalks,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkConfig {
    pub walk_length: usize,
    pub walks_per_node: usize,
    /// Return parameter: weight `1/p` for stepping back to the previous node.
    pub p: f64,
    /// In-out parameter: weight `1/q` for moving away from the previous node.
    pub q: f64,
    pub window: usize,
    pub dim: usize,
    pub neg_samples: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Walk generation only; skip-gram training is always sequential.
    pub exec: Exec,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self {
            walk_length: 80,
            walks_per_node: 10,
            p: 1.0,
            q: 1.0,
            window: 10,
            dim: 128,
            neg_samples: 5,
            epochs: 1,
            learning_rate: 0.025,
            seed: 0,
            exec: Exec::Parallel,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<(), PretrainError> {
        let counts = [
            ("walk_length", self.walk_length),
            ("walks_per_node", self.walks_per_node),
            ("window", self.window),
            ("dim", self.dim),
            ("neg_samples", self.neg_samples),
            ("epochs", self.epochs),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(PretrainError::InvalidConfig(format!("{name} must be at least 1")));
            }
        }
        for (name, v) in [("p", self.p), ("q", self.q), ("learning_rate", self.learning_rate)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(PretrainError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// Walks plus skip-gram in one call.
pub fn pretrain(edges: &EdgeSet, cfg: &WalkConfig) -> Result<SkipGramOutput, PretrainError> {
    let walks = generate_walks(edges, cfg)?;
    skipgram_train(&walks, edges.num_nodes(), &edges.degrees(), cfg)
}

/// Convenience for callers that only need the table.
pub fn pretrain_table(edges: &EdgeSet, cfg: &WalkConfig) -> Result<EmbeddingTable, PretrainError> {
    pretrain(edges, cfg).map(|out| out.table)
}
