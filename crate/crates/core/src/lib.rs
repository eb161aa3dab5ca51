//! Temporal graph clustering: Hawkes-process temporal embeddings trained
//! jointly with node-level and batch-level clustering objectives.
//!
//! The pipeline is `graph` (ingest) -> `pretrain` (node2vec features) ->
//! `train` (temporal + clustering losses) -> `metrics` (k-means and scores).
//! Per-item work can run on a rayon pool or sequentially, see [`Exec`];
//! results are bit-identical in both modes.

pub mod cluster;
pub mod embedding;
pub mod exec;
pub mod grad;
pub mod graph;
pub mod hawkes;
pub mod math;
pub mod metrics;
pub mod pretrain;
pub mod sampler;
pub mod synth;
pub mod train;

pub use cluster::{ClusterError, ClusterModel};
pub use embedding::{EmbeddingTable, FeatureError};
pub use exec::Exec;
pub use graph::{EdgeSet, GraphError, Interaction, Labels, TemporalGraph};
pub use hawkes::{HawkesParams, NegForm};
pub use metrics::MetricsReport;
pub use pretrain::{pretrain, PretrainError, WalkConfig};
pub use synth::{SynthConfig, SynthError};
pub use train::{train, TrainConfig, TrainError, TrainReport, Trained};
