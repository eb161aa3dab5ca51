//! Chronological batch training of the total loss
//! `Σ w_tem·L_tem + w_node·L_node + w_batch·L_batch` over all interactions.

mod gradcheck;
mod objective;
mod optim;

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cluster::{init_centers, soft_assignment, target_distribution, ClusterError, ClusterModel};
use crate::embedding::EmbeddingTable;
use crate::exec::{derive_seed, Exec};
use crate::graph::TemporalGraph;
use crate::hawkes::{HawkesParams, NegForm};
use crate::sampler::UnigramSampler;

pub use gradcheck::{gradient_check, GradCheckReport, Probe};
pub use objective::{
    evaluate_batch, plan_batch, BatchGrad, BatchOutcome, LossParts, LossWeights, ObjectiveSpec, Params, PlannedEvent,
};
pub use optim::{Optimizer, OptimizerKind};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid train config: {0}")]
    InvalidConfig(String),
    #[error("features cover {features} nodes but the graph has {nodes}")]
    FeatureCount { features: usize, nodes: usize },
    #[error("graph has no interactions")]
    EmptyGraph,
    #[error("non-finite {component} loss at epoch {epoch}, batch {batch}")]
    NonFinite {
        epoch: usize,
        batch: usize,
        component: &'static str,
    },
    #[error(transparent)]
    Cluster(#[from] ClusterError),
}

/// When the target distribution is recomputed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Refresh {
    /// Over all nodes at the start of every epoch.
    #[default]
    PerEpoch,
    /// Over the batch's source nodes before every batch.
    PerBatch,
}

impl std::str::FromStr for Refresh {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "per_epoch" | "per-epoch" => Ok(Refresh::PerEpoch),
            "per_batch" | "per-batch" => Ok(Refresh::PerBatch),
            other => Err(format!("unknown refresh schedule `{other}`")),
        }
    }
}

impl std::fmt::Display for Refresh {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Refresh::PerEpoch => "per_epoch",
            Refresh::PerBatch => "per_batch",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimeRescale {
    None,
    /// Affine map of the observed time range onto `[0, 1]`.
    #[default]
    UnitInterval,
}

impl std::str::FromStr for TimeRescale {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(TimeRescale::None),
            "unit_interval" | "unit-interval" => Ok(TimeRescale::UnitInterval),
            other => Err(format!("unknown time rescale `{other}`")),
        }
    }
}

impl std::fmt::Display for TimeRescale {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TimeRescale::None => "none",
            TimeRescale::UnitInterval => "unit_interval",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub clusters: usize,
    /// Zero epochs returns the initial features unchanged.
    pub epochs: usize,
    pub batch_size: usize,
    pub neighbor_len: usize,
    pub n_neg: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub p_refresh: Refresh,
    pub weights: LossWeights,
    pub seed: u64,
    pub time_rescale: TimeRescale,
    pub neg_form: NegForm,
    /// Student-t degrees of freedom.
    pub dof: f64,
    pub initial_decay: f64,
    pub exec: Exec,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            clusters: 2,
            epochs: 50,
            batch_size: 1024,
            neighbor_len: 5,
            n_neg: 5,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::Adam,
            p_refresh: Refresh::PerEpoch,
            weights: LossWeights::default(),
            seed: 0,
            time_rescale: TimeRescale::UnitInterval,
            neg_form: NegForm::Paper,
            dof: 1.0,
            initial_decay: 1.0,
            exec: Exec::Parallel,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if self.clusters < 2 {
            return bad("clusters must be at least 2");
        }
        if self.batch_size == 0 || self.neighbor_len == 0 || self.n_neg == 0 {
            return bad("batch_size, neighbor_len and n_neg must be at least 1");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be non-negative");
        }
        let w = self.weights;
        if [w.temporal, w.node, w.batch].iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return bad("loss weights must be non-negative");
        }
        if !(self.dof > 0.0 && self.initial_decay > 0.0) {
            return bad("dof and initial_decay must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochReport {
    pub losses: LossParts,
    /// Weighted total.
    pub total: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochReport>,
    pub batch_size: usize,
    /// Largest per-batch buffer footprint, in bytes.
    pub peak_batch_bytes: usize,
    pub final_decay_rate: f64,
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub embeddings: EmbeddingTable,
    pub model: ClusterModel,
    pub hawkes: HawkesParams,
    pub report: TrainReport,
}

/// Time map applied to raw timestamps before computing lags.
fn time_map(graph: &TemporalGraph, mode: TimeRescale) -> impl Fn(f64) -> f64 {
    let (lo, hi) = graph.time_range().unwrap_or((0.0, 0.0));
    let span = hi - lo;
    move |t| match mode {
        TimeRescale::None => t,
        TimeRescale::UnitInterval if span > 0.0 => (t - lo) / span,
        TimeRescale::UnitInterval => 0.0,
    }
}

/// Writes target rows for `nodes` into the `num_nodes × k` table, with the
/// frequency normalizer taken over `nodes`.
fn refresh_targets(targets: &mut [f64], nodes: &[usize], z0: &EmbeddingTable, model: &ClusterModel) {
    let k = model.k();
    let q: Vec<Vec<f64>> = nodes.iter().map(|&x| soft_assignment(z0.row(x), model)).collect();
    for (&x, row) in nodes.iter().zip(target_distribution(&q)) {
        targets[x * k..(x + 1) * k].copy_from_slice(&row);
    }
}

pub fn train(graph: &TemporalGraph, z0: &EmbeddingTable, cfg: &TrainConfig) -> Result<Trained, TrainError> {
    cfg.validate()?;
    if z0.rows() != graph.num_nodes() {
        return Err(TrainError::FeatureCount {
            features: z0.rows(),
            nodes: graph.num_nodes(),
        });
    }
    let sampler = UnigramSampler::from_degrees(graph.degrees()).ok_or(TrainError::EmptyGraph)?;
    let model = init_centers(z0, cfg.clusters, cfg.seed, cfg.exec)?;
    let model = ClusterModel::new(model.centers, cfg.dof);
    let mut params = Params {
        embeddings: z0.clone(),
        model,
        hawkes: HawkesParams::with_decay_rate(cfg.initial_decay),
    };
    let mut optimizer = Optimizer::new(cfg.optimizer, cfg.learning_rate, &params);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[3]));
    let time = time_map(graph, cfg.time_rescale);
    let all_nodes: Vec<usize> = (0..graph.num_nodes()).collect();
    let k = cfg.clusters;
    let mut targets = vec![0.0; graph.num_nodes() * k];
    let mut slots = vec![usize::MAX; graph.num_nodes()];

    let mut report = TrainReport {
        epochs: Vec::with_capacity(cfg.epochs),
        batch_size: cfg.batch_size,
        peak_batch_bytes: 0,
        final_decay_rate: params.hawkes.decay_rate(),
    };
    for epoch in 0..cfg.epochs {
        let start = Instant::now();
        if cfg.p_refresh == Refresh::PerEpoch {
            refresh_targets(&mut targets, &all_nodes, z0, &params.model);
        }
        let mut losses = LossParts::default();
        let mut total = 0.0;
        for (b, batch) in graph.chronological_batches(cfg.batch_size).enumerate() {
            let events = plan_batch(graph, batch, cfg.neighbor_len, cfg.n_neg, &sampler, &mut rng, &time);
            if cfg.p_refresh == Refresh::PerBatch {
                let mut sources: Vec<usize> = events.iter().map(|e| e.source).collect();
                sources.sort_unstable();
                sources.dedup();
                refresh_targets(&mut targets, &sources, z0, &params.model);
            }
            let spec = ObjectiveSpec {
                weights: cfg.weights,
                neg_form: cfg.neg_form,
                targets: &targets,
                with_grad: true,
                exec: cfg.exec,
            };
            let out = evaluate_batch(&events, &params, &spec, &mut slots);
            if let Some(component) = out.parts.non_finite() {
                return Err(TrainError::NonFinite {
                    epoch,
                    batch: b,
                    component,
                });
            }
            report.peak_batch_bytes = report.peak_batch_bytes.max(out.scratch_bytes);
            losses.temporal += out.parts.temporal;
            losses.node += out.parts.node;
            losses.batch += out.parts.batch;
            total += out.parts.total(&cfg.weights);
            optimizer.step(&mut params, out.grad.as_ref().expect("gradient requested"));
        }
        report.epochs.push(EpochReport {
            losses,
            total,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    report.final_decay_rate = params.hawkes.decay_rate();
    Ok(Trained {
        embeddings: params.embeddings,
        model: params.model,
        hawkes: params.hawkes,
        report,
    })
}

/// One single-epoch training run per batch size, identical seed and data.
pub fn sweep_batch_size(
    graph: &TemporalGraph,
    z0: &EmbeddingTable,
    cfg: &TrainConfig,
    sizes: &[usize],
) -> Result<Vec<TrainReport>, TrainError> {
    if sizes.is_empty() {
        return Err(TrainError::InvalidConfig("no batch sizes given".into()));
    }
    sizes
        .iter()
        .map(|&batch_size| {
            let run = TrainConfig {
                batch_size,
                epochs: 1,
                ..cfg.clone()
            };
            train(graph, z0, &run).map(|t| t.report)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Interaction;

    fn toy() -> (TemporalGraph, EmbeddingTable) {
        let its = vec![
            Interaction::new(0, 1, 0.0),
            Interaction::new(1, 2, 1.0),
            Interaction::new(0, 2, 2.0),
            Interaction::new(3, 4, 2.5),
            Interaction::new(4, 5, 3.0),
            Interaction::new(3, 5, 4.0),
            Interaction::new(0, 1, 5.0),
            Interaction::new(4, 3, 6.0),
        ];
        let g = TemporalGraph::new(6, its).unwrap();
        let rows: Vec<Vec<f64>> = (0..6)
            .map(|i| {
                let s = if i < 3 { 1.0 } else { -1.0 };
                vec![s + 0.1 * i as f64, 0.3 - 0.05 * i as f64, s * 0.5]
            })
            .collect();
        (g, EmbeddingTable::from_rows(&rows))
    }

    fn cfg() -> TrainConfig {
        TrainConfig {
            epochs: 3,
            batch_size: 3,
            n_neg: 2,
            learning_rate: 0.01,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let (g, z0) = toy();
        let out = train(&g, &z0, &TrainConfig { learning_rate: 0.0, ..cfg() }).unwrap();
        assert_eq!(out.embeddings, z0);
    }

    #[test]
    fn zero_weights_leave_parameters_unchanged() {
        let (g, z0) = toy();
        let weights = LossWeights {
            temporal: 0.0,
            node: 0.0,
            batch: 0.0,
        };
        let out = train(&g, &z0, &TrainConfig { weights, ..cfg() }).unwrap();
        assert_eq!(out.embeddings, z0);
        assert_eq!(out.hawkes, HawkesParams::default());
        assert!(out.report.epochs.iter().all(|e| e.total == 0.0));
    }

    #[test]
    fn temporal_only_total_equals_temporal_sum() {
        let (g, z0) = toy();
        let weights = LossWeights {
            temporal: 1.0,
            node: 0.0,
            batch: 0.0,
        };
        let out = train(&g, &z0, &TrainConfig { weights, ..cfg() }).unwrap();
        for e in &out.report.epochs {
            assert!((e.total - e.losses.temporal).abs() <= 1e-10 * e.total.abs().max(1.0));
        }
    }

    #[test]
    fn totals_match_weighted_components() {
        let (g, z0) = toy();
        let weights = LossWeights {
            temporal: 0.5,
            node: 2.0,
            batch: 0.25,
        };
        let out = train(&g, &z0, &TrainConfig { weights, ..cfg() }).unwrap();
        for e in &out.report.epochs {
            let expected = e.losses.total(&weights);
            assert!((e.total - expected).abs() <= 1e-10 * expected.abs().max(1.0));
            assert!(e.total.is_finite());
        }
    }

    #[test]
    fn zero_epochs_returns_features() {
        let (g, z0) = toy();
        let out = train(&g, &z0, &TrainConfig { epochs: 0, ..cfg() }).unwrap();
        assert_eq!(out.embeddings, z0);
        assert!(out.report.epochs.is_empty());
    }

    #[test]
    fn deterministic_across_exec_modes() {
        let (g, z0) = toy();
        let a = train(&g, &z0, &TrainConfig { exec: Exec::Sequential, ..cfg() }).unwrap();
        let b = train(&g, &z0, &TrainConfig { exec: Exec::Parallel, ..cfg() }).unwrap();
        assert_eq!(a.embeddings, b.embeddings);
        assert_eq!(a.model, b.model);
        let losses = |t: &Trained| t.report.epochs.iter().map(|e| e.losses).collect::<Vec<_>>();
        assert_eq!(losses(&a), losses(&b));
    }

    #[test]
    fn per_batch_refresh_runs() {
        let (g, z0) = toy();
        let out = train(&g, &z0, &TrainConfig { p_refresh: Refresh::PerBatch, ..cfg() }).unwrap();
        assert!(out.embeddings.is_finite());
        assert_ne!(out.embeddings, z0);
    }

    #[test]
    fn non_finite_loss_aborts_with_coordinates() {
        let (g, mut z0) = toy();
        z0.row_mut(2)[0] = f64::NAN;
        // keep k-means happy by clustering on finite data first
        let err = train(&g, &z0, &cfg());
        assert!(err.is_err());
        let mut z0 = toy().1;
        z0.row_mut(5)[1] = 1e200;
        match train(&g, &z0, &TrainConfig { exec: Exec::Sequential, ..cfg() }) {
            Err(TrainError::NonFinite { epoch, batch, component }) => {
                assert_eq!((epoch, batch), (0, 1));
                assert!(["temporal", "node", "batch"].contains(&component));
            }
            other => panic!("expected non-finite abort, got {other:?}"),
        }
    }

    #[test]
    fn input_validation() {
        let (g, z0) = toy();
        let short = EmbeddingTable::zeros(5, 3);
        assert!(matches!(train(&g, &short, &cfg()), Err(TrainError::FeatureCount { .. })));
        assert!(train(&g, &z0, &TrainConfig { batch_size: 0, ..cfg() }).is_err());
        assert!(train(&g, &z0, &TrainConfig { clusters: 1, ..cfg() }).is_err());
        assert!(sweep_batch_size(&g, &z0, &cfg(), &[]).is_err());
    }

    #[test]
    fn sweep_gives_one_report_per_size() {
        let (g, z0) = toy();
        let reports = sweep_batch_size(&g, &z0, &cfg(), &[1, 4, 100]).unwrap();
        assert_eq!(reports.len(), 3);
        assert!(reports.iter().all(|r| r.epochs.len() == 1 && r.epochs[0].total.is_finite()));
        assert!(reports.windows(2).all(|w| w[0].peak_batch_bytes <= w[1].peak_batch_bytes));
    }
}
