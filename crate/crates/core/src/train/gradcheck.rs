use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::objective::{evaluate_batch, plan_batch, ObjectiveSpec, Params, PlannedEvent};
use super::{refresh_targets, time_map, TrainConfig, TrainError};
use crate::cluster::{init_centers, ClusterModel};
use crate::embedding::EmbeddingTable;
use crate::exec::derive_seed;
use crate::graph::TemporalGraph;
use crate::hawkes::HawkesParams;
use crate::sampler::UnigramSampler;

const STEP: f64 = 1e-5;
const ERROR_FLOOR: f64 = 1e-8;
/// Half-width of the uniform jitter applied to every parameter so the
/// check does not run at a stationary or symmetric point.
const JITTER: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Probe {
    Embedding { node: usize, dim: usize },
    Center { cluster: usize, dim: usize },
    LogDecay,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Every probe with its analytic and central-difference value.
    pub probes: Vec<(Probe, f64, f64)>,
}

fn rel_error(a: f64, cd: f64) -> f64 {
    (a - cd).abs() / a.abs().max(cd.abs()).max(ERROR_FLOOR)
}

fn param_mut(params: &mut Params, probe: Probe) -> &mut f64 {
    match probe {
        Probe::Embedding { node, dim } => &mut params.embeddings.row_mut(node)[dim],
        Probe::Center { cluster, dim } => &mut params.model.centers.row_mut(cluster)[dim],
        Probe::LogDecay => &mut params.hawkes.log_decay,
    }
}

/// Compares the analytic gradient of the weighted loss, summed over every
/// interaction as one batch, with central finite differences. Probes all
/// center entries, the log decay rate and `n_probes` random embedding
/// entries, at a randomly jittered parameter state.
pub fn gradient_check(
    graph: &TemporalGraph,
    z0: &EmbeddingTable,
    cfg: &TrainConfig,
    n_probes: usize,
) -> Result<GradCheckReport, TrainError> {
    cfg.validate()?;
    if z0.rows() != graph.num_nodes() {
        return Err(TrainError::FeatureCount {
            features: z0.rows(),
            nodes: graph.num_nodes(),
        });
    }
    let sampler = UnigramSampler::from_degrees(graph.degrees()).ok_or(TrainError::EmptyGraph)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[4]));
    let init = init_centers(z0, cfg.clusters, cfg.seed, cfg.exec)?;
    let mut params = Params {
        embeddings: z0.clone(),
        model: ClusterModel::new(init.centers, cfg.dof),
        hawkes: HawkesParams::with_decay_rate(cfg.initial_decay),
    };
    for v in params.embeddings.as_mut_slice() {
        *v += rng.random_range(-JITTER..JITTER);
    }
    for v in params.model.centers.as_mut_slice() {
        *v += rng.random_range(-JITTER..JITTER);
    }
    params.hawkes.log_decay += rng.random_range(-JITTER..JITTER);

    let time = time_map(graph, cfg.time_rescale);
    let events: Vec<PlannedEvent> = plan_batch(
        graph,
        graph.interactions(),
        cfg.neighbor_len,
        cfg.n_neg,
        &sampler,
        &mut rng,
        &time,
    );
    let k = cfg.clusters;
    let mut targets = vec![0.0; graph.num_nodes() * k];
    let nodes: Vec<usize> = (0..graph.num_nodes()).collect();
    refresh_targets(&mut targets, &nodes, z0, &params.model);
    let mut slots = vec![usize::MAX; graph.num_nodes()];
    let spec = |with_grad| ObjectiveSpec {
        weights: cfg.weights,
        neg_form: cfg.neg_form,
        targets: &targets,
        with_grad,
        exec: cfg.exec,
    };

    let outcome = evaluate_batch(&events, &params, &spec(true), &mut slots);
    let grad = outcome.grad.expect("gradient requested");
    let dim = z0.dim();
    let analytic = |probe: Probe| match probe {
        Probe::Embedding { node, dim: d } => grad
            .nodes
            .iter()
            .position(|&n| n == node)
            .map_or(0.0, |slot| grad.rows[slot * dim + d]),
        Probe::Center { cluster, dim: d } => grad.centers[cluster * dim + d],
        Probe::LogDecay => grad.log_decay,
    };

    let mut probes: Vec<Probe> = (0..k)
        .flat_map(|cluster| (0..dim).map(move |d| Probe::Center { cluster, dim: d }))
        .collect();
    probes.push(Probe::LogDecay);
    for _ in 0..n_probes {
        probes.push(Probe::Embedding {
            node: rng.random_range(0..graph.num_nodes()),
            dim: rng.random_range(0..dim),
        });
    }

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        probes: Vec::with_capacity(probes.len()),
    };
    for probe in probes {
        let original = *param_mut(&mut params, probe);
        *param_mut(&mut params, probe) = original + STEP;
        let up = evaluate_batch(&events, &params, &spec(false), &mut slots).parts.total(&cfg.weights);
        *param_mut(&mut params, probe) = original - STEP;
        let down = evaluate_batch(&events, &params, &spec(false), &mut slots).parts.total(&cfg.weights);
        *param_mut(&mut params, probe) = original;
        let cd = (up - down) / (2.0 * STEP);
        let a = analytic(probe);
        report.max_rel_error = report.max_rel_error.max(rel_error(a, cd));
        report.probes.push((probe, a, cd));
    }
    Ok(report)
}
