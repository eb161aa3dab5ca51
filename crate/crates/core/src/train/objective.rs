//! Per-batch objective: temporal loss plus the two clustering losses,
//! with analytic gradients.

use rand::Rng;

use crate::cluster::{
    batch_reconstruction_loss, batch_reconstruction_loss_grad, node_distribution_loss, node_distribution_loss_coeffs,
    ClusterModel,
};
use crate::embedding::EmbeddingTable;
use crate::exec::Exec;
use crate::grad::SparseGrad;
use crate::graph::{Interaction, TemporalGraph};
use crate::hawkes::{temporal_loss, HawkesParams, NegForm, TemporalEvent};
use crate::math::{axpy, sub_scaled};
use crate::sampler::UnigramSampler;

/// One interaction with everything the losses need fixed up front, so the
/// objective is a deterministic function of the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedEvent {
    pub source: usize,
    pub target: usize,
    pub neighbors: Vec<usize>,
    pub lags: Vec<f64>,
    pub negatives: Vec<usize>,
}

impl PlannedEvent {
    fn bytes(&self) -> usize {
        std::mem::size_of::<Self>()
            + (self.neighbors.capacity() + self.negatives.capacity()) * std::mem::size_of::<usize>()
            + self.lags.capacity() * std::mem::size_of::<f64>()
    }

    pub fn as_temporal(&self) -> TemporalEvent<'_> {
        TemporalEvent {
            source: self.source,
            target: self.target,
            neighbors: &self.neighbors,
            lags: &self.lags,
            negatives: &self.negatives,
        }
    }
}

/// Builds the planned events for one batch. Neighbor views only look at
/// interactions strictly before each event, so no later interaction is read.
pub fn plan_batch<R: Rng>(
    graph: &TemporalGraph,
    batch: &[Interaction],
    neighbor_len: usize,
    n_neg: usize,
    sampler: &UnigramSampler,
    rng: &mut R,
    time: impl Fn(f64) -> f64,
) -> Vec<PlannedEvent> {
    batch
        .iter()
        .map(|it| {
            let view = graph.neighbor_view(it.source, it.time, neighbor_len);
            let now = time(it.time);
            PlannedEvent {
                source: it.source,
                target: it.target,
                neighbors: view.iter().map(|n| n.node).collect(),
                lags: view.iter().map(|n| now - time(n.time)).collect(),
                negatives: (0..n_neg)
                    .map(|_| sampler.sample_excluding(rng, it.source, it.target))
                    .collect(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub temporal: f64,
    pub node: f64,
    pub batch: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            temporal: 1.0,
            node: 1.0,
            batch: 1.0,
        }
    }
}

/// Unweighted loss components summed over a batch.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossParts {
    pub temporal: f64,
    pub node: f64,
    pub batch: f64,
}

impl LossParts {
    pub fn total(&self, w: &LossWeights) -> f64 {
        w.temporal * self.temporal + w.node * self.node + w.batch * self.batch
    }

    fn add(&mut self, other: &LossParts) {
        self.temporal += other.temporal;
        self.node += other.node;
        self.batch += other.batch;
    }

    /// Name of the first non-finite component.
    pub fn non_finite(&self) -> Option<&'static str> {
        [("temporal", self.temporal), ("node", self.node), ("batch", self.batch)]
            .into_iter()
            .find(|(_, v)| !v.is_finite())
            .map(|(name, _)| name)
    }
}

/// Everything the model is differentiated with respect to.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub embeddings: EmbeddingTable,
    pub model: ClusterModel,
    pub hawkes: HawkesParams,
}

/// Weighted gradient of a batch.
#[derive(Debug, Clone)]
pub struct BatchGrad {
    /// Touched node ids, first-touch order.
    pub nodes: Vec<usize>,
    /// Row-major gradient rows aligned with `nodes`.
    pub rows: Vec<f64>,
    /// Row-major `k × dim`.
    pub centers: Vec<f64>,
    pub log_decay: f64,
}

#[derive(Debug, Clone)]
pub struct BatchOutcome {
    pub parts: LossParts,
    pub grad: Option<BatchGrad>,
    /// Bytes held by per-batch buffers at their peak.
    pub scratch_bytes: usize,
}

struct EventOutcome {
    parts: LossParts,
    rows: SparseGrad,
    /// Weighted per-center coefficients `a_j` of the source's node loss:
    /// center `j` receives `-a_j (z_x - c_j)`. Empty without a gradient.
    centers: Vec<f64>,
    log_decay: f64,
}

impl EventOutcome {
    fn bytes(&self) -> usize {
        std::mem::size_of::<Self>() + self.rows.bytes() + self.centers.capacity() * std::mem::size_of::<f64>()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ObjectiveSpec<'a> {
    pub weights: LossWeights,
    pub neg_form: NegForm,
    /// Constant target distribution row per node (`num_nodes × k`).
    pub targets: &'a [f64],
    pub with_grad: bool,
    pub exec: Exec,
}

fn event_outcome(ev: &PlannedEvent, params: &Params, spec: &ObjectiveSpec<'_>) -> EventOutcome {
    let z = &params.embeddings;
    let (k, dim) = (params.model.k(), z.dim());
    let w = spec.weights;
    let mut rows = SparseGrad::with_capacity(dim, 2 + ev.neighbors.len() + ev.negatives.len());
    let mut centers = Vec::new();
    let mut parts = LossParts::default();

    let grad_for = |weight: f64| spec.with_grad && weight != 0.0;

    let (l_tem, d_decay) = if grad_for(w.temporal) {
        temporal_loss(z, &ev.as_temporal(), &params.hawkes, spec.neg_form, Some((&mut rows, w.temporal)))
    } else {
        temporal_loss(z, &ev.as_temporal(), &params.hawkes, spec.neg_form, None)
    };
    parts.temporal = l_tem;

    let x = ev.source;
    let p = &spec.targets[x * k..(x + 1) * k];
    parts.node = if grad_for(w.node) {
        let (l, coeffs) = node_distribution_loss_coeffs(p, z.row(x), &params.model);
        let row = rows.row_mut(x);
        for (c, a) in params.model.centers.iter_rows().zip(&coeffs) {
            sub_scaled(w.node * a, z.row(x), c, row);
        }
        centers = coeffs.into_iter().map(|a| w.node * a).collect();
        l
    } else {
        node_distribution_loss(p, z.row(x), &params.model, None)
    };

    let nbrs: Vec<&[f64]> = ev.neighbors.iter().map(|&h| z.row(h)).collect();
    let negs: Vec<&[f64]> = ev.negatives.iter().map(|&n| z.row(n)).collect();
    if grad_for(w.batch) {
        let (l_batch, g) = batch_reconstruction_loss_grad(z.row(x), z.row(ev.target), &nbrs, &negs);
        parts.batch = l_batch;
        // the source never coincides with its target, neighbors or negatives
        axpy(w.batch * g.source_self, z.row(x), rows.row_mut(x));
        let partners = std::iter::once(&ev.target).chain(&ev.neighbors).chain(&ev.negatives);
        for (&v, &(cross, own)) in partners.zip(&g.partners) {
            let c = w.batch * cross;
            rows.add_linear(x, v, z.row(x), z.row(v), [0.0, c, c, w.batch * own]);
        }
    } else {
        parts.batch = batch_reconstruction_loss(z.row(x), z.row(ev.target), &nbrs, &negs);
    }

    EventOutcome {
        parts,
        rows,
        centers,
        log_decay: d_decay,
    }
}

/// Events evaluated per parallel pass. Bounds the per-event buffers held
/// at once without changing the accumulation order.
const CHUNK: usize = 256;

/// Evaluates the summed objective over `events`. Per-event work runs under
/// `spec.exec`; accumulation is sequential in event order, so results do
/// not depend on the execution mode. `slots` is a reusable `num_nodes`
/// scratch index, all `usize::MAX` on entry and on return.
pub fn evaluate_batch(
    events: &[PlannedEvent],
    params: &Params,
    spec: &ObjectiveSpec<'_>,
    slots: &mut [usize],
) -> BatchOutcome {
    let dim = params.embeddings.dim();
    let k = params.model.k();
    let plan_bytes: usize = events.iter().map(PlannedEvent::bytes).sum();
    let mut peak_event_bytes = 0;
    let mut parts = LossParts::default();
    let mut grad = BatchGrad {
        nodes: Vec::new(),
        rows: Vec::new(),
        centers: if spec.with_grad { vec![0.0; k * dim] } else { Vec::new() },
        log_decay: 0.0,
    };

    for chunk in events.chunks(CHUNK) {
        let outcomes = spec.exec.map_slice(chunk, |ev| event_outcome(ev, params, spec));
        peak_event_bytes = peak_event_bytes.max(outcomes.iter().map(EventOutcome::bytes).sum());
        for (ev, o) in chunk.iter().zip(&outcomes) {
            parts.add(&o.parts);
            if !spec.with_grad {
                continue;
            }
            for (node, row) in o.rows.iter() {
                let slot = if slots[node] == usize::MAX {
                    slots[node] = grad.nodes.len();
                    grad.nodes.push(node);
                    grad.rows.resize(grad.rows.len() + dim, 0.0);
                    grad.nodes.len() - 1
                } else {
                    slots[node]
                };
                axpy(1.0, row, &mut grad.rows[slot * dim..(slot + 1) * dim]);
            }
            let zx = params.embeddings.row(ev.source);
            for (j, (c, a)) in params.model.centers.iter_rows().zip(&o.centers).enumerate() {
                sub_scaled(-a, zx, c, &mut grad.centers[j * dim..(j + 1) * dim]);
            }
            grad.log_decay += o.log_decay;
        }
    }
    for &node in &grad.nodes {
        slots[node] = usize::MAX;
    }
    let grad_bytes = grad.nodes.capacity() * std::mem::size_of::<usize>()
        + (grad.rows.capacity() + grad.centers.capacity()) * std::mem::size_of::<f64>();
    BatchOutcome {
        parts,
        grad: spec.with_grad.then_some(grad),
        scratch_bytes: plan_bytes + peak_event_bytes + grad_bytes,
    }
}
