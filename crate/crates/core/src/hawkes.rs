//! Hawkes-process conditional intensity and the temporal loss.
//!
//! The intensity of an event `(x, y, t)` is the base term `-‖z_x - z_y‖²`
//! plus the influence of `x`'s recent neighbors, each weighted by a softmax
//! over their own base intensity with `x` and an exponential time decay.

use thiserror::Error;

use crate::embedding::EmbeddingTable;
use crate::grad::SparseGrad;
use crate::graph::Neighbor;
use crate::math::{log_sigmoid, sigmoid, sq_dist};

#[derive(Debug, Error, PartialEq)]
#[error("dimension mismatch: {left} vs {right}")]
pub struct DimensionMismatch {
    pub left: usize,
    pub right: usize,
}

/// Learnable decay rate, stored in log space so it stays positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HawkesParams {
    pub log_decay: f64,
}

impl HawkesParams {
    pub fn with_decay_rate(rate: f64) -> Self {
        assert!(rate > 0.0, "decay rate must be positive");
        Self { log_decay: rate.ln() }
    }

    pub fn decay_rate(&self) -> f64 {
        self.log_decay.exp()
    }
}

impl Default for HawkesParams {
    fn default() -> Self {
        Self::with_decay_rate(1.0)
    }
}

/// How negative samples enter the loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NegForm {
    /// `-log σ(1 - λ)`
    #[default]
    Paper,
    /// `-log σ(-λ)`
    Shifted,
}

impl std::str::FromStr for NegForm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper" => Ok(NegForm::Paper),
            "shifted" => Ok(NegForm::Shifted),
            other => Err(format!("unknown negative form `{other}`")),
        }
    }
}

impl std::fmt::Display for NegForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NegForm::Paper => "paper",
            NegForm::Shifted => "shifted",
        })
    }
}

impl NegForm {
    fn shift(self) -> f64 {
        match self {
            NegForm::Paper => 1.0,
            NegForm::Shifted => 0.0,
        }
    }
}

pub fn base_intensity(zx: &[f64], zy: &[f64]) -> Result<f64, DimensionMismatch> {
    if zx.len() != zy.len() {
        return Err(DimensionMismatch {
            left: zx.len(),
            right: zy.len(),
        });
    }
    Ok(-sq_dist(zx, zy))
}

/// `exp(-rate * lag)`.
pub fn decay(lag: f64, rate: f64) -> f64 {
    (-rate * lag).exp()
}

/// Max-shifted softmax.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Importance of each neighbor of `x`: softmax of the neighbors' base
/// intensity with `x`. Empty for an empty view.
pub fn neighbor_weights(z: &EmbeddingTable, x: usize, view: &[Neighbor]) -> Vec<f64> {
    let scores: Vec<f64> = view.iter().map(|n| -sq_dist(z.row(n.node), z.row(x))).collect();
    softmax(&scores)
}

/// Conditional intensity `λ(x, y, t)` for a view built at time `t`.
pub fn conditional_intensity(
    z: &EmbeddingTable,
    x: usize,
    y: usize,
    t: f64,
    view: &[Neighbor],
    params: &HawkesParams,
) -> f64 {
    let rate = params.decay_rate();
    let weights = neighbor_weights(z, x, view);
    let hawkes: f64 = view
        .iter()
        .zip(&weights)
        .map(|(n, w)| w * decay(t - n.time, rate) * -sq_dist(z.row(n.node), z.row(y)))
        .sum();
    -sq_dist(z.row(x), z.row(y)) + hawkes
}

/// Loss of one positive intensity against its negatives' intensities.
pub fn intensity_loss(positive: f64, negatives: &[f64], form: NegForm) -> f64 {
    let shift = form.shift();
    -log_sigmoid(positive) - negatives.iter().map(|&l| log_sigmoid(shift - l)).sum::<f64>()
}

/// One positive interaction with its historical neighbors and sampled
/// negatives, ready for loss evaluation.
#[derive(Debug, Clone, Copy)]
pub struct TemporalEvent<'a> {
    pub source: usize,
    pub target: usize,
    pub neighbors: &'a [usize],
    /// `t - t_i` per neighbor, in training time units.
    pub lags: &'a [f64],
    pub negatives: &'a [usize],
}

/// Temporal loss of one event. When `grad` is given, adds `scale` times the
/// gradient into the embedding rows and returns the log-decay gradient
/// alongside the loss.
pub fn temporal_loss(
    z: &EmbeddingTable,
    event: &TemporalEvent<'_>,
    params: &HawkesParams,
    form: NegForm,
    grad: Option<(&mut SparseGrad, f64)>,
) -> (f64, f64) {
    let TemporalEvent {
        source: x,
        target: y,
        neighbors,
        lags,
        negatives,
    } = *event;
    debug_assert_eq!(neighbors.len(), lags.len());
    let rate = params.decay_rate();
    let zx = z.row(x);

    let scores: Vec<f64> = neighbors.iter().map(|&h| -sq_dist(z.row(h), zx)).collect();
    let omega = softmax(&scores);
    let f: Vec<f64> = lags.iter().map(|&lag| decay(lag, rate)).collect();

    let intensity = |u: usize| -> (f64, Vec<f64>) {
        let zu = z.row(u);
        let mu_hu: Vec<f64> = neighbors.iter().map(|&h| -sq_dist(z.row(h), zu)).collect();
        let hawkes: f64 = mu_hu.iter().zip(&omega).zip(&f).map(|((m, w), fj)| w * fj * m).sum();
        (-sq_dist(zx, zu) + hawkes, mu_hu)
    };

    let shift = form.shift();
    let mut targets: Vec<(usize, f64, f64, Vec<f64>)> = Vec::with_capacity(1 + negatives.len());
    let (lam, mu) = intensity(y);
    targets.push((y, lam, sigmoid(lam) - 1.0, mu));
    for &n in negatives {
        let (lam, mu) = intensity(n);
        targets.push((n, lam, sigmoid(lam - shift), mu));
    }
    let neg_lams: Vec<f64> = targets[1..].iter().map(|t| t.1).collect();
    let loss = intensity_loss(targets[0].1, &neg_lams, form);

    let Some((sink, scale)) = grad else {
        return (loss, 0.0);
    };

    // dL/dω_j and dL/df_j collect contributions from every target
    let mut d_omega = vec![0.0; neighbors.len()];
    let mut d_f = vec![0.0; neighbors.len()];
    for (u, _, g, mu_hu) in &targets {
        let g = g * scale;
        let zu = z.row(*u);
        // base term: μ(x,u) = -‖z_x - z_u‖²
        sink.add_pair(x, *u, zx, zu, -2.0 * g);
        for (j, &h) in neighbors.iter().enumerate() {
            sink.add_pair(h, *u, z.row(h), zu, -2.0 * g * omega[j] * f[j]);
            d_omega[j] += g * f[j] * mu_hu[j];
            d_f[j] += g * omega[j] * mu_hu[j];
        }
    }

    // softmax backward onto s_k = μ(h_k, x)
    let weighted: f64 = omega.iter().zip(&d_omega).map(|(w, d)| w * d).sum();
    for (k, &h) in neighbors.iter().enumerate() {
        let ds = omega[k] * (d_omega[k] - weighted);
        sink.add_pair(h, x, z.row(h), zx, -2.0 * ds);
    }

    // f_j = exp(-e^θ lag_j)  =>  df_j/dθ = -rate * lag_j * f_j
    let d_log_decay: f64 = d_f
        .iter()
        .zip(&f)
        .zip(lags)
        .map(|((df, fj), lag)| df * fj * -rate * lag)
        .sum();
    (loss, d_log_decay)
}
