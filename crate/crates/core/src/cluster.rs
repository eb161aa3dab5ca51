//! Clustering losses adapted to batch training: a node-level KL alignment of
//! Student-t soft assignments to a sharpened target distribution, and a
//! batch-level cosine reconstruction of observed and sampled pairs.

use thiserror::Error;

use crate::embedding::EmbeddingTable;
use crate::exec::Exec;
use crate::math::{axpy, cosine, dot, norm, sq_dist, NORM_FLOOR};
use crate::metrics::{kmeans, KMeansError};

/// Floor applied to probabilities inside logarithms.
pub const PROB_FLOOR: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("need at least 2 clusters, got {0}")]
    TooFewClusters(usize),
    #[error(transparent)]
    KMeans(#[from] KMeansError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    /// One center per row.
    pub centers: EmbeddingTable,
    /// Student-t degrees of freedom.
    pub dof: f64,
}

impl ClusterModel {
    pub fn new(centers: EmbeddingTable, dof: f64) -> Self {
        assert!(dof > 0.0, "degrees of freedom must be positive");
        Self { centers, dof }
    }

    pub fn k(&self) -> usize {
        self.centers.rows()
    }

    pub fn dim(&self) -> usize {
        self.centers.dim()
    }
}

/// Student-t soft assignment of `z` to each center. Computed in log space,
/// so far-away points still yield a normalized row.
pub fn soft_assignment(z: &[f64], model: &ClusterModel) -> Vec<f64> {
    let v = model.dof;
    let exponent = -(v + 1.0) / 2.0;
    let logits: Vec<f64> = model
        .centers
        .iter_rows()
        .map(|c| exponent * (sq_dist(z, c) / v).ln_1p())
        .collect();
    crate::hawkes::softmax(&logits)
}

/// Squares each assignment, divides by the column's total mass over the
/// given rows, and renormalizes each row.
pub fn target_distribution(q: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = q.first().map_or(0, Vec::len);
    let mut freq = vec![0.0; k];
    for row in q {
        for (f, v) in freq.iter_mut().zip(row) {
            *f += v;
        }
    }
    q.iter()
        .map(|row| {
            let raw: Vec<f64> = row.iter().zip(&freq).map(|(v, f)| v * v / f).collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|r| r / total).collect()
        })
        .collect()
}

/// `Σ_k p_k log(p_k / q_k)` with both arguments floored inside the log.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(&pk, &qk)| pk * (pk.max(PROB_FLOOR).ln() - qk.max(PROB_FLOOR).ln()))
        .sum()
}

/// KL from the constant target row `p` to the current assignment of `z`.
/// With `grad`, adds `scale` times the gradient into `z_grad` and the
/// row-major `center_grad`.
pub fn node_distribution_loss(
    p: &[f64],
    z: &[f64],
    model: &ClusterModel,
    grad: Option<(&mut [f64], &mut [f64], f64)>,
) -> f64 {
    let Some((z_grad, center_grad, scale)) = grad else {
        return kl_divergence(p, &soft_assignment(z, model));
    };
    let (loss, coeffs) = node_distribution_loss_coeffs(p, z, model);
    let dim = z.len();
    for (j, (c, a)) in model.centers.iter_rows().zip(coeffs).enumerate() {
        let diff: Vec<f64> = z.iter().zip(c).map(|(zi, ci)| zi - ci).collect();
        axpy(a * scale, &diff, z_grad);
        axpy(-a * scale, &diff, &mut center_grad[j * dim..(j + 1) * dim]);
    }
    loss
}

/// Loss and per-center coefficients `a_j` of its gradient:
/// `∂L/∂z = Σ_j a_j (z - c_j)` and `∂L/∂c_j = -a_j (z - c_j)`.
pub fn node_distribution_loss_coeffs(p: &[f64], z: &[f64], model: &ClusterModel) -> (f64, Vec<f64>) {
    let q = soft_assignment(z, model);
    let loss = kl_divergence(p, &q);
    let v = model.dof;
    // dL/dq_k * q_k; zero where the floor is active
    let g: Vec<f64> = p
        .iter()
        .zip(&q)
        .map(|(&pk, &qk)| if qk > PROB_FLOOR { -pk } else { 0.0 })
        .collect();
    let g_sum: f64 = g.iter().sum();
    let coeffs = model
        .centers
        .iter_rows()
        .enumerate()
        .map(|(j, c)| {
            // dL/d(log w_j), with log w_j = -(v+1)/2 * ln(1 + d_j/v)
            let d_logw = g[j] - q[j] * g_sum;
            let d2 = sq_dist(z, c);
            2.0 * d_logw * -(v + 1.0) / (2.0 * (v + d2))
        })
        .collect();
    (loss, coeffs)
}

/// Gradient of [`batch_reconstruction_loss_grad`] as coefficients of the
/// input vectors: every partial derivative is a linear combination of
/// `zx` and one partner vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionGrad {
    /// `∂L/∂zx = source_self·zx + Σ_i partners[i].0·v_i`.
    pub source_self: f64,
    /// Per partner `v_i` (target, then neighbors, then negatives):
    /// `(cross, own)` with `∂L/∂v_i = cross·zx + own·v_i`.
    pub partners: Vec<(f64, f64)>,
}

impl ReconstructionGrad {
    /// Dense `∂L/∂zx`.
    pub fn source(&self, zx: &[f64], partners: &[&[f64]]) -> Vec<f64> {
        let mut g: Vec<f64> = zx.iter().map(|v| self.source_self * v).collect();
        for (&(cross, _), v) in self.partners.iter().zip(partners) {
            axpy(cross, v, &mut g);
        }
        g
    }

    /// Dense `∂L/∂v_i`.
    pub fn partner(&self, i: usize, zx: &[f64], v: &[f64]) -> Vec<f64> {
        let (cross, own) = self.partners[i];
        zx.iter().zip(v).map(|(a, b)| cross * a + own * b).collect()
    }
}

/// Cosine similarity of `a` and `b` given their raw norms, with the
/// factors of its gradient: `∂c/∂a = b·inv - ka·a`, `∂c/∂b = a·inv - kb·b`.
struct Cosine {
    c: f64,
    inv: f64,
    ka: f64,
    kb: f64,
}

impl Cosine {
    fn new(a: &[f64], b: &[f64], ra: f64, rb: f64) -> Self {
        let (na, nb) = (ra.max(NORM_FLOOR), rb.max(NORM_FLOOR));
        let inv = 1.0 / (na * nb);
        let c = dot(a, b) * inv;
        // the floor is a constant, so the norm term drops when it is active
        let ka = if ra > NORM_FLOOR { c / (na * na) } else { 0.0 };
        let kb = if rb > NORM_FLOOR { c / (nb * nb) } else { 0.0 };
        Self { c, inv, ka, kb }
    }

    /// Adds `s·c` to the gradient coefficients, with `a = zx` and `b` the
    /// partner.
    fn add_grad(&self, s: f64, grad: &mut ReconstructionGrad) {
        grad.source_self -= s * self.ka;
        grad.partners.push((s * self.inv, -s * self.kb));
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `|1 - cos(x,y)| + mean_h |1 - cos(x,h)| + mean_n |cos(x,n)|`, with empty
/// neighbor or negative sets contributing zero.
pub fn batch_reconstruction_loss(zx: &[f64], zy: &[f64], neighbors: &[&[f64]], negatives: &[&[f64]]) -> f64 {
    let mean = |vs: &[&[f64]], f: &dyn Fn(f64) -> f64| {
        vs.iter().map(|v| f(cosine(zx, v))).sum::<f64>() / vs.len().max(1) as f64
    };
    (1.0 - cosine(zx, zy)).abs() + mean(neighbors, &|c| (1.0 - c).abs()) + mean(negatives, &|c| c.abs())
}

pub fn batch_reconstruction_loss_grad(
    zx: &[f64],
    zy: &[f64],
    neighbors: &[&[f64]],
    negatives: &[&[f64]],
) -> (f64, ReconstructionGrad) {
    let mut grad = ReconstructionGrad {
        source_self: 0.0,
        partners: Vec::with_capacity(1 + neighbors.len() + negatives.len()),
    };
    let rx = norm(zx);

    let cos = Cosine::new(zx, zy, rx, norm(zy));
    let mut loss = (1.0 - cos.c).abs();
    cos.add_grad(-sign(1.0 - cos.c), &mut grad);

    let w = 1.0 / neighbors.len().max(1) as f64;
    for zh in neighbors {
        let cos = Cosine::new(zx, zh, rx, norm(zh));
        loss += w * (1.0 - cos.c).abs();
        cos.add_grad(-sign(1.0 - cos.c) * w, &mut grad);
    }
    let w = 1.0 / negatives.len().max(1) as f64;
    for zn in negatives {
        let cos = Cosine::new(zx, zn, rx, norm(zn));
        loss += w * cos.c.abs();
        cos.add_grad(sign(cos.c) * w, &mut grad);
    }
    (loss, grad)
}

/// Centers from k-means on the initial features.
pub fn init_centers(z0: &EmbeddingTable, k: usize, seed: u64, exec: Exec) -> Result<ClusterModel, ClusterError> {
    if k < 2 {
        return Err(ClusterError::TooFewClusters(k));
    }
    let fit = kmeans(z0, k, seed, 10, exec)?;
    Ok(ClusterModel::new(fit.centers, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn model(centers: &[&[f64]]) -> ClusterModel {
        ClusterModel::new(
            EmbeddingTable::from_rows(&centers.iter().map(|c| c.to_vec()).collect::<Vec<_>>()),
            1.0,
        )
    }

    fn entropy(p: &[f64]) -> f64 {
        -p.iter().filter(|&&v| v > 0.0).map(|v| v * v.ln()).sum::<f64>()
    }

    #[test]
    fn soft_assignment_examples() {
        let m = model(&[&[1.0, 0.0], &[-1.0, 0.0], &[0.0, 1.0], &[0.0, -1.0]]);
        for v in soft_assignment(&[0.0, 0.0], &m) {
            assert!((v - 0.25).abs() < 1e-15);
        }
        // squared distances (0, 1): kernels (1, 0.5)
        let m = model(&[&[0.0], &[1.0]]);
        let q = soft_assignment(&[0.0], &m);
        assert!((q[0] - 2.0 / 3.0).abs() < 1e-15 && (q[1] - 1.0 / 3.0).abs() < 1e-15);
        let m = model(&[&[0.0], &[100.0]]);
        assert!(soft_assignment(&[0.0], &m)[0] > 0.999);
    }

    #[test]
    fn target_distribution_examples() {
        let q = vec![vec![0.3, 0.7]];
        let p = target_distribution(&q);
        assert!((p[0][0] - 0.3).abs() < 1e-15 && (p[0][1] - 0.7).abs() < 1e-15);

        let q = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
        assert_eq!(target_distribution(&q), q);

        let p = target_distribution(&[vec![0.9, 0.1], vec![0.5, 0.5]]);
        let (a, b) = (0.81 / 1.4, 0.01 / 0.6);
        assert!((p[0][0] - a / (a + b)).abs() < 1e-15);
        assert!((p[0][0] - 0.972).abs() < 1e-3 && (p[0][1] - 0.028).abs() < 1e-3);
    }

    #[test]
    fn kl_examples() {
        let p = [0.2, 0.8];
        assert!(kl_divergence(&p, &p).abs() < 1e-15);
        assert!((kl_divergence(&[1.0, 0.0], &[0.5, 0.5]) - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn reconstruction_examples() {
        let x = [1.0, 2.0];
        let n = [-2.0, 1.0];
        assert!(batch_reconstruction_loss(&x, &x, &[&x], &[&n]).abs() < 1e-15);
        let l = batch_reconstruction_loss(&x, &x, &[], &[&x]);
        assert!((l - 1.0).abs() < 1e-15);
        assert_eq!(batch_reconstruction_loss(&[1.0, 0.0], &[0.0, 1.0], &[], &[]), 1.0);
    }

    #[test]
    fn too_few_clusters() {
        let z = EmbeddingTable::from_rows(&[vec![0.0], vec![1.0]]);
        assert!(matches!(init_centers(&z, 1, 0, Exec::Sequential), Err(ClusterError::TooFewClusters(1))));
        assert!(matches!(init_centers(&z, 3, 0, Exec::Sequential), Err(ClusterError::KMeans(_))));
    }

    #[test]
    fn init_centers_on_blobs() {
        let rows = vec![vec![0.0, 0.0], vec![0.1, 0.0], vec![10.0, 10.0], vec![10.0, 10.2]];
        let z = EmbeddingTable::from_rows(&rows);
        let m = init_centers(&z, 2, 7, Exec::Sequential).unwrap();
        let mut centers: Vec<Vec<f64>> = m.centers.iter_rows().map(<[f64]>::to_vec).collect();
        centers.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert!((centers[0][0] - 0.05).abs() < 1e-6 && centers[0][1].abs() < 1e-6);
        assert!((centers[1][0] - 10.0).abs() < 1e-6 && (centers[1][1] - 10.1).abs() < 1e-6);
        assert_eq!(m, init_centers(&z, 2, 7, Exec::Parallel).unwrap());

        let all = init_centers(&z, 4, 3, Exec::Sequential).unwrap();
        let mut used: Vec<bool> = vec![false; 4];
        for c in all.centers.iter_rows() {
            let i = rows.iter().position(|r| r.as_slice() == c).expect("center is a node");
            used[i] = true;
        }
        assert!(used.iter().all(|&u| u));
    }

    proptest! {
        #[test]
        fn assignment_rows_are_distributions(
            z in prop::collection::vec(-5.0f64..5.0, 3),
            centers in prop::collection::vec(-5.0f64..5.0, 12),
            perm_seed in 0usize..24,
        ) {
            let m = ClusterModel::new(EmbeddingTable::from_vec(4, 3, centers.clone()), 1.0);
            let q = soft_assignment(&z, &m);
            prop_assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            prop_assert!(q.iter().all(|&v| v > 0.0 && v < 1.0));

            // permuting centers permutes the row
            let mut perm: Vec<usize> = (0..4).collect();
            let mut s = perm_seed;
            for i in (1..4).rev() {
                perm.swap(i, s % (i + 1));
                s /= i + 1;
            }
            let permuted: Vec<f64> = perm.iter().flat_map(|&i| centers[i * 3..i * 3 + 3].to_vec()).collect();
            let mp = ClusterModel::new(EmbeddingTable::from_vec(4, 3, permuted), 1.0);
            let qp = soft_assignment(&z, &mp);
            for (j, &i) in perm.iter().enumerate() {
                prop_assert!((qp[j] - q[i]).abs() < 1e-15);
            }

            let p = target_distribution(std::slice::from_ref(&q));
            prop_assert!((p[0].iter().sum::<f64>() - 1.0).abs() < 1e-6);
            prop_assert!(kl_divergence(&p[0], &q) >= -1e-12);
            prop_assert!(kl_divergence(&q, &q).abs() < 1e-10);
        }

        #[test]
        fn equal_frequencies_sharpen(rows in prop::collection::vec(prop::collection::vec(0.05f64..1.0, 3), 1..4)) {
            // each row and its cyclic shifts give equal column totals
            let mut q = Vec::new();
            for r in &rows {
                let total: f64 = r.iter().sum();
                let r: Vec<f64> = r.iter().map(|v| v / total).collect();
                for s in 0..3 {
                    q.push((0..3).map(|j| r[(j + s) % 3]).collect::<Vec<f64>>());
                }
            }
            let p = target_distribution(&q);
            for (pr, qr) in p.iter().zip(&q) {
                prop_assert!((pr.iter().sum::<f64>() - 1.0).abs() < 1e-6);
                prop_assert!(entropy(pr) <= entropy(qr) + 1e-12);
            }
        }

        #[test]
        fn reconstruction_is_scale_invariant(
            v in prop::collection::vec(-3.0f64..3.0, 16),
            which in 0usize..4,
            alpha_big in any::<bool>(),
        ) {
            let alpha = if alpha_big { 10.0 } else { 0.1 };
            let rows: Vec<Vec<f64>> = v.chunks(4).map(<[f64]>::to_vec).collect();
            prop_assume!(rows.iter().all(|r| norm(r) > 1e-3));
            let base = batch_reconstruction_loss(&rows[0], &rows[1], &[&rows[2]], &[&rows[3]]);
            prop_assert!(base >= 0.0);
            let mut scaled = rows.clone();
            for x in &mut scaled[which] {
                *x *= alpha;
            }
            let s = batch_reconstruction_loss(&scaled[0], &scaled[1], &[&scaled[2]], &[&scaled[3]]);
            prop_assert!((base - s).abs() < 1e-8);
        }
    }
}
