use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::embedding::EmbeddingTable;
use crate::exec::{derive_seed, Exec};
use crate::math::sq_dist;

pub const MAX_ITER: usize = 300;
pub const TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum KMeansError {
    #[error("k = {k} exceeds the number of points ({n})")]
    TooManyClusters { k: usize, n: usize },
    #[error("k must be at least 1")]
    ZeroClusters,
    #[error("n_init must be at least 1")]
    ZeroRestarts,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub assignment: Vec<usize>,
    pub centers: EmbeddingTable,
    pub inertia: f64,
    /// Inertia after each assignment step of the winning restart.
    pub history: Vec<f64>,
    /// Index of the winning restart.
    pub restart: usize,
}

/// Best of `n_init` k-means++ seeded Lloyd runs. Restarts run under `exec`;
/// ties in inertia go to the lowest restart index.
pub fn kmeans(z: &EmbeddingTable, k: usize, seed: u64, n_init: usize, exec: Exec) -> Result<KMeansFit, KMeansError> {
    if k == 0 {
        return Err(KMeansError::ZeroClusters);
    }
    if n_init == 0 {
        return Err(KMeansError::ZeroRestarts);
    }
    if k > z.rows() {
        return Err(KMeansError::TooManyClusters { k, n: z.rows() });
    }
    let fits = exec.map_range(n_init, |r| {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[r as u64]));
        lloyd(z, plus_plus_init(z, k, &mut rng), r)
    });
    let mut best = None::<KMeansFit>;
    for fit in fits {
        if best.as_ref().is_none_or(|b| fit.inertia < b.inertia) {
            best = Some(fit);
        }
    }
    Ok(best.expect("n_init >= 1"))
}

/// k-means++ seeding over distinct points. When every remaining point
/// coincides with a chosen center, picks uniformly among unchosen points.
pub fn plus_plus_init<R: Rng>(z: &EmbeddingTable, k: usize, rng: &mut R) -> EmbeddingTable {
    let n = z.rows();
    let mut chosen = Vec::with_capacity(k);
    let mut taken = vec![false; n];
    let first = rng.random_range(0..n);
    chosen.push(first);
    taken[first] = true;
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(z.row(i), z.row(first))).collect();
    while chosen.len() < k {
        let total: f64 = (0..n).filter(|&i| !taken[i]).map(|i| d2[i]).sum();
        let next = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = None;
            for i in (0..n).filter(|&i| !taken[i]) {
                if d2[i] > 0.0 {
                    pick = Some(i);
                    if u < d2[i] {
                        break;
                    }
                    u -= d2[i];
                }
            }
            pick.expect("positive mass")
        } else {
            let free: Vec<usize> = (0..n).filter(|&i| !taken[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(next);
        taken[next] = true;
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(z.row(i), z.row(next)));
        }
    }
    let rows: Vec<Vec<f64>> = chosen.iter().map(|&i| z.row(i).to_vec()).collect();
    EmbeddingTable::from_rows(&rows)
}

fn assign(z: &EmbeddingTable, centers: &EmbeddingTable, assignment: &mut [usize], dist: &mut [f64]) -> f64 {
    let mut inertia = 0.0;
    for i in 0..z.rows() {
        let (mut best, mut best_d) = (0, f64::INFINITY);
        for (c, row) in centers.iter_rows().enumerate() {
            let d = sq_dist(z.row(i), row);
            if d < best_d {
                best = c;
                best_d = d;
            }
        }
        assignment[i] = best;
        dist[i] = best_d;
        inertia += best_d;
    }
    inertia
}

fn lloyd(z: &EmbeddingTable, mut centers: EmbeddingTable, restart: usize) -> KMeansFit {
    let (n, k, dim) = (z.rows(), centers.rows(), z.dim());
    let mut assignment = vec![0; n];
    let mut dist = vec![0.0; n];
    let mut history = Vec::new();
    let mut inertia = assign(z, &centers, &mut assignment, &mut dist);
    history.push(inertia);
    for _ in 0..MAX_ITER {
        let mut sums = EmbeddingTable::zeros(k, dim);
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[assignment[i]] += 1;
            for (s, v) in sums.row_mut(assignment[i]).iter_mut().zip(z.row(i)) {
                *s += v;
            }
        }
        let mut reseeded = vec![false; n];
        let mut shift: f64 = 0.0;
        for (c, &count) in counts.iter().enumerate() {
            let new: Vec<f64> = if count > 0 {
                sums.row(c).iter().map(|s| s / count as f64).collect()
            } else {
                // empty cluster: move to the point farthest from its center
                let far = (0..n)
                    .filter(|&i| !reseeded[i])
                    .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)))
                    .expect("k <= n");
                reseeded[far] = true;
                z.row(far).to_vec()
            };
            shift = shift.max(sq_dist(&new, centers.row(c)).sqrt());
            centers.row_mut(c).copy_from_slice(&new);
        }
        inertia = assign(z, &centers, &mut assignment, &mut dist);
        history.push(inertia);
        if shift < TOLERANCE {
            break;
        }
    }
    KMeansFit {
        assignment,
        centers,
        inertia,
        history,
        restart,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs() -> EmbeddingTable {
        let mut rows = Vec::new();
        for i in 0..10 {
            let e = i as f64 * 0.01;
            rows.push(vec![e, -e]);
            rows.push(vec![20.0 + e, 20.0 - e]);
        }
        EmbeddingTable::from_rows(&rows)
    }

    #[test]
    fn separated_blobs_are_pure() {
        let fit = kmeans(&blobs(), 2, 1, 10, Exec::Sequential).unwrap();
        for pair in fit.assignment.chunks(2) {
            assert_ne!(pair[0], pair[1]);
        }
        let first = fit.assignment[0];
        assert!(fit.assignment.iter().step_by(2).all(|&a| a == first));
    }

    #[test]
    fn lloyd_inertia_never_increases() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rows: Vec<Vec<f64>> = (0..200).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
        let z = EmbeddingTable::from_rows(&rows);
        for seed in 0..5 {
            let fit = kmeans(&z, 6, seed, 1, Exec::Sequential).unwrap();
            assert!(fit.history.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{:?}", fit.history);
        }
    }

    #[test]
    fn five_points_match_exhaustive_optimum() {
        let xs = [0.0, 1.0, 1.5, 7.0, 9.0];
        let z = EmbeddingTable::from_rows(&xs.iter().map(|&x| vec![x]).collect::<Vec<_>>());
        let mut best = f64::INFINITY;
        for mask in 1u32..(1 << 5) - 1 {
            let mut cost = 0.0;
            for side in [true, false] {
                let members: Vec<f64> = (0..5).filter(|&i| ((mask >> i) & 1 == 1) == side).map(|i| xs[i]).collect();
                let mean = members.iter().sum::<f64>() / members.len() as f64;
                cost += members.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
            }
            best = best.min(cost);
        }
        let fit = kmeans(&z, 2, 0, 10, Exec::Sequential).unwrap();
        assert!((fit.inertia - best).abs() < 1e-12, "{} vs {best}", fit.inertia);
    }

    #[test]
    fn restarts_never_worse_than_any_single() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rows: Vec<Vec<f64>> = (0..60).map(|_| vec![rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()]).collect();
        let z = EmbeddingTable::from_rows(&rows);
        let multi = kmeans(&z, 5, 3, 10, Exec::Parallel).unwrap();
        for r in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(3, &[r]));
            let single = lloyd(&z, plus_plus_init(&z, 5, &mut rng), r as usize);
            assert!(multi.inertia <= single.inertia);
        }
        assert_eq!(multi, kmeans(&z, 5, 3, 10, Exec::Sequential).unwrap());
    }

    #[test]
    fn duplicate_points_and_k_equals_n() {
        let z = EmbeddingTable::from_rows(&[vec![1.0], vec![1.0], vec![1.0]]);
        let fit = kmeans(&z, 3, 0, 2, Exec::Sequential).unwrap();
        assert_eq!(fit.inertia, 0.0);
        assert_eq!(
            kmeans(&z, 4, 0, 1, Exec::Sequential).unwrap_err(),
            KMeansError::TooManyClusters { k: 4, n: 3 }
        );
    }
}
