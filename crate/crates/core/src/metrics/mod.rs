//! Clustering evaluation: k-means on embeddings plus ACC, NMI, ARI and
//! macro-F1 against ground-truth labels.
//!
//! Labels on either side may be arbitrary non-negative integers; they are
//! compacted internally, so every metric is invariant to relabeling.

mod hungarian;
mod kmeans;

use std::collections::BTreeMap;
use std::fmt;

use crate::embedding::EmbeddingTable;
use crate::exec::Exec;

pub use hungarian::min_cost_assignment;
pub use kmeans::{kmeans, plus_plus_init, KMeansError, KMeansFit, MAX_ITER, TOLERANCE};

/// Contingency table with truth classes as rows and predicted clusters as
/// columns.
#[derive(Debug, Clone)]
struct Contingency {
    counts: Vec<Vec<usize>>,
    truth_sizes: Vec<usize>,
    pred_sizes: Vec<usize>,
    n: usize,
}

fn compact(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut ids = BTreeMap::new();
    for &l in labels {
        let next = ids.len();
        ids.entry(l).or_insert(next);
    }
    (labels.iter().map(|l| ids[l]).collect(), ids.len())
}

impl Contingency {
    fn new(pred: &[usize], truth: &[usize]) -> Self {
        assert_eq!(pred.len(), truth.len(), "partitions must cover the same nodes");
        let (p, kp) = compact(pred);
        let (t, kt) = compact(truth);
        let mut counts = vec![vec![0; kp]; kt];
        for (&a, &b) in t.iter().zip(&p) {
            counts[a][b] += 1;
        }
        let truth_sizes = counts.iter().map(|r| r.iter().sum()).collect();
        let pred_sizes = (0..kp).map(|j| counts.iter().map(|r| r[j]).sum()).collect();
        Self {
            counts,
            truth_sizes,
            pred_sizes,
            n: pred.len(),
        }
    }

    /// Truth class matched to each predicted cluster (`None` when the
    /// cluster is left unmatched). Maximizes matched count first and summed
    /// per-pair F1 second, so ties are broken by a label-independent rule.
    fn matching(&self) -> Vec<Option<usize>> {
        let (kt, kp) = (self.truth_sizes.len(), self.pred_sizes.len());
        let size = kt.max(kp);
        if size == 0 {
            return Vec::new();
        }
        let eps = 0.5 / size as f64;
        let mut cost = vec![0.0; size * size];
        for i in 0..kt {
            for j in 0..kp {
                let nij = self.counts[i][j] as f64;
                let f1 = 2.0 * nij / (self.truth_sizes[i] + self.pred_sizes[j]) as f64;
                cost[i * size + j] = -(nij + eps * f1);
            }
        }
        let col_of_row = min_cost_assignment(&cost, size);
        let mut truth_of_pred = vec![None; kp];
        for (i, &j) in col_of_row.iter().enumerate().take(kt) {
            if j < kp {
                truth_of_pred[j] = Some(i);
            }
        }
        truth_of_pred
    }
}

/// Fraction of nodes correctly labeled under the best one-to-one matching
/// of predicted clusters to truth classes.
pub fn accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    let c = Contingency::new(pred, truth);
    if c.n == 0 {
        return 1.0;
    }
    let matched: usize = c
        .matching()
        .iter()
        .enumerate()
        .filter_map(|(j, t)| t.map(|i| c.counts[i][j]))
        .sum();
    matched as f64 / c.n as f64
}

fn entropy(sizes: &[usize], n: usize) -> f64 {
    sizes
        .iter()
        .filter(|&&s| s > 0)
        .map(|&s| {
            let p = s as f64 / n as f64;
            -p * p.ln()
        })
        .sum()
}

/// Mutual information normalized by the arithmetic mean of the two
/// entropies. When both partitions have a single cluster the value is 1.
pub fn nmi(pred: &[usize], truth: &[usize]) -> f64 {
    let c = Contingency::new(pred, truth);
    if c.n == 0 {
        return 1.0;
    }
    let n = c.n as f64;
    let mut mi = 0.0;
    for (i, row) in c.counts.iter().enumerate() {
        for (j, &nij) in row.iter().enumerate() {
            if nij > 0 {
                let nij = nij as f64;
                mi += nij / n * (n * nij / (c.truth_sizes[i] as f64 * c.pred_sizes[j] as f64)).ln();
            }
        }
    }
    let (ht, hp) = (entropy(&c.truth_sizes, c.n), entropy(&c.pred_sizes, c.n));
    if ht == 0.0 && hp == 0.0 {
        return 1.0;
    }
    (mi / ((ht + hp) / 2.0)).clamp(0.0, 1.0)
}

fn pairs(n: usize) -> f64 {
    (n as f64) * (n as f64 - 1.0) / 2.0
}

/// Adjusted Rand index. Returns 1 when the expected and maximum index
/// coincide (both partitions trivial in the same way).
pub fn ari(pred: &[usize], truth: &[usize]) -> f64 {
    let c = Contingency::new(pred, truth);
    let index: f64 = c.counts.iter().flatten().map(|&v| pairs(v)).sum();
    let a: f64 = c.truth_sizes.iter().map(|&v| pairs(v)).sum();
    let b: f64 = c.pred_sizes.iter().map(|&v| pairs(v)).sum();
    let total = pairs(c.n);
    if total == 0.0 {
        return 1.0;
    }
    let expected = a * b / total;
    let max = (a + b) / 2.0;
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

/// Macro-averaged F1 over truth classes, using the same matching as
/// [`accuracy`]. A class with no matched cluster scores 0.
pub fn macro_f1(pred: &[usize], truth: &[usize]) -> f64 {
    let c = Contingency::new(pred, truth);
    let kt = c.truth_sizes.len();
    if kt == 0 {
        return 1.0;
    }
    let mut pred_of_truth = vec![None; kt];
    for (j, t) in c.matching().into_iter().enumerate() {
        if let Some(i) = t {
            pred_of_truth[i] = Some(j);
        }
    }
    let total: f64 = (0..kt)
        .map(|i| match pred_of_truth[i] {
            Some(j) if c.counts[i][j] > 0 => {
                2.0 * c.counts[i][j] as f64 / (c.truth_sizes[i] + c.pred_sizes[j]) as f64
            }
            _ => 0.0,
        })
        .sum();
    total / kt as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub acc: f64,
    pub nmi: f64,
    pub ari: f64,
    pub f1: f64,
}

impl MetricsReport {
    pub fn evaluate(pred: &[usize], truth: &[usize]) -> Self {
        Self {
            acc: accuracy(pred, truth),
            nmi: nmi(pred, truth),
            ari: ari(pred, truth),
            f1: macro_f1(pred, truth),
        }
    }

    /// Human-readable table.
    pub fn table(&self) -> String {
        format!(
            "metric  value\n------  ------\nACC     {:.4}\nNMI     {:.4}\nARI     {:.4}\nF1      {:.4}\n(NMI normalized by arithmetic mean of entropies)",
            self.acc, self.nmi, self.ari, self.f1
        )
    }
}

/// Restarts used when scoring embeddings.
pub const N_INIT: usize = 10;

/// Clusters `z` into `k` groups with k-means and scores the partition
/// against `truth`.
pub fn evaluate_embeddings(
    z: &EmbeddingTable,
    truth: &[usize],
    k: usize,
    seed: u64,
    exec: Exec,
) -> Result<(KMeansFit, MetricsReport), KMeansError> {
    let fit = kmeans(z, k, seed, N_INIT, exec)?;
    let report = MetricsReport::evaluate(&fit.assignment, truth);
    Ok((fit, report))
}

/// The single-line machine-readable record.
impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "acc={} nmi={} ari={} f1={}", self.acc, self.nmi, self.ari, self.f1)
    }
}
