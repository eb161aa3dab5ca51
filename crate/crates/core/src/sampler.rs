//! Degree-based unigram negative sampling, shared by skip-gram pretraining
//! and the temporal loss.

use rand::Rng;

pub const UNIGRAM_POWER: f64 = 0.75;
pub const MAX_REJECTIONS: usize = 100;

#[derive(Debug, Clone)]
pub struct UnigramSampler {
    /// Cumulative normalized mass; last entry is 1.
    cumulative: Vec<f64>,
}

impl UnigramSampler {
    /// Mass of node `i` is proportional to `degree[i]^power`. Returns `None`
    /// when every degree is zero.
    pub fn new(degrees: &[usize], power: f64) -> Option<Self> {
        let weights: Vec<f64> = degrees.iter().map(|&d| (d as f64).powf(power)).collect();
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return None;
        }
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = weights
            .iter()
            .map(|w| {
                acc += w;
                acc / total
            })
            .collect();
        // pin the tail to exactly 1 so rounding never hands mass to zero-degree nodes
        if let Some(last) = weights.iter().rposition(|&w| w > 0.0) {
            cumulative[last..].fill(1.0);
        }
        Some(Self { cumulative })
    }

    pub fn from_degrees(degrees: &[usize]) -> Option<Self> {
        Self::new(degrees, UNIGRAM_POWER)
    }

    pub fn len(&self) -> usize {
        self.cumulative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cumulative.is_empty()
    }

    pub fn probability(&self, i: usize) -> f64 {
        let prev = if i == 0 { 0.0 } else { self.cumulative[i - 1] };
        self.cumulative[i] - prev
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        // first index whose cumulative mass exceeds u; skips zero-mass nodes
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1)
    }

    /// Draws a node other than `a` and `b`, resampling on collision up to
    /// [`MAX_REJECTIONS`] times before accepting the colliding draw.
    pub fn sample_excluding<R: Rng + ?Sized>(&self, rng: &mut R, a: usize, b: usize) -> usize {
        let mut n = self.sample(rng);
        for _ in 0..MAX_REJECTIONS {
            if n != a && n != b {
                break;
            }
            n = self.sample(rng);
        }
        n
    }
}
