use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{DenseMatrix, SparseMatrix};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// How entries are compared against the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitMode {
    /// Compare the signed value: `w <= tau` goes low, `w > tau` goes high.
    PositiveSupport,
    /// Compare magnitudes: `|w| <= tau` goes low, `|w| > tau` goes high.
    #[default]
    SignedAbsolute,
}

impl SplitMode {
    fn is_high(self, w: f64, tau: f64) -> bool {
        match self {
            SplitMode::PositiveSupport => w > tau,
            SplitMode::SignedAbsolute => w.abs() > tau,
        }
    }
}

/// `W = low + high` with `low` dense (the bulk `A`) and `high` sparse (the
/// spikes `B`). Entries exactly at `tau` belong to the bulk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSplit {
    pub low: DenseMatrix,
    pub high: SparseMatrix,
    pub tau: f64,
    pub mode: SplitMode,
}

impl ThresholdSplit {
    pub fn reconstruct(&self) -> DenseMatrix {
        let mut w = self.low.clone();
        let cols = w.cols();
        let v = w.values_mut();
        for &(r, c, x) in self.high.triplets() {
            v[r * cols + c] = x;
        }
        w
    }

    fn high_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.low.len()];
        for &(r, c, _) in self.high.triplets() {
            mask[r * self.low.cols() + c] = true;
        }
        mask
    }
}

pub fn split_by_threshold(w: &DenseMatrix, tau: f64, mode: SplitMode) -> Result<ThresholdSplit> {
    if !(tau > 0.0) {
        return Err(Error::Domain(format!("threshold must be positive, got {tau}")));
    }
    if let Some(index) = w.values().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let cols = w.cols();
    let mut low = w.clone();
    let mut triplets = Vec::new();
    for (idx, v) in low.values_mut().iter_mut().enumerate() {
        if mode.is_high(*v, tau) {
            triplets.push((idx / cols, idx % cols, *v));
            *v = 0.0;
        }
    }
    Ok(ThresholdSplit {
        low,
        high: SparseMatrix::from_sorted_unchecked(w.rows(), cols, triplets),
        tau,
        mode,
    })
}

/// What replaces the bulk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Substitution {
    /// `sqrt(t) G + B` with `G` i.i.d. standard normal over the whole matrix.
    Theory { t: f64 },
    /// Bulk positions are redrawn from a normal with the empirical mean and
    /// standard deviation of the entries they replace; spikes are kept.
    MomentMatched,
}

/// A realized Gaussian substitute of a split matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressedMatrix {
    /// Variance of the substituted noise (`t` in theory mode, the squared
    /// empirical standard deviation in moment-matched mode).
    pub t: f64,
    /// Mean of the substituted noise; zero in theory mode.
    pub mean: f64,
    pub gaussian_seed: u64,
    pub spikes: SparseMatrix,
    pub realized: DenseMatrix,
    /// Number of bulk positions that were replaced.
    pub replaced: usize,
}

impl CompressedMatrix {
    /// Sparsity `k` of the retained spikes.
    pub fn k(&self) -> usize {
        self.spikes.nnz()
    }
}

pub fn gaussian_substitute(split: &ThresholdSplit, substitution: Substitution, seed: u64) -> Result<CompressedMatrix> {
    let mut rng = rng_from_seed(seed);
    let mut realized = split.high.to_dense();
    let mask = split.high_mask();
    let replaced = mask.iter().filter(|&&h| !h).count();
    let (t, mean) = match substitution {
        Substitution::Theory { t } => {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::Domain(format!("variance t must be nonnegative, got {t}")));
            }
            let s = t.sqrt();
            for v in realized.values_mut() {
                let g: f64 = StandardNormal.sample(&mut rng);
                *v += s * g;
            }
            (t, 0.0)
        }
        Substitution::MomentMatched => {
            let low = split.low.values();
            let n = replaced as f64;
            let (mean, var) = if replaced == 0 {
                (0.0, 0.0)
            } else {
                let mean = mask.iter().zip(low).filter(|(h, _)| !**h).map(|(_, v)| v).sum::<f64>() / n;
                let var = mask
                    .iter()
                    .zip(low)
                    .filter(|(h, _)| !**h)
                    .map(|(_, v)| (v - mean).powi(2))
                    .sum::<f64>()
                    / n;
                (mean, var)
            };
            let sd = var.sqrt();
            for (v, &high) in realized.values_mut().iter_mut().zip(&mask) {
                if !high {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    *v = mean + sd * g;
                }
            }
            (var, mean)
        }
    };
    Ok(CompressedMatrix {
        t,
        mean,
        gaussian_seed: seed,
        spikes: split.high.clone(),
        realized,
        replaced,
    })
}
