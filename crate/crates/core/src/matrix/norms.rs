use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{norm2, DenseMatrix};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Iteration cap used for the stable-rank computations.
pub const DEFAULT_POWER_ITERATIONS: usize = 1000;
pub const DEFAULT_POWER_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralEstimate {
    /// Estimate of the largest singular value.
    pub value: f64,
    /// Squared estimate, computed directly as a Rayleigh quotient of `M^T M`.
    pub value_squared: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Set for the zero matrix, where the estimate is exactly zero.
    pub degenerate: bool,
}

/// Power iteration on `M^T M` with the default cap and tolerance, seed 0.
pub fn spectral_norm(m: &DenseMatrix) -> SpectralEstimate {
    spectral_norm_with(m, DEFAULT_POWER_ITERATIONS, DEFAULT_POWER_TOL, 0)
}

/// Power iteration on `M^T M` from a seeded random unit vector.
///
/// Stops after `iterations` steps or once successive singular-value
/// estimates differ by less than `tol` relative to the current estimate.
pub fn spectral_norm_with(m: &DenseMatrix, iterations: usize, tol: f64, seed: u64) -> SpectralEstimate {
    if m.values().iter().all(|&v| v == 0.0) {
        return SpectralEstimate {
            value: 0.0,
            value_squared: 0.0,
            iterations: 0,
            converged: true,
            degenerate: true,
        };
    }
    let mut rng = rng_from_seed(seed);
    let mut v: Vec<f64> = (0..m.cols()).map(|_| StandardNormal.sample(&mut rng)).collect();
    let n = norm2(&v);
    v.iter_mut().for_each(|x| *x /= n);

    let mut sigma2 = 0.0;
    let mut prev = f64::NAN;
    let mut converged = false;
    let mut used = 0;
    for it in 1..=iterations.max(1) {
        used = it;
        let y = m.matvec_unchecked(&v);
        sigma2 = y.iter().map(|a| a * a).sum::<f64>() / v.iter().map(|a| a * a).sum::<f64>();
        let sigma = sigma2.sqrt();
        if (sigma - prev).abs() < tol * sigma {
            converged = true;
            break;
        }
        prev = sigma;
        let z = m.matvec_transpose(&y).expect("shape checked by construction");
        let zn = norm2(&z);
        if zn == 0.0 {
            // Start vector landed in the null space of M.
            break;
        }
        v = z.into_iter().map(|x| x / zn).collect();
    }
    SpectralEstimate {
        value: sigma2.sqrt(),
        value_squared: sigma2,
        iterations: used,
        converged,
        degenerate: false,
    }
}

/// `||M||_F^2 / ||M||_2^2`.
pub fn stable_rank(m: &DenseMatrix) -> Result<f64> {
    let est = spectral_norm(m);
    if est.degenerate {
        return Err(Error::Degenerate("stable rank of the zero matrix is undefined".into()));
    }
    Ok(m.frobenius_norm_squared() / est.value_squared)
}
