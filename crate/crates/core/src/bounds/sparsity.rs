use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::BoundValue;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparsityBoundInput {
    /// Total number of entries.
    pub n: u64,
    /// Probability that an entry exceeds the threshold.
    pub p: f64,
    /// Sparsity threshold.
    pub k: u64,
}

/// `(np/k)^k ((1 - p)/(1 - k/n))^(n - k)` for `P(X >= k)`, `X ~ Bin(n, p)`.
pub fn sparsity_tail_bound(input: SparsityBoundInput) -> Result<BoundValue> {
    chernoff_tail(input.n as f64, input.p, input.k as f64)
}

/// Relative-entropy Chernoff bound with a real-valued count `k`.
///
/// Valid right of the mean only (`n p < k <= n`). At `k = n` the second
/// factor has an empty exponent and is taken as one.
pub fn chernoff_tail(n: f64, p: f64, k: f64) -> Result<BoundValue> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::Domain(format!("p must lie in [0, 1), got {p}")));
    }
    if !(k > n * p) {
        return Err(Error::Validity(format!(
            "Chernoff tail needs k > n p (n p = {}, k = {k})",
            n * p
        )));
    }
    if k > n {
        return Err(Error::Validity(format!("k = {k} exceeds n = {n}")));
    }
    if p == 0.0 {
        return Ok(BoundValue::from_raw(0.0));
    }
    let mut log = k * (n * p / k).ln();
    if n - k > 0.0 {
        log += (n - k) * ((1.0 - p) / (1.0 - k / n)).ln();
    }
    Ok(BoundValue::from_raw(log.exp()))
}

/// Exact `P(X >= k)` for `X ~ Bin(n, p)`, summed in log space.
pub fn binomial_tail_exact(n: u64, p: f64, k: u64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("p must lie in [0, 1], got {p}")));
    }
    if k > n {
        return Err(Error::Domain(format!("k = {k} exceeds n = {n}")));
    }
    if k == 0 || p == 1.0 {
        return Ok(1.0);
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    let ln_n1 = ln_gamma(n as f64 + 1.0);
    let logs: Vec<f64> = (k..=n)
        .map(|i| {
            let i = i as f64;
            ln_n1 - ln_gamma(i + 1.0) - ln_gamma(n as f64 - i + 1.0) + i * lp + (n as f64 - i) * lq
        })
        .collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logs.iter().map(|l| (l - max).exp()).sum();
    Ok((max + sum.ln()).exp().min(1.0))
}
