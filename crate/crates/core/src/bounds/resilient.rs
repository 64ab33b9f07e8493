//! Spike contributions and the resilient-classification path bound.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{chernoff_tail, BoundValue};
use crate::error::{Error, Result};
use crate::powerlaw::{stable_tail_constant, ParetoParams};

/// `E[(Bx)_i^2] = ||x||^2 E[w^2 1{w > tau}]` for independent zero-mean
/// spike entries.
pub fn spiked_component_expectation(params: ParetoParams, tau: f64, x: &[f64]) -> Result<f64> {
    let m2 = params.truncated_second_moment(tau)?;
    Ok(x.iter().map(|v| v * v).sum::<f64>() * m2)
}

/// The constant-vector form `N2 * E[w^2 1{w > tau}] * x_i^2`.
pub fn spiked_expectation_paper_form(params: ParetoParams, tau: f64, n2: usize, x_i: f64) -> Result<f64> {
    Ok(n2 as f64 * params.truncated_second_moment(tau)? * x_i * x_i)
}

/// Probability that an entry falls in power bracket `i` of scale `c`:
/// `c_alpha c^(-alpha (i - 1)) (1 - c^-alpha)`.
pub fn bracket_nonzero_prob(alpha: f64, scale_c: f64, bracket_i: u32) -> Result<f64> {
    if !(scale_c > 1.0 && scale_c.is_finite()) {
        return Err(Error::Domain(format!("bracket scale c must exceed 1, got {scale_c}")));
    }
    if bracket_i < 1 {
        return Err(Error::Domain("bracket index starts at 1".into()));
    }
    let c_alpha = stable_tail_constant(alpha)?;
    Ok(c_alpha * scale_c.powf(-alpha * (bracket_i as f64 - 1.0)) * (1.0 - scale_c.powf(-alpha)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResilientBound {
    pub p: f64,
    /// `c^(M - i)`, used as a real-valued count.
    pub kappa: f64,
    pub bound: BoundValue,
}

/// Chernoff bound on `P(X >= c^(M - i))` for the number of row entries in
/// bracket `i`, with `N` entries per row.
pub fn resilient_path_bound(alpha: f64, scale_c: f64, m: u32, n: u64, bracket_i: u32) -> Result<ResilientBound> {
    let p = bracket_nonzero_prob(alpha, scale_c, bracket_i)?;
    let kappa = scale_c.powf(m as f64 - bracket_i as f64);
    let np = n as f64 * p;
    if !(kappa > np) || kappa > n as f64 {
        return Err(Error::Validity(format!(
            "path bound needs N p < kappa <= N (N p = {np}, kappa = {kappa}, N = {n})"
        )));
    }
    let bound = chernoff_tail(n as f64, p, kappa)?;
    Ok(ResilientBound { p, kappa, bound })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourCell {
    pub alpha: f64,
    pub bracket: u32,
    /// Bracket probability; `None` when alpha or c are out of domain.
    pub p: Option<f64>,
    pub kappa: f64,
    pub bound: Option<f64>,
    pub log_bound: Option<f64>,
    pub valid: bool,
    /// Why the cell is invalid.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourGrid {
    pub scale_c: f64,
    pub m: u32,
    pub n: u64,
    pub cells: Vec<ContourCell>,
}

/// Evaluate [`resilient_path_bound`] on an `(alpha, bracket)` grid. Cells
/// come out alpha-major in input order; invalid cells are flagged.
pub fn contour_grid(alphas: &[f64], brackets: &[u32], scale_c: f64, m: u32, n: u64) -> Result<ContourGrid> {
    if alphas.is_empty() || brackets.is_empty() {
        return Err(Error::EmptyRequest("contour grid needs nonempty axes"));
    }
    let pairs: Vec<(f64, u32)> = alphas
        .iter()
        .flat_map(|&a| brackets.iter().map(move |&i| (a, i)))
        .collect();
    let cells = pairs
        .par_iter()
        .map(|&(alpha, bracket)| {
            let kappa = scale_c.powf(m as f64 - bracket as f64);
            let p = bracket_nonzero_prob(alpha, scale_c, bracket).ok();
            match resilient_path_bound(alpha, scale_c, m, n, bracket) {
                Ok(r) => ContourCell {
                    alpha,
                    bracket,
                    p: Some(r.p),
                    kappa,
                    bound: Some(r.bound.value),
                    log_bound: Some(r.bound.value.ln()),
                    valid: true,
                    reason: None,
                },
                Err(e) => ContourCell {
                    alpha,
                    bracket,
                    p,
                    kappa,
                    bound: None,
                    log_bound: None,
                    valid: false,
                    reason: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(ContourGrid { scale_c, m, n, cells })
}

impl ContourGrid {
    /// Columns: `alpha,bracket,p,kappa_count,bound,valid,log_bound`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["alpha", "bracket", "p", "kappa_count", "bound", "valid", "log_bound"])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for c in &self.cells {
            w.write_record([
                c.alpha.to_string(),
                c.bracket.to_string(),
                opt(c.p),
                c.kappa.to_string(),
                opt(c.bound),
                c.valid.to_string(),
                opt(c.log_bound),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}
