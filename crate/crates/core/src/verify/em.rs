use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};

/// Smallest noise standard deviation a component may take.
pub const NOISE_STD_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub slope: f64,
    pub intercept: f64,
    pub noise_std: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureFit {
    pub components: Vec<MixtureComponent>,
    /// `responsibilities[n][k]`.
    pub responsibilities: Vec<Vec<f64>>,
    pub log_likelihood: f64,
    /// Log-likelihood after each EM iteration of the kept restart.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub restart: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmOptions {
    pub n_components: usize,
    pub seed: u64,
    pub max_iters: usize,
    pub tol: f64,
    pub restarts: usize,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self {
            n_components: 2,
            seed: 0,
            max_iters: 500,
            tol: 1e-10,
            restarts: 5,
        }
    }
}

fn log_normal(y: f64, mean: f64, sd: f64) -> f64 {
    let z = (y - mean) / sd;
    -0.5 * z * z - sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Responsibilities and the log-likelihood of the current parameters.
fn e_step(points: &[(f64, f64)], comps: &[MixtureComponent], resp: &mut [Vec<f64>]) -> f64 {
    let mut ll = 0.0;
    let mut logs = vec![0.0; comps.len()];
    for (r, &(x, y)) in resp.iter_mut().zip(points) {
        for (l, c) in logs.iter_mut().zip(comps) {
            *l = c.weight.ln() + log_normal(y, c.slope * x + c.intercept, c.noise_std);
        }
        let total = log_sum_exp(&logs);
        ll += total;
        for (ri, l) in r.iter_mut().zip(&logs) {
            *ri = (l - total).exp();
        }
    }
    ll
}

/// Weighted least squares per component, keeping the previous parameters
/// for a component that lost all its weight.
fn m_step(points: &[(f64, f64)], resp: &[Vec<f64>], comps: &mut [MixtureComponent]) {
    let n = points.len() as f64;
    for (k, c) in comps.iter_mut().enumerate() {
        let sw: f64 = resp.iter().map(|r| r[k]).sum();
        c.weight = sw / n;
        if sw <= 1e-12 {
            continue;
        }
        let mx = points.iter().zip(resp).map(|(p, r)| r[k] * p.0).sum::<f64>() / sw;
        let my = points.iter().zip(resp).map(|(p, r)| r[k] * p.1).sum::<f64>() / sw;
        let sxx: f64 = points.iter().zip(resp).map(|(p, r)| r[k] * (p.0 - mx).powi(2)).sum();
        let sxy: f64 = points.iter().zip(resp).map(|(p, r)| r[k] * (p.0 - mx) * (p.1 - my)).sum();
        if sxx <= 1e-12 * sw {
            continue;
        }
        c.slope = sxy / sxx;
        c.intercept = my - c.slope * mx;
        let var = points
            .iter()
            .zip(resp)
            .map(|(p, r)| r[k] * (p.1 - c.slope * p.0 - c.intercept).powi(2))
            .sum::<f64>()
            / sw;
        c.noise_std = var.sqrt().max(NOISE_STD_FLOOR);
    }
    // Guard against weights that underflowed to exactly zero.
    for c in comps.iter_mut() {
        c.weight = c.weight.max(f64::MIN_POSITIVE);
    }
}

fn run_once(points: &[(f64, f64)], opts: &EmOptions, seed: u64, restart: usize) -> MixtureFit {
    let k = opts.n_components;
    let mut rng = rng_from_seed(seed);
    let mut resp: Vec<Vec<f64>> = points
        .iter()
        .map(|_| {
            let mut r = vec![0.0; k];
            r[rng.random_range(0..k)] = 1.0;
            r
        })
        .collect();
    let init = MixtureComponent {
        slope: 0.0,
        intercept: points.iter().map(|p| p.1).sum::<f64>() / points.len() as f64,
        noise_std: 1.0,
        weight: 1.0 / k as f64,
    };
    let mut comps = vec![init; k];
    m_step(points, &resp, &mut comps);
    let mut history = Vec::new();
    let mut iterations = 0;
    while iterations < opts.max_iters {
        let ll = e_step(points, &comps, &mut resp);
        history.push(ll);
        iterations += 1;
        if history.len() >= 2 && (ll - history[history.len() - 2]).abs() <= opts.tol * (1.0 + ll.abs()) {
            break;
        }
        m_step(points, &resp, &mut comps);
    }
    let log_likelihood = *history.last().unwrap_or(&f64::NEG_INFINITY);
    MixtureFit {
        components: comps,
        responsibilities: resp,
        log_likelihood,
        history,
        iterations,
        restart,
    }
}

/// EM for a mixture of linear regressions with Gaussian noise. Each restart
/// starts from a random hard assignment of points to components; the restart
/// with the highest final log-likelihood is returned.
pub fn fit_linear_mixture_em(points: &[(f64, f64)], opts: &EmOptions) -> Result<MixtureFit> {
    if opts.n_components == 0 || opts.restarts == 0 || opts.max_iters == 0 {
        return Err(Error::Domain("components, restarts and iterations must be positive".into()));
    }
    if points.len() < 2 * opts.n_components {
        return Err(Error::InsufficientData {
            needed: 2 * opts.n_components,
            got: points.len(),
        });
    }
    if let Some(i) = points.iter().position(|p| !(p.0.is_finite() && p.1.is_finite())) {
        return Err(Error::NonFinite { index: i });
    }
    let x0 = points[0].0;
    if points.iter().all(|p| p.0 == x0) {
        return Err(Error::SingularDesign("every point has the same x".into()));
    }
    let best = (0..opts.restarts)
        .map(|r| run_once(points, opts, derive_seed(opts.seed, r as u64), r))
        .max_by(|a, b| a.log_likelihood.total_cmp(&b.log_likelihood))
        .expect("at least one restart");
    Ok(best)
}
