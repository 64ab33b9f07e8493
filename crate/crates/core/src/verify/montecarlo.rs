use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{
    binomial_tail_exact, max_feasible_tau, solve_variance_t, spiked_component_expectation, sparsity_tail_bound,
    SparsityBoundInput, VarianceMode,
};
use crate::error::{Error, Result};
use crate::matrix::{gaussian_substitute, norm2, split_by_threshold, DenseMatrix, SplitMode, Substitution};
use crate::powerlaw::ParetoParams;
use crate::rng::{derive_seed, rng_from_seed, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

/// An empirical failure rate compared against a target probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub trials: u64,
    pub failures: u64,
    pub empirical_rate: f64,
    pub bound_target: f64,
    /// `3 sqrt(target (1 - target) / trials)`.
    pub slack: f64,
    pub verdict: Verdict,
}

/// Three binomial standard deviations of an empirical rate at `target`.
pub fn binomial_slack(target: f64, trials: u64) -> f64 {
    let p = target.clamp(0.0, 1.0);
    3.0 * (p * (1.0 - p) / trials as f64).sqrt()
}

impl VerificationReport {
    fn new(trials: u64, failures: u64, bound_target: f64) -> Self {
        let empirical_rate = failures as f64 / trials as f64;
        let slack = binomial_slack(bound_target, trials);
        Self {
            trials,
            failures,
            empirical_rate,
            bound_target,
            slack,
            verdict: Verdict::from_bool(empirical_rate <= bound_target + slack),
        }
    }
}

/// How the threshold is chosen inside the variance budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "tau")]
pub enum TauMode {
    Fixed(f64),
    /// `tau^2` takes the whole budget and `t = 0`.
    MaxFeasible,
    /// `tau^2 = t`, half the budget each.
    Balanced,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationSetup {
    pub alpha: f64,
    pub w_min: f64,
    pub rows: usize,
    pub cols: usize,
    pub epsilon: f64,
    pub eta: f64,
    pub tau_mode: TauMode,
    pub variance: VarianceMode,
    pub trials: u64,
    pub seed: u64,
}

fn unit_vector(n: usize, rng: &mut Rng) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut *rng)).collect();
        let s = norm2(&g);
        if s > 0.0 {
            return g.into_iter().map(|v| v / s).collect();
        }
    }
}

/// Check `P(|u^T (A - sqrt(t) G) v| > epsilon) <= eta` for fresh symmetric
/// Pareto matrices and uniformly random unit vectors `u`, `v`.
pub fn verify_concentration(setup: &ConcentrationSetup) -> Result<VerificationReport> {
    if setup.trials < 100 {
        return Err(Error::Domain(format!("need at least 100 trials, got {}", setup.trials)));
    }
    if setup.rows == 0 || setup.cols == 0 {
        return Err(Error::Shape("matrix dimensions must be positive".into()));
    }
    let params = ParetoParams::new(setup.alpha, setup.w_min)?;
    let max_tau = max_feasible_tau(setup.epsilon, setup.eta, setup.variance)?;
    let tau = match setup.tau_mode {
        TauMode::Fixed(tau) => tau,
        TauMode::MaxFeasible => max_tau,
        TauMode::Balanced => max_tau / std::f64::consts::SQRT_2,
    };
    let t = match setup.tau_mode {
        TauMode::MaxFeasible => 0.0,
        _ => solve_variance_t(setup.epsilon, setup.eta, tau, setup.variance)?,
    };
    let failures: u64 = (0..setup.trials)
        .into_par_iter()
        .map(|trial| -> Result<u64> {
            let trial_seed = derive_seed(setup.seed, trial);
            let mut rng = rng_from_seed(trial_seed);
            let mut values = vec![0.0; setup.rows * setup.cols];
            params.fill(&mut rng, true, &mut values);
            let w = DenseMatrix::new(setup.rows, setup.cols, values)?;
            let split = split_by_threshold(&w, tau, SplitMode::SignedAbsolute)?;
            let sub = gaussian_substitute(&split, Substitution::Theory { t }, derive_seed(trial_seed, 1))?;
            let u = unit_vector(setup.rows, &mut rng);
            let v = unit_vector(setup.cols, &mut rng);
            // A - sqrt(t) G = W - (sqrt(t) G + B).
            let diff = w.sub(&sub.realized)?;
            let s: f64 = u.iter().zip(diff.matvec_unchecked(&v)).map(|(a, b)| a * b).sum();
            Ok(u64::from(s.abs() > setup.epsilon))
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(VerificationReport::new(setup.trials, failures, setup.eta))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparsityVerification {
    pub report: VerificationReport,
    /// Per-entry exceedance probability `P(|w| > tau)`.
    pub p: f64,
    pub bound: f64,
    pub exact: f64,
    /// True when both the empirical rate (with slack) and the exact tail are
    /// within the analytic bound.
    pub passed: bool,
}

/// Count exceedances of `tau` among `n` Pareto entries and compare `P(X >= k)`
/// with the Chernoff bound and the exact binomial tail.
pub fn verify_sparsity(alpha: f64, w_min: f64, tau: f64, n: u64, k: u64, trials: u64, seed: u64) -> Result<SparsityVerification> {
    if trials == 0 {
        return Err(Error::Domain("need at least one trial".into()));
    }
    let params = ParetoParams::new(alpha, w_min)?;
    let p = if tau < w_min {
        1.0
    } else {
        params.tail_probability(tau)?
    };
    if !(k as f64 > n as f64 * p) {
        return Err(Error::Validity(format!(
            "sparsity bound needs k > n p (k = {k}, n p = {})",
            n as f64 * p
        )));
    }
    let bound = sparsity_tail_bound(SparsityBoundInput { n, p, k })?.value;
    let exact = binomial_tail_exact(n, p, k)?;
    let failures: u64 = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = rng_from_seed(derive_seed(seed, trial));
            let count = (0..n).filter(|_| params.draw(&mut rng, false) > tau).count() as u64;
            u64::from(count >= k)
        })
        .sum();
    let mut report = VerificationReport::new(trials, failures, bound);
    let passed = report.verdict.passed() && exact <= bound + 1e-12;
    report.verdict = Verdict::from_bool(passed);
    Ok(SparsityVerification {
        report,
        p,
        bound,
        exact,
        passed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpikedExpectationReport {
    pub trials: u64,
    pub monte_carlo: f64,
    pub closed_form: f64,
    /// `|monte_carlo - closed_form| / closed_form`, zero when both vanish.
    pub relative_error: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
}

pub const SPIKED_TOLERANCE: f64 = 0.05;

/// Monte-Carlo mean of `(Bx)_i^2` for a row of symmetric Pareto entries with
/// the bulk `|w| <= tau` removed, against `||x||^2 E[w^2 1{|w| > tau}]`.
pub fn verify_spiked_expectation(alpha: f64, w_min: f64, tau: f64, x: &[f64], trials: u64, seed: u64) -> Result<SpikedExpectationReport> {
    if !(alpha > 2.0) {
        return Err(Error::Divergence(format!(
            "the second moment diverges for alpha = {alpha} <= 2"
        )));
    }
    if trials == 0 {
        return Err(Error::Domain("need at least one trial".into()));
    }
    let params = ParetoParams::new(alpha, w_min)?;
    let closed_form = spiked_component_expectation(params, tau.max(w_min), x)?;
    let values: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = rng_from_seed(derive_seed(seed, trial));
            let s: f64 = x
                .iter()
                .map(|&xj| {
                    let w = params.draw(&mut rng, true);
                    if w.abs() > tau {
                        w * xj
                    } else {
                        0.0
                    }
                })
                .sum();
            s * s
        })
        .collect();
    let monte_carlo = values.iter().sum::<f64>() / trials as f64;
    let relative_error = if closed_form == 0.0 {
        if monte_carlo == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (monte_carlo - closed_form).abs() / closed_form
    };
    Ok(SpikedExpectationReport {
        trials,
        monte_carlo,
        closed_form,
        relative_error,
        tolerance: SPIKED_TOLERANCE,
        verdict: Verdict::from_bool(relative_error <= SPIKED_TOLERANCE),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(epsilon: f64, trials: u64) -> ConcentrationSetup {
        ConcentrationSetup {
            alpha: 3.0,
            w_min: 0.05,
            rows: 20,
            cols: 30,
            epsilon,
            eta: 0.1,
            tau_mode: TauMode::Balanced,
            variance: VarianceMode::Conservative,
            trials,
            seed: 4,
        }
    }

    #[test]
    fn huge_epsilon_never_fails() {
        let r = verify_concentration(&setup(1e3, 200)).unwrap();
        assert_eq!(r.failures, 0);
        assert!(r.verdict.passed());
    }

    #[test]
    fn concentration_is_deterministic_and_within_target() {
        let a = verify_concentration(&setup(0.5, 400)).unwrap();
        assert_eq!(a, verify_concentration(&setup(0.5, 400)).unwrap());
        assert!(a.verdict.passed(), "{a:?}");
        assert!(verify_concentration(&setup(0.5, 10)).is_err());
        let mut bad = setup(0.5, 200);
        bad.tau_mode = TauMode::Fixed(10.0);
        assert!(matches!(verify_concentration(&bad), Err(Error::InfeasibleThreshold { .. })));
    }

    #[test]
    fn slack_formula() {
        assert!((binomial_slack(0.1, 10_000) - 3.0 * (0.09f64 / 1e4).sqrt()).abs() < 1e-18);
        let r = VerificationReport::new(100, 13, 0.1);
        assert!(r.verdict.passed());
        let r = VerificationReport::new(100, 20, 0.1);
        assert!(!r.verdict.passed());
    }

    #[test]
    fn sparsity_cases() {
        let r = verify_sparsity(2.0, 1.0, f64::INFINITY, 100, 1, 200, 0).unwrap();
        assert_eq!(r.report.failures, 0);
        assert_eq!((r.p, r.bound, r.exact), (0.0, 0.0, 0.0));
        assert!(r.passed);

        let tau = 2f64.powf(0.5);
        let r = verify_sparsity(2.0, 1.0, tau, 4, 3, 20_000, 1).unwrap();
        assert!((r.p - 0.5).abs() < 1e-12);
        assert!((r.exact - 0.3125).abs() < 1e-12);
        assert!((r.bound - 16.0 / 27.0).abs() < 1e-12);
        assert!((r.report.empirical_rate - 0.3125).abs() <= binomial_slack(0.3125, 20_000));
        assert!(r.passed);
        assert!(matches!(verify_sparsity(2.0, 1.0, tau, 4, 1, 10, 1), Err(Error::Validity(_))));
    }

    #[test]
    fn spiked_cases() {
        let zero = verify_spiked_expectation(3.0, 1.0, 2.0, &[0.0; 4], 100, 0).unwrap();
        assert_eq!((zero.monte_carlo, zero.closed_form, zero.relative_error), (0.0, 0.0, 0.0));
        let x = [0.5; 4];
        let a = verify_spiked_expectation(3.0, 1.0, 2.0, &x, 2000, 3).unwrap();
        let b = verify_spiked_expectation(3.0, 1.0, 2.0, &[1.0; 4], 2000, 3).unwrap();
        assert!((b.closed_form - 4.0 * a.closed_form).abs() < 1e-12);
        assert!((b.monte_carlo - 4.0 * a.monte_carlo).abs() < 1e-9 * b.monte_carlo);
        assert!((a.closed_form - 1.5).abs() < 1e-12);
        assert!(matches!(
            verify_spiked_expectation(2.0, 1.0, 2.0, &x, 10, 0),
            Err(Error::Divergence(_))
        ));
    }
}
