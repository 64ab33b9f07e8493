use serde::{Deserialize, Serialize};

use super::BoundValue;
use crate::error::{Error, Result};

/// How the substitution variance is tied to `(epsilon, eta)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarianceMode {
    /// `tau^2 + t = epsilon^2 / ln(3 / eta)`, the relation as usually stated.
    Paper,
    /// `tau^2 + t = epsilon^2 / (2 ln(3 / eta))`, which makes the tail bound
    /// `3 exp(-s^2 / (2 ||uv^T||_F^2 (tau^2 + t)))` at most `eta`.
    #[default]
    Conservative,
}

fn check_eps_eta(epsilon: f64, eta: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Domain(format!("epsilon must be positive, got {epsilon}")));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::Domain(format!("eta must lie in (0, 1), got {eta}")));
    }
    Ok(())
}

/// The total variance budget `tau^2 + t` allowed by `(epsilon, eta)`.
pub fn variance_budget(epsilon: f64, eta: f64, mode: VarianceMode) -> Result<f64> {
    check_eps_eta(epsilon, eta)?;
    let l = (3.0 / eta).ln();
    Ok(match mode {
        VarianceMode::Paper => epsilon * epsilon / l,
        VarianceMode::Conservative => epsilon * epsilon / (2.0 * l),
    })
}

/// Largest threshold for which `t >= 0` is attainable.
pub fn max_feasible_tau(epsilon: f64, eta: f64, mode: VarianceMode) -> Result<f64> {
    Ok(variance_budget(epsilon, eta, mode)?.sqrt())
}

/// Solve for the Gaussian variance `t` that goes with threshold `tau`.
pub fn solve_variance_t(epsilon: f64, eta: f64, tau: f64, mode: VarianceMode) -> Result<f64> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Domain(format!("tau must be positive, got {tau}")));
    }
    let budget = variance_budget(epsilon, eta, mode)?;
    let t = budget - tau * tau;
    if t < 0.0 {
        return Err(Error::InfeasibleThreshold {
            layer: None,
            tau,
            max_tau: budget.sqrt(),
        });
    }
    Ok(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationParams {
    pub epsilon: f64,
    pub eta: f64,
    pub tau: f64,
    pub t: f64,
    /// `2 / (tau^2 + t)`.
    pub lambda: f64,
    pub mode: VarianceMode,
}

impl ConcentrationParams {
    pub fn solve(epsilon: f64, eta: f64, tau: f64, mode: VarianceMode) -> Result<Self> {
        let t = solve_variance_t(epsilon, eta, tau, mode)?;
        Ok(Self::with_t(epsilon, eta, tau, t, mode))
    }

    pub(crate) fn with_t(epsilon: f64, eta: f64, tau: f64, t: f64, mode: VarianceMode) -> Self {
        Self {
            epsilon,
            eta,
            tau,
            t,
            lambda: 2.0 / (tau * tau + t),
            mode,
        }
    }

    /// `2 ln(3 / eta) / epsilon^2`, the value the algorithm header assigns to lambda.
    pub fn lambda_from_error(&self) -> f64 {
        2.0 * (3.0 / self.eta).ln() / (self.epsilon * self.epsilon)
    }
}

/// `min(1, 3 exp(-s^2 / (2 ||uv^T||_F^2 (tau^2 + t))))`.
pub fn concentration_tail(s: f64, uv_frobenius: f64, tau: f64, t: f64) -> Result<BoundValue> {
    if !(s >= 0.0) {
        return Err(Error::Domain(format!("s must be nonnegative, got {s}")));
    }
    if !(uv_frobenius > 0.0) {
        return Err(Error::Domain(format!("||uv^T||_F must be positive, got {uv_frobenius}")));
    }
    let v = tau * tau + t;
    if !(v > 0.0) {
        return Err(Error::Domain("tau^2 + t must be positive".into()));
    }
    let raw = 3.0 * (-(s * s) / (2.0 * uv_frobenius * uv_frobenius * v)).exp();
    Ok(BoundValue::from_raw(raw))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{norm2, DenseMatrix};
    use crate::rng::rng_from_seed;
    use rand_distr::{Distribution, StandardNormal};

    fn eta_ln2() -> f64 {
        3.0 * (-2.0f64).exp()
    }

    #[test]
    fn solve_examples() {
        let t = solve_variance_t(1.0, eta_ln2(), 0.5, VarianceMode::Paper).unwrap();
        assert!((t - 0.25).abs() < 1e-12);
        let t = solve_variance_t(1.0, eta_ln2(), 0.4, VarianceMode::Conservative).unwrap();
        assert!((t - 0.09).abs() < 1e-12);
        match solve_variance_t(0.1, 0.1, 1.0, VarianceMode::Paper) {
            Err(Error::InfeasibleThreshold { max_tau, .. }) => {
                assert!((max_tau - (0.01 / 30f64.ln()).sqrt()).abs() < 1e-15)
            }
            other => panic!("{other:?}"),
        }
        assert!(solve_variance_t(1.0, 1.0, 0.1, VarianceMode::Paper).is_err());
        assert!(solve_variance_t(0.0, 0.5, 0.1, VarianceMode::Paper).is_err());
    }

    #[test]
    fn lambda_relations() {
        let p = ConcentrationParams::solve(1.0, 0.1, 0.2, VarianceMode::Paper).unwrap();
        assert!((p.lambda - p.lambda_from_error()).abs() < 1e-12);
        let c = ConcentrationParams::solve(1.0, 0.1, 0.2, VarianceMode::Conservative).unwrap();
        assert!((c.lambda - 2.0 * c.lambda_from_error()).abs() < 1e-12);
    }

    #[test]
    fn tail_examples() {
        let v = concentration_tail(0.0, 1.0, 0.5, 0.25).unwrap();
        assert_eq!((v.value, v.raw), (1.0, 3.0));
        let v = concentration_tail(1.0, 1.0, 0.5, 0.25).unwrap();
        assert_eq!(v.value, 1.0);
        assert!((v.raw - 3.0 * (-1.0f64).exp()).abs() < 1e-15);
        let v = concentration_tail(2.0, 1.0, 0.5, 0.25).unwrap();
        assert!((v.value - 3.0 * (-4.0f64).exp()).abs() < 1e-15);
        assert!((v.value - 0.05495).abs() < 1e-5);
    }

    #[test]
    fn conservative_plug_in_meets_eta() {
        let mut rng = rng_from_seed(21);
        for trial in 0..200 {
            let n1 = 1 + trial % 7;
            let n2 = 1 + trial % 5;
            let u: Vec<f64> = (0..n1).map(|_| StandardNormal.sample(&mut rng)).collect();
            let v: Vec<f64> = (0..n2).map(|_| StandardNormal.sample(&mut rng)).collect();
            let fro = DenseMatrix::outer(&u, &v).unwrap().frobenius_norm();
            let prod = norm2(&u) * norm2(&v);
            assert!((fro - prod).abs() <= 1e-12 * prod);

            let eps = 0.05 + (trial as f64) * 0.01;
            let eta = 0.01 + 0.9 * ((trial * 37) % 100) as f64 / 100.0;
            let tau_max = max_feasible_tau(eps, eta, VarianceMode::Conservative).unwrap();
            let tau = tau_max * 0.3;
            let t = solve_variance_t(eps, eta, tau, VarianceMode::Conservative).unwrap();
            let b = concentration_tail(eps * prod, fro, tau, t).unwrap();
            assert!(b.value <= eta * (1.0 + 1e-12), "{} > {eta}", b.value);
        }
    }
}
