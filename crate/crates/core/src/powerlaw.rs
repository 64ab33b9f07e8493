//! Power-law (Pareto) matrix-element model.
//!
//! Exponent convention: `alpha` is the Pareto *shape*, i.e. the density is
//! `alpha * w_min^alpha * w^-(alpha + 1)` on `[w_min, inf)`. Packages that
//! report the density exponent (such as Python's `powerlaw`) quote
//! `alpha + 1` for the same law; see [`PowerLawFit::density_exponent`].

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParetoParams {
    alpha: f64,
    w_min: f64,
}

impl ParetoParams {
    pub fn new(alpha: f64, w_min: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Domain(format!("pareto alpha must be positive, got {alpha}")));
        }
        if !(w_min > 0.0 && w_min.is_finite()) {
            return Err(Error::Domain(format!("pareto w_min must be positive, got {w_min}")));
        }
        Ok(Self { alpha, w_min })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn w_min(&self) -> f64 {
        self.w_min
    }

    pub fn density(&self, w: f64) -> f64 {
        if w < self.w_min {
            0.0
        } else {
            self.alpha * self.w_min.powf(self.alpha) * w.powf(-(self.alpha + 1.0))
        }
    }

    pub fn cdf(&self, w: f64) -> f64 {
        if w <= self.w_min {
            0.0
        } else {
            1.0 - (self.w_min / w).powf(self.alpha)
        }
    }

    /// `w_min * u^(-1/alpha)` for `u` in `(0, 1]`.
    pub fn inverse_cdf(&self, u: f64) -> f64 {
        self.w_min * u.powf(-1.0 / self.alpha)
    }

    /// Probability that a draw exceeds `tau`: `w_min^alpha * tau^-alpha`.
    pub fn tail_probability(&self, tau: f64) -> Result<f64> {
        if !(tau >= self.w_min) {
            return Err(Error::Domain(format!(
                "tail probability needs tau >= w_min ({}), got {tau}",
                self.w_min
            )));
        }
        if tau.is_infinite() {
            return Ok(0.0);
        }
        Ok((self.w_min / tau).powf(self.alpha))
    }

    /// `E[w^2 1{w > tau}] = alpha w_min^alpha tau^(2 - alpha) / (alpha - 2)`.
    pub fn truncated_second_moment(&self, tau: f64) -> Result<f64> {
        if self.alpha <= 2.0 {
            return Err(Error::Divergence(format!(
                "truncated second moment diverges for alpha <= 2 (alpha = {})",
                self.alpha
            )));
        }
        if !(tau >= self.w_min) {
            return Err(Error::Domain(format!(
                "truncated second moment needs tau >= w_min ({}), got {tau}",
                self.w_min
            )));
        }
        let a = self.alpha;
        Ok(a * self.w_min.powf(a) * tau.powf(2.0 - a) / (a - 2.0))
    }

    /// One draw, optionally with a fair random sign.
    pub fn draw(&self, rng: &mut Rng, symmetrize: bool) -> f64 {
        // 1 - [0, 1) keeps u away from zero.
        let u = 1.0 - rng.random::<f64>();
        let w = self.inverse_cdf(u);
        if symmetrize && rng.random::<bool>() {
            -w
        } else {
            w
        }
    }

    pub fn fill(&self, rng: &mut Rng, symmetrize: bool, out: &mut [f64]) {
        for v in out {
            *v = self.draw(rng, symmetrize);
        }
    }
}

/// `n` inverse-CDF draws from the Pareto law; with `symmetrize`, each draw
/// gets an independent fair sign.
pub fn sample_pareto(params: ParetoParams, n: usize, seed: u64, symmetrize: bool) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::EmptyRequest("sample_pareto needs n >= 1"));
    }
    let mut rng = rng_from_seed(seed);
    let mut out = vec![0.0; n];
    params.fill(&mut rng, symmetrize, &mut out);
    Ok(out)
}

/// Result of a maximum-likelihood tail fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    /// Pareto shape estimate.
    pub alpha_hat: f64,
    pub w_min_used: f64,
    /// Number of samples with magnitude at least `w_min_used`.
    pub n_tail: usize,
}

impl PowerLawFit {
    /// Exponent of the density, `alpha_hat + 1`, as reported by packages that
    /// parameterize `p(w) ~ w^-a`.
    pub fn density_exponent(&self) -> f64 {
        self.alpha_hat + 1.0
    }

    /// Asymptotic standard error `alpha_hat / sqrt(n_tail)`.
    pub fn standard_error(&self) -> f64 {
        self.alpha_hat / (self.n_tail as f64).sqrt()
    }
}

/// Pareto-shape MLE `n / sum ln(|x| / w_min)` over samples with `|x| >= w_min`.
///
/// Magnitudes are fitted; signs are discarded.
pub fn fit_alpha_mle(data: &[f64], w_min: f64) -> Result<PowerLawFit> {
    if !(w_min > 0.0 && w_min.is_finite()) {
        return Err(Error::Domain(format!("w_min must be positive, got {w_min}")));
    }
    let mut n_tail = 0usize;
    let mut log_sum = 0.0;
    for &x in data {
        let m = x.abs();
        if m >= w_min && m.is_finite() {
            n_tail += 1;
            log_sum += (m / w_min).ln();
        }
    }
    if n_tail < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n_tail });
    }
    if log_sum <= 0.0 {
        return Err(Error::InfiniteEstimate);
    }
    Ok(PowerLawFit {
        alpha_hat: n_tail as f64 / log_sum,
        w_min_used: w_min,
        n_tail,
    })
}

/// Population standard deviation of `|x|`, an optional `w_min` rule.
pub fn wmin_from_stddev(data: &[f64]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyRequest("w_min rule needs data"));
    }
    let sd = magnitude_std(data);
    if sd > 0.0 {
        Ok(sd)
    } else {
        Err(Error::Degenerate("all magnitudes are equal; standard deviation is zero".into()))
    }
}

pub(crate) fn magnitude_std(data: &[f64]) -> f64 {
    let n = data.len() as f64;
    let mean = data.iter().map(|x| x.abs()).sum::<f64>() / n;
    let var = data.iter().map(|x| (x.abs() - mean).powi(2)).sum::<f64>() / n;
    var.sqrt()
}

/// Asymptotic tail of a symmetric alpha-stable law with scale `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableTailParams {
    alpha: f64,
    scale_c: f64,
}

impl StableTailParams {
    pub fn new(alpha: f64, scale_c: f64) -> Result<Self> {
        check_stable_alpha(alpha)?;
        if !(scale_c > 0.0 && scale_c.is_finite()) {
            return Err(Error::Domain(format!("stable scale must be positive, got {scale_c}")));
        }
        Ok(Self { alpha, scale_c })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn scale_c(&self) -> f64 {
        self.scale_c
    }
}

fn check_stable_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 2.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("stable alpha must lie in (0, 2), got {alpha}")))
    }
}

/// `c_alpha = sin(pi alpha / 2) Gamma(alpha) / pi`.
pub fn stable_tail_constant(alpha: f64) -> Result<f64> {
    check_stable_alpha(alpha)?;
    let pi = std::f64::consts::PI;
    Ok((pi * alpha / 2.0).sin() * statrs::function::gamma::gamma(alpha) / pi)
}

/// Large-`w` asymptote `alpha c^alpha c_alpha w^-(alpha + 1)` of the stable
/// density. Not a density for moderate `w`.
pub fn stable_tail_density(params: StableTailParams, w: f64) -> Result<f64> {
    if !(w > 0.0) {
        return Err(Error::Domain(format!("stable tail density needs w > 0, got {w}")));
    }
    let a = params.alpha;
    let c_alpha = stable_tail_constant(a)?;
    Ok(a * params.scale_c.powf(a) * c_alpha * w.powf(-(a + 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(alpha: f64, w_min: f64) -> ParetoParams {
        ParetoParams::new(alpha, w_min).unwrap()
    }

    #[test]
    fn rejects_bad_params() {
        assert!(ParetoParams::new(0.0, 1.0).is_err());
        assert!(ParetoParams::new(1.0, -1.0).is_err());
        assert!(ParetoParams::new(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn inverse_cdf_at_half() {
        assert_eq!(p(1.0, 1.0).inverse_cdf(0.5), 2.0);
    }

    #[test]
    fn density_integrates_to_one() {
        // Substitute w = w_min / s^(1/alpha) would be circular; integrate on a
        // log grid instead: int f(w) dw = int f(e^y) e^y dy.
        for &(a, wm) in &[(0.7, 0.3), (1.5, 1.0), (3.0, 2.0)] {
            let par = p(a, wm);
            let (y0, y1) = (wm.ln(), wm.ln() + 400.0 / a);
            let n = 400_000;
            let h = (y1 - y0) / n as f64;
            let mut s = 0.0;
            for k in 0..=n {
                let y = y0 + k as f64 * h;
                let wt = if k == 0 || k == n { 0.5 } else { 1.0 };
                s += wt * par.density(y.exp()) * y.exp();
            }
            assert!((s * h - 1.0).abs() < 1e-6, "alpha={a}: {}", s * h);
        }
    }

    #[test]
    fn sample_requires_n() {
        assert!(matches!(sample_pareto(p(1.0, 1.0), 0, 1, false), Err(Error::EmptyRequest(_))));
    }

    #[test]
    fn samples_respect_support_and_seed() {
        let par = p(1.3, 0.5);
        let a = sample_pareto(par, 1000, 42, false).unwrap();
        assert!(a.iter().all(|&w| w >= 0.5));
        assert_eq!(a, sample_pareto(par, 1000, 42, false).unwrap());
        let s = sample_pareto(par, 1000, 42, true).unwrap();
        assert!(s.iter().all(|&w| w.abs() >= 0.5));
        let neg = s.iter().filter(|&&w| w < 0.0).count();
        assert!((400..600).contains(&neg), "{neg}");
    }

    #[test]
    fn log_mean_matches_inverse_alpha() {
        // ln(w / w_min) is exponential with rate alpha.
        let s = sample_pareto(p(2.5, 1.0), 100_000, 3, false).unwrap();
        let m = s.iter().map(|w| w.ln()).sum::<f64>() / s.len() as f64;
        assert!((m - 0.4).abs() < 0.01, "{m}");
    }

    #[test]
    fn ks_statistic_small() {
        let par = p(1.8, 1.0);
        let mut s = sample_pareto(par, 100_000, 9, false).unwrap();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = s.len() as f64;
        let d = s
            .iter()
            .enumerate()
            .map(|(i, &w)| {
                let f = par.cdf(w);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(d < 0.01, "{d}");
    }

    #[test]
    fn tail_probability_examples() {
        assert!((p(2.0, 1.0).tail_probability(10.0).unwrap() - 0.01).abs() < 1e-15);
        assert_eq!(p(1.7, 3.0).tail_probability(3.0).unwrap(), 1.0);
        assert!((p(3.0, 2.0).tail_probability(4.0).unwrap() - 0.125).abs() < 1e-15);
        assert!(p(3.0, 2.0).tail_probability(1.0).is_err());
        assert_eq!(p(3.0, 2.0).tail_probability(f64::INFINITY).unwrap(), 0.0);
    }

    #[test]
    fn tail_probability_monotone_on_grid() {
        let taus: Vec<f64> = (0..50).map(|k| 1.0 + 0.3 * k as f64).collect();
        let alphas: Vec<f64> = (1..30).map(|k| 0.2 * k as f64).collect();
        for &a in &alphas {
            for w in taus.windows(2) {
                assert!(p(a, 1.0).tail_probability(w[1]).unwrap() <= p(a, 1.0).tail_probability(w[0]).unwrap());
            }
        }
        for &t in &taus[1..] {
            for w in alphas.windows(2) {
                assert!(p(w[1], 1.0).tail_probability(t).unwrap() <= p(w[0], 1.0).tail_probability(t).unwrap());
            }
        }
    }

    #[test]
    fn truncated_second_moment_examples() {
        assert!((p(3.0, 1.0).truncated_second_moment(2.0).unwrap() - 1.5).abs() < 1e-15);
        assert!(matches!(p(2.0, 1.0).truncated_second_moment(2.0), Err(Error::Divergence(_))));
        assert!(p(2.01, 1.0).truncated_second_moment(2.0).unwrap() > p(3.0, 1.0).truncated_second_moment(2.0).unwrap());
    }

    #[test]
    fn truncated_second_moment_monte_carlo() {
        let s = sample_pareto(p(3.0, 1.0), 1_000_000, 11, false).unwrap();
        let m = s.iter().map(|&w| if w > 2.0 { w * w } else { 0.0 }).sum::<f64>() / s.len() as f64;
        assert!((m / 1.5 - 1.0).abs() < 0.05, "{m}");
    }

    #[test]
    fn mle_examples() {
        let e = std::f64::consts::E;
        let fit = fit_alpha_mle(&[e, e * e, e * e * e], 1.0).unwrap();
        assert!((fit.alpha_hat - 0.5).abs() < 1e-12);
        assert_eq!(fit.n_tail, 3);
        assert!((fit.density_exponent() - 1.5).abs() < 1e-12);
        assert!(matches!(fit_alpha_mle(&[2.0; 5], 2.0), Err(Error::InfiniteEstimate)));
        assert!(matches!(fit_alpha_mle(&[2.0, 0.1], 1.0), Err(Error::InsufficientData { got: 1, .. })));
        // Negative values enter through their magnitude.
        let signed = fit_alpha_mle(&[-e, e * e, -e * e * e], 1.0).unwrap();
        assert_eq!(signed.alpha_hat, fit.alpha_hat);
    }

    #[test]
    fn mle_recovers_alpha() {
        let s = sample_pareto(p(2.5, 1.0), 100_000, 5, false).unwrap();
        let fit = fit_alpha_mle(&s, 1.0).unwrap();
        assert!((2.45..=2.55).contains(&fit.alpha_hat), "{}", fit.alpha_hat);
        for (i, &a) in [1.5, 2.5, 3.5].iter().enumerate() {
            let s = sample_pareto(p(a, 1.0), 10_000, 100 + i as u64, true).unwrap();
            let fit = fit_alpha_mle(&s, 1.0).unwrap();
            assert!((fit.alpha_hat - a).abs() < 3.0 * a / 100.0, "alpha {a}: {}", fit.alpha_hat);
        }
    }

    #[test]
    fn wmin_rule() {
        assert!((wmin_from_stddev(&[1.0, -3.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!(wmin_from_stddev(&[2.0, -2.0]).is_err());
    }

    #[test]
    fn stable_constant_values() {
        let pi = std::f64::consts::PI;
        assert!((stable_tail_constant(1.0).unwrap() - 1.0 / pi).abs() < 1e-15);
        assert!(stable_tail_constant(2.0 - 1e-9).unwrap().abs() < 1e-8);
        // Gamma(1/2) = sqrt(pi), so c = sin(pi/4) / sqrt(pi).
        let exact = std::f64::consts::FRAC_1_SQRT_2 / pi.sqrt();
        assert!((stable_tail_constant(0.5).unwrap() - exact).abs() < 1e-12);
        assert!(stable_tail_constant(2.0).is_err());
        assert!(stable_tail_constant(0.0).is_err());
    }

    #[test]
    fn stable_density_values() {
        let pi = std::f64::consts::PI;
        let one = StableTailParams::new(1.0, 1.0).unwrap();
        assert!((stable_tail_density(one, 1.0).unwrap() - 1.0 / pi).abs() < 1e-15);
        let r = stable_tail_density(one, 1.0).unwrap() / stable_tail_density(one, 2.0).unwrap();
        assert!((r - 4.0).abs() < 1e-12);
        let par = StableTailParams::new(1.5, 2.0).unwrap();
        let c15 = (0.75 * pi).sin() * statrs::function::gamma::gamma(1.5) / pi;
        let direct = 1.5 * 2.0_f64.powf(1.5) * c15 * 10.0_f64.powf(-2.5);
        assert!((stable_tail_density(par, 10.0).unwrap() - direct).abs() <= 1e-15 * direct);
        assert!(stable_tail_density(par, 0.0).is_err());
        assert!(StableTailParams::new(1.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn draws_stay_in_support(alpha in 0.1f64..6.0, w_min in 0.01f64..10.0, seed in any::<u64>()) {
            let s = sample_pareto(p(alpha, w_min), 64, seed, true).unwrap();
            prop_assert!(s.iter().all(|w| w.abs() >= w_min));
        }
    }
}
