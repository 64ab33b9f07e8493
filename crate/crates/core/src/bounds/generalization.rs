//! Compression-based generalization bound and its covering-number pieces.

use serde::{Deserialize, Serialize};
use statrs::function::erf::{erf, erfc};

use crate::error::{Error, Result};

/// Leading constant of the complexity term when none is configured.
pub const DEFAULT_CONSTANT_C: f64 = 1.0;
/// Discrete values per parameter when none is configured (16-bit quantization).
pub const DEFAULT_QUANTIZATION_LEVELS: u64 = 1 << 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenBoundInput {
    pub k_per_layer: Vec<u64>,
    /// Training-set size.
    pub m: u64,
    /// Empirical margin loss of the uncompressed network.
    pub margin_loss: f64,
    /// Discrete values each retained parameter can take.
    pub r: u64,
    pub constant_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenBound {
    /// Total retained parameters `sum k_i`.
    pub q: u64,
    /// `C sqrt(q ln r / m)`.
    pub complexity: f64,
    /// `margin_loss + complexity`.
    pub total: f64,
    pub input: GenBoundInput,
}

pub fn simple_generalization_bound(input: GenBoundInput) -> Result<GenBound> {
    if input.m < 1 {
        return Err(Error::Domain("training-set size m must be at least 1".into()));
    }
    if input.r < 2 {
        return Err(Error::Domain(format!("need at least 2 discrete values per parameter, got r = {}", input.r)));
    }
    if !(0.0..=1.0).contains(&input.margin_loss) {
        return Err(Error::Domain(format!("margin loss must lie in [0, 1], got {}", input.margin_loss)));
    }
    if !(input.constant_c > 0.0) {
        return Err(Error::Domain(format!("constant C must be positive, got {}", input.constant_c)));
    }
    let q: u64 = input.k_per_layer.iter().sum();
    let complexity = input.constant_c * (q as f64 * (input.r as f64).ln() / input.m as f64).sqrt();
    Ok(GenBound {
        q,
        complexity,
        total: input.margin_loss + complexity,
        input,
    })
}

/// Measured network constants that enter the covering argument.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CushionSet {
    pub mu_per_layer: Vec<f64>,
    pub mu_min_interlayer: Vec<f64>,
    pub contraction_c: f64,
    /// `None` for ReLU networks, where the exact Jacobian removes the need for it.
    pub smoothness_rho: Option<f64>,
    pub depth_d: usize,
    /// Largest output norm over the training set.
    pub f_max: f64,
}

/// `kappa = e^2 c^d f_max d / prod_i mu_i`.
pub fn covering_kappa(cushions: &CushionSet) -> Result<f64> {
    if cushions.mu_per_layer.len() != cushions.depth_d {
        return Err(Error::Shape(format!(
            "{} layer cushions for depth {}",
            cushions.mu_per_layer.len(),
            cushions.depth_d
        )));
    }
    if let Some(i) = cushions.mu_per_layer.iter().position(|&m| !(m > 0.0)) {
        return Err(Error::Degenerate(format!("layer cushion of layer {} is zero", i + 1)));
    }
    let d = cushions.depth_d as f64;
    let prod: f64 = cushions.mu_per_layer.iter().product();
    let e2 = std::f64::consts::E * std::f64::consts::E;
    Ok(e2 * cushions.contraction_c.powf(d) * cushions.f_max * d / prod)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DudleyResult {
    /// `int_0^D sqrt(q ln(2 q kappa / eps)) d eps`.
    pub value: f64,
    /// Lower limit of the numeric quadrature.
    pub lower_limit: f64,
    /// Analytic contribution of `(0, lower_limit]`.
    pub tail_correction: f64,
    /// The textbook antiderivative `sqrt(qL) (eps - sqrt(pi) A erf(sqrt L) / (2 sqrt L))`,
    /// `L = ln(A / eps)`, `A = 2 q kappa`, evaluated between `0+` and `D`.
    pub closed_form: f64,
    /// `|closed_form - value| / value`.
    pub closed_form_rel_diff: f64,
}

/// Entropy integral `int_0^D sqrt(q ln(2 q kappa / eps)) d eps` by adaptive
/// Gauss-Kronrod quadrature in the variable `s = ln(D / eps)`.
pub fn dudley_integral(q: f64, kappa: f64, upper: f64) -> Result<DudleyResult> {
    if !(q >= 1.0) {
        return Err(Error::Domain(format!("q must be at least 1, got {q}")));
    }
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::Domain(format!("kappa must be positive, got {kappa}")));
    }
    let a = 2.0 * q * kappa;
    if !(upper > 0.0) || upper >= a {
        return Err(Error::Domain(format!("upper limit must lie in (0, 2 q kappa = {a}), got {upper}")));
    }
    let lower = (upper * 1e-9).max(f64::EPSILON).min(upper * 0.5);
    let l_d = (a / upper).ln();
    let s_max = (upper / lower).ln();
    // eps = D e^-s, d eps = -D e^-s ds.
    let f = |s: f64| (-s).exp() * (l_d + s).sqrt();
    let body = upper * gauss_kronrod_adaptive(&f, 0.0, s_max, 1e-14);
    let l0 = (a / lower).ln();
    let tail = lower * l0.sqrt() + 0.5 * std::f64::consts::PI.sqrt() * a * erfc(l0.sqrt());
    let value = q.sqrt() * (body + tail);

    let sqrt_pi = std::f64::consts::PI.sqrt();
    let at_d = (q * l_d).sqrt() * 0.5 * (2.0 * upper - sqrt_pi * a * erf(l_d.sqrt()) / l_d.sqrt());
    let at_zero = -q.sqrt() * 0.5 * sqrt_pi * a;
    let closed_form = at_d - at_zero;
    Ok(DudleyResult {
        value,
        lower_limit: lower,
        tail_correction: q.sqrt() * tail,
        closed_form,
        closed_form_rel_diff: (closed_form - value).abs() / value,
    })
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let pair = f(c - x) + f(c + x);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * h, (kronrod - gauss).abs() * h)
}

fn gauss_kronrod_adaptive(f: &impl Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    fn recurse(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (k, err) = gk15(f, a, b);
        if err <= tol || depth == 0 {
            return k;
        }
        let m = 0.5 * (a + b);
        recurse(f, a, m, tol * 0.5, depth - 1) + recurse(f, m, b, tol * 0.5, depth - 1)
    }
    let (rough, _) = gk15(f, a, b);
    recurse(f, a, b, rel_tol * rough.abs().max(f64::MIN_POSITIVE), 40)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input(k: Vec<u64>, m: u64, loss: f64) -> GenBoundInput {
        GenBoundInput {
            k_per_layer: k,
            m,
            margin_loss: loss,
            r: 256,
            constant_c: 1.0,
        }
    }

    #[test]
    fn simple_bound_examples() {
        let b = simple_generalization_bound(input(vec![60, 40], 1_000_000, 0.05)).unwrap();
        assert_eq!(b.q, 100);
        assert!((b.total - 0.073_548).abs() < 1e-5, "{}", b.total);
        let z = simple_generalization_bound(input(vec![0, 0], 10, 0.3)).unwrap();
        assert_eq!(z.total, 0.3);
        let mut bad = input(vec![1], 10, 0.1);
        bad.r = 1;
        assert!(matches!(simple_generalization_bound(bad), Err(Error::Domain(_))));
        assert!(simple_generalization_bound(input(vec![1], 0, 0.1)).is_err());
    }

    #[test]
    fn complexity_scaling() {
        let a = simple_generalization_bound(input(vec![50], 1000, 0.0)).unwrap().complexity;
        let m2 = simple_generalization_bound(input(vec![50], 2000, 0.0)).unwrap().complexity;
        let q2 = simple_generalization_bound(input(vec![50, 50], 1000, 0.0)).unwrap().complexity;
        assert!((m2 / a - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((q2 / a - 2f64.sqrt()).abs() < 1e-12);
    }

    fn cushions(mu: Vec<f64>, c: f64, f_max: f64) -> CushionSet {
        CushionSet {
            depth_d: mu.len(),
            mu_min_interlayer: vec![1.0; mu.len()],
            mu_per_layer: mu,
            contraction_c: c,
            smoothness_rho: None,
            f_max,
        }
    }

    #[test]
    fn kappa_examples() {
        let e2 = std::f64::consts::E.powi(2);
        assert!((covering_kappa(&cushions(vec![1.0], 1.0, 1.0)).unwrap() - e2).abs() < 1e-12);
        assert!((e2 - 7.389_056).abs() < 1e-6);
        let full = covering_kappa(&cushions(vec![0.4, 0.3, 0.2], 1.5, 3.0)).unwrap();
        let half = covering_kappa(&cushions(vec![0.4, 0.15, 0.2], 1.5, 3.0)).unwrap();
        assert!((half / full - 2.0).abs() < 1e-12);
        assert!(matches!(
            covering_kappa(&cushions(vec![0.4, 0.0], 1.0, 1.0)),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn dudley_small_upper_limit() {
        // The first-order approximation is off by about 1 / (2 ln(2 kappa / D)),
        // so the log ratio has to be large for 1%.
        let (kappa, d) = (1e15, 1e-12);
        let r = dudley_integral(1.0, kappa, d).unwrap();
        let approx = d * (2.0 * kappa / d).ln().sqrt();
        assert!((r.value / approx - 1.0).abs() < 0.01, "{} vs {approx}", r.value);
    }

    #[test]
    fn dudley_monotone_in_upper_limit() {
        let mut prev = 0.0;
        for k in 1..50 {
            let v = dudley_integral(10.0, 5.0, 0.5 * k as f64).unwrap().value;
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn dudley_domain() {
        assert!(dudley_integral(1.0, 1.0, 2.0).is_err());
        assert!(dudley_integral(0.5, 1.0, 0.1).is_err());
        assert!(dudley_integral(1.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn closed_form_agrees_with_quadrature() {
        let r = dudley_integral(20.0, 3.0, 4.0).unwrap();
        assert!(r.closed_form_rel_diff < 1e-9, "{:?}", r);
    }
}
