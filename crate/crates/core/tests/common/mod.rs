//! Reference computations written independently of the library code paths.

#![allow(dead_code)]

use htcompress::matrix::DenseMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

/// Singular values by one-sided Jacobi rotations, in descending order.
pub fn jacobi_singular_values(m: &DenseMatrix) -> Vec<f64> {
    let (rows, cols) = (m.rows(), m.cols());
    let mut a: Vec<Vec<f64>> = (0..cols).map(|c| (0..rows).map(|r| m.get(r, c)).collect()).collect();
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha: f64 = a[p].iter().map(|v| v * v).sum();
                let beta: f64 = a[q].iter().map(|v| v * v).sum();
                let gamma: f64 = a[p].iter().zip(&a[q]).map(|(x, y)| x * y).sum();
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for r in 0..rows {
                    let (x, y) = (a[p][r], a[q][r]);
                    a[p][r] = c * x - s * y;
                    a[q][r] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = a.iter().map(|col| col.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

fn binomial(n: u64, k: u64) -> BigInt {
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

/// `P(Binomial(n, num/den) >= k)` summed in exact rational arithmetic.
pub fn rational_binomial_tail(n: u64, num: i64, den: i64, k: u64) -> f64 {
    let p = BigRational::new(BigInt::from(num), BigInt::from(den));
    let q = BigRational::one() - p.clone();
    let mut total = BigRational::zero();
    for j in k..=n {
        let term = BigRational::from_integer(binomial(n, j)) * pow(&p, j) * pow(&q, n - j);
        total += term;
    }
    total.numer().to_f64().unwrap() / total.denom().to_f64().unwrap()
}

fn pow(x: &BigRational, e: u64) -> BigRational {
    let mut acc = BigRational::one();
    for _ in 0..e {
        acc *= x.clone();
    }
    acc
}

/// `int_0^D sqrt(q ln(2 q kappa / eps)) d eps` by the trapezoid rule after
/// substituting `eps = D u^2`, which removes the endpoint singularity.
pub fn trapezoid_dudley(q: f64, kappa: f64, upper: f64, points: usize) -> f64 {
    let a = 2.0 * q * kappa;
    let g = |u: f64| {
        if u == 0.0 {
            0.0
        } else {
            2.0 * upper * u * (q * (a / (upper * u * u)).ln()).sqrt()
        }
    };
    let h = 1.0 / (points - 1) as f64;
    let mut sum = 0.5 * (g(0.0) + g(1.0));
    for i in 1..points - 1 {
        sum += g(i as f64 * h);
    }
    sum * h
}

/// Straightforward relative output error `max_x ||f(x) - g(x)|| / ||f(x)||`
/// together with the per-sample absolute errors.
pub fn output_errors(
    f: &htcompress::fcnn::Network,
    g: &htcompress::fcnn::Network,
    data: &htcompress::fcnn::Dataset,
) -> (f64, Vec<f64>) {
    let mut worst: f64 = 0.0;
    let mut abs = Vec::with_capacity(data.len());
    for x in data.inputs() {
        let a = f.logits(x).unwrap();
        let b = g.logits(x).unwrap();
        let d = a.iter().zip(&b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
        let n = a.iter().map(|u| u * u).sum::<f64>().sqrt();
        worst = worst.max(d / n);
        abs.push(d);
    }
    (worst, abs)
}
