use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{relu, Dataset, LayerTrace, Network};
use crate::bounds::CushionSet;
use crate::error::{Error, Result};
use crate::matrix::{norm2, DenseMatrix};
use crate::rng::{derive_seed, rng_from_seed};

/// A report is flagged unreliable when more than this fraction of samples had
/// to be excluded from some cushion minimum.
pub const UNRELIABLE_SKIP_FRACTION: f64 = 0.1;

/// A minimum over samples together with how many samples were excluded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CushionMeasure {
    pub value: f64,
    pub evaluated: usize,
    pub skipped: usize,
}

impl CushionMeasure {
    pub fn unreliable(&self) -> bool {
        self.skipped as f64 > UNRELIABLE_SKIP_FRACTION * (self.evaluated + self.skipped) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractionMeasure {
    pub value: f64,
    pub evaluated: usize,
    /// Nonzero `x^i` whose ReLU image is zero, which would make the ratio infinite.
    pub degenerate: usize,
    /// Exactly zero `x^i`.
    pub skipped: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessReport {
    /// `None` when every noise draw left the Jacobian prediction exact, so no
    /// finite `rho` is constrained.
    pub rho_hat: Option<f64>,
    /// The activation is ReLU, so the bound uses exact Jacobians and does not
    /// depend on `rho`.
    pub exact_relu: bool,
    pub relative_noise: f64,
    pub draws: usize,
    pub delta: f64,
    pub cases: usize,
    pub exact_draws: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessOptions {
    pub relative_noise: f64,
    pub draws: usize,
    pub delta: f64,
    pub seed: u64,
}

impl Default for SmoothnessOptions {
    fn default() -> Self {
        Self {
            relative_noise: 0.01,
            draws: 20,
            delta: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CushionOptions {
    pub smoothness: Option<SmoothnessOptions>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CushionReport {
    pub mu_per_layer: Vec<f64>,
    pub layer_measures: Vec<CushionMeasure>,
    /// `mu_interlayer[i-1][j-1]` holds `mu_ij` for `i <= j`.
    pub mu_interlayer: Vec<Vec<Option<f64>>>,
    pub mu_min_interlayer: Vec<f64>,
    pub contraction: ContractionMeasure,
    pub contraction_c: f64,
    pub smoothness: Option<SmoothnessReport>,
    pub f_max: f64,
    pub samples: usize,
    pub unreliable: bool,
    pub exact_relu: bool,
}

impl CushionReport {
    pub fn depth(&self) -> usize {
        self.mu_per_layer.len()
    }

    pub fn to_cushion_set(&self) -> CushionSet {
        CushionSet {
            mu_per_layer: self.mu_per_layer.clone(),
            mu_min_interlayer: self.mu_min_interlayer.clone(),
            contraction_c: self.contraction_c,
            smoothness_rho: if self.exact_relu {
                None
            } else {
                self.smoothness.and_then(|s| s.rho_hat)
            },
            depth_d: self.depth(),
            f_max: self.f_max,
        }
    }
}

fn check_layer(net: &Network, i: usize) -> Result<()> {
    if i == 0 || i > net.depth() {
        return Err(Error::Index(format!("layer {i} outside 1..={}", net.depth())));
    }
    Ok(())
}

fn check_pair(net: &Network, i: usize, j: usize) -> Result<()> {
    check_layer(net, i)?;
    check_layer(net, j)?;
    if i > j {
        return Err(Error::Index(format!("interlayer pair ({i}, {j}) needs i <= j")));
    }
    Ok(())
}

fn mask(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| if v > 0.0 { 1.0 } else { 0.0 }).collect()
}

/// `J^{ij} = W^j D^{j-1} W^{j-1} ... W^{i+1} D^i`, with `D^k` the ReLU mask
/// at `x^k`. For `i = j` this is the identity.
pub fn interlayer_jacobian(net: &Network, trace: &LayerTrace, i: usize, j: usize) -> Result<DenseMatrix> {
    check_pair(net, i, j)?;
    if i == j {
        return Ok(DenseMatrix::identity(net.layer(i).rows()));
    }
    let mut jac = net.layer(i + 1).scale_columns(&mask(trace.x(i)))?;
    for k in i + 2..=j {
        jac = net.layer(k).scale_columns(&mask(trace.x(k - 1)))?.matmul(&jac)?;
    }
    Ok(jac)
}

/// `J^{ij} v`, applied layer by layer without forming the matrix.
pub fn jacobian_apply(net: &Network, trace: &LayerTrace, i: usize, j: usize, v: &[f64]) -> Result<Vec<f64>> {
    check_pair(net, i, j)?;
    if v.len() != net.layer(i).rows() {
        return Err(Error::Shape(format!(
            "vector of length {} applied to a Jacobian from layer {i} of width {}",
            v.len(),
            net.layer(i).rows()
        )));
    }
    let mut z = v.to_vec();
    for k in i + 1..=j {
        let masked: Vec<f64> = z
            .iter()
            .zip(trace.x(k - 1))
            .map(|(&a, &x)| if x > 0.0 { a } else { 0.0 })
            .collect();
        z = net.layer(k).matvec_unchecked(&masked);
    }
    Ok(z)
}

/// The sub-network `M^{ij}` from `x^i` to `x^j`.
fn subnetwork(net: &Network, i: usize, j: usize, x: &[f64]) -> Vec<f64> {
    let mut z = x.to_vec();
    for k in i + 1..=j {
        let a: Vec<f64> = z.iter().map(|&v| relu(v)).collect();
        z = net.layer(k).matvec_unchecked(&a);
    }
    z
}

fn traces(net: &Network, data: &Dataset) -> Result<Vec<LayerTrace>> {
    if data.is_empty() {
        return Err(Error::Data("cushions need a nonempty dataset".into()));
    }
    data.inputs()
        .par_iter()
        .map(|x| net.forward(x).map(|(_, t)| t))
        .collect()
}

fn min_of(ratios: impl Iterator<Item = Option<f64>>, what: impl FnOnce() -> String) -> Result<CushionMeasure> {
    let mut value = f64::INFINITY;
    let (mut evaluated, mut skipped) = (0, 0);
    for r in ratios {
        match r {
            Some(r) => {
                evaluated += 1;
                value = value.min(r);
            }
            None => skipped += 1,
        }
    }
    if evaluated == 0 {
        return Err(Error::Degenerate(format!("{} is undefined: every sample was excluded", what())));
    }
    Ok(CushionMeasure {
        value,
        evaluated,
        skipped,
    })
}

fn layer_cushion_on(net: &Network, traces: &[LayerTrace], i: usize) -> Result<CushionMeasure> {
    check_layer(net, i)?;
    let w = net.layer(i);
    let wf = w.frobenius_norm();
    if wf == 0.0 {
        return Err(Error::Degenerate(format!("layer {i} has an all-zero weight matrix")));
    }
    let ratios: Vec<Option<f64>> = traces
        .par_iter()
        .map(|t| {
            let a = t.layer_input(i);
            let an = norm2(&a);
            (an > 0.0).then(|| norm2(&w.matvec_unchecked(&a)) / (wf * an))
        })
        .collect();
    min_of(ratios.into_iter(), || format!("layer cushion mu_{i}"))
}

fn interlayer_cushion_on(net: &Network, traces: &[LayerTrace], i: usize, j: usize) -> Result<CushionMeasure> {
    check_pair(net, i, j)?;
    let exact = (i == j).then(|| 1.0 / (net.layer(i).rows() as f64).sqrt());
    let ratios: Vec<Option<f64>> = traces
        .par_iter()
        .map(|t| {
            let xi = t.x(i);
            let xn = norm2(xi);
            if xn == 0.0 {
                return Ok(None);
            }
            if let Some(v) = exact {
                return Ok(Some(v));
            }
            let jac = interlayer_jacobian(net, t, i, j)?;
            let jf = jac.frobenius_norm();
            Ok((jf > 0.0).then(|| norm2(&jac.matvec_unchecked(xi)) / (jf * xn)))
        })
        .collect::<Result<_>>()?;
    min_of(ratios.into_iter(), || format!("interlayer cushion mu_{i},{j}"))
}

/// `mu_i = min_x ||W^i a|| / (||W^i||_F ||a||)` where `a` is the input to
/// layer `i` (the raw input for the first layer). Samples with `a = 0` are
/// skipped.
pub fn layer_cushion(net: &Network, data: &Dataset, i: usize) -> Result<CushionMeasure> {
    check_layer(net, i)?;
    layer_cushion_on(net, &traces(net, data)?, i)
}

/// `mu_ij = min_x ||J^{ij} x^i|| / (||J^{ij}||_F ||x^i||)`.
pub fn interlayer_cushion(net: &Network, data: &Dataset, i: usize, j: usize) -> Result<CushionMeasure> {
    check_pair(net, i, j)?;
    interlayer_cushion_on(net, &traces(net, data)?, i, j)
}

/// `mu_{i->} = min(1 / sqrt(h_i), min_{j > i} mu_ij)`.
pub fn minimal_interlayer_cushion(net: &Network, data: &Dataset, i: usize) -> Result<f64> {
    check_layer(net, i)?;
    let t = traces(net, data)?;
    minimal_on(net, &t, i).map(|(v, _)| v)
}

fn minimal_on(net: &Network, traces: &[LayerTrace], i: usize) -> Result<(f64, Vec<CushionMeasure>)> {
    let mut value = 1.0 / (net.layer(i).rows() as f64).sqrt();
    let mut measures = Vec::new();
    for j in i + 1..=net.depth() {
        let m = interlayer_cushion_on(net, traces, i, j)?;
        value = value.min(m.value);
        measures.push(m);
    }
    Ok((value, measures))
}

fn contraction_on(net: &Network, traces: &[LayerTrace]) -> ContractionMeasure {
    let mut out = ContractionMeasure {
        value: 1.0,
        evaluated: 0,
        degenerate: 0,
        skipped: 0,
    };
    for t in traces {
        for i in 1..net.depth() {
            let x = t.x(i);
            let xn = norm2(x);
            let an = x.iter().map(|&v| relu(v) * relu(v)).sum::<f64>().sqrt();
            if xn == 0.0 {
                out.skipped += 1;
            } else if an == 0.0 {
                out.degenerate += 1;
            } else {
                out.evaluated += 1;
                out.value = out.value.max(xn / an);
            }
        }
    }
    out
}

/// `c = max ||x^i|| / ||relu(x^i)||` over hidden layers and samples.
/// Layers whose pre-activation is nonzero but entirely nonpositive are
/// counted as degenerate rather than producing an infinite ratio.
pub fn activation_contraction(net: &Network, data: &Dataset) -> Result<ContractionMeasure> {
    Ok(contraction_on(net, &traces(net, data)?))
}

fn smoothness_on(net: &Network, traces: &[LayerTrace], opts: &SmoothnessOptions) -> Result<SmoothnessReport> {
    if !(opts.relative_noise > 0.0 && opts.relative_noise.is_finite()) {
        return Err(Error::Domain(format!(
            "relative noise must be positive, got {}",
            opts.relative_noise
        )));
    }
    if opts.draws == 0 {
        return Err(Error::Domain("smoothness needs at least one draw".into()));
    }
    if !(opts.delta >= 0.0 && opts.delta < 1.0) {
        return Err(Error::Domain(format!("delta must lie in [0, 1), got {}", opts.delta)));
    }
    let d = net.depth();
    let pairs: Vec<(usize, usize)> = (1..=d).flat_map(|i| (i + 1..=d).map(move |j| (i, j))).collect();
    let cut = ((opts.delta * opts.draws as f64).floor() as usize).min(opts.draws - 1);
    let per_sample: Vec<(f64, usize, usize)> = traces
        .par_iter()
        .enumerate()
        .map(|(s, t)| {
            let mut best = f64::INFINITY;
            let (mut cases, mut exact) = (0, 0);
            for (p, &(i, j)) in pairs.iter().enumerate() {
                let xi = t.x(i);
                let xin = norm2(xi);
                if xin == 0.0 {
                    continue;
                }
                let xjn = norm2(t.x(j));
                let mut rng = rng_from_seed(derive_seed(derive_seed(opts.seed, s as u64), p as u64));
                let mut rhos = Vec::with_capacity(opts.draws);
                for _ in 0..opts.draws {
                    let g: Vec<f64> = (0..xi.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
                    let scale = opts.relative_noise * xin / norm2(&g);
                    let eta: Vec<f64> = g.iter().map(|v| v * scale).collect();
                    let z: Vec<f64> = xi.iter().zip(&eta).map(|(a, b)| a + b).collect();
                    let lin = jacobian_apply(net, t, i, j, &z)?;
                    let actual = subnetwork(net, i, j, &z);
                    let num = norm2(&actual.iter().zip(&lin).map(|(a, b)| a - b).collect::<Vec<_>>());
                    if num == 0.0 {
                        exact += 1;
                        rhos.push(f64::INFINITY);
                    } else {
                        rhos.push(norm2(&eta) * xjn / (xin * num));
                    }
                }
                rhos.sort_by(f64::total_cmp);
                best = best.min(rhos[cut]);
                cases += 1;
            }
            Ok((best, cases, exact))
        })
        .collect::<Result<_>>()?;
    let rho = per_sample.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    Ok(SmoothnessReport {
        rho_hat: rho.is_finite().then_some(rho),
        exact_relu: true,
        relative_noise: opts.relative_noise,
        draws: opts.draws,
        delta: opts.delta,
        cases: per_sample.iter().map(|r| r.1).sum(),
        exact_draws: per_sample.iter().map(|r| r.2).sum(),
    })
}

/// Sampled estimate of the interlayer smoothness `rho_delta`.
///
/// For every pair `i < j`, sample and draw, isotropic Gaussian noise `eta`
/// with `||eta|| = relative_noise * ||x^i||` is pushed through the
/// sub-network and through the Jacobian at `x^i`. Each draw yields the
/// largest `rho` with `||M(x^i + eta) - J(x^i + eta)|| <= ||eta|| ||x^j|| /
/// (rho ||x^i||)`; the per-case estimate keeps the value met by a `1 - delta`
/// fraction of draws, and the result is the minimum over cases.
pub fn interlayer_smoothness(net: &Network, data: &Dataset, opts: &SmoothnessOptions) -> Result<SmoothnessReport> {
    smoothness_on(net, &traces(net, data)?, opts)
}

pub fn measure_cushions(net: &Network, data: &Dataset, opts: &CushionOptions) -> Result<CushionReport> {
    let traces = traces(net, data)?;
    let d = net.depth();
    let mut mu = Vec::with_capacity(d);
    let mut layer_measures = Vec::with_capacity(d);
    let mut unreliable = false;
    for i in 1..=d {
        let m = layer_cushion_on(net, &traces, i)?;
        unreliable |= m.unreliable();
        mu.push(m.value);
        layer_measures.push(m);
    }
    let mut inter = vec![vec![None; d]; d];
    let mut mu_min = Vec::with_capacity(d);
    for i in 1..=d {
        let diag = interlayer_cushion_on(net, &traces, i, i)?;
        unreliable |= diag.unreliable();
        inter[i - 1][i - 1] = Some(diag.value);
        let (v, measures) = minimal_on(net, &traces, i)?;
        for (off, m) in measures.iter().enumerate() {
            unreliable |= m.unreliable();
            inter[i - 1][i + off] = Some(m.value);
        }
        mu_min.push(v);
    }
    let contraction = contraction_on(net, &traces);
    let total = contraction.evaluated + contraction.degenerate + contraction.skipped;
    unreliable |= (contraction.degenerate + contraction.skipped) as f64 > UNRELIABLE_SKIP_FRACTION * total as f64;
    let smoothness = opts.smoothness.as_ref().map(|o| smoothness_on(net, &traces, o)).transpose()?;
    let f_max = traces.iter().map(|t| norm2(t.output())).fold(0.0, f64::max);
    Ok(CushionReport {
        mu_per_layer: mu,
        layer_measures,
        mu_interlayer: inter,
        mu_min_interlayer: mu_min,
        contraction_c: contraction.value,
        contraction,
        smoothness,
        f_max,
        samples: traces.len(),
        unreliable,
        exact_relu: true,
    })
}
