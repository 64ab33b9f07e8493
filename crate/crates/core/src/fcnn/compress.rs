use serde::{Deserialize, Serialize};

use super::{CushionReport, Network};
use crate::bounds::{variance_budget, ConcentrationParams, VarianceMode};
use crate::error::{Error, Result};
use crate::matrix::{gaussian_substitute, split_by_threshold, SplitMode, Substitution};
use crate::powerlaw::magnitude_std;
use crate::rng::derive_seed;

/// How a layer threshold is picked in theory mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule", content = "value")]
pub enum TauRule {
    /// Nearest-rank quantile of `|W|`. If it exceeds the largest feasible
    /// threshold it is lowered to that value and a warning is logged.
    Quantile(f64),
    /// Used as given; an infeasible value is an error.
    Fixed(f64),
    /// `tau^2` takes this fraction of the variance budget and `t` the rest.
    BudgetFraction(f64),
}

impl Default for TauRule {
    fn default() -> Self {
        TauRule::Quantile(0.95)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerTarget {
    /// 1-based layer index.
    pub layer: usize,
    pub epsilon: f64,
    pub eta: f64,
    #[serde(default)]
    pub tau: TauRule,
    /// Explicit Gaussian variance. When absent, `t` is solved from the budget.
    #[serde(default)]
    pub t: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CompressionMode {
    Theory,
    StdDev,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum CompressionConfig {
    /// Split at `tau_i`, replace the bulk with `sqrt(t_i) G`.
    Theory {
        #[serde(default)]
        variance: VarianceMode,
        targets: Vec<LayerTarget>,
    },
    /// Split at the standard deviation of `|W^i|` and redraw the bulk from a
    /// normal with the replaced entries' mean and standard deviation.
    StdDev { layers: Vec<usize> },
}

impl CompressionConfig {
    /// Theory mode on every layer with the same `(epsilon, eta)` and the default threshold rule.
    pub fn theory_uniform(net: &Network, epsilon: f64, eta: f64) -> Self {
        Self::Theory {
            variance: VarianceMode::Conservative,
            targets: (1..=net.depth())
                .map(|layer| LayerTarget {
                    layer,
                    epsilon,
                    eta,
                    tau: TauRule::default(),
                    t: None,
                })
                .collect(),
        }
    }

    pub fn stddev_final(net: &Network) -> Self {
        Self::StdDev {
            layers: vec![net.depth()],
        }
    }

    pub fn mode(&self) -> CompressionMode {
        match self {
            Self::Theory { .. } => CompressionMode::Theory,
            Self::StdDev { .. } => CompressionMode::StdDev,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerCompression {
    pub layer: usize,
    pub epsilon: Option<f64>,
    pub eta: Option<f64>,
    pub tau: f64,
    pub t: f64,
    /// Mean of the substituted noise (nonzero only in stddev mode).
    pub mean: f64,
    /// `2 / (tau^2 + t)`.
    pub lambda: f64,
    /// `2 ln(3 / eta) / epsilon^2`; equals `lambda` when the budget is the
    /// uncorrected one and `t` is solved.
    pub lambda_from_error: Option<f64>,
    pub k: u64,
    pub replaced: usize,
    pub tau_reduced: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressionResult {
    pub compressed: Network,
    pub mode: CompressionMode,
    /// Parameter count per layer: the spike count for compressed layers and
    /// the full size for layers left alone.
    pub k_per_layer: Vec<u64>,
    pub layers: Vec<LayerCompression>,
}

impl CompressionResult {
    pub fn total_k(&self) -> u64 {
        self.k_per_layer.iter().sum()
    }
}

fn quantile_abs(values: &[f64], q: f64) -> f64 {
    let mut mags: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    mags.sort_by(f64::total_cmp);
    let rank = (q * mags.len() as f64).ceil() as usize;
    mags[rank.clamp(1, mags.len()) - 1]
}

fn check_layer(net: &Network, layer: usize, seen: &mut [bool]) -> Result<()> {
    if layer == 0 || layer > net.depth() {
        return Err(Error::Index(format!("layer {layer} outside 1..={}", net.depth())));
    }
    if std::mem::replace(&mut seen[layer - 1], true) {
        return Err(Error::Domain(format!("layer {layer} is listed twice")));
    }
    Ok(())
}

fn theory_threshold(w_values: &[f64], target: &LayerTarget, variance: VarianceMode) -> Result<(f64, f64, bool)> {
    let layer = target.layer;
    let budget = variance_budget(target.epsilon, target.eta, variance)?;
    let max_tau = budget.sqrt();
    let (tau, reduced) = match target.tau {
        TauRule::Quantile(q) => {
            if !(q > 0.0 && q <= 1.0) {
                return Err(Error::Domain(format!("layer {layer}: quantile must lie in (0, 1], got {q}")));
            }
            let tau = quantile_abs(w_values, q);
            if tau > max_tau {
                log::warn!("layer {layer}: quantile threshold {tau} is infeasible, lowered to {max_tau}");
                (max_tau, true)
            } else {
                (tau, false)
            }
        }
        TauRule::Fixed(tau) => (tau, false),
        TauRule::BudgetFraction(f) => {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::Domain(format!("layer {layer}: budget fraction must lie in (0, 1], got {f}")));
            }
            ((f * budget).sqrt(), false)
        }
    };
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Degenerate(format!("layer {layer}: threshold {tau} is not positive")));
    }
    if tau > max_tau {
        return Err(Error::InfeasibleThreshold {
            layer: Some(layer),
            tau,
            max_tau,
        });
    }
    let t = match target.t {
        Some(t) => {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::Domain(format!("layer {layer}: variance t must be nonnegative, got {t}")));
            }
            if tau * tau + t > budget * (1.0 + 1e-12) {
                return Err(Error::Validity(format!(
                    "layer {layer}: tau^2 + t = {} exceeds the budget {budget}",
                    tau * tau + t
                )));
            }
            t
        }
        None if reduced => 0.0,
        None if matches!(target.tau, TauRule::BudgetFraction(f) if f == 1.0) => 0.0,
        None => (budget - tau * tau).max(0.0),
    };
    Ok((tau, t, reduced))
}

/// Compress the selected layers of `net`. Each layer draws its noise from a
/// seed derived from `seed` and its index, so results are reproducible and
/// independent of which other layers are compressed.
pub fn compress_network(net: &Network, config: &CompressionConfig, seed: u64) -> Result<CompressionResult> {
    let mut compressed = net.clone();
    let mut k_per_layer: Vec<u64> = net.weights().iter().map(|w| w.len() as u64).collect();
    let mut records = Vec::new();
    let mut seen = vec![false; net.depth()];
    match config {
        CompressionConfig::Theory { variance, targets } => {
            for target in targets {
                check_layer(net, target.layer, &mut seen)?;
                let w = net.layer(target.layer);
                let (tau, t, tau_reduced) = theory_threshold(w.values(), target, *variance)?;
                let layer_seed = derive_seed(seed, target.layer as u64);
                let split = split_by_threshold(w, tau, SplitMode::SignedAbsolute)?;
                let sub = gaussian_substitute(&split, Substitution::Theory { t }, layer_seed)?;
                let params = ConcentrationParams::with_t(target.epsilon, target.eta, tau, t, *variance);
                k_per_layer[target.layer - 1] = sub.k() as u64;
                records.push(LayerCompression {
                    layer: target.layer,
                    epsilon: Some(target.epsilon),
                    eta: Some(target.eta),
                    tau,
                    t,
                    mean: 0.0,
                    lambda: params.lambda,
                    lambda_from_error: Some(params.lambda_from_error()),
                    k: sub.k() as u64,
                    replaced: sub.replaced,
                    tau_reduced,
                    seed: layer_seed,
                });
                compressed = compressed.with_layer(target.layer, sub.realized)?;
            }
        }
        CompressionConfig::StdDev { layers } => {
            for &layer in layers {
                check_layer(net, layer, &mut seen)?;
                let w = net.layer(layer);
                let tau = magnitude_std(w.values());
                if !(tau > 0.0) {
                    return Err(Error::Degenerate(format!(
                        "layer {layer}: all magnitudes are equal, so the standard-deviation threshold is zero"
                    )));
                }
                let layer_seed = derive_seed(seed, layer as u64);
                let split = split_by_threshold(w, tau, SplitMode::SignedAbsolute)?;
                let sub = gaussian_substitute(&split, Substitution::MomentMatched, layer_seed)?;
                k_per_layer[layer - 1] = sub.k() as u64;
                records.push(LayerCompression {
                    layer,
                    epsilon: None,
                    eta: None,
                    tau,
                    t: sub.t,
                    mean: sub.mean,
                    lambda: 2.0 / (tau * tau + sub.t),
                    lambda_from_error: None,
                    k: sub.k() as u64,
                    replaced: sub.replaced,
                    tau_reduced: false,
                    seed: layer_seed,
                });
                compressed = compressed.with_layer(layer, sub.realized)?;
            }
        }
    }
    Ok(CompressionResult {
        compressed,
        mode: config.mode(),
        k_per_layer,
        layers: records,
    })
}

/// Per-layer `(epsilon_i, eta_i)` that make the layerwise errors add up to a
/// relative output error of `epsilon` with probability `1 - delta / 2`:
/// `epsilon_i = epsilon mu_i mu_{i->} / (6 c d)` and
/// `eta_i = delta / (2 d^2 m h)` with `h` the widest layer and `m` the sample count.
pub fn layer_error_budget(report: &CushionReport, widest: usize, m: usize, epsilon: f64, delta: f64) -> Result<Vec<(f64, f64)>> {
    if !(epsilon > 0.0) || !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!(
            "need epsilon > 0 and delta in (0, 1), got ({epsilon}, {delta})"
        )));
    }
    if widest == 0 || m == 0 {
        return Err(Error::Domain("width and sample count must be positive".into()));
    }
    let d = report.depth() as f64;
    let c = report.contraction_c;
    let eta = delta / (2.0 * d * d * m as f64 * widest as f64);
    Ok(report
        .mu_per_layer
        .iter()
        .zip(&report.mu_min_interlayer)
        .map(|(mu, mu_to)| (epsilon * mu * mu_to / (6.0 * c * d), eta))
        .collect())
}
