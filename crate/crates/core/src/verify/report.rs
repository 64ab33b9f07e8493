use serde::{Deserialize, Serialize};

use crate::bounds::{
    covering_kappa, dudley_integral, simple_generalization_bound, DudleyResult, GenBound, GenBoundInput,
    DEFAULT_CONSTANT_C, DEFAULT_QUANTIZATION_LEVELS,
};
use crate::error::{Error, Result};
use crate::fcnn::{
    compress_network, measure_cushions, CompressionConfig, CompressionResult, CushionOptions, CushionReport, Dataset,
    Network,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportOptions {
    pub gammas: Vec<f64>,
    pub compression: CompressionConfig,
    pub seed: u64,
    pub quantization_levels: u64,
    pub constant_c: f64,
    /// Upper limit `D` of the entropy integral.
    pub dudley_upper: f64,
    pub cushions: CushionOptions,
}

impl ReportOptions {
    pub fn new(compression: CompressionConfig, gammas: Vec<f64>) -> Self {
        Self {
            gammas,
            compression,
            seed: 0,
            quantization_levels: DEFAULT_QUANTIZATION_LEVELS,
            constant_c: DEFAULT_CONSTANT_C,
            dudley_upper: 1.0,
            cushions: CushionOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginRow {
    pub gamma: f64,
    /// `L_gamma` of the original network on the training set.
    pub margin_loss: f64,
    /// Classification loss of the compressed network on the training set.
    pub compressed_loss: f64,
    pub bound: GenBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub options: ReportOptions,
    pub samples: usize,
    pub parameter_count: usize,
    pub cushions: CushionReport,
    pub compression: CompressionResult,
    pub q: u64,
    pub margins: Vec<MarginRow>,
    pub kappa: f64,
    pub dudley: DudleyResult,
}

impl BoundReport {
    /// Rows whose margin loss is at most `max_loss`.
    pub fn rows_with_loss_at_most(&self, max_loss: f64) -> impl Iterator<Item = &MarginRow> {
        self.margins.iter().filter(move |r| r.margin_loss <= max_loss)
    }
}

/// Measure cushions, compress, and evaluate the generalization bound on a
/// grid of margins.
pub fn end_to_end_bound_report(net: &Network, train: &Dataset, opts: &ReportOptions) -> Result<BoundReport> {
    if opts.gammas.is_empty() {
        return Err(Error::EmptyRequest("margin grid"));
    }
    if train.is_empty() {
        return Err(Error::Data("bound report needs a nonempty training set".into()));
    }
    let cushions = measure_cushions(net, train, &opts.cushions)?;
    let compression = compress_network(net, &opts.compression, opts.seed)?;
    let compressed_loss = compression.compressed.empirical_margin_loss(train, 0.0)?;
    let m = train.len() as u64;
    let margins = opts
        .gammas
        .iter()
        .map(|&gamma| {
            let margin_loss = net.empirical_margin_loss(train, gamma)?;
            let bound = simple_generalization_bound(GenBoundInput {
                k_per_layer: compression.k_per_layer.clone(),
                m,
                margin_loss,
                r: opts.quantization_levels,
                constant_c: opts.constant_c,
            })?;
            Ok(MarginRow {
                gamma,
                margin_loss,
                compressed_loss,
                bound,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let q = compression.total_k();
    let kappa = covering_kappa(&cushions.to_cushion_set())?;
    let dudley = dudley_integral(q as f64, kappa, opts.dudley_upper)?;
    Ok(BoundReport {
        options: opts.clone(),
        samples: train.len(),
        parameter_count: net.parameter_count(),
        cushions,
        compression,
        q,
        margins,
        kappa,
        dudley,
    })
}
