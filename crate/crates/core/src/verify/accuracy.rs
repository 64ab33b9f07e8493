use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fcnn::{compress_network, CompressionConfig, Dataset, Network};
use crate::powerlaw::{fit_alpha_mle, wmin_from_stddev};
use crate::rng::derive_seed;

/// One row of the accuracy-under-compression table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub model_name: String,
    pub dataset_name: String,
    /// Tail exponent of the final layer's magnitudes above their standard
    /// deviation; `None` when the fit is not defined.
    pub alpha_fit: Option<f64>,
    pub original_accuracy: f64,
    pub compressed_mean: f64,
    /// Sample standard deviation over trials.
    pub compressed_std: f64,
    pub trials: usize,
    pub compressed_accuracies: Vec<f64>,
    pub mean_spikes: f64,
}

/// Compress `net` `trials` times with seeds derived from `seed` and record
/// the accuracy on `eval` before and after.
pub fn accuracy_experiment(
    model_name: &str,
    dataset_name: &str,
    net: &Network,
    eval: &Dataset,
    config: &CompressionConfig,
    trials: usize,
    seed: u64,
) -> Result<AccuracyRow> {
    if eval.is_empty() {
        return Err(Error::Data("accuracy experiment needs a nonempty evaluation set".into()));
    }
    if trials == 0 {
        return Err(Error::Domain("need at least one trial".into()));
    }
    let original = net.accuracy(eval)?;
    let runs: Vec<(f64, u64)> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let result = compress_network(net, config, derive_seed(seed, trial as u64))?;
            Ok((result.compressed.accuracy(eval)?, result.total_k()))
        })
        .collect::<Result<_>>()?;
    let accs: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let n = trials as f64;
    // Centered on the first value so identical trials give that value exactly.
    let mean = accs[0] + accs.iter().map(|a| a - accs[0]).sum::<f64>() / n;
    let std = if trials > 1 {
        (accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let last = net.layer(net.depth()).values();
    let alpha_fit = wmin_from_stddev(last)
        .and_then(|w_min| fit_alpha_mle(last, w_min))
        .map(|f| f.alpha_hat)
        .ok();
    Ok(AccuracyRow {
        model_name: model_name.to_string(),
        dataset_name: dataset_name.to_string(),
        alpha_fit,
        original_accuracy: original,
        compressed_mean: mean,
        compressed_std: std,
        trials,
        compressed_accuracies: accs,
        mean_spikes: runs.iter().map(|r| r.1 as f64).sum::<f64>() / n,
    })
}

/// CSV with columns `Architecture, Dataset, alpha_fit, Original Accuracy,
/// Compressed Accuracy` where the last is `mean ± std` in percent.
pub fn write_accuracy_table<W: Write>(rows: &[AccuracyRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["Architecture", "Dataset", "alpha_fit", "Original Accuracy", "Compressed Accuracy"])?;
    for r in rows {
        w.write_record([
            r.model_name.clone(),
            r.dataset_name.clone(),
            r.alpha_fit.map_or_else(String::new, |a| format!("{a:.4}")),
            format!("{:.2}", 100.0 * r.original_accuracy),
            format!("{:.2} ± {:.2}", 100.0 * r.compressed_mean, 100.0 * r.compressed_std),
        ])?;
    }
    w.flush().map_err(|e| Error::Data(format!("cannot write table: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::VarianceMode;
    use crate::fcnn::{GaussianBlobs, LayerTarget, TauRule};

    fn setup() -> (Network, Dataset) {
        let data = GaussianBlobs::new(4, 3, 0.5, 3.0, 1).sample(90, 2);
        (Network::init_uniform(&[4, 8, 3], 0).unwrap(), data)
    }

    #[test]
    fn identity_compression_has_zero_spread() {
        let (net, data) = setup();
        let cfg = CompressionConfig::Theory {
            variance: VarianceMode::Conservative,
            targets: vec![LayerTarget {
                layer: 2,
                epsilon: 1.0,
                eta: 0.1,
                tau: TauRule::Fixed(1e-12),
                t: Some(0.0),
            }],
        };
        let row = accuracy_experiment("toy", "blobs", &net, &data, &cfg, 10, 0).unwrap();
        assert_eq!(row.compressed_mean, row.original_accuracy);
        assert_eq!(row.compressed_std, 0.0);
        assert_eq!(row.trials, 10);
    }

    #[test]
    fn stddev_rows_and_table() {
        let (net, data) = setup();
        let row = accuracy_experiment("toy", "blobs", &net, &data, &CompressionConfig::stddev_final(&net), 10, 3).unwrap();
        assert!(row.compressed_std >= 0.0);
        assert_eq!(row.compressed_accuracies.len(), 10);
        let mut buf = Vec::new();
        write_accuracy_table(&[row], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("Architecture,Dataset,alpha_fit,Original Accuracy,Compressed Accuracy\n"));
        assert!(text.lines().nth(1).unwrap().starts_with("toy,blobs,"));
        let empty = Dataset::new(vec![], vec![], 3).unwrap();
        assert!(accuracy_experiment("toy", "blobs", &net, &empty, &CompressionConfig::stddev_final(&net), 10, 3).is_err());
    }
}
