use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{stable_rank, ArchiveLayer, DenseMatrix, Dtype, WeightArchive};
use crate::powerlaw::{fit_alpha_mle, sample_pareto, wmin_from_stddev, ParetoParams};

/// Lower cutoff used when fitting a layer's tail.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule", content = "value")]
pub enum WminRule {
    /// Population standard deviation of the magnitudes.
    #[default]
    StdDev,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub name: String,
    pub layer: String,
    pub alpha_fit: f64,
    pub n_tail: usize,
    pub stable_rank: f64,
}

/// Tail fit and stable rank of each archive's final layer.
pub fn stable_rank_alpha_sweep(archives: &[WeightArchive], rule: WminRule) -> Result<Vec<SweepRow>> {
    archives
        .iter()
        .map(|a| {
            let layer = a.final_layer()?;
            let values = layer.matrix.values();
            let w_min = match rule {
                WminRule::StdDev => wmin_from_stddev(values)?,
                WminRule::Fixed(w) => w,
            };
            let fit = fit_alpha_mle(values, w_min)?;
            Ok(SweepRow {
                name: a.name.clone(),
                layer: layer.name.clone(),
                alpha_fit: fit.alpha_hat,
                n_tail: fit.n_tail,
                stable_rank: stable_rank(&layer.matrix)?,
            })
        })
        .collect()
}

/// A one-layer archive whose entries are symmetric Pareto draws.
pub fn planted_pareto_archive(name: &str, alpha: f64, w_min: f64, rows: usize, cols: usize, seed: u64) -> Result<WeightArchive> {
    if rows == 0 || cols == 0 {
        return Err(Error::Shape("planted layer must be nonempty".into()));
    }
    let values = sample_pareto(ParetoParams::new(alpha, w_min)?, rows * cols, seed, true)?;
    Ok(WeightArchive {
        name: name.to_string(),
        layers: vec![ArchiveLayer {
            name: "final".into(),
            dtype: Dtype::F64,
            matrix: DenseMatrix::new(rows, cols, values)?,
        }],
    })
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["name", "layer", "alpha_fit", "n_tail", "stable_rank"])?;
    for r in rows {
        w.write_record([
            r.name.clone(),
            r.layer.clone(),
            format!("{:?}", r.alpha_fit),
            r.n_tail.to_string(),
            format!("{:?}", r.stable_rank),
        ])?;
    }
    w.flush().map_err(|e| Error::Data(format!("cannot write sweep table: {e}")))?;
    Ok(())
}
