use std::fs::File;
use std::path::{Path, PathBuf};

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Labelled samples. Labels are 0-based class indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    inputs: Vec<Vec<f64>>,
    labels: Vec<usize>,
    class_count: usize,
}

/// Contents of the JSON sidecar that accompanies a dataset CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetMeta {
    pub feature_dim: usize,
    pub class_count: usize,
}

impl Dataset {
    pub fn new(inputs: Vec<Vec<f64>>, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        if inputs.len() != labels.len() {
            return Err(Error::Data(format!(
                "{} inputs but {} labels",
                inputs.len(),
                labels.len()
            )));
        }
        if class_count == 0 {
            return Err(Error::Data("class_count must be positive".into()));
        }
        if let Some(first) = inputs.first() {
            let dim = first.len();
            for (i, x) in inputs.iter().enumerate() {
                if x.len() != dim {
                    return Err(Error::Data(format!("sample {i} has dimension {} instead of {dim}", x.len())));
                }
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Data(format!("sample {i} has a non-finite feature")));
                }
            }
        }
        if let Some((i, &y)) = labels.iter().enumerate().find(|(_, &y)| y >= class_count) {
            return Err(Error::Data(format!(
                "sample {i} has label {y}, outside 0..{class_count}"
            )));
        }
        Ok(Self {
            inputs,
            labels,
            class_count,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn feature_dim(&self) -> usize {
        self.inputs.first().map_or(0, Vec::len)
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], &usize)> {
        self.inputs.iter().map(Vec::as_slice).zip(&self.labels)
    }

    /// Append a constant coordinate equal to 1. A bias-free network on the
    /// augmented inputs can then learn a first-layer offset.
    pub fn with_bias_coordinate(&self) -> Self {
        Self {
            inputs: self
                .inputs
                .iter()
                .map(|x| {
                    let mut v = x.clone();
                    v.push(1.0);
                    v
                })
                .collect(),
            labels: self.labels.clone(),
            class_count: self.class_count,
        }
    }

    pub fn meta(&self) -> DatasetMeta {
        DatasetMeta {
            feature_dim: self.feature_dim(),
            class_count: self.class_count,
        }
    }
}

/// Isotropic Gaussian clusters, one per class, with centers drawn once from
/// `center_seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBlobs {
    centers: Vec<Vec<f64>>,
    spread: f64,
}

impl GaussianBlobs {
    /// Centers are standard normal vectors scaled by `center_scale`; each
    /// sample adds `spread` times a standard normal vector.
    pub fn new(dim: usize, classes: usize, spread: f64, center_scale: f64, center_seed: u64) -> Self {
        let mut rng = rng_from_seed(center_seed);
        let centers = (0..classes)
            .map(|_| {
                (0..dim)
                    .map(|_| {
                        let g: f64 = StandardNormal.sample(&mut rng);
                        center_scale * g
                    })
                    .collect()
            })
            .collect();
        Self { centers, spread }
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    /// `n` samples with labels cycling through the classes.
    pub fn sample(&self, n: usize, seed: u64) -> Dataset {
        let mut rng = rng_from_seed(seed);
        let k = self.centers.len();
        let mut inputs = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let y = i % k;
            let x = self.centers[y]
                .iter()
                .map(|&c| {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    c + self.spread * g
                })
                .collect();
            inputs.push(x);
            labels.push(y);
        }
        Dataset {
            inputs,
            labels,
            class_count: k,
        }
    }
}

fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

/// Read a headerless CSV of `features..., label` rows together with the
/// sidecar `<stem>.json` holding `{feature_dim, class_count}`.
pub fn read_dataset(csv_path: &Path) -> Result<Dataset> {
    let meta_path = sidecar_path(csv_path);
    let meta_file = File::open(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: DatasetMeta = serde_json::from_reader(meta_file)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(csv_path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::Data(format!("cannot open {}: {e}", csv_path.display())),
            _ => Error::Csv(e),
        })?;
    let mut inputs = Vec::new();
    let mut labels = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != meta.feature_dim + 1 {
            return Err(Error::Data(format!(
                "row {} has {} fields, expected {}",
                line + 1,
                record.len(),
                meta.feature_dim + 1
            )));
        }
        let mut x = Vec::with_capacity(meta.feature_dim);
        for field in record.iter().take(meta.feature_dim) {
            x.push(
                field
                    .parse::<f64>()
                    .map_err(|_| Error::Data(format!("row {}: cannot parse {field:?}", line + 1)))?,
            );
        }
        let label = &record[meta.feature_dim];
        let y = label
            .parse::<usize>()
            .map_err(|_| Error::Data(format!("row {}: label {label:?} is not a class index", line + 1)))?;
        inputs.push(x);
        labels.push(y);
    }
    Dataset::new(inputs, labels, meta.class_count)
}

pub fn write_dataset(csv_path: &Path, data: &Dataset) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(csv_path)
        .map_err(|e| Error::Data(format!("cannot create {}: {e}", csv_path.display())))?;
    for (x, y) in data.iter() {
        let mut row: Vec<String> = x.iter().map(|v| format!("{v:?}")).collect();
        row.push(y.to_string());
        writer.write_record(&row)?;
    }
    writer.flush().map_err(|e| Error::io(csv_path, e))?;
    let meta_path = sidecar_path(csv_path);
    let text = serde_json::to_string_pretty(&data.meta())?;
    std::fs::write(&meta_path, text).map_err(|e| Error::io(&meta_path, e))
}
