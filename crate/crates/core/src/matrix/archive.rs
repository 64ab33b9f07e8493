//! On-disk weight archives.
//!
//! An archive is a directory holding `manifest.json` and one raw binary file
//! per layer (row-major, little-endian, `f32` or `f64`). The same manifest is
//! produced by the checkpoint exporter; its JSON schema lives in
//! `schema/manifest.schema.json` at the root of this crate.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DenseMatrix;
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    pub fn width(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestLayer {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub dtype: Dtype,
    pub file: String,
    pub layout: String,
    pub endianness: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub name: String,
    pub layers: Vec<ManifestLayer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_checkpoint_hash: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArchiveLayer {
    pub name: String,
    pub dtype: Dtype,
    pub matrix: DenseMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightArchive {
    pub name: String,
    pub layers: Vec<ArchiveLayer>,
}

impl WeightArchive {
    /// The last layer listed in the manifest.
    pub fn final_layer(&self) -> Result<&ArchiveLayer> {
        self.layers
            .last()
            .ok_or_else(|| Error::Archive(format!("archive '{}' has no layers", self.name)))
    }

    pub fn layer(&self, name: &str) -> Result<&ArchiveLayer> {
        self.layers
            .iter()
            .find(|l| l.name == name)
            .ok_or_else(|| Error::Archive(format!("archive '{}' has no layer '{name}'", self.name)))
    }
}

pub fn read_archive(dir: impl AsRef<Path>) -> Result<WeightArchive> {
    let dir = dir.as_ref();
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    let mut layers = Vec::with_capacity(manifest.layers.len());
    for entry in &manifest.layers {
        if entry.layout != "row-major" {
            return Err(Error::Archive(format!("layer '{}': unsupported layout '{}'", entry.name, entry.layout)));
        }
        if entry.endianness != "little" {
            return Err(Error::Archive(format!(
                "layer '{}': unsupported endianness '{}'",
                entry.name, entry.endianness
            )));
        }
        let rel = Path::new(&entry.file);
        if rel.is_absolute() || rel.components().any(|c| !matches!(c, std::path::Component::Normal(_))) {
            return Err(Error::Archive(format!(
                "layer '{}': file '{}' must be a plain path inside the archive",
                entry.name, entry.file
            )));
        }
        let path = dir.join(rel);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let expected = entry.rows * entry.cols * entry.dtype.width();
        if bytes.len() != expected {
            return Err(Error::Archive(format!(
                "layer '{}': expected {expected} bytes, file has {}",
                entry.name,
                bytes.len()
            )));
        }
        let values: Vec<f64> = match entry.dtype {
            Dtype::F32 => bytes
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
                .collect(),
            Dtype::F64 => bytes
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                .collect(),
        };
        let matrix = DenseMatrix::new(entry.rows, entry.cols, values)
            .map_err(|e| Error::Archive(format!("layer '{}': {e}", entry.name)))?;
        layers.push(ArchiveLayer {
            name: entry.name.clone(),
            dtype: entry.dtype,
            matrix,
        });
    }
    Ok(WeightArchive {
        name: manifest.name,
        layers,
    })
}

/// Write `archive` into `dir` (created if missing). Layers stored as `f32`
/// are rounded to single precision.
pub fn write_archive(dir: impl AsRef<Path>, archive: &WeightArchive) -> Result<Manifest> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(archive.layers.len());
    for (i, layer) in archive.layers.iter().enumerate() {
        let file = format!("{i:03}_{}.bin", sanitize(&layer.name));
        let mut bytes = Vec::with_capacity(layer.matrix.len() * layer.dtype.width());
        for &v in layer.matrix.values() {
            match layer.dtype {
                Dtype::F32 => bytes.extend_from_slice(&(v as f32).to_le_bytes()),
                Dtype::F64 => bytes.extend_from_slice(&v.to_le_bytes()),
            }
        }
        let path = dir.join(&file);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        entries.push(ManifestLayer {
            name: layer.name.clone(),
            rows: layer.matrix.rows(),
            cols: layer.matrix.cols(),
            dtype: layer.dtype,
            file,
            layout: "row-major".into(),
            endianness: "little".into(),
        });
    }
    let manifest = Manifest {
        name: archive.name.clone(),
        layers: entries,
        source_checkpoint_hash: None,
    };
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Headerless CSV, one matrix row per line.
pub fn read_csv_matrix(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let row = record
            .iter()
            .map(|f| f.parse::<f64>().map_err(|e| Error::Data(format!("{}: bad number '{f}': {e}", path.display()))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Data(format!("{}: empty matrix", path.display())));
    }
    DenseMatrix::from_rows(&rows)
}
