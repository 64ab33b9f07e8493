//! Dense and sparse matrices, the threshold split `W = A + B`, Gaussian
//! substitution `W(t) = sqrt(t) G + B`, norms and the weight-archive format.

mod archive;
mod dense;
mod norms;
mod sparse;
mod split;

pub use archive::{read_archive, read_csv_matrix, write_archive, ArchiveLayer, Dtype, Manifest, ManifestLayer, WeightArchive};
pub use dense::DenseMatrix;
pub use norms::{spectral_norm, spectral_norm_with, stable_rank, SpectralEstimate, DEFAULT_POWER_ITERATIONS, DEFAULT_POWER_TOL};
pub use sparse::SparseMatrix;
pub use split::{gaussian_substitute, split_by_threshold, CompressedMatrix, SplitMode, Substitution, ThresholdSplit};

/// Anything that can multiply a vector.
pub trait MatVec {
    fn shape(&self) -> (usize, usize);
    fn matvec(&self, x: &[f64]) -> crate::Result<Vec<f64>>;
}

impl MatVec for DenseMatrix {
    fn shape(&self) -> (usize, usize) {
        (self.rows(), self.cols())
    }

    fn matvec(&self, x: &[f64]) -> crate::Result<Vec<f64>> {
        DenseMatrix::matvec(self, x)
    }
}

impl MatVec for SparseMatrix {
    fn shape(&self) -> (usize, usize) {
        (self.rows(), self.cols())
    }

    fn matvec(&self, x: &[f64]) -> crate::Result<Vec<f64>> {
        SparseMatrix::matvec(self, x)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
