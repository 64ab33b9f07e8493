use serde::{Deserialize, Serialize};

use super::DenseMatrix;
use crate::error::{Error, Result};

/// Coordinate-format sparse matrix. Triplets are kept sorted row-major,
/// indices are unique and no explicit zeros are stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    triplets: Vec<(usize, usize, f64)>,
}

impl SparseMatrix {
    pub fn empty(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            triplets: Vec::new(),
        }
    }

    pub fn new(rows: usize, cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Result<Self> {
        for &(r, c, v) in &triplets {
            if r >= rows || c >= cols {
                return Err(Error::Index(format!("({r}, {c}) outside {rows}x{cols}")));
            }
            if v == 0.0 {
                return Err(Error::Data(format!("explicit zero stored at ({r}, {c})")));
            }
            if !v.is_finite() {
                return Err(Error::Data(format!("non-finite value at ({r}, {c})")));
            }
        }
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        if let Some(w) = triplets.windows(2).find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(Error::Data(format!("duplicate entry at ({}, {})", w[0].0, w[0].1)));
        }
        Ok(Self { rows, cols, triplets })
    }

    /// Caller guarantees sorted, unique, in-range, nonzero triplets.
    pub(crate) fn from_sorted_unchecked(rows: usize, cols: usize, triplets: Vec<(usize, usize, f64)>) -> Self {
        debug_assert!(triplets.windows(2).all(|w| (w[0].0, w[0].1) < (w[1].0, w[1].1)));
        Self { rows, cols, triplets }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn triplets(&self) -> &[(usize, usize, f64)] {
        &self.triplets
    }

    pub fn nnz(&self) -> usize {
        self.triplets.len()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.rows, self.cols);
        let cols = self.cols;
        let v = d.values_mut();
        for &(r, c, x) in &self.triplets {
            v[r * cols + c] = x;
        }
        d
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::Shape(format!(
                "{}x{} sparse matrix times vector of length {}",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        let mut y = vec![0.0; self.rows];
        for &(r, c, v) in &self.triplets {
            y[r] += v * x[c];
        }
        Ok(y)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.triplets.iter().map(|t| t.2 * t.2).sum::<f64>().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    #[test]
    fn validation() {
        assert!(matches!(SparseMatrix::new(1, 1, vec![(1, 0, 1.0)]), Err(Error::Index(_))));
        assert!(SparseMatrix::new(2, 2, vec![(0, 0, 0.0)]).is_err());
        assert!(SparseMatrix::new(2, 2, vec![(0, 1, 1.0), (0, 1, 2.0)]).is_err());
        let s = SparseMatrix::new(2, 2, vec![(1, 0, 1.0), (0, 1, 2.0)]).unwrap();
        assert_eq!(s.triplets()[0], (0, 1, 2.0));
    }

    #[test]
    fn nnz_counts() {
        assert_eq!(SparseMatrix::empty(3, 3).nnz(), 0);
        let s = SparseMatrix::new(3, 3, vec![(0, 0, 1.0), (1, 2, -1.0), (2, 2, 4.0)]).unwrap();
        assert_eq!(s.nnz(), 3);
    }

    #[test]
    fn matvec_examples() {
        let s = SparseMatrix::new(1, 2, vec![(0, 1, 5.0)]).unwrap();
        assert_eq!(s.matvec(&[1.0, 2.0]).unwrap(), vec![10.0]);
        assert!(matches!(s.matvec(&[1.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn sparse_and_dense_products_agree() {
        let mut rng = rng_from_seed(17);
        for _ in 0..20 {
            let (r, c) = (rng.random_range(1..30), rng.random_range(1..30));
            let mut t = Vec::new();
            for i in 0..r {
                for j in 0..c {
                    if rng.random::<f64>() < 0.2 {
                        t.push((i, j, rng.random::<f64>() * 4.0 - 2.0 + 1e-3));
                    }
                }
            }
            let s = SparseMatrix::new(r, c, t).unwrap();
            let x: Vec<f64> = (0..c).map(|_| rng.random::<f64>() - 0.5).collect();
            let ys = s.matvec(&x).unwrap();
            let yd = s.to_dense().matvec(&x).unwrap();
            let diff = ys.iter().zip(&yd).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(diff <= 1e-12);
        }
    }
}
