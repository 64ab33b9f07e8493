use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{relu, Dataset};
use crate::error::{Error, Result};
use crate::matrix::{ArchiveLayer, DenseMatrix, Dtype, WeightArchive};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    weights: Vec<DenseMatrix>,
}

/// Pre-activations recorded during a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerTrace {
    pub input: Vec<f64>,
    /// `x^1, ..., x^d`.
    pub preactivations: Vec<Vec<f64>>,
}

impl LayerTrace {
    /// `x^i`; `x^0` is the input.
    pub fn x(&self, i: usize) -> &[f64] {
        if i == 0 {
            &self.input
        } else {
            &self.preactivations[i - 1]
        }
    }

    /// The vector multiplied by `W^i`: the raw input for `i = 1`, otherwise
    /// `relu(x^{i-1})`.
    pub fn layer_input(&self, i: usize) -> Vec<f64> {
        if i == 1 {
            self.input.clone()
        } else {
            self.x(i - 1).iter().map(|&v| relu(v)).collect()
        }
    }

    pub fn output(&self) -> &[f64] {
        self.preactivations.last().map_or(&self.input, Vec::as_slice)
    }
}

impl Network {
    pub fn new(weights: Vec<DenseMatrix>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Shape("a network needs at least one layer".into()));
        }
        for (i, w) in weights.windows(2).enumerate() {
            if w[1].cols() != w[0].rows() {
                return Err(Error::Shape(format!(
                    "layer {} is {}x{} but layer {} has {} outputs",
                    i + 2,
                    w[1].rows(),
                    w[1].cols(),
                    i + 1,
                    w[0].rows()
                )));
            }
        }
        Ok(Self { weights })
    }

    /// Uniform initialization in `[-1/sqrt(h_{i-1}), 1/sqrt(h_{i-1})]`.
    /// `widths` is `[h_0, h_1, ..., h_d]`.
    pub fn init_uniform(widths: &[usize], seed: u64) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::Shape(format!("invalid layer widths {widths:?}")));
        }
        let mut rng = rng_from_seed(seed);
        let weights = widths
            .windows(2)
            .map(|w| {
                let bound = 1.0 / (w[0] as f64).sqrt();
                let values = (0..w[0] * w[1]).map(|_| rng.random_range(-bound..=bound)).collect();
                DenseMatrix::new(w[1], w[0], values)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(weights)
    }

    pub fn depth(&self) -> usize {
        self.weights.len()
    }

    /// `[h_0, ..., h_d]`.
    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.weights[0].cols())
            .chain(self.weights.iter().map(DenseMatrix::rows))
            .collect()
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights[self.weights.len() - 1].rows()
    }

    /// `W^i`, 1-based.
    pub fn layer(&self, i: usize) -> &DenseMatrix {
        &self.weights[i - 1]
    }

    pub fn weights(&self) -> &[DenseMatrix] {
        &self.weights
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.iter().map(DenseMatrix::len).sum()
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [DenseMatrix] {
        &mut self.weights
    }

    /// Replace `W^i`, keeping the shape.
    pub fn with_layer(&self, i: usize, w: DenseMatrix) -> Result<Self> {
        let old = self.layer(i);
        if (old.rows(), old.cols()) != (w.rows(), w.cols()) {
            return Err(Error::Shape(format!(
                "replacement for layer {i} is {}x{}, expected {}x{}",
                w.rows(),
                w.cols(),
                old.rows(),
                old.cols()
            )));
        }
        let mut weights = self.weights.clone();
        weights[i - 1] = w;
        Ok(Self { weights })
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, LayerTrace)> {
        if x.len() != self.input_dim() {
            return Err(Error::Shape(format!(
                "network expects inputs of length {}, got {}",
                self.input_dim(),
                x.len()
            )));
        }
        let mut pre = Vec::with_capacity(self.depth());
        let mut h = self.weights[0].matvec_unchecked(x);
        for w in &self.weights[1..] {
            let a: Vec<f64> = h.iter().map(|&v| relu(v)).collect();
            pre.push(h);
            h = w.matvec_unchecked(&a);
        }
        pre.push(h.clone());
        Ok((
            h,
            LayerTrace {
                input: x.to_vec(),
                preactivations: pre,
            },
        ))
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(x)?.0)
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.logits(x)?))
    }

    /// Fraction of samples with `f(x)[y] <= gamma + max_{j != y} f(x)[j]`.
    pub fn empirical_margin_loss(&self, data: &Dataset, gamma: f64) -> Result<f64> {
        Ok(self.margin_violations(data, gamma)? as f64 / data.len() as f64)
    }

    pub(crate) fn margin_violations(&self, data: &Dataset, gamma: f64) -> Result<usize> {
        if !(gamma >= 0.0) {
            return Err(Error::Domain(format!("margin gamma must be nonnegative, got {gamma}")));
        }
        if data.class_count() < 2 {
            return Err(Error::Domain("margin loss needs at least two classes".into()));
        }
        if data.is_empty() {
            return Err(Error::Data("empty dataset".into()));
        }
        let mut bad = 0;
        for (x, &y) in data.iter() {
            let z = self.logits(x)?;
            if z.len() != data.class_count() {
                return Err(Error::Shape(format!(
                    "network has {} outputs for {} classes",
                    z.len(),
                    data.class_count()
                )));
            }
            if margin(&z, y) <= gamma {
                bad += 1;
            }
        }
        Ok(bad)
    }

    /// `1 - L_0`: a sample counts as correct only when its true-class score
    /// strictly beats every other class, so ties are errors.
    pub fn accuracy(&self, data: &Dataset) -> Result<f64> {
        let bad = self.margin_violations(data, 0.0)?;
        Ok((data.len() - bad) as f64 / data.len() as f64)
    }

    pub fn to_archive(&self, name: &str, dtype: Dtype) -> WeightArchive {
        WeightArchive {
            name: name.to_string(),
            layers: self
                .weights
                .iter()
                .enumerate()
                .map(|(i, w)| ArchiveLayer {
                    name: format!("layer{}", i + 1),
                    dtype,
                    matrix: w.clone(),
                })
                .collect(),
        }
    }

    pub fn from_archive(archive: &WeightArchive) -> Result<Self> {
        Self::new(archive.layers.iter().map(|l| l.matrix.clone()).collect())
    }
}

/// `z[y] - max_{j != y} z[j]`.
pub(crate) fn margin(z: &[f64], y: usize) -> f64 {
    let other = z
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != y)
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    z[y] - other
}

/// Index of the largest entry; ties go to the smallest index.
pub fn argmax(z: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in z.iter().enumerate() {
        if v > z[best] {
            best = i;
        }
    }
    best
}

/// Max-shifted softmax.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|&v| (v - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fcnn::GaussianBlobs;

    fn m(rows: &[Vec<f64>]) -> DenseMatrix {
        DenseMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn shape_chaining() {
        assert!(Network::new(vec![]).is_err());
        assert!(Network::new(vec![DenseMatrix::zeros(3, 2), DenseMatrix::zeros(2, 2)]).is_err());
        let n = Network::new(vec![DenseMatrix::zeros(3, 2), DenseMatrix::zeros(4, 3)]).unwrap();
        assert_eq!(n.widths(), vec![2, 3, 4]);
        assert!(n.forward(&[1.0]).is_err());
    }

    #[test]
    fn identity_and_relu_kill() {
        let id = Network::new(vec![DenseMatrix::identity(3)]).unwrap();
        assert_eq!(id.logits(&[1.0, -2.0, 3.0]).unwrap(), vec![1.0, -2.0, 3.0]);
        let n = Network::new(vec![m(&[vec![-1.0]]), m(&[vec![1.0]])]).unwrap();
        let (z, tr) = n.forward(&[2.0]).unwrap();
        assert_eq!(tr.x(1), &[-2.0]);
        assert_eq!(z, vec![0.0]);
    }

    #[test]
    fn forward_matches_straight_line_evaluation() {
        let n = Network::init_uniform(&[5, 7, 6, 3], 4).unwrap();
        let x = [0.3, -1.0, 2.0, 0.5, -0.7];
        let (z, trace) = n.forward(&x).unwrap();
        // Written out with explicit loops.
        let mut h: Vec<f64> = x.to_vec();
        for (li, w) in n.weights().iter().enumerate() {
            let inp: Vec<f64> = if li == 0 { h.clone() } else { h.iter().map(|v| v.max(0.0)).collect() };
            let mut out = vec![0.0; w.rows()];
            for r in 0..w.rows() {
                for c in 0..w.cols() {
                    out[r] += w.get(r, c) * inp[c];
                }
            }
            h = out;
        }
        let diff = z.iter().zip(&h).fold(0.0f64, |a, (p, q)| a.max((p - q).abs()));
        assert!(diff <= 1e-12);
        for i in 1..=n.depth() {
            let re = n.layer(i).matvec(&trace.layer_input(i)).unwrap();
            assert!(re.iter().zip(trace.x(i)).all(|(a, b)| (a - b).abs() <= 1e-12));
        }
    }

    #[test]
    fn softmax_cases() {
        assert_eq!(softmax(&[0.0, 0.0]), vec![0.5, 0.5]);
        let a = softmax(&[1.0, 2.0, -3.0]);
        let b = softmax(&[101.0, 102.0, 97.0]);
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-15));
        assert_eq!(softmax(&[1000.0, 0.0]), vec![1.0, 0.0]);
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn margin_loss_examples() {
        let n = Network::new(vec![DenseMatrix::identity(2)]).unwrap();
        let d = Dataset::new(vec![vec![2.0, 0.0]], vec![0], 2).unwrap();
        assert_eq!(n.empirical_margin_loss(&d, 1.0).unwrap(), 0.0);
        assert_eq!(n.empirical_margin_loss(&d, 3.0).unwrap(), 1.0);
        assert_eq!(n.empirical_margin_loss(&d, 0.0).unwrap(), 0.0);
        assert!(n.empirical_margin_loss(&d, -1.0).is_err());
        let one = Dataset::new(vec![vec![1.0]], vec![0], 1).unwrap();
        let n1 = Network::new(vec![DenseMatrix::identity(1)]).unwrap();
        assert!(matches!(n1.empirical_margin_loss(&one, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn margin_loss_recount_and_duality() {
        let blobs = GaussianBlobs::new(4, 3, 1.0, 2.0, 5);
        let d = blobs.sample(300, 6);
        let n = Network::init_uniform(&[4, 8, 3], 1).unwrap();
        for &g in &[0.0, 0.05, 0.3, 1.0] {
            let mut count = 0;
            for (x, &y) in d.iter() {
                let z = n.logits(x).unwrap();
                let best_other = (0..3).filter(|&j| j != y).map(|j| z[j]).fold(f64::MIN, f64::max);
                if z[y] <= g + best_other {
                    count += 1;
                }
            }
            assert_eq!(n.empirical_margin_loss(&d, g).unwrap(), count as f64 / 300.0);
        }
        let acc = n.accuracy(&d).unwrap();
        let l0 = n.empirical_margin_loss(&d, 0.0).unwrap();
        assert!((acc + l0 - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn argmax_ties_pick_first() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[2.0]), 0);
    }
}
