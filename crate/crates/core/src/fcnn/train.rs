use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{relu, softmax, Dataset, GaussianBlobs, Network};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub step_size: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            step_size: 0.05,
            batch_size: 32,
            epochs: 30,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedNetwork {
    pub network: Network,
    /// Mean cross-entropy over the dataset before training and after each epoch.
    pub loss_history: Vec<f64>,
}

impl TrainedNetwork {
    pub fn initial_loss(&self) -> f64 {
        self.loss_history[0]
    }

    pub fn final_loss(&self) -> f64 {
        *self.loss_history.last().expect("history holds the initial loss")
    }
}

/// Gaussian-blob classification problem and network shape used for
/// desk-scale experiments. Inputs get a constant bias coordinate, so the
/// first layer has `dim + 1` columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyProblem {
    pub dim: usize,
    pub classes: usize,
    pub hidden: Vec<usize>,
    pub train_samples: usize,
    pub test_samples: usize,
    pub spread: f64,
    pub center_scale: f64,
    pub train: TrainConfig,
    pub seed: u64,
}

impl Default for ToyProblem {
    fn default() -> Self {
        Self {
            dim: 20,
            classes: 4,
            hidden: vec![32, 32],
            train_samples: 2000,
            test_samples: 2000,
            spread: 1.0,
            center_scale: 1.0,
            train: TrainConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyRun {
    pub trained: TrainedNetwork,
    pub train: Dataset,
    pub test: Dataset,
}

impl ToyProblem {
    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.dim + 1)
            .chain(self.hidden.iter().copied())
            .chain(std::iter::once(self.classes))
            .collect()
    }

    pub fn datasets(&self) -> (Dataset, Dataset) {
        let blobs = GaussianBlobs::new(self.dim, self.classes, self.spread, self.center_scale, derive_seed(self.seed, 0));
        (
            blobs.sample(self.train_samples, derive_seed(self.seed, 1)).with_bias_coordinate(),
            blobs.sample(self.test_samples, derive_seed(self.seed, 2)).with_bias_coordinate(),
        )
    }

    pub fn run(&self) -> Result<ToyRun> {
        let (train, test) = self.datasets();
        let trained = train_sgd(&self.widths(), &train, &self.train)?;
        Ok(ToyRun { trained, train, test })
    }
}

/// Mean softmax cross-entropy of the network on a dataset.
pub fn cross_entropy(net: &Network, data: &Dataset) -> Result<f64> {
    let mut total = 0.0;
    for (x, &y) in data.iter() {
        let z = net.logits(x)?;
        let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        total += lse - z[y];
    }
    Ok(total / data.len() as f64)
}

/// Mini-batch SGD on softmax cross-entropy, `w <- w - step * mean gradient`.
///
/// `widths` is `[h_0, ..., h_d]`; `h_0` must match the feature dimension and
/// `h_d` the class count. Initialization and batch order both derive from
/// `config.seed`.
pub fn train_sgd(widths: &[usize], data: &Dataset, config: &TrainConfig) -> Result<TrainedNetwork> {
    if !(config.step_size > 0.0 && config.step_size.is_finite()) {
        return Err(Error::Domain(format!("step size must be positive, got {}", config.step_size)));
    }
    if config.batch_size == 0 {
        return Err(Error::Domain("batch size must be positive".into()));
    }
    if data.is_empty() {
        return Err(Error::Data("cannot train on an empty dataset".into()));
    }
    if widths.first() != Some(&data.feature_dim()) || widths.last() != Some(&data.class_count()) {
        return Err(Error::Shape(format!(
            "widths {widths:?} do not match {} features and {} classes",
            data.feature_dim(),
            data.class_count()
        )));
    }
    let mut net = Network::init_uniform(widths, derive_seed(config.seed, 0))?;
    let mut shuffle_rng = rng_from_seed(derive_seed(config.seed, 1));
    let mut history = vec![cross_entropy(&net, data)?];
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut grads: Vec<Vec<f64>> = net.weights().iter().map(|w| vec![0.0; w.len()]).collect();

    for epoch in 0..config.epochs {
        order.shuffle(&mut shuffle_rng);
        for batch in order.chunks(config.batch_size) {
            grads.iter_mut().for_each(|g| g.fill(0.0));
            for &s in batch {
                accumulate_gradient(&net, &data.inputs()[s], data.labels()[s], &mut grads)?;
            }
            let scale = config.step_size / batch.len() as f64;
            for (w, g) in net.weights_mut().iter_mut().zip(&grads) {
                for (v, gv) in w.values_mut().iter_mut().zip(g) {
                    *v -= scale * gv;
                }
            }
        }
        let loss = cross_entropy(&net, data)?;
        if !loss.is_finite() || net.weights().iter().any(|w| w.values().iter().any(|v| !v.is_finite())) {
            return Err(Error::TrainingDiverged { epoch: epoch + 1 });
        }
        log::debug!("epoch {}: loss {loss:.6}", epoch + 1);
        history.push(loss);
    }
    Ok(TrainedNetwork {
        network: net,
        loss_history: history,
    })
}

fn accumulate_gradient(net: &Network, x: &[f64], y: usize, grads: &mut [Vec<f64>]) -> Result<()> {
    let (z, trace) = net.forward(x)?;
    let mut delta = softmax(&z);
    delta[y] -= 1.0;
    for i in (1..=net.depth()).rev() {
        let w = net.layer(i);
        let input: Vec<f64> = if i == 1 {
            trace.input.clone()
        } else {
            trace.x(i - 1).iter().map(|&v| relu(v)).collect()
        };
        let g = &mut grads[i - 1];
        let cols = w.cols();
        for (r, &d) in delta.iter().enumerate() {
            if d != 0.0 {
                for (c, &a) in input.iter().enumerate() {
                    g[r * cols + c] += d * a;
                }
            }
        }
        if i > 1 {
            let back = w.matvec_transpose(&delta)?;
            delta = back
                .into_iter()
                .zip(trace.x(i - 1))
                .map(|(b, &pre)| if pre > 0.0 { b } else { 0.0 })
                .collect();
        }
    }
    Ok(())
}
