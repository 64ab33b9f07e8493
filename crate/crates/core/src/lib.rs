//! Compression of heavy-tailed weight matrices and the bounds that go with it.
//!
//! A weight matrix `W` is split at a threshold `tau` into a dense bulk `A`
//! (entries with magnitude at most `tau`) and a sparse spike part `B`. The
//! bulk is then replaced by scaled Gaussian noise, `W(t) = sqrt(t) G + B`.
//! The crate provides the sampling and fitting machinery for power-law
//! matrix elements, the closed-form concentration and sparsity bounds for
//! this substitution, a small ReLU network with cushion measurements, and
//! Monte-Carlo harnesses that check the bounds empirically.
//!
//! Module map:
//!
//! * [`powerlaw`]: Pareto sampling, tail probabilities, MLE tail fit, stable-law tail constants.
//! * [`matrix`]: dense/sparse matrices, threshold split, Gaussian substitution, norms, archives.
//! * [`bounds`]: concentration, Chernoff sparsity, resilient-classification and generalization bounds.
//! * [`fcnn`]: the ReLU network, SGD trainer, cushions and whole-network compression.
//! * [`verify`]: Monte-Carlo verification, the accuracy experiment, the stable-rank sweep and reports.

pub mod bounds;
pub mod error;
pub mod fcnn;
pub mod matrix;
pub mod powerlaw;
pub mod rng;
pub mod verify;

pub use error::{Error, ErrorKind, Result};
