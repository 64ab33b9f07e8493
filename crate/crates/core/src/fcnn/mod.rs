//! A bias-free `d`-layer ReLU network and the measurements the
//! compression bound needs.
//!
//! Layers are indexed from 1 to `d`, matching the usual `W^i`, `x^i`
//! notation: `x^1 = W^1 x^0` and `x^i = W^i relu(x^{i-1})` for `i > 1`. The
//! network output is `x^d` (no activation on the last layer).

mod compress;
mod cushion;
mod dataset;
mod network;
mod train;

pub use compress::{
    compress_network, layer_error_budget, CompressionConfig, CompressionMode, CompressionResult, LayerCompression,
    LayerTarget, TauRule,
};
pub use cushion::{
    activation_contraction, interlayer_cushion, interlayer_jacobian, interlayer_smoothness, jacobian_apply,
    layer_cushion, measure_cushions, minimal_interlayer_cushion, ContractionMeasure, CushionMeasure, CushionOptions,
    CushionReport, SmoothnessOptions, SmoothnessReport, UNRELIABLE_SKIP_FRACTION,
};
pub use dataset::{read_dataset, write_dataset, Dataset, DatasetMeta, GaussianBlobs};
pub use network::{argmax, softmax, LayerTrace, Network};
pub use train::{cross_entropy, train_sgd, ToyProblem, ToyRun, TrainConfig, TrainedNetwork};

pub(crate) fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}
