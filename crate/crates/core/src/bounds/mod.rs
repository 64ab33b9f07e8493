//! Closed-form bound calculators.
//!
//! Probabilities returned here are clamped to `[0, 1]`. The unclamped value,
//! which may exceed one, is available as [`BoundValue::raw`].

mod concentration;
mod generalization;
mod resilient;
mod sparsity;

pub use concentration::{
    concentration_tail, max_feasible_tau, solve_variance_t, variance_budget, ConcentrationParams, VarianceMode,
};
pub use generalization::{
    covering_kappa, dudley_integral, simple_generalization_bound, CushionSet, DudleyResult, GenBound,
    GenBoundInput, DEFAULT_CONSTANT_C, DEFAULT_QUANTIZATION_LEVELS,
};
pub use resilient::{
    bracket_nonzero_prob, contour_grid, resilient_path_bound, spiked_component_expectation,
    spiked_expectation_paper_form, ContourCell, ContourGrid, ResilientBound,
};
pub use sparsity::{binomial_tail_exact, chernoff_tail, sparsity_tail_bound, SparsityBoundInput};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundValue {
    /// Clamped to `[0, 1]`.
    pub value: f64,
    pub raw: f64,
}

impl BoundValue {
    pub fn from_raw(raw: f64) -> Self {
        Self {
            value: raw.clamp(0.0, 1.0),
            raw,
        }
    }
}
