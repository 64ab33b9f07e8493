use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification of errors, used by the CLI to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input: shapes, domains, malformed files.
    Validation,
    /// The requested parameters lie outside the region where a bound or
    /// threshold is feasible.
    Infeasible,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty request: {0}")]
    EmptyRequest(&'static str),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("divergent quantity: {0}")]
    Divergence(String),

    #[error("insufficient data: need at least {needed} tail samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("infinite estimate: every tail sample equals w_min")]
    InfiniteEstimate,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("index out of range: {0}")]
    Index(String),

    #[error(
        "infeasible threshold{}: tau = {tau} exceeds the maximal feasible tau = {max_tau}",
        layer.map(|l| format!(" in layer {l}")).unwrap_or_default()
    )]
    InfeasibleThreshold {
        layer: Option<usize>,
        tau: f64,
        max_tau: f64,
    },

    #[error("outside the validity region: {0}")]
    Validity(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("singular design: {0}")]
    SingularDesign(String),

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    TrainingDiverged { epoch: usize },

    #[error("data error: {0}")]
    Data(String),

    #[error("archive error: {0}")]
    Archive(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InfeasibleThreshold { .. } | Error::Validity(_) => ErrorKind::Infeasible,
            _ => ErrorKind::Validation,
        }
    }

    /// Short machine-readable tag.
    pub fn code(&self) -> &'static str {
        match self {
            Error::EmptyRequest(_) => "empty_request",
            Error::Domain(_) => "domain",
            Error::Divergence(_) => "divergence",
            Error::InsufficientData { .. } => "insufficient_data",
            Error::InfiniteEstimate => "infinite_estimate",
            Error::Shape(_) => "shape",
            Error::NonFinite { .. } => "non_finite",
            Error::Index(_) => "index",
            Error::InfeasibleThreshold { .. } => "infeasible_threshold",
            Error::Validity(_) => "validity",
            Error::Degenerate(_) => "degenerate",
            Error::SingularDesign(_) => "singular_design",
            Error::TrainingDiverged { .. } => "training_diverged",
            Error::Data(_) => "data",
            Error::Archive(_) => "archive",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attach a layer index to an infeasibility error.
    pub fn in_layer(self, layer: usize) -> Self {
        match self {
            Error::InfeasibleThreshold { tau, max_tau, .. } => Error::InfeasibleThreshold {
                layer: Some(layer),
                tau,
                max_tau,
            },
            other => other,
        }
    }
}
