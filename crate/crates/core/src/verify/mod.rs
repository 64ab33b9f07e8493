//! Monte-Carlo checks of the bounds, the accuracy-under-compression
//! experiment, the stable-rank sweep and the end-to-end bound report.

mod accuracy;
mod em;
mod montecarlo;
mod report;
mod sweep;

pub use accuracy::{accuracy_experiment, write_accuracy_table, AccuracyRow};
pub use em::{fit_linear_mixture_em, EmOptions, MixtureComponent, MixtureFit, NOISE_STD_FLOOR};
pub use montecarlo::{
    binomial_slack, verify_concentration, verify_sparsity, verify_spiked_expectation, ConcentrationSetup,
    SparsityVerification, SpikedExpectationReport, TauMode, Verdict, VerificationReport,
};
pub use report::{end_to_end_bound_report, BoundReport, MarginRow, ReportOptions};
pub use sweep::{planted_pareto_archive, stable_rank_alpha_sweep, write_sweep_csv, SweepRow, WminRule};
