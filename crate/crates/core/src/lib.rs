//! Spectral Galerkin integrators for semilinear parabolic SPDEs
//! `dX = (AX + F(X)) dt + B(X) dW` driven by trace-class Q-Wiener noise,
//! with derivative-free Milstein schemes, an information-cost model and
//! strong-convergence experiments.

// `!(x > 0.0)` is used on purpose so that NaN is rejected as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod convergence;
pub mod cost;
pub mod error;
pub mod problems;
pub mod qwiener;
pub mod schemes;
pub mod spectral;

pub use convergence::{
    emit_csv, fit_order, strong_error, theoretical_bound, ErrorRow, ErrorTable, ExperimentConfig, OrderFit,
    ReferenceScheme,
};
pub use cost::{
    effective_order, optimal_allocation, per_step_cost, total_cost, AllocationResult, BalanceReport, CostLedger,
};
pub use error::{Error, Result};
pub use problems::{BbarConvention, BuiltinProblem, Direction, ProblemSettings, ProblemSpec};
pub use qwiener::{NoiseIncrement, QSpectrum, RngStream};
pub use schemes::{simulate_path, NoiseSource, SchemeId, StepOptions, StepRecord};
pub use spectral::{OperatorSpectrum, RegularityParams, SpectralVector};
