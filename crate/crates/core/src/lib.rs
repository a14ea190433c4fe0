//! Maximum-likelihood calibration of an unknown regressor `X0` under the
//! usual and the controlled (Berkson-error) linear calibration models.
//!
//! The workflow is: build [`CalibrationData`], summarize it into
//! [`SufficientStats`], fit one of the models, then evaluate a
//! [`VarianceFormula`] at the fitted parameters.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod controlled;
pub mod error;
pub mod inference;
pub mod numerics;
pub mod params;
pub mod simulation;
pub mod stats;
pub mod usual;

pub use controlled::{
    alternative_branch_discriminant, fit_known_delta, fit_unknown_delta, known_delta_residual, ControlledFit,
    DeltaCase, KnownDeltaSystem, SolverReport,
};
pub use error::{CalibError, Result};
pub use inference::{
    bias_controlled, confidence_interval, fisher_controlled_known, fisher_controlled_unknown, variance_known_delta,
    variance_v1_controlled, variance_v2_controlled, UncertaintyReport, VarianceFormula,
};
pub use numerics::{Matrix, SolverConfig};
pub use params::ModelParams;
pub use simulation::{
    generate_dataset, run_cell, run_grid, run_grid_with_threads, EstimatorSummary, Estimator, FormulaSummary, SimConfig,
    SimSummary,
};
pub use stats::{CalibrationData, Design, SufficientStats};
pub use usual::{bias_usual, fisher_usual, fit_usual, variance_v1_usual, variance_v2_usual, UsualFit};
