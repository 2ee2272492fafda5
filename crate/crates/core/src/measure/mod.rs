//! Changes of measure: density processes, their stopping times, reweighted
//! expectations, the drift under the new measure and the strict martingale
//! density diagnostic.

mod decomposition;
mod density;
mod girsanov;
mod reweight;
mod smd;
mod stopping;

pub use decomposition::{decompose_paths, Decomposition};
pub use density::DensityProcess;
pub use girsanov::{
    girsanov, mvt_under_q, theta_over_z_time_average, BoundCheck, QDecomposition, ThetaRegression, ThetaSource,
    BOUND_ABS_TOL, BOUND_REL_TOL, MIN_REGRESSION_PATHS,
};
pub use reweight::{reweight, WeightedExpectation};
pub use smd::{smd_under_q, ProcessDiagnostic, SmdAccumulator, SmdDiagnostic, DEFAULT_N_BLOCKS, DEFAULT_THRESHOLD};
pub use stopping::{
    default_eps_jump, default_ladder, jump_to_zero_probability, stopping_times, Approach, PathStopping,
    ProportionEstimate, StoppingReport,
};

use crate::models::ModelError;
use crate::numerics::NumericsError;
use crate::paths::PathsError;

#[derive(Debug, thiserror::Error)]
pub enum MeasureError {
    #[error("invalid density process: {0}")]
    InvalidDensity(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("payoff times density is not finite on path {0}")]
    NonFinitePayoff(usize),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Paths(#[from] PathsError),
    #[error(transparent)]
    Model(#[from] ModelError),
}
