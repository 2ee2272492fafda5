//! Dense PSD linear algebra, compensated arithmetic, random streams and the
//! handful of statistics helpers shared by the simulation layers.

pub mod compensated;
pub mod linalg;
pub mod rng;
pub mod stats;

pub use linalg::{
    decompose_drift, pinv_psd, DriftDecomposition, PseudoinverseResult, SymMatrix,
    DEFAULT_PINV_TOL,
};
pub use rng::{derive_stream, RngStream};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NumericsError {
    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("matrix is not positive semidefinite: eigenvalue {eigenvalue:e} (largest {largest:e})")]
    NotPsd { eigenvalue: f64, largest: f64 },
    #[error("dimension mismatch: expected {expected} entries, found {found}")]
    Shape { expected: usize, found: usize },
    #[error("dimension {0} exceeds the supported maximum of 64")]
    TooLarge(usize),
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("matrix has non-finite entries")]
    NonFinite,
}
