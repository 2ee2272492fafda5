//! Mean-variance trade-off, certificates for the individual arbitrage
//! notions and the tri-state classifiers built on them.

mod certificate;
mod classify;
mod thresholds;
mod tradeoff;
mod verdict;

pub use certificate::{
    verify_certificate, Certificate, CertificateCheck, CertificateKind, CertificateStats, LadderCheck, MeasureLabel,
};
pub use classify::{
    chunk_ranges, classify, prepare_chunk, prepare_chunk_with_values, Chunk, Classification, Classifier, ClassifyConfig, DEFAULT_CHUNK_SIZE,
};
pub use thresholds::Thresholds;
pub use tradeoff::{mean_variance_tradeoff, TradeoffReport, TradeoffSummary};
pub use verdict::{
    check_na, check_na1, check_nip, check_nsa, nip_certificate, nu_gains, Condition, Evidence, NuEvidence, Verdict,
    VerdictState,
};

use crate::measure::MeasureError;
use crate::models::ModelError;
use crate::paths::PathsError;

#[derive(Debug, thiserror::Error)]
pub enum ArbitrageError {
    #[error("invalid threshold {0}: {1}")]
    Threshold(&'static str, String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error(transparent)]
    Paths(#[from] PathsError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Model(#[from] ModelError),
}
