//! Grids, path storage, predictable integrands and left-point integration.

mod bundle;
mod grid;
mod integral;
pub mod io;
mod process;
mod refine;

pub use bundle::{AuxKind, AuxSeries, PathBundle, AUX_ABSORPTION_INDEX};
pub use grid::TimeGrid;
pub use integral::{check_admissible, ito_integral, ito_integral_masked, realized_covariation, AdmissibilityReport};
pub use process::{GainsProcess, GridProcess, PrefixView};
pub use refine::{refine_grid, PathGenerator};

#[derive(Debug, thiserror::Error)]
pub enum PathsError {
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("shape mismatch in {what}: expected {expected} values, found {found}")]
    Shape {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("{0} contains non-finite values")]
    NonFinite(&'static str),
    #[error("integrand reads index {requested} while positioned at {current}")]
    FutureRead { requested: usize, current: usize },
    #[error("aux series `{0}` is not present")]
    MissingAux(String),
    #[error("aux series `{0}` is not adapted to the grid")]
    NotAdapted(String),
    #[error("the generator does not support exact coupled refinement")]
    RefinementUnsupported,
    #[error("malformed path file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
