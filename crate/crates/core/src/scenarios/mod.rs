//! Self-checking end-to-end runs: each scenario simulates a catalog model,
//! runs the relevant estimators and classifiers, and compares every observed
//! quantity with a closed-form target.

mod bessel;
mod compensator;
mod exp_default;
mod preservation;

use serde::{Deserialize, Serialize};

pub use bessel::{bessel_delta, bessel_hedge, bessel_value, scenario_bessel};
pub use compensator::scenario_compensator;
pub use exp_default::scenario_exp_default;
pub use preservation::{scenario_preservation_matrix, PreservationRow};

use crate::arbitrage::{ArbitrageError, Certificate, Thresholds, Verdict, DEFAULT_CHUNK_SIZE};
use crate::measure::{MeasureError, SmdDiagnostic};
use crate::models::ModelError;
use crate::paths::{PathsError, TimeGrid};

pub const DEFAULT_HORIZON: f64 = 1.0;
pub const DEFAULT_STEPS: usize = 4096;
pub const DEFAULT_PATHS: usize = 50_000;
pub const DEFAULT_SEED: u64 = 20_240_001;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("invalid scenario configuration: {0}")]
    Config(String),
    #[error("unknown scenario `{0}`")]
    Unknown(String),
    #[error(transparent)]
    Arbitrage(#[from] ArbitrageError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Paths(#[from] PathsError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub grid: TimeGrid,
    pub n_paths: usize,
    pub seed: u64,
    pub chunk_size: usize,
    pub thresholds: Thresholds,
}

impl ScenarioConfig {
    pub fn new(horizon: f64, steps: usize, n_paths: usize, seed: u64) -> Result<Self, ScenarioError> {
        if steps < 2 {
            return Err(ScenarioError::Config(format!("steps must be at least 2, got {steps}")));
        }
        if n_paths == 0 {
            return Err(ScenarioError::Config("n_paths must be positive".into()));
        }
        Ok(Self {
            grid: TimeGrid::uniform(horizon, steps)?,
            n_paths,
            seed,
            chunk_size: DEFAULT_CHUNK_SIZE,
            thresholds: Thresholds::default(),
        })
    }

    pub fn horizon(&self) -> f64 {
        self.grid.horizon()
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::new(DEFAULT_HORIZON, DEFAULT_STEPS, DEFAULT_PATHS, DEFAULT_SEED).expect("defaults are valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Bessel,
    ExpDefault,
    Compensator,
    Preservation,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::Bessel,
        Scenario::ExpDefault,
        Scenario::Compensator,
        Scenario::Preservation,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Bessel => "bessel",
            Scenario::ExpDefault => "exp-default",
            Scenario::Compensator => "compensator",
            Scenario::Preservation => "preservation",
        }
    }

    pub fn parse(name: &str) -> Result<Self, ScenarioError> {
        Self::ALL
            .into_iter()
            .find(|s| s.name() == name || s.name().replace('-', "_") == name)
            .ok_or_else(|| ScenarioError::Unknown(name.to_owned()))
    }

    pub fn run(&self, cfg: &ScenarioConfig) -> Result<ScenarioReport, ScenarioError> {
        match self {
            Scenario::Bessel => scenario_bessel(cfg),
            Scenario::ExpDefault => scenario_exp_default(cfg),
            Scenario::Compensator => scenario_compensator(cfg),
            Scenario::Preservation => scenario_preservation_matrix(cfg),
        }
    }
}

/// A target with its tolerance `max(3 stderr, discretisation_bound)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expected {
    pub quantity: String,
    pub target: f64,
    pub tolerance: f64,
    pub mc_bound: f64,
    pub discretisation_bound: f64,
    pub provenance: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Observed {
    pub quantity: String,
    pub value: f64,
    pub stderr: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioReport {
    pub scenario: String,
    pub seed: u64,
    pub horizon: f64,
    pub steps: usize,
    pub n_paths: usize,
    pub expected: Vec<Expected>,
    pub observed: Vec<Observed>,
    pub pass: bool,
    #[serde(default)]
    pub verdicts: Vec<Verdict>,
    #[serde(default)]
    pub certificates: Vec<Certificate>,
    #[serde(default)]
    pub diagnostics: Vec<SmdDiagnostic>,
    #[serde(default)]
    pub rows: Vec<PreservationRow>,
}

impl ScenarioReport {
    pub(crate) fn new(scenario: Scenario, cfg: &ScenarioConfig) -> Self {
        Self {
            scenario: scenario.name().to_owned(),
            seed: cfg.seed,
            horizon: cfg.grid.horizon(),
            steps: cfg.grid.steps(),
            n_paths: cfg.n_paths,
            expected: vec![],
            observed: vec![],
            pass: true,
            verdicts: vec![],
            certificates: vec![],
            diagnostics: vec![],
            rows: vec![],
        }
    }

    /// A Monte Carlo estimate compared at `max(3 stderr, disc)`.
    pub(crate) fn estimate(
        &mut self,
        quantity: &str,
        value: f64,
        stderr: f64,
        target: f64,
        disc: f64,
        provenance: &str,
    ) {
        let mc = 3.0 * stderr;
        self.push(quantity, value, stderr, target, mc.max(disc), mc, disc, provenance);
    }

    /// A quantity compared at a fixed tolerance.
    pub(crate) fn within(&mut self, quantity: &str, value: f64, target: f64, tolerance: f64, provenance: &str) {
        self.push(quantity, value, 0.0, target, tolerance, 0.0, tolerance, provenance);
    }

    /// A yes/no property, recorded as `1` (holds) against target `1`.
    pub(crate) fn flag(&mut self, quantity: &str, holds: bool, provenance: &str) {
        self.push(quantity, if holds { 1.0 } else { 0.0 }, 0.0, 1.0, 0.0, 0.0, 0.0, provenance);
    }

    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        quantity: &str,
        value: f64,
        stderr: f64,
        target: f64,
        tolerance: f64,
        mc: f64,
        disc: f64,
        provenance: &str,
    ) {
        let pass = value.is_finite() && (value - target).abs() <= tolerance;
        self.pass &= pass;
        self.expected.push(Expected {
            quantity: quantity.to_owned(),
            target,
            tolerance,
            mc_bound: mc,
            discretisation_bound: disc,
            provenance: provenance.to_owned(),
        });
        self.observed.push(Observed {
            quantity: quantity.to_owned(),
            value,
            stderr,
            pass,
        });
    }

    pub fn observed(&self, quantity: &str) -> Option<&Observed> {
        self.observed.iter().find(|o| o.quantity == quantity)
    }

    pub fn expected(&self, quantity: &str) -> Option<&Expected> {
        self.expected.iter().find(|e| e.quantity == quantity)
    }

    /// Quantities whose observation missed its target.
    pub fn failures(&self) -> Vec<&str> {
        self.observed.iter().filter(|o| !o.pass).map(|o| o.quantity.as_str()).collect()
    }
}

/// Mean and standard error of `values`.
pub(crate) fn mean_se(values: &[f64]) -> (f64, f64) {
    let e = crate::numerics::stats::MeanEstimate::from_samples(values);
    (e.mean, e.stderr)
}
