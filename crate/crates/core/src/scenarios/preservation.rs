//! Whether NA1 survives a change of measure depends on how the density
//! reaches zero: continuously (preserved, and `1/Z` is a local martingale
//! under `Q`) or by a jump (destroyed, and `1/Z` is not).

use serde::{Deserialize, Serialize};

use super::{Scenario, ScenarioConfig, ScenarioError, ScenarioReport};
use crate::arbitrage::{chunk_ranges, prepare_chunk, Classifier, ClassifyConfig, Condition, MeasureLabel, VerdictState};
use crate::measure::{stopping_times, Approach, ProportionEstimate, SmdAccumulator, SmdDiagnostic};
use crate::models::{DensitySpec, ModelSpec};
use crate::paths::GridProcess;

/// One model/density pair, classified before and after the change of
/// measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreservationRow {
    pub label: String,
    pub model: String,
    pub density: String,
    /// `NONE` if `Z` never vanishes, `JUMP` if any path jumps to zero,
    /// `CONTINUOUS` otherwise.
    pub approach: Approach,
    pub jump_probability: ProportionEstimate,
    pub zero_probability: ProportionEstimate,
    /// `(n, P(tau_n = tau < inf))` for the levels `1/n` above the jump
    /// threshold, where grid sampling can tell the two approaches apart.
    pub tau_n_equals_tau: Vec<(u32, f64)>,
    pub diagnostic: SmdDiagnostic,
    pub verdicts_p: Vec<(Condition, VerdictState)>,
    pub verdicts_q: Vec<(Condition, VerdictState)>,
}

impl PreservationRow {
    pub fn na1(&self, measure: MeasureLabel) -> VerdictState {
        let list = match measure {
            MeasureLabel::P => &self.verdicts_p,
            MeasureLabel::Q => &self.verdicts_q,
        };
        list.iter()
            .find(|(c, _)| *c == Condition::Na1)
            .map(|(_, s)| *s)
            .expect("NA1 is always classified")
    }
}

fn run_row(
    cfg: &ScenarioConfig,
    label: &str,
    model: ModelSpec,
    density: DensitySpec,
) -> Result<PreservationRow, ScenarioError> {
    let th = &cfg.thresholds;
    let eps_jump = th.eps_jump_for(cfg.grid.max_dt());
    let resolvable: Vec<(usize, u32)> = th
        .ladder
        .iter()
        .enumerate()
        .filter(|(_, &n)| 1.0 / n as f64 > eps_jump)
        .map(|(k, &n)| (k, n))
        .collect();
    let ccfg = ClassifyConfig {
        model: model.clone(),
        grid: cfg.grid.clone(),
        n_paths: cfg.n_paths,
        seed: cfg.seed,
        density: Some(density.clone()),
        thresholds: th.clone(),
        chunk_size: cfg.chunk_size,
        estimate_theta: false,
    };
    let mut under_p = Classifier::new(MeasureLabel::P, th)?;
    let mut under_q = Classifier::new(MeasureLabel::Q, th)?;
    let mut smd = SmdAccumulator::new(model.dim(), th.n_blocks, eps_jump, th.diagnostic_threshold);
    let (mut jumps, mut zeros) = (0usize, 0usize);
    let mut equal_counts = vec![0usize; resolvable.len()];

    for (first, n) in chunk_ranges(cfg.n_paths, cfg.chunk_size) {
        let chunk = prepare_chunk(&ccfg, first, n)?;
        under_p.add_chunk(&chunk)?;
        under_q.add_chunk(&chunk)?;
        let z = chunk.density.as_ref().expect("prepared with a density");
        let stopping = stopping_times(z, &th.ladder, eps_jump);
        for p in &stopping.paths {
            match p.approach {
                Approach::Jump => jumps += 1,
                Approach::Continuous => {}
                Approach::None => continue,
            }
            zeros += 1;
            for (slot, &(k, _)) in resolvable.iter().enumerate() {
                if p.tau_n[k] == p.tau {
                    equal_counts[slot] += 1;
                }
            }
        }
        smd.add(&GridProcess::constant(&cfg.grid, n, &[1.0]), z, &chunk.bundle)?;
    }

    let approach = if zeros == 0 {
        Approach::None
    } else if jumps > 0 {
        Approach::Jump
    } else {
        Approach::Continuous
    };
    let states = |c: crate::arbitrage::Classification| c.verdicts.iter().map(|v| (v.condition, v.state)).collect();
    Ok(PreservationRow {
        label: label.to_owned(),
        model: model.name().to_owned(),
        density: density.name().to_owned(),
        approach,
        jump_probability: ProportionEstimate::from_counts(jumps, cfg.n_paths),
        zero_probability: ProportionEstimate::from_counts(zeros, cfg.n_paths),
        tau_n_equals_tau: resolvable
            .iter()
            .zip(&equal_counts)
            .map(|(&(_, n), &c)| (n, c as f64 / cfg.n_paths as f64))
            .collect(),
        diagnostic: smd.finish()?,
        verdicts_p: states(under_p.finish()?),
        verdicts_q: states(under_q.finish()?),
    })
}

pub fn scenario_preservation_matrix(cfg: &ScenarioConfig) -> Result<ScenarioReport, ScenarioError> {
    let mut report = ScenarioReport::new(Scenario::Preservation, cfg);
    let horizon = cfg.grid.horizon();

    let stopped = run_row(cfg, "continuous", ModelSpec::StoppedBm { s0: 1.0 }, DensitySpec::PriceItself)?;
    report.flag(
        "continuous_row_approach",
        stopped.approach == Approach::Continuous,
        "a stopped Brownian density reaches zero continuously",
    );
    report.flag(
        "continuous_row_skips_no_level",
        stopped.tau_n_equals_tau.iter().all(|(_, f)| *f == 0.0),
        "P(tau > tau_n) = 1 for every n when the approach is continuous",
    );
    report.flag(
        "continuous_row_diagnostic_passes",
        stopped.diagnostic.pass,
        "1/Z is a local martingale under Q when Z reaches zero continuously",
    );
    report.flag(
        "continuous_row_na1_preserved",
        stopped.na1(MeasureLabel::P) == VerdictState::HoldsNumerically
            && stopped.na1(MeasureLabel::Q) == VerdictState::HoldsNumerically,
        "NA1 under P carries over to Q",
    );

    let jump = run_row(cfg, "jump", ModelSpec::ExpDefault { rate: 1.0 }, DensitySpec::PriceItself)?;
    report.flag(
        "jump_row_approach",
        jump.approach == Approach::Jump,
        "the default density jumps to zero",
    );
    report.estimate(
        "jump_row_jump_probability",
        jump.jump_probability.estimate,
        jump.jump_probability.stderr,
        1.0 - (-horizon).exp(),
        0.0,
        "P(xi <= T) = 1 - e^{-T}",
    );
    report.flag(
        "jump_row_skips_levels",
        !jump.tau_n_equals_tau.is_empty() && jump.tau_n_equals_tau.iter().all(|(_, f)| *f > 0.0),
        "tau_n = tau with positive probability when Z jumps to zero",
    );
    report.flag(
        "jump_row_diagnostic_fails",
        !jump.diagnostic.pass,
        "1/Z has a deterministic drift under Q when Z jumps to zero",
    );
    report.flag(
        "jump_row_na1_destroyed",
        jump.na1(MeasureLabel::P) == VerdictState::HoldsNumerically
            && jump.na1(MeasureLabel::Q) == VerdictState::FailsWithCertificate,
        "NA1 holds under P and fails with a certificate under Q",
    );

    let unit = run_row(cfg, "unit", ModelSpec::StoppedBm { s0: 1.0 }, DensitySpec::Unit)?;
    report.flag("unit_row_approach", unit.approach == Approach::None, "Z = 1 never vanishes");
    report.flag(
        "unit_row_diagnostic_passes",
        unit.diagnostic.pass,
        "1/Z = 1 is a martingale",
    );
    report.flag(
        "unit_row_verdicts_identical",
        unit.verdicts_p == unit.verdicts_q,
        "Q = P",
    );

    report.diagnostics = vec![stopped.diagnostic.clone(), jump.diagnostic.clone(), unit.diagnostic.clone()];
    report.rows = vec![stopped, jump, unit];
    Ok(report)
}
