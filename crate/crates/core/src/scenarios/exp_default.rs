//! `S = 1{xi > t} e^t` under `Q = S_T . P`: the price can only rise, so
//! buying and holding it is an increasing profit.

use super::{Scenario, ScenarioConfig, ScenarioError, ScenarioReport};
use crate::arbitrage::{
    chunk_ranges, prepare_chunk, CertificateCheck, CertificateKind, Classifier, ClassifyConfig, Condition,
    MeasureLabel, VerdictState,
};
use crate::measure::{reweight, stopping_times, Approach, ProportionEstimate};
use crate::models::{DensitySpec, ModelSpec};
use crate::paths::{ito_integral_masked, GridProcess};

const RATE: f64 = 1.0;

pub fn scenario_exp_default(cfg: &ScenarioConfig) -> Result<ScenarioReport, ScenarioError> {
    let mut report = ScenarioReport::new(Scenario::ExpDefault, cfg);
    let grid = &cfg.grid;
    let horizon = grid.horizon();
    let th = &cfg.thresholds;
    let ccfg = ClassifyConfig {
        model: ModelSpec::ExpDefault { rate: RATE },
        grid: grid.clone(),
        n_paths: cfg.n_paths,
        seed: cfg.seed,
        density: Some(DensitySpec::PriceItself),
        thresholds: th.clone(),
        chunk_size: cfg.chunk_size,
        estimate_theta: false,
    };
    let eps_jump = th.eps_jump_for(grid.max_dt());
    let mut classifier = Classifier::new(MeasureLabel::Q, th)?;
    let mut ip = CertificateCheck::new(CertificateKind::IncreasingProfit, MeasureLabel::Q, "H = 1 on (0, T]", th);
    let target_gain = (RATE * horizon).exp() - 1.0;
    let (mut jumps, mut z_t, mut ones) = (0usize, vec![], vec![]);
    let mut max_deviation: f64 = 0.0;

    for (first, n) in chunk_ranges(cfg.n_paths, cfg.chunk_size) {
        let chunk = prepare_chunk(&ccfg, first, n)?;
        classifier.add_chunk(&chunk)?;
        let z = chunk.density.as_ref().expect("prepared under Q");
        let stopping = stopping_times(z, &th.ladder, eps_jump);
        jumps += stopping.paths.iter().filter(|p| p.approach == Approach::Jump).count();

        let w = z.terminals();
        let mask: Vec<bool> = w.iter().map(|x| *x > 0.0).collect();
        let h = GridProcess::constant(grid, n, &[1.0]);
        let g = ito_integral_masked(&h, &chunk.bundle, Some(&mask))?;
        ip.add(&g, Some(&w))?;
        for p in (0..n).filter(|&p| mask[p]) {
            max_deviation = max_deviation.max((g.terminal(p) - target_gain).abs());
        }
        ones.extend(std::iter::repeat(1.0).take(n));
        z_t.extend(w);
    }

    let classification = classifier.finish()?;
    let cert = ip.finish()?;
    let jump = ProportionEstimate::from_counts(jumps, cfg.n_paths);
    report.estimate(
        "jump_to_zero_probability",
        jump.estimate,
        jump.stderr,
        1.0 - (-RATE * horizon).exp(),
        0.0,
        "P(xi <= T) = 1 - e^{-T} for an exponential default time",
    );
    report.flag(
        "increasing_profit_verified",
        cert.verified(),
        "S_t = e^t on every Q-charged path, so holding one unit only gains",
    );
    report.within(
        "max_gain_deviation",
        max_deviation,
        0.0,
        1e-12,
        "G_T = e^T - 1 exactly on {xi > T}",
    );
    report.estimate(
        "certificate_gain",
        cert.stats.terminal_gain.estimate,
        cert.stats.terminal_gain.stderr,
        target_gain,
        1e-12,
        "G_T = e^T - 1 on every Q-charged path",
    );
    report.flag(
        "na1_fails_under_q",
        classification.verdict(Condition::Na1).state == VerdictState::FailsWithCertificate,
        "a density jumping to zero destroys NA1",
    );
    let unit = reweight(&ones, &z_t)?;
    report.estimate(
        "density_mean",
        unit.estimate,
        unit.stderr,
        1.0,
        0.0,
        "E_P[Z_T] = 1",
    );
    report.verdicts = classification.verdicts;
    report.certificates.push(cert);
    Ok(report)
}
