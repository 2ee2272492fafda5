//! The compensated jump martingale `S = (t ∧ xi) - 1{t >= xi}` under the
//! default-indicator density: under `Q` the jump never happens and `S`
//! reduces to its increasing compensator.

use super::{mean_se, Scenario, ScenarioConfig, ScenarioError, ScenarioReport};
use crate::arbitrage::{
    chunk_ranges, prepare_chunk, CertificateCheck, CertificateKind, Classifier, ClassifyConfig, MeasureLabel,
};
use crate::measure::reweight;
use crate::models::{aux, DensitySpec, ModelSpec};
use crate::paths::{ito_integral, ito_integral_masked, GridProcess};

const RATE: f64 = 1.0;

pub fn scenario_compensator(cfg: &ScenarioConfig) -> Result<ScenarioReport, ScenarioError> {
    let mut report = ScenarioReport::new(Scenario::Compensator, cfg);
    let grid = &cfg.grid;
    let horizon = grid.horizon();
    let n_steps = grid.steps();
    let th = &cfg.thresholds;
    let ccfg = ClassifyConfig {
        model: ModelSpec::CompensatorModel { rate: RATE },
        grid: grid.clone(),
        n_paths: cfg.n_paths,
        seed: cfg.seed,
        density: Some(DensitySpec::DefaultIndicator { rate: RATE }),
        thresholds: th.clone(),
        chunk_size: cfg.chunk_size,
        estimate_theta: false,
    };
    let mut classifier = Classifier::new(MeasureLabel::Q, th)?;
    let mut ip = CertificateCheck::new(CertificateKind::IncreasingProfit, MeasureLabel::Q, "H = 1 on (0, T]", th);
    let target = RATE * horizon;
    let (mut z_t, mut gains_q, mut b_t, mut left_jump, mut gains_p) = (vec![], vec![], vec![], vec![], vec![]);
    let mut max_deviation: f64 = 0.0;

    for (first, n) in chunk_ranges(cfg.n_paths, cfg.chunk_size) {
        let chunk = prepare_chunk(&ccfg, first, n)?;
        classifier.add_chunk(&chunk)?;
        let z = chunk.density.as_ref().expect("prepared under Q");
        let bundle = &chunk.bundle;
        let w = z.terminals();
        let mask: Vec<bool> = w.iter().map(|x| *x > 0.0).collect();
        let h = GridProcess::constant(grid, n, &[1.0]);

        let gq = ito_integral_masked(&h, bundle, Some(&mask))?;
        ip.add(&gq, Some(&w))?;
        let gp = ito_integral(&h, bundle)?;
        for p in 0..n {
            if mask[p] {
                max_deviation = max_deviation.max((gq.terminal(p) - target).abs());
            }
            gains_q.push(gq.terminal(p));
            gains_p.push(gp.terminal(p));
            b_t.push(bundle.aux_path(aux::B, p)?[n_steps]);
            let jumped = z.exact_zero_time(p).is_some_and(|t| t <= horizon);
            left_jump.push(if jumped { z.left_limit(p).unwrap_or(0.0) } else { 0.0 });
        }
        z_t.extend(w);
    }

    let classification = classifier.finish()?;
    let cert = ip.finish()?;
    let direct = reweight(&gains_q, &z_t)?;
    let via_b = reweight(&b_t, &z_t)?;
    let (via_jump, via_jump_se) = mean_se(&left_jump);
    let provenance = "each equals T: int_0^T e^s e^{-s} ds";
    report.estimate("direct_weighted_gain", direct.estimate, direct.stderr, target, 0.0, provenance);
    report.estimate("weighted_compensator", via_b.estimate, via_b.stderr, target, 0.0, provenance);
    report.estimate("jump_left_limit_mean", via_jump, via_jump_se, target, 0.0, provenance);
    let estimates = [
        ("direct_weighted_gain", direct.estimate, direct.stderr),
        ("weighted_compensator", via_b.estimate, via_b.stderr),
        ("jump_left_limit_mean", via_jump, via_jump_se),
    ];
    for a in 0..estimates.len() {
        for b in a + 1..estimates.len() {
            let (na, va, sa) = estimates[a];
            let (nb, vb, sb) = estimates[b];
            report.estimate(
                &format!("difference_{na}_{nb}"),
                va - vb,
                (sa * sa + sb * sb).sqrt(),
                0.0,
                0.0,
                "the three estimates agree",
            );
        }
    }
    report.flag(
        "increasing_profit_verified",
        cert.verified(),
        "under Q the price is its compensator, which only increases",
    );
    report.within(
        "max_gain_deviation",
        max_deviation,
        0.0,
        1e-12,
        "G_T = T ∧ xi = T on every Q-charged path",
    );
    let (mean_p, se_p) = mean_se(&gains_p);
    report.estimate("gain_under_p", mean_p, se_p, 0.0, 0.0, "S is a P-martingale");
    report.verdicts = classification.verdicts;
    report.certificates.push(cert);
    Ok(report)
}
