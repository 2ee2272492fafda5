//! Stopped Brownian motion under `Q = S_T . P`: the price becomes a
//! three-dimensional Bessel process, the constant claim 1 can be replicated
//! for less than 1, and holding the replicating hedge with zero capital is an
//! arbitrage opportunity, while no arbitrage of the first kind survives.

use super::{mean_se, Scenario, ScenarioConfig, ScenarioError, ScenarioReport};
use crate::arbitrage::{
    check_na, chunk_ranges, prepare_chunk, CertificateCheck, CertificateKind, Classifier, ClassifyConfig, Condition,
    MeasureLabel, VerdictState,
};
use crate::measure::{reweight, SmdAccumulator};
use crate::models::{DensitySpec, ModelSpec};
use crate::numerics::stats::{normal_cdf, normal_pdf, ols_slope};
use crate::paths::{ito_integral_masked, GridProcess, PathBundle, PathsError};

const S0: f64 = 1.0;
/// Restrictions of the simulation grid over which the tracking error is
/// compared; the hedge is rebuilt on each.
const TRACKING_FACTORS: [usize; 3] = [16, 4, 1];
const MIN_TRACKING_STEPS: usize = 16;

/// Probability that Brownian motion from `x` stays positive for the
/// remaining time `horizon - t`: the price of the claim 1 on the Bessel
/// dynamics.
pub fn bessel_value(t: f64, x: f64, horizon: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let tau = horizon - t;
    if tau <= 0.0 {
        return 1.0;
    }
    2.0 * normal_cdf(x / tau.sqrt()) - 1.0
}

/// `d/dx` of [`bessel_value`].
pub fn bessel_delta(t: f64, x: f64, horizon: f64) -> f64 {
    let tau = horizon - t;
    if tau <= 0.0 || x < 0.0 {
        return 0.0;
    }
    let s = tau.sqrt();
    2.0 * normal_pdf(x / s) / s
}

/// Replicating hedge `H_t = d/dx u(t, S_t)`, held constant from the last
/// grid time before `horizon - cutoff`.
pub fn bessel_hedge(bundle: &PathBundle, cutoff: f64) -> Result<GridProcess, PathsError> {
    let grid = bundle.grid();
    let horizon = grid.horizon();
    let last_active = grid
        .times()
        .iter()
        .rposition(|&t| t < horizon - cutoff)
        .unwrap_or(0);
    GridProcess::predictable(bundle, 1, |view, out| {
        let k = view.index().min(last_active);
        out[0] = bessel_delta(view.time(k)?, view.state(k)?[0], horizon);
        Ok(())
    })
}

/// `P(R_T <= x)` for a three-dimensional Bessel process from `r0`.
fn bessel_cdf(x: f64, r0: f64, horizon: f64) -> f64 {
    let density = |y: f64| {
        let g = |u: f64| (-u * u / (2.0 * horizon)).exp() / (2.0 * std::f64::consts::PI * horizon).sqrt();
        y / r0 * (g(y - r0) - g(y + r0))
    };
    let n = 400;
    let h = x / n as f64;
    let mut acc = density(0.0) + density(x);
    for i in 1..n {
        acc += density(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

struct TrackingLevel {
    factor: usize,
    errors: Vec<f64>,
    weights: Vec<f64>,
}

fn tracking_errors(bundle: &PathBundle, weights: &[f64], u0: f64) -> Result<Vec<f64>, PathsError> {
    let grid = bundle.grid();
    let horizon = grid.horizon();
    let mask: Vec<bool> = weights.iter().map(|w| *w > 0.0).collect();
    let h = bessel_hedge(bundle, 2.0 * grid.max_dt())?;
    let g = ito_integral_masked(&h, bundle, Some(&mask))?;
    Ok((0..bundle.n_paths())
        .map(|p| {
            if !mask[p] {
                return 0.0;
            }
            g.path(p)
                .iter()
                .enumerate()
                .map(|(i, gi)| (u0 + gi - bessel_value(grid.time(i), bundle.value(p, i, 0), horizon)).abs())
                .fold(0.0, f64::max)
        })
        .collect())
}

pub fn scenario_bessel(cfg: &ScenarioConfig) -> Result<ScenarioReport, ScenarioError> {
    let mut report = ScenarioReport::new(Scenario::Bessel, cfg);
    let grid = &cfg.grid;
    let horizon = grid.horizon();
    let dt = grid.max_dt();
    let u0 = bessel_value(0.0, S0, horizon);
    let model = ModelSpec::StoppedBm { s0: S0 };
    let ccfg = ClassifyConfig {
        model,
        grid: grid.clone(),
        n_paths: cfg.n_paths,
        seed: cfg.seed,
        density: Some(DensitySpec::PriceItself),
        thresholds: cfg.thresholds.clone(),
        chunk_size: cfg.chunk_size,
        estimate_theta: false,
    };
    let th = &cfg.thresholds;
    let eps_jump = th.eps_jump_for(dt);

    // Terminal gains can only be negative where S_T is within a few grid
    // standard deviations of zero; that region's Q-mass is the allowance.
    let mut th_ao = th.clone();
    th_ao.max_violation_mass = bessel_cdf(4.0 * dt.sqrt(), S0, horizon);
    let mut ao = CertificateCheck::new(
        CertificateKind::ArbitrageOpportunity,
        MeasureLabel::Q,
        "H = d/dx u(t, S_t) with zero initial capital, frozen on [T - 2 dt, T]",
        &th_ao,
    )
    .with_admissibility(1.0);
    let mut classifier = Classifier::new(MeasureLabel::Q, th)?;
    let mut smd = SmdAccumulator::new(1, th.n_blocks, eps_jump, th.diagnostic_threshold);

    let factors: Vec<usize> = TRACKING_FACTORS
        .into_iter()
        .filter(|f| grid.steps() % f == 0 && grid.steps() / f >= MIN_TRACKING_STEPS)
        .collect();
    let mut levels: Vec<TrackingLevel> = factors
        .iter()
        .map(|&factor| TrackingLevel {
            factor,
            errors: vec![],
            weights: vec![],
        })
        .collect();
    let (mut gains_t, mut z_t, mut inv_s, mut absorbed) = (vec![], vec![], vec![], vec![]);

    for (first, n) in chunk_ranges(cfg.n_paths, cfg.chunk_size) {
        let chunk = prepare_chunk(&ccfg, first, n)?;
        classifier.add_chunk(&chunk)?;
        let z = chunk.density.as_ref().expect("prepared under Q");
        let w = z.terminals();
        let mask: Vec<bool> = w.iter().map(|x| *x > 0.0).collect();
        let bundle = &chunk.bundle;

        let h = bessel_hedge(bundle, 2.0 * dt)?;
        let g = ito_integral_masked(&h, bundle, Some(&mask))?;
        ao.add(&g, Some(&w))?;
        gains_t.extend(g.terminals());

        for level in &mut levels {
            let errs = if level.factor == 1 {
                tracking_errors(bundle, &w, u0)?
            } else {
                tracking_errors(&bundle.restrict(level.factor)?, &w, u0)?
            };
            level.errors.extend(errs);
            level.weights.extend_from_slice(&w);
        }

        smd.add(&GridProcess::constant(bundle.grid(), n, &[1.0]), z, bundle)?;
        for p in 0..n {
            let s_t = bundle.value(p, grid.steps(), 0);
            inv_s.push(if mask[p] { 1.0 / s_t } else { 0.0 });
            absorbed.push(if s_t == 0.0 { 1.0 } else { 0.0 });
        }
        z_t.extend(w);
    }

    let classification = classifier.finish()?;
    let ao_cert = ao.finish()?;
    let cost_payoff: Vec<f64> = gains_t.iter().map(|g| 1.0 - g).collect();
    let cost = reweight(&cost_payoff, &z_t)?;
    let gain = reweight(&gains_t, &z_t)?;
    let inverse = reweight(&inv_s, &z_t)?;
    let (p_abs, se_abs) = mean_se(&absorbed);
    let diag = smd.finish()?;

    report.estimate(
        "absorption_probability",
        p_abs,
        se_abs,
        2.0 * normal_cdf(-S0 / horizon.sqrt()),
        0.0,
        "reflection principle: 2 Phi(-s0 / sqrt(T))",
    );
    report.estimate(
        "replication_cost",
        cost.estimate,
        cost.stderr,
        u0,
        0.005,
        "u(0, s0) = 2 Phi(s0 / sqrt(T)) - 1, probability that Brownian motion stays positive",
    );
    report.estimate(
        "certificate_gain",
        gain.estimate,
        gain.stderr,
        1.0 - u0,
        0.005,
        "1 - u(0, s0)",
    );
    report.flag(
        "arbitrage_opportunity_verified",
        ao_cert.verified(),
        "hedge with zero capital is admissible with non-negative, non-null terminal gain under Q",
    );
    let na1 = classification.verdict(Condition::Na1);
    report.flag(
        "na1_holds_under_q",
        na1.state == VerdictState::HoldsNumerically,
        "continuous approach of the density to zero preserves NA1",
    );
    let nip = classification.verdict(Condition::Nip).clone();
    let na = check_na(&nip, Some(ao_cert.clone()), th);
    report.flag(
        "na_fails_under_q",
        na.state == VerdictState::FailsWithCertificate,
        "a verified arbitrage opportunity refutes NA",
    );
    report.estimate(
        "inverse_price_mean",
        inverse.estimate,
        inverse.stderr,
        u0,
        0.0,
        "E_Q[1/S_T] = P(S_T > 0) for the inverse Bessel process",
    );
    report.flag(
        "supermartingale_gap_exceeds_quarter",
        1.0 / S0 - inverse.estimate > 0.25,
        "1/S_0 - E_Q[1/S_T] = 1 - u(0, s0) > 0.25 at T = 1",
    );
    report.flag(
        "inverse_density_diagnostic_passes",
        diag.pass,
        "1/Z is a local martingale under Q",
    );

    let points: Vec<(f64, f64)> = levels
        .iter()
        .map(|l| {
            let e = reweight(&l.errors, &l.weights).map(|e| e.estimate).unwrap_or(f64::NAN);
            ((dt * l.factor as f64).ln(), e.ln())
        })
        .collect();
    if points.len() == TRACKING_FACTORS.len() {
        let (x, y): (Vec<f64>, Vec<f64>) = points.iter().cloned().unzip();
        report.within(
            "tracking_error_slope",
            ols_slope(&x, &y),
            0.5,
            0.2,
            "hedging error of a discretely rebalanced delta hedge decays like sqrt(dt)",
        );
    }
    if let Some(&(_, finest)) = points.last() {
        report.within(
            "tracking_error_finest",
            finest.exp(),
            0.0,
            10.0 * dt.sqrt(),
            "max |V_t - u(t, S_t)| is of order sqrt(dt)",
        );
    }

    let mut verdicts = classification.verdicts;
    if let Some(v) = verdicts.iter_mut().find(|v| v.condition == Condition::Na) {
        *v = na;
    }
    report.verdicts = verdicts;
    report.certificates.push(ao_cert);
    report.diagnostics.push(diag);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_function_boundaries() {
        assert_eq!(bessel_value(0.0, 0.0, 1.0), 0.0);
        assert_eq!(bessel_value(1.0, 0.3, 1.0), 1.0);
        assert!((bessel_value(0.0, 1.0, 1.0) - 0.682_689_492_137_085_9).abs() < 1e-14);
    }

    #[test]
    fn delta_matches_finite_difference() {
        let (t, x, h) = (0.3, 0.7, 1e-6);
        let fd = (bessel_value(t, x + h, 1.0) - bessel_value(t, x - h, 1.0)) / (2.0 * h);
        assert!((fd - bessel_delta(t, x, 1.0)).abs() < 1e-8);
    }

    #[test]
    fn bessel_cdf_is_a_distribution() {
        assert!(bessel_cdf(0.0, 1.0, 1.0).abs() < 1e-15);
        assert!((bessel_cdf(12.0, 1.0, 1.0) - 1.0).abs() < 1e-9);
        // Near zero the density is ~ c y^2.
        let small = bessel_cdf(0.01, 1.0, 1.0);
        let smaller = bessel_cdf(0.005, 1.0, 1.0);
        assert!((small / smaller - 8.0).abs() < 0.01);
    }
}
