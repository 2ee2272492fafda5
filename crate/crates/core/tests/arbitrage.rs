use arbkit::arbitrage::{
    classify, mean_variance_tradeoff, CertificateCheck, CertificateKind, ClassifyConfig, Condition, MeasureLabel,
    Thresholds, VerdictState,
};
use arbkit::measure::{decompose_paths, girsanov, DensityProcess, ThetaSource};
use arbkit::models::{characteristics, simulate, DensitySpec, ModelSpec};
use arbkit::paths::{ito_integral, GridProcess, TimeGrid};
use proptest::prelude::*;

fn drifted(mu: f64, sigma: f64, steps: usize, paths: usize) -> arbkit::measure::Decomposition {
    let model = ModelSpec::drifted_bm_1d(mu, sigma);
    let grid = TimeGrid::uniform(2.0, steps).unwrap();
    let s = simulate(&model, &grid, paths, 3).unwrap();
    decompose_paths(&characteristics(&model), &s, 1e-12, None).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// For a Brownian motion with drift `mu` and volatility `sigma` the
    /// trade-off is the deterministic `(mu / sigma)^2 t`.
    #[test]
    fn tradeoff_of_drifted_brownian_motion(mu in -2.0f64..2.0, sigma in 0.2f64..3.0) {
        let dec = drifted(mu, sigma, 50, 4);
        let r = mean_variance_tradeoff(&dec, None, &Thresholds::default()).unwrap();
        let expect = (mu / sigma).powi(2) * 2.0;
        for k in &r.terminal {
            prop_assert!((k - expect).abs() <= 1e-12 * (1.0 + expect));
        }
    }

    /// Scaling the drift by `alpha` scales the trade-off by `alpha^2`.
    #[test]
    fn tradeoff_scales_quadratically(mu in 0.1f64..2.0, alpha in 0.1f64..5.0) {
        let th = Thresholds::default();
        let base = mean_variance_tradeoff(&drifted(mu, 1.0, 20, 3), None, &th).unwrap();
        let scaled = mean_variance_tradeoff(&drifted(alpha * mu, 1.0, 20, 3), None, &th).unwrap();
        for (b, s) in base.terminal.iter().zip(&scaled.terminal) {
            prop_assert!((s - alpha * alpha * b).abs() <= 1e-10 * (1.0 + s.abs()));
        }
    }
}

#[test]
fn the_zero_strategy_certifies_nothing() {
    let model = ModelSpec::drifted_bm_1d(1.0, 1.0);
    let grid = TimeGrid::uniform(1.0, 64).unwrap();
    let s = simulate(&model, &grid, 200, 9).unwrap();
    let zero = ito_integral(&GridProcess::constant(&grid, 200, &[0.0]), &s).unwrap();
    let th = Thresholds::default();
    for kind in [
        CertificateKind::IncreasingProfit,
        CertificateKind::StrongArbitrage,
        CertificateKind::ArbitrageOpportunity,
        CertificateKind::FirstKind,
    ] {
        let mut check = CertificateCheck::new(kind, MeasureLabel::P, "H = 0", &th);
        check.add(&zero, None).unwrap();
        let cert = check.finish().unwrap();
        assert!(!cert.verified(), "{kind:?} accepted the zero strategy");
    }
}

#[test]
fn brownian_motion_with_drift_satisfies_every_condition() {
    let cfg = ClassifyConfig::new(ModelSpec::drifted_bm_1d(0.5, 1.0), TimeGrid::uniform(1.0, 128).unwrap(), 600, 11);
    let c = classify(&cfg).unwrap();
    for cond in [Condition::Nip, Condition::Nsa, Condition::Na1] {
        assert_eq!(c.verdict(cond).state, VerdictState::HoldsNumerically, "{cond:?}");
    }
    assert_eq!(c.tradeoff.divergent_paths, 0);
}

#[test]
fn verdicts_do_not_depend_on_the_chunk_size() {
    let grid = TimeGrid::uniform(1.0, 128).unwrap();
    let run = |chunk| {
        let mut cfg = ClassifyConfig::new(ModelSpec::StoppedBm { s0: 1.0 }, grid.clone(), 700, 5)
            .under(DensitySpec::PriceItself);
        cfg.chunk_size = chunk;
        classify(&cfg).unwrap()
    };
    let (a, b) = (run(700), run(256));
    for (va, vb) in a.verdicts.iter().zip(&b.verdicts) {
        assert_eq!(va.condition, vb.condition);
        assert_eq!(va.state, vb.state);
    }
    assert_eq!(a.weighted_paths, b.weighted_paths);
    assert_eq!(a.tradeoff.divergent_paths, b.tradeoff.divergent_paths);
    assert!((a.tradeoff.terminal_mean - b.tradeoff.terminal_mean).abs() <= 1e-9 * a.tradeoff.terminal_mean.abs());
}

#[test]
fn the_unit_density_changes_nothing() {
    let model = ModelSpec::drifted_bm_1d(0.3, 0.8);
    let grid = TimeGrid::uniform(1.0, 32).unwrap();
    let s = simulate(&model, &grid, 50, 2).unwrap();
    let dec = decompose_paths(&characteristics(&model), &s, 1e-12, None).unwrap();
    let z = DensityProcess::from_spec(&DensitySpec::Unit, &model, &s).unwrap();
    let q = girsanov(&dec, &z, &s, &model, &DensitySpec::Unit, &ThetaSource::Analytic, 1e-12).unwrap();
    assert_eq!(q.lambda_bar(), &dec.lambda);
    assert_eq!(q.nu_bar(), &dec.nu);
}
