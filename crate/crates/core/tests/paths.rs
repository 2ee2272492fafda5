use std::fs::File;
use std::io::{BufReader, BufWriter, Write};

use arbkit::models::{simulate, ModelSpec};
use arbkit::paths::io::{read_bundle, write_bundle};
use arbkit::paths::{ito_integral, GridProcess, TimeGrid};
use proptest::prelude::*;

#[test]
fn bundles_survive_a_file_round_trip() {
    let grid = TimeGrid::uniform(1.0, 32).unwrap();
    let bundle = simulate(&ModelSpec::ExpDefault { rate: 1.0 }, &grid, 17, 5).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("paths.bin");
    let mut w = BufWriter::new(File::create(&path).unwrap());
    write_bundle(&mut w, &bundle).unwrap();
    w.flush().unwrap();
    drop(w);
    let back = read_bundle(&mut BufReader::new(File::open(&path).unwrap())).unwrap();
    assert_eq!(back, bundle);
}

#[test]
fn truncated_files_are_rejected() {
    let grid = TimeGrid::uniform(1.0, 8).unwrap();
    let bundle = simulate(&ModelSpec::StoppedBm { s0: 1.0 }, &grid, 3, 5).unwrap();
    let mut bytes = Vec::new();
    write_bundle(&mut bytes, &bundle).unwrap();
    bytes.truncate(bytes.len() - 3);
    assert!(read_bundle(&mut bytes.as_slice()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// A constant position gains exactly its size times the price change.
    #[test]
    fn constant_positions_gain_the_price_change(h in -3.0f64..3.0, seed in 0u64..1000) {
        let grid = TimeGrid::uniform(1.0, 64).unwrap();
        let model = ModelSpec::drifted_bm_1d(0.2, 1.3);
        let s = simulate(&model, &grid, 8, seed).unwrap();
        let g = ito_integral(&GridProcess::constant(&grid, 8, &[h]), &s).unwrap();
        for p in 0..8 {
            let change = s.value(p, 64, 0) - s.value(p, 0, 0);
            prop_assert!((g.terminal(p) - h * change).abs() <= 1e-12 * (1.0 + change.abs()));
        }
    }

    /// Gains are linear in the integrand.
    #[test]
    fn gains_are_linear(a in -2.0f64..2.0, b in -2.0f64..2.0, seed in 0u64..1000) {
        let grid = TimeGrid::uniform(1.0, 32).unwrap();
        let s = simulate(&ModelSpec::StoppedBm { s0: 1.0 }, &grid, 6, seed).unwrap();
        let h1 = GridProcess::predictable(&s, 1, |view, out| {
            out[0] = view.current()[0];
            Ok(())
        }).unwrap();
        let h2 = GridProcess::constant(&grid, 6, &[1.0]);
        let combined = h1.combine(a, &h2, b).unwrap();
        let (g1, g2) = (ito_integral(&h1, &s).unwrap(), ito_integral(&h2, &s).unwrap());
        let g = ito_integral(&combined, &s).unwrap();
        for p in 0..6 {
            let expect = a * g1.terminal(p) + b * g2.terminal(p);
            prop_assert!((g.terminal(p) - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
        }
    }
}

#[test]
fn simulation_is_reproducible_per_path() {
    let grid = TimeGrid::uniform(1.0, 16).unwrap();
    let model = ModelSpec::Bes3 { x0: 1.0 };
    let all = simulate(&model, &grid, 10, 42).unwrap();
    let again = simulate(&model, &grid, 10, 42).unwrap();
    assert_eq!(all, again);
    let tail = arbkit::models::simulate_range(&model, &grid, 4, 6, 42).unwrap();
    for p in 0..6 {
        assert_eq!(tail.path(p), all.path(p + 4));
    }
}
