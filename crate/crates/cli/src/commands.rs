use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use arbkit::arbitrage::{
    chunk_ranges, mean_variance_tradeoff, prepare_chunk, prepare_chunk_with_values, ArbitrageError, Chunk,
    Classifier, ClassifyConfig, MeasureLabel, TradeoffReport,
};
use arbkit::measure::{
    mvt_under_q, reweight, stopping_times, theta_over_z_time_average, Approach, ProportionEstimate, SmdAccumulator,
};
use arbkit::models::{simulate, ModelSpec};
use arbkit::paths::io::{read_bundle, write_bundle};
use arbkit::paths::GridProcess;
use arbkit::scenarios::{Scenario, ScenarioConfig};

use crate::config::{MeasureChange, RunConfig};
use crate::report::{ClassificationEvidence, MeasureChangeSummary, Report, SimulationSummary};
use crate::CliError;

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn model(cfg: &RunConfig) -> &ModelSpec {
    cfg.model.as_ref().expect("model-scoped configs carry a model")
}

fn classify_config(cfg: &RunConfig) -> ClassifyConfig {
    ClassifyConfig {
        model: model(cfg).clone(),
        grid: cfg.grid.clone(),
        n_paths: cfg.n_paths,
        seed: cfg.seed,
        density: cfg.measure_change.density().cloned(),
        thresholds: cfg.thresholds.clone(),
        chunk_size: cfg.chunk_size,
        estimate_theta: cfg.estimate_theta,
    }
}

/// Sampled density values from a path file: one component, the run grid,
/// at least `n_paths` paths.
fn density_values(cfg: &RunConfig, path: &Path) -> Result<GridProcess, CliError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let bundle = read_bundle(&mut BufReader::new(file)).map_err(|e| io_err(path, e))?;
    let bad = |msg: String| CliError::Config(format!("measure_change.file: {msg}"));
    if bundle.dim() != 1 {
        return Err(bad(format!("expected one component, found {}", bundle.dim())));
    }
    if bundle.grid() != &cfg.grid {
        return Err(bad("the density grid differs from the run grid".into()));
    }
    if bundle.n_paths() < cfg.n_paths {
        return Err(bad(format!("{} paths for a run of {}", bundle.n_paths(), cfg.n_paths)));
    }
    GridProcess::from_values(bundle.grid().clone(), bundle.n_paths(), 1, bundle.values().to_vec())
        .map_err(|e| bad(e.to_string()))
}

/// Prepares every chunk of the run in order and hands it to `visit`.
fn for_each_chunk(
    cfg: &RunConfig,
    mut visit: impl FnMut(&Chunk) -> Result<(), CliError>,
) -> Result<(), CliError> {
    let ccfg = classify_config(cfg);
    let values = match &cfg.measure_change {
        MeasureChange::File(path) => Some(density_values(cfg, path)?),
        _ => None,
    };
    for (first, n) in chunk_ranges(cfg.n_paths, cfg.chunk_size) {
        let chunk = match &values {
            Some(z) => prepare_chunk_with_values(&ccfg, z, first, n),
            None => prepare_chunk(&ccfg, first, n),
        }
        .map_err(run_err)?;
        visit(&chunk)?;
    }
    Ok(())
}

/// Errors a valid config can still run into (an incompatible combination
/// the library detects) are reported as configuration errors.
pub fn run_err(e: impl Into<ArbitrageError>) -> CliError {
    match e.into() {
        ArbitrageError::Threshold(name, msg) => CliError::Config(format!("thresholds.{name}: {msg}")),
        other => CliError::Config(other.to_string()),
    }
}

pub fn simulate_cmd(cfg: &RunConfig, out: Option<&Path>) -> Result<Report, CliError> {
    let target = out
        .or(cfg.output_paths.as_deref())
        .ok_or_else(|| CliError::Config("output.paths: required (or pass --out)".into()))?;
    let m = model(cfg);
    let bundle = simulate(m, &cfg.grid, cfg.n_paths, cfg.seed).map_err(run_err)?;
    let file = File::create(target).map_err(|e| io_err(target, e))?;
    let mut w = BufWriter::new(file);
    write_bundle(&mut w, &bundle).map_err(|e| io_err(target, e))?;
    w.flush().map_err(|e| io_err(target, e))?;
    let bytes = std::fs::metadata(target).map_err(|e| io_err(target, e))?.len();
    let mut report = Report::new("simulate", cfg.echo.clone());
    report.simulation = Some(SimulationSummary {
        model: m.name().to_owned(),
        dim: bundle.dim(),
        steps: cfg.grid.steps(),
        n_paths: bundle.n_paths(),
        bytes,
        aux: bundle.aux_names().map(str::to_owned).collect(),
    });
    Ok(report)
}

pub fn classify_cmd(cfg: &RunConfig) -> Result<Report, CliError> {
    let measure = if cfg.measure_change.is_none() {
        MeasureLabel::P
    } else {
        MeasureLabel::Q
    };
    let mut classifier = Classifier::new(measure, &cfg.thresholds).map_err(run_err)?;
    for_each_chunk(cfg, |chunk| classifier.add_chunk(chunk).map_err(run_err))?;
    let (verdicts, evidence) = ClassificationEvidence::split(classifier.finish().map_err(run_err)?);
    let mut report = Report::new("classify", cfg.echo.clone());
    report.verdicts = verdicts
        .into_iter()
        .filter(|v| cfg.conditions.contains(&v.condition))
        .collect();
    report.classification = Some(evidence);
    Ok(report)
}

pub fn change_measure_cmd(cfg: &RunConfig) -> Result<Report, CliError> {
    if cfg.measure_change.is_none() {
        return Err(CliError::Config("measure_change: required by change-measure".into()));
    }
    let th = &cfg.thresholds;
    let d = model(cfg).dim();
    let eps_jump = th.eps_jump_for(cfg.grid.max_dt());
    let mut tradeoff_p = TradeoffReport::empty(true);
    let mut tradeoff_q = TradeoffReport::empty(true);
    let mut bound = None::<arbkit::measure::BoundCheck>;
    let mut smd = SmdAccumulator::new(d, th.n_blocks, eps_jump, th.diagnostic_threshold);
    let (mut z_t, mut s_t) = (Vec::new(), vec![Vec::new(); d]);
    let (mut zeros, mut jumps, mut continuous) = (0usize, 0usize, 0usize);
    let (mut theta_sum, mut theta_weight) = (0.0, 0usize);

    for_each_chunk(cfg, |chunk| {
        let z = chunk.density.as_ref().expect("prepared with a density");
        let q = chunk.q.as_ref().expect("prepared with a density");
        let partner_q = chunk.partner_q.as_ref().expect("prepared with a density");
        let mut p_report = mean_variance_tradeoff(&chunk.decomp_p, Some(&chunk.partner_p), th).map_err(run_err)?;
        p_report.k_hat = None;
        tradeoff_p.append(p_report);
        let (mut q_report, b) = mvt_under_q(q, &chunk.decomp_p, z, Some(partner_q), th).map_err(run_err)?;
        q_report.k_hat = None;
        tradeoff_q.append(q_report);
        match &mut bound {
            Some(acc) => acc.merge(&b),
            None => bound = Some(b),
        }

        let stopping = stopping_times(z, &th.ladder, eps_jump);
        for p in &stopping.paths {
            match p.approach {
                Approach::Jump => jumps += 1,
                Approach::Continuous => continuous += 1,
                Approach::None => {}
            }
        }
        let charged = q.decomposition.mask.iter().filter(|m| **m).count();
        if charged > 0 {
            theta_sum += theta_over_z_time_average(q, z) * charged as f64;
            theta_weight += charged;
        }
        smd.add(&GridProcess::constant(&cfg.grid, chunk.bundle.n_paths(), &[1.0]), z, &chunk.bundle)
            .map_err(run_err)?;
        let w = z.terminals();
        zeros += w.iter().filter(|x| **x <= 0.0).count();
        for (j, col) in s_t.iter_mut().enumerate() {
            col.extend(chunk.bundle.terminal(j));
        }
        z_t.extend(w);
        Ok(())
    })?;

    let ones = vec![1.0; z_t.len()];
    let summary = MeasureChangeSummary {
        density: cfg.measure_change.label(),
        theta: if cfg.estimate_theta || matches!(cfg.measure_change, MeasureChange::File(_)) {
            "estimated".into()
        } else {
            "analytic".into()
        },
        density_mean: reweight(&ones, &z_t).map_err(run_err)?,
        zero_probability: ProportionEstimate::from_counts(zeros, cfg.n_paths),
        jump_probability: ProportionEstimate::from_counts(jumps, cfg.n_paths),
        approach: if jumps > 0 {
            Approach::Jump
        } else if continuous > 0 {
            Approach::Continuous
        } else {
            Approach::None
        },
        terminal_mean_q: s_t
            .iter()
            .map(|col| reweight(col, &z_t))
            .collect::<Result<_, _>>()
            .map_err(run_err)?,
        theta_over_z_mean: if theta_weight > 0 {
            theta_sum / theta_weight as f64
        } else {
            0.0
        },
        tradeoff_p: tradeoff_p.summary(),
        tradeoff_q: tradeoff_q.summary(),
        tradeoff_bound: bound.expect("at least one chunk"),
        inverse_density: smd.finish().map_err(run_err)?,
    };
    let mut report = Report::new("change-measure", cfg.echo.clone());
    report.measure_change = Some(summary);
    Ok(report)
}

pub fn scenario_cmd(scenario: Scenario, cfg: &RunConfig) -> Result<Report, CliError> {
    let scfg = ScenarioConfig {
        grid: cfg.grid.clone(),
        n_paths: cfg.n_paths,
        seed: cfg.seed,
        chunk_size: cfg.chunk_size,
        thresholds: cfg.thresholds.clone(),
    };
    let result = scenario.run(&scfg).map_err(|e| CliError::Config(e.to_string()))?;
    let mut report = Report::new("scenario", cfg.echo.clone());
    report.scenario = Some(result);
    Ok(report)
}
