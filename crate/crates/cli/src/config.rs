//! The flat `key = value` run configuration.
//!
//! Keys are dotted (`model.kind = stopped_bm`, `thresholds.k_max = 1e6`),
//! one per line; blank lines and lines starting with `#` are ignored. Lists
//! are comma separated or written as JSON arrays. A report file is also
//! accepted wherever a config file is: its `config` echo is read back.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use arbkit::arbitrage::{Condition, Thresholds, DEFAULT_CHUNK_SIZE};
use arbkit::models::{density_process, DensitySpec, ModelSpec};
use arbkit::paths::TimeGrid;
use arbkit::scenarios::{DEFAULT_HORIZON, DEFAULT_PATHS, DEFAULT_SEED, DEFAULT_STEPS};
use serde_json::{Map, Number, Value};

use crate::CliError;

pub type FlatConfig = BTreeMap<String, String>;

/// Which keys a command accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    /// simulate, classify and change-measure: a model is required.
    Model,
    /// scenario runs: grid, sample size, seed and thresholds only.
    Scenario,
}

fn config_err(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{key}: {msg}"))
}

pub fn parse_flat(text: &str) -> Result<FlatConfig, CliError> {
    let mut map = FlatConfig::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`", n + 1)))?;
        let key = key.trim();
        let valid = !key.is_empty()
            && key
                .chars()
                .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' || c == '.');
        if !valid {
            return Err(CliError::Config(format!("line {}: invalid key `{key}`", n + 1)));
        }
        if map.insert(key.to_owned(), value.trim().to_owned()).is_some() {
            return Err(CliError::Config(format!("line {}: duplicate key `{key}`", n + 1)));
        }
    }
    Ok(map)
}

/// Reads a config file, or the config echo of a report file.
pub fn load(path: &Path) -> Result<FlatConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    if !text.trim_start().starts_with('{') {
        return parse_flat(&text);
    }
    let value: Value =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let echo = value
        .get("config")
        .and_then(Value::as_object)
        .ok_or_else(|| CliError::Config(format!("{}: report has no config echo", path.display())))?;
    echo.iter()
        .map(|(k, v)| match v {
            Value::String(s) => Ok((k.clone(), s.clone())),
            _ => Err(config_err(k, "config echo values must be strings")),
        })
        .collect()
}

/// Applies a `KEY=VALUE` override.
pub fn apply_override(map: &mut FlatConfig, assignment: &str) -> Result<(), CliError> {
    let (key, value) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{assignment}` is not KEY=VALUE")))?;
    map.insert(key.trim().to_owned(), value.trim().to_owned());
    Ok(())
}

/// How the run changes measure.
#[derive(Debug, Clone, PartialEq)]
pub enum MeasureChange {
    None,
    /// The density the catalog pairs with the model.
    Canonical(DensitySpec),
    Density(DensitySpec),
    /// Sampled density values: a path file with one component.
    File(PathBuf),
}

impl MeasureChange {
    pub fn is_none(&self) -> bool {
        matches!(self, Self::None)
    }

    pub fn density(&self) -> Option<&DensitySpec> {
        match self {
            Self::Canonical(d) | Self::Density(d) => Some(d),
            _ => None,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::None => "none".into(),
            Self::Canonical(d) | Self::Density(d) => d.name().into(),
            Self::File(_) => "file".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scope: Scope,
    pub model: Option<ModelSpec>,
    pub grid: TimeGrid,
    pub n_paths: usize,
    pub seed: u64,
    pub chunk_size: usize,
    pub thresholds: Thresholds,
    pub measure_change: MeasureChange,
    pub estimate_theta: bool,
    pub conditions: Vec<Condition>,
    pub output_paths: Option<PathBuf>,
    pub output_report: Option<PathBuf>,
    /// The resolved configuration, defaults included, without output
    /// locations: feeding it back reproduces the run.
    pub echo: FlatConfig,
}

const DENSITY_KINDS: [&str; 5] = ["unit", "price_itself", "default_indicator", "exponential", "bounded_sine"];

fn scalar(key: &str, raw: &str) -> Result<Value, CliError> {
    let raw = raw.trim();
    if let Ok(u) = raw.parse::<u64>() {
        return Ok(Value::Number(u.into()));
    }
    if let Ok(i) = raw.parse::<i64>() {
        return Ok(Value::Number(i.into()));
    }
    if let Ok(x) = raw.parse::<f64>() {
        return Number::from_f64(x)
            .map(Value::Number)
            .ok_or_else(|| config_err(key, format!("`{raw}` is not a finite number")));
    }
    Ok(match raw {
        "true" => Value::Bool(true),
        "false" => Value::Bool(false),
        "none" | "null" => Value::Null,
        _ => Value::String(raw.to_owned()),
    })
}

fn value(key: &str, raw: &str, list: bool) -> Result<Value, CliError> {
    let raw = raw.trim();
    if raw.starts_with('[') {
        return serde_json::from_str(raw).map_err(|e| config_err(key, e));
    }
    if raw.contains(',') {
        return raw
            .split(',')
            .map(|item| scalar(key, item))
            .collect::<Result<Vec<_>, _>>()
            .map(Value::Array);
    }
    let v = scalar(key, raw)?;
    Ok(if list && !v.is_null() { Value::Array(vec![v]) } else { v })
}

fn count(key: &str, raw: &str) -> Result<usize, CliError> {
    let raw = raw.trim();
    if let Ok(n) = raw.parse::<usize>() {
        return Ok(n);
    }
    match raw.parse::<f64>() {
        Ok(x) if x >= 0.0 && x.fract() == 0.0 && x < usize::MAX as f64 => Ok(x as usize),
        _ => Err(config_err(key, format!("`{raw}` is not a non-negative integer"))),
    }
}

fn number(key: &str, raw: &str) -> Result<f64, CliError> {
    match raw.trim().parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(config_err(key, format!("`{raw}` is not a finite number"))),
    }
}

/// Collects `prefix.*` keys into a JSON object, consuming them from `rest`.
fn group(rest: &mut FlatConfig, prefix: &str, lists: &[&str]) -> Result<Map<String, Value>, CliError> {
    let dotted = format!("{prefix}.");
    let keys: Vec<String> = rest.keys().filter(|k| k.starts_with(&dotted)).cloned().collect();
    let mut obj = Map::new();
    for key in keys {
        let raw = rest.remove(&key).expect("key was listed");
        let field = &key[dotted.len()..];
        obj.insert(field.to_owned(), value(&key, &raw, lists.contains(&field))?);
    }
    Ok(obj)
}

/// Renders a JSON value back into the flat syntax.
fn render(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Array(items) => format!("[{}]", items.iter().map(render).collect::<Vec<_>>().join(", ")),
        other => other.to_string(),
    }
}

fn echo_group(echo: &mut FlatConfig, prefix: &str, v: &Value) {
    if let Value::Object(obj) = v {
        for (k, item) in obj {
            if !item.is_null() {
                echo.insert(format!("{prefix}.{k}"), render(item));
            }
        }
    }
}

impl RunConfig {
    pub fn from_flat(map: &FlatConfig, scope: Scope) -> Result<Self, CliError> {
        let mut rest = map.clone();
        let mut take = |key: &str| rest.remove(key);

        let n_paths = take("n_paths").map_or(Ok(DEFAULT_PATHS), |v| count("n_paths", &v))?;
        if n_paths == 0 {
            return Err(config_err("n_paths", "must be at least 1, got 0"));
        }
        let seed = match take("seed") {
            None => DEFAULT_SEED,
            Some(v) => v
                .trim()
                .parse::<u64>()
                .map_err(|_| config_err("seed", format!("`{v}` is not an unsigned 64-bit integer")))?,
        };
        let chunk_size = take("chunk_size").map_or(Ok(DEFAULT_CHUNK_SIZE), |v| count("chunk_size", &v))?;
        if chunk_size == 0 {
            return Err(config_err("chunk_size", "must be at least 1, got 0"));
        }
        let conditions_raw = take("conditions");
        let output_paths = take("output.paths").map(PathBuf::from);
        let output_report = take("output.report").map(PathBuf::from);
        let measure_raw = take("measure_change");

        let spacing = take("grid.spacing").unwrap_or_else(|| "uniform".into());
        let horizon_raw = take("grid.horizon");
        let steps_raw = take("grid.steps");
        let times_raw = take("grid.times");
        let grid = match spacing.as_str() {
            "uniform" => {
                if times_raw.is_some() {
                    return Err(config_err("grid.times", "only used with grid.spacing = explicit"));
                }
                let horizon = horizon_raw.map_or(Ok(DEFAULT_HORIZON), |v| number("grid.horizon", &v))?;
                let steps = steps_raw.map_or(Ok(DEFAULT_STEPS), |v| count("grid.steps", &v))?;
                if steps < 2 {
                    return Err(config_err("grid.steps", format!("must be at least 2, got {steps}")));
                }
                TimeGrid::uniform(horizon, steps).map_err(|e| config_err("grid.horizon", e))?
            }
            "explicit" => {
                if horizon_raw.is_some() || steps_raw.is_some() {
                    return Err(config_err("grid.spacing", "explicit grids take grid.times only"));
                }
                let raw = times_raw.ok_or_else(|| config_err("grid.times", "required with explicit spacing"))?;
                let times = serde_json::from_value::<Vec<f64>>(value("grid.times", &raw, true)?)
                    .map_err(|e| config_err("grid.times", e))?;
                if times.len() < 3 {
                    return Err(config_err(
                        "grid.times",
                        format!("must be at least 2, got {} steps", times.len().saturating_sub(1)),
                    ));
                }
                TimeGrid::from_times(times).map_err(|e| config_err("grid.times", e))?
            }
            other => return Err(config_err("grid.spacing", format!("`{other}` is not uniform or explicit"))),
        };

        let mut th_obj = match serde_json::to_value(Thresholds::default()) {
            Ok(Value::Object(o)) => o,
            _ => unreachable!("thresholds serialise to an object"),
        };
        for (k, v) in group(&mut rest, "thresholds", &["ladder", "v_ladder"])? {
            if !th_obj.contains_key(&k) {
                return Err(config_err(&format!("thresholds.{k}"), "unknown threshold"));
            }
            th_obj.insert(k, v);
        }
        let thresholds: Thresholds =
            serde_json::from_value(Value::Object(th_obj)).map_err(|e| config_err("thresholds", e))?;
        thresholds.validate().map_err(|e| match e {
            arbkit::arbitrage::ArbitrageError::Threshold(name, msg) => config_err(&format!("thresholds.{name}"), msg),
            other => config_err("thresholds", other),
        })?;

        let mut model_obj = group(&mut rest, "model", &[])?;
        let mut measure_obj = group(&mut rest, "measure_change", &[])?;
        let theta_mode = measure_obj.remove("theta");
        let mut echo = FlatConfig::new();

        let (model, measure_change, estimate_theta, conditions) = match scope {
            Scope::Scenario => {
                let stray = [
                    (!model_obj.is_empty(), "model"),
                    (measure_raw.is_some() || !measure_obj.is_empty() || theta_mode.is_some(), "measure_change"),
                    (conditions_raw.is_some(), "conditions"),
                    (output_paths.is_some(), "output.paths"),
                ];
                if let Some((_, key)) = stray.iter().find(|(present, _)| *present) {
                    return Err(config_err(key, "not used by scenario runs"));
                }
                (None, MeasureChange::None, false, vec![])
            }
            Scope::Model => {
                let kind = model_obj
                    .get("kind")
                    .and_then(Value::as_str)
                    .ok_or_else(|| config_err("model.kind", "required"))?
                    .to_owned();
                if kind == "drifted_bm" {
                    for f in ["mu", "sigma", "s0"] {
                        if let Some(v) = model_obj.get_mut(f) {
                            if !v.is_array() {
                                *v = Value::Array(vec![v.take()]);
                            }
                        }
                    }
                }
                let model: ModelSpec =
                    serde_json::from_value(Value::Object(model_obj)).map_err(|e| config_err("model", e))?;
                model.validate().map_err(|e| match e {
                    arbkit::models::ModelError::InvalidParameter { field, reason } => {
                        config_err(&format!("model.{field}"), reason)
                    }
                })?;

                let measure_change = match measure_raw.as_deref().unwrap_or("none") {
                    "none" => {
                        if let Some(k) = measure_obj.keys().next() {
                            return Err(config_err(&format!("measure_change.{k}"), "no measure change configured"));
                        }
                        MeasureChange::None
                    }
                    "canonical" => {
                        if let Some(k) = measure_obj.keys().next() {
                            return Err(config_err(&format!("measure_change.{k}"), "canonical densities take no parameters"));
                        }
                        let d = density_process(&model).ok_or_else(|| {
                            config_err("measure_change", format!("{} has no canonical density", model.name()))
                        })?;
                        MeasureChange::Canonical(d)
                    }
                    "file" => {
                        let file = measure_obj
                            .remove("file")
                            .ok_or_else(|| config_err("measure_change.file", "required"))?;
                        if let Some(k) = measure_obj.keys().next() {
                            return Err(config_err(&format!("measure_change.{k}"), "unknown key"));
                        }
                        MeasureChange::File(PathBuf::from(render(&file)))
                    }
                    kind if DENSITY_KINDS.contains(&kind) => {
                        measure_obj.insert("kind".into(), Value::String(kind.into()));
                        let d: DensitySpec = serde_json::from_value(Value::Object(measure_obj))
                            .map_err(|e| config_err("measure_change", e))?;
                        MeasureChange::Density(d)
                    }
                    other => {
                        return Err(config_err(
                            "measure_change",
                            format!("`{other}` is not none, canonical, file or one of {}", DENSITY_KINDS.join(", ")),
                        ))
                    }
                };
                if let Some(d) = measure_change.density() {
                    d.check_compatible(&model).map_err(|e| config_err("measure_change", e))?;
                }
                let estimate_theta = match theta_mode.as_ref().map(render).as_deref() {
                    None | Some("analytic") => false,
                    Some("estimated") => true,
                    Some(other) => {
                        return Err(config_err(
                            "measure_change.theta",
                            format!("`{other}` is not analytic or estimated"),
                        ))
                    }
                };

                let conditions = match conditions_raw.as_deref().map(str::trim) {
                    None | Some("all") => vec![Condition::Nip, Condition::Nsa, Condition::Na1, Condition::Na],
                    Some(list) => parse_conditions(list)?,
                };

                echo_group(&mut echo, "model", &serde_json::to_value(&model).expect("model serialises"));
                echo.insert("measure_change".into(), measure_raw.unwrap_or_else(|| "none".into()));
                match &measure_change {
                    MeasureChange::Density(d) => {
                        let mut v = serde_json::to_value(d).expect("density serialises");
                        if let Value::Object(o) = &mut v {
                            o.remove("kind");
                        }
                        echo_group(&mut echo, "measure_change", &v);
                    }
                    MeasureChange::File(p) => {
                        echo.insert("measure_change.file".into(), p.display().to_string());
                    }
                    _ => {}
                }
                if !measure_change.is_none() {
                    let mode = if estimate_theta { "estimated" } else { "analytic" };
                    echo.insert("measure_change.theta".into(), mode.into());
                }
                echo.insert(
                    "conditions".into(),
                    conditions.iter().map(|c| c.name()).collect::<Vec<_>>().join(", "),
                );
                (Some(model), measure_change, estimate_theta, conditions)
            }
        };

        if let Some(key) = rest.keys().next() {
            return Err(config_err(key, "unknown key"));
        }

        if grid_is_uniform(&grid) {
            echo.insert("grid.spacing".into(), "uniform".into());
            echo.insert("grid.horizon".into(), render(&serde_json::json!(grid.horizon())));
            echo.insert("grid.steps".into(), grid.steps().to_string());
        } else {
            echo.insert("grid.spacing".into(), "explicit".into());
            echo.insert("grid.times".into(), render(&serde_json::json!(grid.times())));
        }
        echo.insert("n_paths".into(), n_paths.to_string());
        echo.insert("seed".into(), seed.to_string());
        echo.insert("chunk_size".into(), chunk_size.to_string());
        echo_group(&mut echo, "thresholds", &serde_json::to_value(&thresholds).expect("thresholds serialise"));

        Ok(Self {
            scope,
            model,
            grid,
            n_paths,
            seed,
            chunk_size,
            thresholds,
            measure_change,
            estimate_theta,
            conditions,
            output_paths,
            output_report,
            echo,
        })
    }
}

/// Whether `grid` is exactly the uniform grid with its horizon and step
/// count, so that echoing it as `horizon, steps` reproduces it.
fn grid_is_uniform(grid: &TimeGrid) -> bool {
    TimeGrid::uniform(grid.horizon(), grid.steps()).is_ok_and(|u| &u == grid)
}

pub fn parse_conditions(list: &str) -> Result<Vec<Condition>, CliError> {
    let mut out = Vec::new();
    for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if item == "all" {
            return Ok(vec![Condition::Nip, Condition::Nsa, Condition::Na1, Condition::Na]);
        }
        let c = Condition::parse(item).ok_or_else(|| {
            config_err("conditions", format!("`{item}` is not one of nip, nsa, na1, na"))
        })?;
        if !out.contains(&c) {
            out.push(c);
        }
    }
    if out.is_empty() {
        return Err(config_err("conditions", "at least one condition is required"));
    }
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(text: &str) -> FlatConfig {
        parse_flat(text).unwrap()
    }

    #[test]
    fn comments_and_blank_lines() {
        let m = flat("# a comment\n\nmodel.kind = stopped_bm\n  seed=7  \n");
        assert_eq!(m.len(), 2);
        assert_eq!(m["seed"], "7");
    }

    #[test]
    fn duplicate_keys_are_rejected() {
        assert!(parse_flat("seed = 1\nseed = 2\n").is_err());
        assert!(parse_flat("Seed = 1\n").is_err());
        assert!(parse_flat("seed\n").is_err());
    }

    #[test]
    fn defaults_and_echo() {
        let c = RunConfig::from_flat(&flat("model.kind = stopped_bm\nmodel.s0 = 1\n"), Scope::Model).unwrap();
        assert_eq!(c.n_paths, DEFAULT_PATHS);
        assert_eq!(c.grid.steps(), DEFAULT_STEPS);
        assert_eq!(c.echo["model.kind"], "stopped_bm");
        assert_eq!(c.echo["thresholds.k_max"], "1000000.0");
        let again = RunConfig::from_flat(&c.echo, Scope::Model).unwrap();
        assert_eq!(again.echo, c.echo);
        assert_eq!(again.thresholds, c.thresholds);
    }

    #[test]
    fn field_names_in_errors() {
        let err = |text: &str| match RunConfig::from_flat(&flat(text), Scope::Model) {
            Err(CliError::Config(msg)) => msg,
            other => panic!("expected a config error, got {other:?}"),
        };
        assert!(err("model.kind = stopped_bm\nmodel.s0 = 1\ngrid.steps = 0\n").starts_with("grid.steps"));
        assert!(err("model.kind = stopped_bm\nmodel.s0 = 1\nn_paths = 0\n").starts_with("n_paths"));
        assert!(err("model.kind = stopped_bm\nmodel.s0 = 1\nthresholds.k_max = -1\n").starts_with("thresholds.k_max"));
        assert!(err("model.kind = stopped_bm\nmodel.s0 = 1\nthresholds.nope = 1\n").starts_with("thresholds.nope"));
        assert!(err("model.kind = stopped_bm\nmodel.s0 = -1\n").starts_with("model.s0"));
        assert!(err("model.s0 = 1\n").starts_with("model.kind"));
        assert!(err("model.kind = stopped_bm\nmodel.s0 = 1\nbogus = 1\n").starts_with("bogus"));
        assert!(err("model.kind = drifted_bm\nmodel.mu = 0\nmodel.sigma = 1\nmodel.s0 = 0\nmeasure_change = canonical\n")
            .starts_with("measure_change"));
    }

    #[test]
    fn drifted_bm_scalars_become_lists() {
        let c = RunConfig::from_flat(
            &flat("model.kind = drifted_bm\nmodel.mu = 0.5\nmodel.sigma = 1\nmodel.s0 = 0\n"),
            Scope::Model,
        )
        .unwrap();
        assert_eq!(c.model, Some(ModelSpec::drifted_bm_1d(0.5, 1.0)));
        assert_eq!(c.echo["model.mu"], "[0.5]");
    }

    #[test]
    fn densities_and_theta_mode() {
        let c = RunConfig::from_flat(
            &flat(
                "model.kind = drifted_bm\nmodel.mu = 0\nmodel.sigma = 1\nmodel.s0 = 0\n\
                 measure_change = exponential\nmeasure_change.theta0 = 0.3\nmeasure_change.theta = estimated\n",
            ),
            Scope::Model,
        )
        .unwrap();
        assert_eq!(c.measure_change, MeasureChange::Density(DensitySpec::Exponential { theta0: 0.3 }));
        assert!(c.estimate_theta);
        let again = RunConfig::from_flat(&c.echo, Scope::Model).unwrap();
        assert_eq!(again.measure_change, c.measure_change);
    }

    #[test]
    fn scenario_scope_rejects_model_keys() {
        assert!(RunConfig::from_flat(&flat("grid.steps = 64\n"), Scope::Scenario).is_ok());
        assert!(RunConfig::from_flat(&flat("model.kind = bes3\n"), Scope::Scenario).is_err());
    }

    #[test]
    fn explicit_grids_round_trip() {
        let c = RunConfig::from_flat(
            &flat("model.kind = bes3\nmodel.x0 = 1\ngrid.spacing = explicit\ngrid.times = 0, 0.25, 0.75, 1\n"),
            Scope::Model,
        )
        .unwrap();
        assert_eq!(c.grid.times(), &[0.0, 0.25, 0.75, 1.0]);
        assert_eq!(RunConfig::from_flat(&c.echo, Scope::Model).unwrap().grid, c.grid);
    }

    #[test]
    fn conditions() {
        assert_eq!(parse_conditions("na1, nip").unwrap(), vec![Condition::Nip, Condition::Na1]);
        assert!(parse_conditions("nope").is_err());
    }
}
