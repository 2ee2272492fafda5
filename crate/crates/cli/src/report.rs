//! The report contract: one JSON object per command, written in canonical
//! form (sorted keys, two-space indentation, floats with 17 significant
//! digits) so that equal reports are equal byte for byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use arbkit::arbitrage::{Classification, TradeoffSummary, Verdict};
use arbkit::measure::{Approach, BoundCheck, ProportionEstimate, SmdDiagnostic, WeightedExpectation};
use arbkit::scenarios::ScenarioReport;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

pub const SCHEMA: &str = "arbkit-report/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub schema: String,
    pub tool_version: String,
    pub command: String,
    pub config: BTreeMap<String, String>,
    pub verdicts: Vec<Verdict>,
    pub classification: Option<ClassificationEvidence>,
    pub measure_change: Option<MeasureChangeSummary>,
    pub scenario: Option<ScenarioReport>,
    pub simulation: Option<SimulationSummary>,
    pub timing: Timing,
}

/// Everything a classification produced except the verdicts themselves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassificationEvidence {
    pub measure: arbkit::arbitrage::MeasureLabel,
    pub nu: arbkit::arbitrage::NuEvidence,
    pub tradeoff: TradeoffSummary,
    pub tradeoff_bound: Option<BoundCheck>,
    pub weighted_paths: usize,
}

impl ClassificationEvidence {
    pub fn split(c: Classification) -> (Vec<Verdict>, Self) {
        (
            c.verdicts,
            Self {
                measure: c.measure,
                nu: c.nu,
                tradeoff: c.tradeoff,
                tradeoff_bound: c.tradeoff_bound,
                weighted_paths: c.weighted_paths,
            },
        )
    }
}

/// What a change of measure does to the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureChangeSummary {
    pub density: String,
    pub theta: String,
    /// `E_P[Z_T]`, which is one for a true martingale density.
    pub density_mean: WeightedExpectation,
    pub zero_probability: ProportionEstimate,
    pub jump_probability: ProportionEstimate,
    pub approach: Approach,
    /// `E_Q[S_T]` per component.
    pub terminal_mean_q: Vec<WeightedExpectation>,
    /// Time average of the cross-path mean of `theta^1 / Z_-` under `Q`.
    pub theta_over_z_mean: f64,
    pub tradeoff_p: TradeoffSummary,
    pub tradeoff_q: TradeoffSummary,
    pub tradeoff_bound: BoundCheck,
    /// Local-martingale diagnostic for `1/Z` and `S/Z` under `Q`.
    pub inverse_density: SmdDiagnostic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSummary {
    pub model: String,
    pub dim: usize,
    pub steps: usize,
    pub n_paths: usize,
    pub bytes: u64,
    pub aux: Vec<String>,
}

/// Excluded from reproducibility comparisons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Timing {
    pub elapsed_seconds: f64,
    pub threads: usize,
}

impl Report {
    pub fn new(command: &str, config: BTreeMap<String, String>) -> Self {
        Self {
            schema: SCHEMA.to_owned(),
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            command: command.to_owned(),
            config,
            verdicts: vec![],
            classification: None,
            measure_change: None,
            scenario: None,
            simulation: None,
            timing: Timing {
                elapsed_seconds: 0.0,
                threads: 1,
            },
        }
    }
}

/// Canonical JSON text of `value`, ending in a newline.
pub fn to_canonical<T: Serialize>(value: &T) -> Result<String, CliError> {
    let v = serde_json::to_value(value).map_err(|e| CliError::Run(format!("report serialisation: {e}")))?;
    let mut out = String::new();
    write_value(&v, 0, &mut out);
    out.push('\n');
    Ok(out)
}

fn float(x: f64) -> String {
    format!("{x:.16e}")
}

fn indent(level: usize, out: &mut String) {
    out.push('\n');
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn write_value(v: &Value, level: usize, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(u) = n.as_u64() {
                let _ = write!(out, "{u}");
            } else if let Some(i) = n.as_i64() {
                let _ = write!(out, "{i}");
            } else {
                out.push_str(&float(n.as_f64().expect("JSON numbers are u64, i64 or f64")));
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push('[');
            for (k, item) in items.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                indent(level + 1, out);
                write_value(item, level + 1, out);
            }
            indent(level, out);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (k, key) in keys.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                indent(level + 1, out);
                out.push_str(&Value::String((*key).clone()).to_string());
                out.push_str(": ");
                write_value(&map[*key], level + 1, out);
            }
            indent(level, out);
            out.push('}');
        }
    }
}

/// Checks that `text` is a report of this schema version: every field known,
/// none missing, and the text in canonical form.
pub fn validate(text: &str) -> Result<Report, CliError> {
    let report: Report = serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid report: {e}")))?;
    if report.schema != SCHEMA {
        return Err(CliError::Config(format!(
            "invalid report: schema `{}`, expected `{SCHEMA}`",
            report.schema
        )));
    }
    let canonical = to_canonical(&report)?;
    if canonical != text {
        return Err(CliError::Config("invalid report: not in canonical form".into()));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_keep_seventeen_digits() {
        assert_eq!(float(0.1), "1.0000000000000001e-1");
        assert_eq!(float(1.0), "1.0000000000000000e0");
        for x in [0.1, 1.0 / 3.0, 6.826894921370859e-1, -2.5e-300, 1e300] {
            assert_eq!(float(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn keys_are_sorted_and_integers_stay_integers() {
        let v = serde_json::json!({"b": 1, "a": [1.5, -2], "c": {}});
        let text = to_canonical(&v).unwrap();
        assert_eq!(
            text,
            "{\n  \"a\": [\n    1.5000000000000000e0,\n    -2\n  ],\n  \"b\": 1,\n  \"c\": {}\n}\n"
        );
    }

    #[test]
    fn reports_round_trip_and_validate() {
        let mut config = BTreeMap::new();
        config.insert("seed".to_owned(), "1".to_owned());
        let r = Report::new("classify", config);
        let text = to_canonical(&r).unwrap();
        assert_eq!(validate(&text).unwrap(), r);
        assert!(validate(&text.replace("\"classify\"", "\"classify\", \"extra\": 1")).is_err());
        assert!(validate(&text.replace(SCHEMA, "arbkit-report/0")).is_err());
        assert!(validate(&text.replace("\n", "")).is_err());
    }
}
