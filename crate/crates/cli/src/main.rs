//! `arbkit`: simulate catalog models, classify their no-arbitrage
//! properties, inspect changes of measure and run the self-checking
//! scenarios. Every command writes a canonical JSON report.
//!
//! Exit codes: 0 success, 1 scenario failed, 2 configuration error,
//! 3 unknown command or scenario, 4 I/O error.

mod commands;
mod config;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use arbkit::scenarios::Scenario;
use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use config::{FlatConfig, RunConfig, Scope};
use report::Report;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Unknown(String),
    Io(String),
    Run(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Run(_) => 2,
            CliError::Unknown(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Unknown(m) => write!(f, "{m}"),
            CliError::Io(m) => write!(f, "I/O error: {m}"),
            CliError::Run(m) => write!(f, "{m}"),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "arbkit", version, about = "Monte Carlo no-arbitrage checks under changes of measure")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Flat `key = value` config file (or a report, whose config echo is used).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output file: the path file for `simulate`, the report otherwise.
    #[arg(long, global = true, value_name = "FILE")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads; never changes any report value.
    #[arg(long, global = true, env = "ARBKIT_THREADS", value_name = "N")]
    threads: Option<usize>,
    /// Print the report to stdout (also when it is written to a file).
    #[arg(long, global = true)]
    json: bool,
    #[arg(long, global = true, value_name = "N")]
    n_paths: Option<usize>,
    /// Override a config key, e.g. `--set grid.steps=1024`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a model and write the binary path file.
    Simulate,
    /// Classify NIP, NSA, NA1 and NA under P, or under Q with a measure change.
    Classify {
        /// Comma-separated subset of nip, nsa, na1, na (default: all).
        #[arg(long, value_name = "LIST")]
        conditions: Option<String>,
    },
    /// Summarise the effect of a change of measure.
    ChangeMeasure,
    /// Run a self-checking scenario: bessel, exp-default, compensator or preservation.
    Scenario { name: String },
    /// Check that a report file matches the report schema.
    ReportValidate { file: PathBuf },
}

fn flat_config(cli: &Cli) -> Result<FlatConfig, CliError> {
    let mut map = match &cli.config {
        Some(path) => config::load(path)?,
        None => FlatConfig::new(),
    };
    for s in &cli.set {
        config::apply_override(&mut map, s)?;
    }
    if let Some(seed) = cli.seed {
        map.insert("seed".into(), seed.to_string());
    }
    if let Some(n) = cli.n_paths {
        map.insert("n_paths".into(), n.to_string());
    }
    Ok(map)
}

fn emit(report: &Report, file: Option<&Path>, json: bool) -> Result<(), CliError> {
    let text = report::to_canonical(report)?;
    if let Some(path) = file {
        std::fs::write(path, &text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }
    if json || file.is_none() {
        print!("{text}");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    if cli.threads == Some(0) {
        return Err(CliError::Config("--threads: must be at least 1".into()));
    }
    if let Command::ReportValidate { file } = &cli.command {
        let text = std::fs::read_to_string(file).map_err(|e| CliError::Io(format!("{}: {e}", file.display())))?;
        let report = report::validate(&text)?;
        println!("{}: valid {} report ({})", file.display(), report.schema, report.command);
        return Ok(ExitCode::SUCCESS);
    }
    let scenario = match &cli.command {
        Command::Scenario { name } => {
            Some(Scenario::parse(name).map_err(|_| CliError::Unknown(format!("unknown scenario `{name}`")))?)
        }
        _ => None,
    };
    let mut flat = flat_config(&cli)?;
    if let Command::Classify { conditions: Some(list) } = &cli.command {
        flat.insert("conditions".into(), list.clone());
    }
    let scope = if scenario.is_some() { Scope::Scenario } else { Scope::Model };
    let cfg = RunConfig::from_flat(&flat, scope)?;

    let started = Instant::now();
    let (result, threads) = arbkit::par::with_threads(cli.threads, || {
        let report = match (&cli.command, scenario) {
            (Command::Simulate, _) => commands::simulate_cmd(&cfg, cli.out.as_deref()),
            (Command::Classify { .. }, _) => commands::classify_cmd(&cfg),
            (Command::ChangeMeasure, _) => commands::change_measure_cmd(&cfg),
            (Command::Scenario { .. }, Some(s)) => commands::scenario_cmd(s, &cfg),
            _ => unreachable!("report-validate returned early and scenarios are parsed"),
        };
        (report, arbkit::par::current_threads())
    })
    .map_err(|e| CliError::Run(format!("thread pool: {e}")))?;
    let mut report = result?;
    report.timing.elapsed_seconds = started.elapsed().as_secs_f64();
    report.timing.threads = threads;

    let report_file = match cli.command {
        Command::Simulate => cfg.output_report.clone(),
        _ => cli.out.clone().or_else(|| cfg.output_report.clone()),
    };
    emit(&report, report_file.as_deref(), cli.json)?;
    let passed = report.scenario.as_ref().map_or(true, |s| s.pass);
    if !passed {
        let failures = report.scenario.as_ref().map(|s| s.failures().join(", ")).unwrap_or_default();
        eprintln!("arbkit: scenario failed: {failures}");
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                ErrorKind::InvalidSubcommand => 3,
                _ => 2,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("arbkit: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
