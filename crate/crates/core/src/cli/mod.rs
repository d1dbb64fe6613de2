//! Command-line scenario runner.
//!
//! `run <scenario>` writes CSV/JSON artifacts and a `manifest.json` with their
//! SHA-256 hashes; `compare` reports column-wise deviations between two CSV
//! artifacts; `list-scenarios` prints the scenario names.
//!
//! Exit status: 0 on success, 1 when a check fails (a failed comparison or
//! Itô table entry), 2 on usage, configuration or runtime errors.

pub mod artifacts;
pub mod compare;
pub mod config;
pub mod scenarios;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
pub use artifacts::{Manifest, SCHEMA_VERSION};
pub use compare::{compare_csv, CompareReport, ToleranceSpec};
pub use config::{Measure, Overrides, ScenarioConfig, ScenarioKind, Scheme};

/// Environment variable naming the default output directory.
pub const OUTPUT_ENV: &str = "QFILTER_OUT";

#[derive(Debug, Parser)]
#[command(name = "qfilter", version, about = "Quantum stochastic filtering scenarios and checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario and write its artifacts.
    Run(RunArgs),
    /// Compare two CSV artifacts column by column.
    Compare(CompareArgs),
    /// List the available scenarios.
    ListScenarios,
}

fn parse_triple(s: &str) -> std::result::Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated numbers, got `{s}`"));
    }
    let mut out = [0.0; 3];
    for (o, p) in out.iter_mut().zip(&parts) {
        *o = p.parse().map_err(|_| format!("`{p}` is not a number"))?;
    }
    Ok(out)
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub scenario: ScenarioKind,
    /// TOML configuration; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (default: config `output`, then $QFILTER_OUT/<scenario>, then qfilter-out/<scenario>).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; artifacts do not depend on this.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long, value_parser = parse_triple, allow_hyphen_values = true)]
    pub h: Option<[f64; 3]>,
    #[arg(long, value_parser = parse_triple, allow_hyphen_values = true)]
    pub k: Option<[f64; 3]>,
    #[arg(long, value_parser = parse_triple, allow_hyphen_values = true)]
    pub l: Option<[f64; 3]>,
    #[arg(long, value_parser = parse_triple, allow_hyphen_values = true)]
    pub r0: Option<[f64; 3]>,
    #[arg(long)]
    pub nu: Option<f64>,
    /// Ensemble size.
    #[arg(long = "N")]
    pub trajectories: Option<u64>,
    /// Final time.
    #[arg(long = "T")]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub measure: Option<Measure>,
    #[arg(long, value_enum)]
    pub scheme: Option<Scheme>,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            h: self.h,
            k: self.k,
            l: self.l,
            r0: self.r0,
            nu: self.nu,
            trajectories: self.trajectories,
            t_end: self.t_end,
            dt: self.dt,
            stride: self.stride,
            seed: self.seed,
            measure: self.measure,
            scheme: self.scheme,
        }
    }
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    pub first: PathBuf,
    pub second: PathBuf,
    /// Default tolerance with optional per-column entries, e.g. `0.05,z=1e-3`.
    #[arg(long, default_value = "0")]
    pub tol: String,
    /// Also write the JSON report to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Result of `run`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub failures: usize,
}

/// Builds the effective configuration: file (if any), then flags, then
/// scenario defaults.
pub fn effective_config(scenario: ScenarioKind, config_text: Option<&str>, overrides: &Overrides) -> Result<ScenarioConfig> {
    let mut cfg = match config_text {
        Some(text) => {
            let cfg = ScenarioConfig::parse(text)?;
            if cfg.scenario != scenario {
                return Err(Error::InvalidArgument(format!(
                    "config describes `{}` but `{}` was requested",
                    cfg.scenario.name(),
                    scenario.name()
                )));
            }
            cfg
        }
        None => ScenarioConfig::new(scenario),
    };
    cfg.apply(overrides);
    cfg.complete();
    cfg.validate()?;
    Ok(cfg)
}

/// Runs a completed configuration into `dir`.
pub fn run(cfg: &ScenarioConfig, workers: usize, dir: &Path) -> Result<RunOutcome> {
    if workers == 0 {
        return Err(Error::InvalidArgument("need at least one worker".into()));
    }
    cfg.validate()?;
    let mut echo = cfg.clone();
    echo.output = None;
    let echo = echo.to_toml()?;
    let mut set = artifacts::ArtifactSet::create(dir)?;
    let outcome = scenarios::run_scenario(cfg, workers, &mut set)?;
    let manifest = set.finish(cfg.scenario.name(), echo, outcome.completed, outcome.aborted)?;
    Ok(RunOutcome { dir: dir.to_path_buf(), manifest, failures: outcome.failures })
}

fn output_dir(args: &RunArgs, cfg: &ScenarioConfig) -> PathBuf {
    if let Some(p) = &args.out {
        return p.clone();
    }
    if let Some(p) = &cfg.output {
        return PathBuf::from(p);
    }
    let base = std::env::var_os(OUTPUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("qfilter-out"));
    base.join(cfg.scenario.name())
}

fn report(e: &Error) -> String {
    match e {
        Error::Config { line, message } => format!("config error at line {line}: {message}"),
        other => format!("error: {other}"),
    }
}

fn run_command(args: &RunArgs, out: &mut dyn Write) -> Result<i32> {
    let text = match &args.config {
        Some(p) => Some(std::fs::read_to_string(p).map_err(|e| Error::Io(format!("cannot read {}: {e}", p.display())))?),
        None => None,
    };
    let cfg = effective_config(args.scenario, text.as_deref(), &args.overrides())?;
    let dir = output_dir(args, &cfg);
    let outcome = run(&cfg, args.workers, &dir)?;
    writeln!(out, "{}: wrote {} artifacts to {}", cfg.scenario.name(), outcome.manifest.artifacts.len(), dir.display())?;
    if !outcome.manifest.aborted.is_empty() {
        writeln!(out, "{} trajectories aborted (see manifest.json)", outcome.manifest.aborted.len())?;
    }
    if outcome.failures > 0 {
        writeln!(out, "{} checks failed", outcome.failures)?;
        return Ok(1);
    }
    Ok(0)
}

fn compare_command(args: &CompareArgs, out: &mut dyn Write) -> Result<i32> {
    let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| Error::Io(format!("cannot read {}: {e}", p.display())));
    let tol = ToleranceSpec::parse(&args.tol)?;
    let rep = compare_csv(&read(&args.first)?, &read(&args.second)?, &tol)?;
    let mut text = serde_json::to_string_pretty(&rep).map_err(|e| Error::Schema(e.to_string()))?;
    text.push('\n');
    if let Some(p) = &args.out {
        std::fs::write(p, &text).map_err(|e| Error::Io(format!("cannot write {}: {e}", p.display())))?;
    }
    out.write_all(text.as_bytes())?;
    Ok(if rep.pass { 0 } else { 1 })
}

/// Parses `args` (including the program name) and executes the command.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if code == 0 { write!(out, "{e}") } else { write!(err, "{e}") };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Run(a) => run_command(a, out),
        Command::Compare(a) => compare_command(a, out),
        Command::ListScenarios => ScenarioKind::ALL
            .iter()
            .try_for_each(|k| writeln!(out, "{:<16} {}", k.name(), k.summary()))
            .map(|_| 0)
            .map_err(Error::from),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "{}", report(&e));
            2
        }
    }
}
