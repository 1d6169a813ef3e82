//! Command-line front end: `calibrate`, `detect`, `simulate` and `report`.
//!
//! Exit codes: 0 success, 2 input or parse error, 3 empty calibration,
//! 4 semantic rule error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use thiserror::Error;

use crate::baseline::{self, BaselineError};
use crate::catalog::{load_catalog, FeatureCatalog};
use crate::detectors::{validate_rules, DetectError};
use crate::policy::{parse_templates, PolicyConfig, Templates};
use crate::report::{Aggregate, Engine, Report};
use crate::rules::{default_rules, parse_rules};
use crate::signals::{parse_trace, serialize_trace, ParseOptions, SignalKind, Trace};
use crate::tracegen::{generate, GenSpec, UserProfile};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_EMPTY_CALIBRATION: i32 = 3;
pub const EXIT_SEMANTIC: i32 = 4;

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    EmptyCalibration(String),
    #[error("{0}")]
    Semantic(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::EmptyCalibration(_) => EXIT_EMPTY_CALIBRATION,
            CliError::Semantic(_) => EXIT_SEMANTIC,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "needsense",
    version,
    about = "Recommend accessibility features from device-usage traces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute baselines from calibration traces.
    Calibrate {
        #[arg(required = true, value_name = "TRACE")]
        traces: Vec<PathBuf>,
        /// Baseline file to write.
        #[arg(long, short, default_value = "baseline.json")]
        out: PathBuf,
        #[arg(long)]
        lenient: bool,
    },
    /// Run detection and surfacing over one trace.
    Detect {
        #[arg(long)]
        trace: PathBuf,
        #[command(flatten)]
        engine: EngineArgs,
        /// Emit the report as one JSON object.
        #[arg(long)]
        json: bool,
    },
    /// Generate a synthetic trace from a user profile.
    Simulate {
        #[arg(long)]
        profile: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Trace length in seconds.
        #[arg(long)]
        duration: f64,
        #[arg(long, default_value_t = 1.0)]
        sample_interval: f64,
        /// Output trace file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Detect over many traces and aggregate firing counts.
    Report {
        #[arg(long = "trace", required = true)]
        traces: Vec<PathBuf>,
        #[command(flatten)]
        engine: EngineArgs,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Args)]
struct EngineArgs {
    /// Rules file; the shipped rules when omitted.
    #[arg(long, env = "NEEDSENSE_RULES")]
    rules: Option<PathBuf>,
    /// Baseline file; the published study baselines when omitted.
    #[arg(long)]
    baseline: Option<PathBuf>,
    /// Catalog file; the shipped catalog when omitted.
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// Message template file; the shipped templates when omitted.
    #[arg(long)]
    templates: Option<PathBuf>,
    /// Accept unknown fields in trace records.
    #[arg(long)]
    lenient: bool,
    /// Seconds before the same feature may be recommended again.
    #[arg(long, default_value_t = 86_400.0)]
    cooldown: f64,
    /// Most recommendations per trace.
    #[arg(long, default_value_t = 3)]
    max_per_trace: usize,
    /// Also recommend features that are already enabled.
    #[arg(long)]
    no_suppress: bool,
}

/// Runs the CLI with `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Calibrate {
            traces,
            out: path,
            lenient,
        } => cmd_calibrate(&traces, &path, lenient, out),
        Command::Detect {
            trace,
            engine,
            json,
        } => cmd_detect(&trace, &engine, json, out),
        Command::Simulate {
            profile,
            seed,
            duration,
            sample_interval,
            out: path,
        } => cmd_simulate(
            &profile,
            seed,
            duration,
            sample_interval,
            path.as_deref(),
            out,
            err,
        ),
        Command::Report {
            traces,
            engine,
            json,
        } => cmd_report(&traces, &engine, json, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn io_err(e: std::io::Error) -> CliError {
    CliError::Input(format!("write failed: {e}"))
}

fn load_trace(path: &Path, lenient: bool) -> Result<Trace, CliError> {
    parse_trace(&read(path)?, ParseOptions { lenient })
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn cmd_calibrate(
    paths: &[PathBuf],
    out_path: &Path,
    lenient: bool,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let traces = paths
        .iter()
        .map(|p| load_trace(p, lenient))
        .collect::<Result<Vec<_>, _>>()?;
    let set = baseline::calibrate(&traces).map_err(|e| match e {
        BaselineError::EmptyCalibration => CliError::EmptyCalibration(e.to_string()),
        other => CliError::Input(other.to_string()),
    })?;
    write_file(out_path, &baseline::save_baselines(&set))?;

    writeln!(
        out,
        "{:<18} {:>12} {:>12} {:>8}",
        "signal", "mean", "stddev", "n"
    )
    .map_err(io_err)?;
    for (signal, b) in set.entries() {
        writeln!(
            out,
            "{:<18} {:>12.6} {:>12.6} {:>8}",
            signal.as_str(),
            b.mean,
            b.stddev,
            b.n
        )
        .map_err(io_err)?;
    }
    Ok(())
}

fn build_engine(args: &EngineArgs) -> Result<Engine, CliError> {
    let rules = match &args.rules {
        Some(path) => parse_rules(&read(path)?).map_err(|e| {
            let msg = format!("{}: {e}", path.display());
            if e.is_semantic() {
                CliError::Semantic(msg)
            } else {
                CliError::Input(msg)
            }
        })?,
        None => default_rules(),
    };
    let baselines = match &args.baseline {
        Some(path) => baseline::load_baselines(&read(path)?)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?,
        None => baseline::paper_defaults(),
    };
    let catalog = match &args.catalog {
        Some(path) => load_catalog(&read(path)?)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?,
        None => FeatureCatalog::shipped(),
    };
    let templates = match &args.templates {
        Some(path) => parse_templates(&read(path)?)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?,
        None => Templates::shipped(),
    };
    if !(args.cooldown.is_finite() && args.cooldown >= 0.0) {
        return Err(CliError::Input("--cooldown must be >= 0".into()));
    }
    if args.max_per_trace == 0 {
        return Err(CliError::Input("--max-per-trace must be >= 1".into()));
    }
    validate_rules(&rules, &catalog).map_err(|e| CliError::Semantic(e.to_string()))?;
    for rule in rules.statistical() {
        if baselines.get(rule.signal).is_none() {
            return Err(CliError::Input(format!(
                "rule `{}` needs a `{}` baseline",
                rule.name, rule.signal
            )));
        }
    }
    Ok(Engine {
        rules,
        baselines,
        catalog,
        templates,
        policy: PolicyConfig {
            cooldown: args.cooldown,
            max_per_trace: args.max_per_trace,
            suppress_enabled: !args.no_suppress,
        },
    })
}

fn trace_id(path: &Path, trace: &Trace) -> String {
    trace
        .meta()
        .and_then(|m| m.session_id.clone())
        .unwrap_or_else(|| {
            path.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default()
        })
}

fn detect_one(engine: &Engine, path: &Path, lenient: bool) -> Result<Report, CliError> {
    let trace = load_trace(path, lenient)?;
    engine
        .report(&trace_id(path, &trace), &trace)
        .map_err(|e| match e {
            DetectError::MissingBaseline(_) => CliError::Input(e.to_string()),
            _ => CliError::Semantic(e.to_string()),
        })
}

fn write_report_text(out: &mut dyn Write, report: &Report) -> std::io::Result<()> {
    writeln!(out, "trace: {}", report.trace_id)?;
    writeln!(out, "firings: {}", report.firings.len())?;
    for f in &report.firings {
        writeln!(out, "  {:>10.3}s  {:<28} {}", f.t, f.rule, f.feature)?;
    }
    writeln!(out, "recommendations: {}", report.recommendations.len())?;
    for r in &report.recommendations {
        writeln!(out, "  {:>10.3}s  {:<24} {}", r.t, r.feature, r.message)?;
    }
    writeln!(out, "rules:")?;
    for (name, s) in &report.rule_stats {
        let state = if s.evaluated {
            "evaluated"
        } else {
            "insufficient input"
        };
        writeln!(out, "  {:<28} {:<20} fired {}", name, state, s.fired)?;
    }
    Ok(())
}

fn cmd_detect(
    path: &Path,
    args: &EngineArgs,
    json: bool,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let engine = build_engine(args)?;
    let report = detect_one(&engine, path, args.lenient)?;
    if json {
        let text = serde_json::to_string(&report).expect("report serializes");
        writeln!(out, "{text}").map_err(io_err)
    } else {
        write_report_text(out, &report).map_err(io_err)
    }
}

fn cmd_report(
    paths: &[PathBuf],
    args: &EngineArgs,
    json: bool,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let engine = build_engine(args)?;
    let reports = paths
        .par_iter()
        .map(|p| detect_one(&engine, p, args.lenient))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let totals = Aggregate::from_reports(&reports);

    if json {
        let doc = serde_json::json!({ "reports": reports, "totals": totals });
        return writeln!(out, "{doc}").map_err(io_err);
    }
    for report in &reports {
        write_report_text(out, report).map_err(io_err)?;
        writeln!(out).map_err(io_err)?;
    }
    let mut w = || -> std::io::Result<()> {
        writeln!(out, "traces: {}", totals.traces)?;
        writeln!(out, "firings by rule:")?;
        for (rule, n) in &totals.firings_by_rule {
            writeln!(out, "  {rule:<28} {n}")?;
        }
        writeln!(out, "recommendations by feature:")?;
        for (feature, n) in &totals.recommendations_by_feature {
            writeln!(out, "  {feature:<28} {n}")?;
        }
        Ok(())
    };
    w().map_err(io_err)
}

fn cmd_simulate(
    profile_path: &Path,
    seed: u64,
    duration: f64,
    sample_interval: f64,
    out_path: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), CliError> {
    let profile = UserProfile::from_json(&read(profile_path)?)
        .map_err(|e| CliError::Input(format!("{}: {e}", profile_path.display())))?;
    let spec = GenSpec {
        profile,
        seed,
        duration,
        sample_interval,
    };
    let trace = generate(&spec).map_err(|e| CliError::Input(e.to_string()))?;
    let text = serialize_trace(&trace);

    let summary: &mut dyn Write = match out_path {
        Some(path) => {
            write_file(path, &text)?;
            out
        }
        None => {
            out.write_all(text.as_bytes()).map_err(io_err)?;
            err
        }
    };
    for kind in SignalKind::ALL {
        writeln!(
            summary,
            "{:<18} {}",
            kind.as_str(),
            trace.filter_signal(kind).count()
        )
        .map_err(io_err)?;
    }
    Ok(())
}
