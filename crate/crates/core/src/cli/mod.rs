//! Command-line driver: configuration, hypothesis validation, experiments and report files.

pub mod config;
pub mod experiments;
pub mod hypotheses;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

pub use config::{Experiment, ExperimentConfig, RawConfig};
pub use experiments::Outcome;
pub use hypotheses::{validate_hypotheses, Hypothesis, Status};

use crate::error::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_HYPOTHESIS: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "qproj", version, about = "Quasi-projection operator experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    /// Config file or experiment name, followed by `key=value` overrides.
    #[arg(value_name = "CONFIG|EXPERIMENT|KEY=VALUE")]
    items: Vec<String>,
    /// Run even when a hypothesis fails; recorded in the report.
    #[arg(long)]
    force: bool,
    /// Directory for report files.
    #[arg(long, short, default_value = ".")]
    out: PathBuf,
    /// Skip writing the gnuplot script.
    #[arg(long)]
    no_plot: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run any experiment.
    Run(RunArgs),
    /// Apply Q_j to a signal and write the sampled result (experiment `reconstruction`).
    Apply(RunArgs),
    /// Compatibility audit of a kernel and a dual functional.
    Compat(RunArgs),
    /// Error-curve experiments: strict_rate, weak_rate, sampling_tail, sampling_mixed, jackson.
    Rates(RunArgs),
    /// Weight and modulus audits: weights_audit, moduli_props.
    Audit(RunArgs),
    /// Summarise an existing `<name>.report.json`.
    Report {
        path: PathBuf,
    },
}

/// A failure with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: msg.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Parse(_) => EXIT_USAGE,
            _ => EXIT_NUMERICAL,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

/// Build the raw config from positional items: an existing file, an experiment name, and
/// `key=value` pairs, in that order of precedence (later wins).
fn collect_config(items: &[String], default_experiment: Option<Experiment>) -> Result<RawConfig, Failure> {
    let mut raw = RawConfig::default();
    if let Some(e) = default_experiment {
        raw.set("experiment", e.name())?;
    }
    for item in items {
        if item.contains('=') {
            raw.set_pair(item)?;
        } else if Path::new(item).is_file() {
            let file = RawConfig::from_file(Path::new(item))?;
            let mut merged = file;
            if let Some(e) = raw.get("experiment").map(str::to_string) {
                if merged.get("experiment").is_none() {
                    merged.set("experiment", &e)?;
                }
            }
            raw = merged;
        } else if item.parse::<Experiment>().is_ok() {
            raw.set("experiment", item)?;
        } else {
            return Err(Failure::usage(format!(
                "`{item}` is neither a config file, an experiment name, nor key=value"
            )));
        }
    }
    Ok(raw)
}

fn allowed(cmd: &str) -> &'static [Experiment] {
    use Experiment::*;
    match cmd {
        "apply" => &[Reconstruction],
        "compat" => &[CompatAudit],
        "rates" => &[StrictRate, WeakRate, SamplingTail, SamplingMixed, Jackson],
        "audit" => &[WeightsAudit, ModuliProps],
        _ => &Experiment::ALL,
    }
}

fn environment() -> Value {
    json!({
        "crate": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "os": std::env::consts::OS,
        "arch": std::env::consts::ARCH,
    })
}

/// Report JSON with the resolved config, hypotheses, result, budgets and warnings.
pub fn report_json(
    cfg: &ExperimentConfig,
    hyps: &[Hypothesis],
    forced: bool,
    outcome: &Outcome,
) -> Result<Value, Error> {
    Ok(json!({
        "experiment": cfg.experiment.name(),
        "name": cfg.name,
        "config": serde_json::to_value(cfg)?,
        "forced": forced,
        "hypotheses": hyps,
        "result": outcome.result,
        "error_budgets": outcome.budgets,
        "warnings": outcome.warnings,
        "environment": environment(),
    }))
}

/// Files of a finished run, all built in memory.
pub struct Artifacts {
    pub files: Vec<(PathBuf, Vec<u8>)>,
}

pub fn build_artifacts(
    cfg: &ExperimentConfig,
    hyps: &[Hypothesis],
    forced: bool,
    outcome: &Outcome,
    out_dir: &Path,
    plot: bool,
) -> Result<Artifacts, Error> {
    let mut files = Vec::new();
    let report = report_json(cfg, hyps, forced, outcome)?;
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    files.push((out_dir.join(format!("{}.report.json", cfg.name)), text.into_bytes()));
    if let Some(curve) = &outcome.curve {
        let csv_name = format!("{}.curve.csv", cfg.name);
        files.push((out_dir.join(&csv_name), curve.to_csv().into_bytes()));
        if plot && cfg.plot {
            let script = curve.plot_script(&csv_name, &cfg.name);
            files.push((out_dir.join(format!("{}.plot.gp", cfg.name)), script.into_bytes()));
        }
    }
    if let Some(grid) = &outcome.grid {
        let mut buf = Vec::new();
        grid.write_binary_to(&mut buf)?;
        files.push((out_dir.join(format!("{}.grid.bin", cfg.name)), buf));
    }
    Ok(Artifacts { files })
}

impl Artifacts {
    /// Write each file through a temporary sibling and rename it into place; on failure,
    /// files already renamed by this call are removed.
    pub fn write(&self) -> std::io::Result<()> {
        let mut done: Vec<&Path> = Vec::new();
        for (path, bytes) in &self.files {
            let tmp = path.with_extension("partial");
            let res = fs::write(&tmp, bytes).and_then(|_| fs::rename(&tmp, path));
            if let Err(e) = res {
                let _ = fs::remove_file(&tmp);
                for p in done {
                    let _ = fs::remove_file(p);
                }
                return Err(e);
            }
            done.push(path);
        }
        Ok(())
    }
}

fn execute(cmd: &str, args: &RunArgs) -> Result<Vec<String>, Failure> {
    let allowed = allowed(cmd);
    let default = if allowed.len() == 1 { Some(allowed[0]) } else { None };
    let raw = collect_config(&args.items, default)?;
    let cfg = ExperimentConfig::resolve(&raw)?;
    if !allowed.contains(&cfg.experiment) {
        let names: Vec<&str> = allowed.iter().map(|e| e.name()).collect();
        return Err(Failure::usage(format!(
            "`{cmd}` runs {}; got `{}`",
            names.join(", "),
            cfg.experiment
        )));
    }
    let hyps = validate_hypotheses(&cfg);
    let failed: Vec<&Hypothesis> = hyps.iter().filter(|h| h.status == Status::Fail).collect();
    if !failed.is_empty() && !args.force {
        let lines: Vec<String> = failed
            .iter()
            .map(|h| format!("  {} requires {} (value {:?})", cfg.experiment, h.citation, h.value))
            .collect();
        return Err(Failure {
            code: EXIT_HYPOTHESIS,
            message: format!("hypothesis check failed:\n{}", lines.join("\n")),
        });
    }
    let outcome = experiments::run(&cfg)?;
    let artifacts = build_artifacts(&cfg, &hyps, args.force && !failed.is_empty(), &outcome, &args.out, !args.no_plot)?;
    fs::create_dir_all(&args.out).map_err(Error::from)?;
    artifacts.write().map_err(Error::from)?;
    let mut notes: Vec<String> = artifacts.files.iter().map(|(p, _)| format!("wrote {}", p.display())).collect();
    for h in hyps.iter().filter(|h| h.status != Status::Pass) {
        notes.push(format!("warning: hypothesis {:?}: {} ({})", h.status, h.name, h.citation));
    }
    notes.extend(outcome.warnings.iter().map(|w| format!("warning: {w}")));
    notes.push(summary_line(&cfg.experiment, &outcome.result));
    Ok(notes)
}

fn summary_line(e: &Experiment, result: &Value) -> String {
    let pick = |path: &[&str]| -> Option<&Value> {
        let mut v = result;
        for k in path {
            v = v.get(*k)?;
        }
        Some(v)
    };
    match e {
        Experiment::Reconstruction => format!("max_interior_error = {}", pick(&["max_interior_error"]).cloned().unwrap_or_default()),
        Experiment::CompatAudit => format!(
            "strict_pass = {}, weak_order = {}",
            pick(&["strict_pass"]).cloned().unwrap_or_default(),
            pick(&["weak_order_detected"]).cloned().unwrap_or_default()
        ),
        Experiment::Jackson => format!(
            "ratio max/min = {}, last/median = {}",
            pick(&["ratio", "max_over_min"]).cloned().unwrap_or_default(),
            pick(&["ratio", "last_over_median"]).cloned().unwrap_or_default()
        ),
        Experiment::ModuliProps => format!("failed checks = {}", pick(&["failed"]).cloned().unwrap_or_default()),
        Experiment::WeightsAudit => format!(
            "membership passes = {}",
            pick(&["membership", "passes"]).cloned().unwrap_or_default()
        ),
        _ => match (pick(&["rate", "fitted_slope"]), pick(&["rate", "theory_slope"])) {
            (Some(f), Some(t)) => format!("fitted_slope = {f}, theory_slope = {t}"),
            _ => "done".into(),
        },
    }
}

fn summarise_report(path: &Path) -> Result<Vec<String>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    let exp: Experiment = v
        .get("experiment")
        .and_then(Value::as_str)
        .ok_or_else(|| Failure::usage("report has no `experiment` field"))?
        .parse()?;
    let mut lines = vec![format!("experiment: {exp}")];
    if let Some(hs) = v.get("hypotheses").and_then(Value::as_array) {
        for h in hs {
            lines.push(format!(
                "  [{}] {}",
                h.get("status").and_then(Value::as_str).unwrap_or("?"),
                h.get("name").and_then(Value::as_str).unwrap_or("?")
            ));
        }
    }
    if let Some(ws) = v.get("warnings").and_then(Value::as_array) {
        lines.extend(ws.iter().filter_map(Value::as_str).map(|w| format!("warning: {w}")));
    }
    lines.push(summary_line(&exp, v.get("result").unwrap_or(&Value::Null)));
    Ok(lines)
}

/// Parse arguments, run, print notes; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let res = match &cli.command {
        Command::Run(a) => execute("run", a),
        Command::Apply(a) => execute("apply", a),
        Command::Compat(a) => execute("compat", a),
        Command::Rates(a) => execute("rates", a),
        Command::Audit(a) => execute("audit", a),
        Command::Report { path } => summarise_report(path),
    };
    match res {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            EXIT_OK
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}
