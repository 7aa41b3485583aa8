//! `vmshield` — scenario runner for the datacenter simulator.
//!
//! Subcommands: `run` (execute one scenario, emit metrics.json / ticks.csv /
//! actions.jsonl / audit.jsonl), `sweep` (a parameter grid of runs plus a
//! combined sweep.csv) and `validate` (schema and invariant checks only).
//! Exit codes: 0 success, 2 invalid input, 3 I/O failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use vmshield_cli::{
    apply_grid_value, apply_overrides, parse_scenario, point_dir_name, presets, CliError, Grid,
    Overrides,
};
use vmshield_core::sim::{self, AttackScenario};
use vmshield_core::{RunOutput64, ScenarioConfig64};

#[derive(Parser)]
#[command(
    name = "vmshield",
    version,
    about = "Security-ingrained datacenter workload simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its artifacts.
    Run(RunArgs),
    /// Run a parameter grid over a base scenario; one subdirectory per point
    /// plus a combined sweep.csv.
    Sweep(SweepArgs),
    /// Validate a scenario document without running it.
    Validate(SourceArgs),
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Path to a scenario JSON document.
    #[arg(long, value_name = "PATH")]
    scenario: Option<PathBuf>,
    /// Built-in preset: benign-baseline, co-residency, multi-hijack,
    /// grouped-cascade or consolidation-demo.
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
}

#[derive(Args)]
struct SourceArgs {
    #[command(flatten)]
    source: Source,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum AttackArg {
    None,
    CoResidency,
    MultiHijack,
    GroupedCascade,
}

impl From<AttackArg> for AttackScenario {
    fn from(a: AttackArg) -> Self {
        match a {
            AttackArg::None => AttackScenario::None,
            AttackArg::CoResidency => AttackScenario::CoResidency,
            AttackArg::MultiHijack => AttackScenario::MultiHijack,
            AttackArg::GroupedCascade => AttackScenario::GroupedCascade,
        }
    }
}

#[derive(Args)]
struct OverrideArgs {
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the run duration in ticks.
    #[arg(long)]
    duration: Option<u64>,
    /// Override the attack scenario.
    #[arg(long, value_enum)]
    attack: Option<AttackArg>,
    /// Override the audit interval in ticks.
    #[arg(long)]
    audit_interval: Option<u64>,
    /// Override the breach dwell time D in ticks.
    #[arg(long)]
    dwell: Option<u64>,
    /// Override the underload consolidation threshold.
    #[arg(long)]
    underload_threshold: Option<f64>,
}

impl OverrideArgs {
    fn to_overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            duration: self.duration,
            attack: self.attack.map(Into::into),
            audit_interval: self.audit_interval,
            dwell: self.dwell,
            underload_threshold: self.underload_threshold,
        }
    }
}

#[derive(Args)]
struct OutputArgs {
    /// Output directory (defaults to $VMSHIELD_OUT, then ./out).
    #[arg(short, long, env = "VMSHIELD_OUT", value_name = "DIR")]
    out: Option<PathBuf>,
    /// Suppress the summary line.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    overrides: OverrideArgs,
    #[command(flatten)]
    output: OutputArgs,
    /// Also dump the retained workload store as workload.csv.
    #[arg(long)]
    dump_workload: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    overrides: OverrideArgs,
    #[command(flatten)]
    output: OutputArgs,
    /// Grid axis, repeatable: KEY=V1,V2,... (cartesian product over axes).
    #[arg(long = "grid", value_name = "KEY=V1,V2,...")]
    grid: Vec<String>,
}

fn load_source(source: &Source) -> Result<ScenarioConfig64, CliError> {
    let text = match (&source.scenario, &source.preset) {
        (Some(path), None) => fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?,
        (None, Some(name)) => presets::get(name)
            .ok_or_else(|| {
                CliError::Invalid(format!(
                    "unknown preset {name:?}; available: {}",
                    presets::names().join(", ")
                ))
            })?
            .to_string(),
        _ => unreachable!("clap enforces exactly one source"),
    };
    parse_scenario(&text)
}

fn out_dir(output: &OutputArgs) -> PathBuf {
    output.out.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn execute(cfg: &ScenarioConfig64) -> Result<RunOutput64, CliError> {
    cfg.validate()
        .map_err(|e| CliError::Invalid(e.to_string()))?;
    sim::run(cfg).map_err(|e| CliError::Invalid(e.to_string()))
}

fn write_artifacts(out: &RunOutput64, dir: &Path, dump_workload: bool) -> Result<(), CliError> {
    out.write_artifacts(dir)
        .map_err(|e| CliError::Io(format!("writing artifacts to {}: {e}", dir.display())))?;
    if dump_workload {
        out.write_workload_csv(dir)
            .map_err(|e| CliError::Io(format!("writing workload.csv: {e}")))?;
    }
    Ok(())
}

fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    let mut cfg = load_source(&args.source)?;
    apply_overrides(&mut cfg, &args.overrides.to_overrides());
    let out = execute(&cfg)?;
    let dir = out_dir(&args.output);
    write_artifacts(&out, &dir, args.dump_workload)?;
    if !args.output.quiet {
        for warning in &out.warnings {
            eprintln!("warning: {warning}");
        }
        let m = &out.metrics;
        println!(
            "run complete: seed={} duration={} energy={:.2} migrations={} terminations={} \
             attacks={} prevented={} succeeded={} out={}",
            out.seed,
            out.duration,
            m.energy,
            m.migrations,
            m.terminations,
            m.attacks_established,
            m.breaches_prevented,
            m.breaches_succeeded,
            dir.display()
        );
    }
    Ok(())
}

const SWEEP_METRICS: &[&str] = &[
    "energy",
    "active_server_ticks",
    "migrations",
    "terminations",
    "false_positive_terminations",
    "sla_violations",
    "attacks_established",
    "breaches_prevented",
    "breaches_succeeded",
];

fn sweep_row(point: &[(String, String)], status: &str, out: Option<&RunOutput64>) -> String {
    let mut cells: Vec<String> = point.iter().map(|(_, v)| v.clone()).collect();
    cells.push(status.to_string());
    match out {
        Some(o) => {
            let m = &o.metrics;
            cells.push(m.energy.to_string());
            cells.push(m.active_server_ticks.to_string());
            cells.push(m.migrations.to_string());
            cells.push(m.terminations.to_string());
            cells.push(m.false_positive_terminations.to_string());
            cells.push(m.sla_violations.to_string());
            cells.push(m.attacks_established.to_string());
            cells.push(m.breaches_prevented.to_string());
            cells.push(m.breaches_succeeded.to_string());
        }
        None => cells.extend(std::iter::repeat_n(String::new(), SWEEP_METRICS.len())),
    }
    cells.join(",")
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let mut base = load_source(&args.source)?;
    apply_overrides(&mut base, &args.overrides.to_overrides());
    let grid = Grid::parse(&args.grid)?;

    let dir = out_dir(&args.output);
    fs::create_dir_all(&dir)
        .map_err(|e| CliError::Io(format!("creating {}: {e}", dir.display())))?;

    let mut csv = String::new();
    csv.push_str(&grid.keys.join(","));
    csv.push_str(",status,");
    csv.push_str(&SWEEP_METRICS.join(","));
    csv.push('\n');

    let mut failures = 0usize;
    for point in grid.points() {
        let mut cfg = base.clone();
        let mut point_err: Option<CliError> = None;
        for (key, value) in &point {
            if let Err(e) = apply_grid_value(&mut cfg, key, value) {
                point_err = Some(e);
                break;
            }
        }
        let result = match point_err {
            Some(e) => Err(e),
            None => execute(&cfg),
        };
        match result {
            Ok(out) => {
                write_artifacts(&out, &dir.join(point_dir_name(&point)), false)?;
                csv.push_str(&sweep_row(&point, "ok", Some(&out)));
            }
            Err(CliError::Io(msg)) => return Err(CliError::Io(msg)),
            Err(CliError::Invalid(msg)) => {
                failures += 1;
                if !args.output.quiet {
                    eprintln!("warning: point {} failed: {msg}", point_dir_name(&point));
                }
                csv.push_str(&sweep_row(&point, "failed", None));
            }
        }
        csv.push('\n');
    }

    let csv_path = dir.join("sweep.csv");
    fs::write(&csv_path, csv)
        .map_err(|e| CliError::Io(format!("writing {}: {e}", csv_path.display())))?;
    if !args.output.quiet {
        println!(
            "sweep complete: {} points, {failures} failed, results in {}",
            grid.len(),
            dir.display()
        );
    }
    Ok(())
}

fn cmd_validate(args: &SourceArgs) -> Result<(), CliError> {
    let cfg = load_source(&args.source)?;
    cfg.validate()
        .map_err(|e| CliError::Invalid(e.to_string()))?;
    println!("scenario is valid");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Validate(args) => cmd_validate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
