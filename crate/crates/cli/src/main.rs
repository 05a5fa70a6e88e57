//! `tpm`: simulate, monitor, evaluate and ablate from the command line.
//!
//! The pipeline is file based. `simulate` writes `trajectory.csv`, `monitor`
//! replays it into `verdicts_*.csv`, `evaluate` scores those verdicts and
//! `ablate` measures prediction error against the recorded trajectory.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use tpm_core::io::{
    ablation_line, confusion_line, read_trajectory, read_verdicts, write_lines, write_trajectory,
    write_verdicts, QRow, RunKey, VerdictRow, ABLATION_HEADER, CONFUSION_HEADER, Q_HEADER,
};
use tpm_core::metrics::{
    label_confusion, min_safety_distance_error, rmse_by_lookahead, warning_leads,
};
use tpm_core::sim::{
    analytic_log, builtin_system, default_tau, simulate, spec_for, Analytic, TrajectoryLog,
    ANALYTIC_KINDS, BUILTIN_SYSTEMS,
};
use tpm_core::{Error, Monitor, MonitorConfig, SafetySpec};

#[derive(Parser)]
#[command(
    name = "tpm",
    version,
    about = "Taylor-polynomial predictive monitoring experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a built-in system or analytic trajectory into trajectory.csv.
    Simulate(SimulateArgs),
    /// Replay a trajectory through the monitor and write verdict files.
    Monitor(MonitorArgs),
    /// Score verdict files against the trajectory.
    Evaluate(EvaluateArgs),
    /// Prediction error by lookahead for each degree.
    Ablate(AblateArgs),
}

#[derive(Args)]
struct Common {
    /// Output directory.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Sampling period in seconds.
    #[arg(long)]
    tau: Option<f64>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    /// car_track, altitude_hold, or an analytic kind (constant, affine, quadratic, sine, oscillator).
    #[arg(long)]
    system: String,
    #[arg(long, default_value_t = 3000)]
    steps: usize,
    /// RK4 steps per sampling interval.
    #[arg(long, default_value_t = 10)]
    substeps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct MonitorArgs {
    #[command(flatten)]
    common: Common,
    /// System whose safety specification is monitored.
    #[arg(long)]
    system: String,
    /// Trajectory CSV; defaults to <out-dir>/trajectory.csv.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long = "degree", default_values_t = [2])]
    degrees: Vec<usize>,
    #[arg(long = "horizon", default_values_t = [50])]
    horizons: Vec<usize>,
    /// Also run the time-to-collision baseline.
    #[arg(long)]
    baseline: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    system: String,
    /// Trajectory CSV; defaults to <out-dir>/trajectory.csv.
    #[arg(long)]
    input: Option<PathBuf>,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    common: Common,
    /// Only used to check the state dimension; any system accepted by `monitor`.
    #[arg(long)]
    system: Option<String>,
    /// Trajectory CSV; defaults to <out-dir>/trajectory.csv.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long = "degree", default_values_t = [1, 2, 3])]
    degrees: Vec<usize>,
    /// The largest value is used as the lookahead range.
    #[arg(long = "horizon", default_values_t = [100])]
    horizons: Vec<usize>,
    /// Add rows for the time-to-collision baseline.
    #[arg(long)]
    baseline: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Monitor(a) => cmd_monitor(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Ablate(a) => cmd_ablate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let config = err
        .chain()
        .filter_map(|e| e.downcast_ref::<Error>())
        .any(Error::is_config);
    if config {
        2
    } else {
        1
    }
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Error::Config(msg.into()).into()
}

fn prepare_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn load_log(common: &Common, input: &Option<PathBuf>) -> Result<TrajectoryLog> {
    let path = input
        .clone()
        .unwrap_or_else(|| common.out_dir.join("trajectory.csv"));
    Ok(read_trajectory(&path, common.tau)?)
}

fn non_empty(values: &[usize], what: &str) -> Result<()> {
    if values.is_empty() {
        return Err(usage(format!("at least one {what} is required")));
    }
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let name = args.system.as_str();
    let spec = spec_for(name)?;
    let tau = args.common.tau.unwrap_or_else(|| default_tau(name));
    let log = if BUILTIN_SYSTEMS.contains(&name) {
        let (model, _) = builtin_system(name, args.seed)?;
        simulate(&model, tau, args.steps, args.substeps)?
    } else {
        debug_assert!(ANALYTIC_KINDS.contains(&name));
        analytic_log(Analytic::from_name(name, &[])?, tau, args.steps)?
    };
    prepare_out_dir(&args.common.out_dir)?;
    let path = args.common.out_dir.join("trajectory.csv");
    write_trajectory(&path, &log)?;

    let min_level = log.levels(&spec).into_iter().fold(f64::INFINITY, f64::min);
    let last = log
        .samples
        .last()
        .expect("simulation logs at least one sample");
    println!("system {name}: {} steps, tau {tau}", log.len() - 1);
    println!("final state at t={}: {:?}", last.time, last.state);
    println!("min safety level {min_level}");
    println!("wrote {}", path.display());
    Ok(())
}

fn percentile(sorted: &[u128], p: f64) -> u128 {
    if sorted.is_empty() {
        return 0;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn cmd_monitor(args: MonitorArgs) -> Result<()> {
    non_empty(&args.degrees, "degree")?;
    non_empty(&args.horizons, "horizon")?;
    let spec = spec_for(&args.system)?;
    let log = load_log(&args.common, &args.input)?;
    prepare_out_dir(&args.common.out_dir)?;

    let mut runs = Vec::new();
    for &h in &args.horizons {
        for &l in &args.degrees {
            runs.push((RunKey::tpm(l, h), l));
        }
        if args.baseline {
            runs.push((RunKey::ttc(h), 1));
        }
    }
    for (key, degree) in runs {
        let config = MonitorConfig::new(log.tau, degree, key.horizon, spec.clone());
        let mut monitor = Monitor::new(config)?;
        let mut rows = Vec::with_capacity(log.len());
        let mut latencies = Vec::with_capacity(log.len());
        for s in &log.samples {
            let start = Instant::now();
            let verdict = monitor.observe(&s.state, s.time)?;
            latencies.push(start.elapsed().as_nanos());
            if let Some(v) = verdict {
                rows.push(VerdictRow::from(v));
            }
        }
        let path = args.common.out_dir.join(key.verdict_file_name());
        write_verdicts(&path, &rows)?;
        latencies.sort_unstable();
        let warnings = rows.iter().filter(|r| r.warning).count();
        println!(
            "{} l={} h={}: {} verdicts, {} warnings, latency p50 {} ns, p99 {} ns -> {}",
            key.method,
            key.degree,
            key.horizon,
            rows.len(),
            warnings,
            percentile(&latencies, 50.0),
            percentile(&latencies, 99.0),
            path.display()
        );
    }
    Ok(())
}

fn verdict_files(dir: &Path) -> Result<Vec<(RunKey, PathBuf)>> {
    let mut found = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let entry = entry?;
        let name = entry.file_name();
        if let Some(key) = name.to_str().and_then(RunKey::from_verdict_file_name) {
            found.push((key, entry.path()));
        }
    }
    found.sort();
    Ok(found)
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let spec = spec_for(&args.system)?;
    let log = load_log(&args.common, &args.input)?;
    let runs = verdict_files(&args.common.out_dir)?;
    if runs.is_empty() {
        return Err(usage(format!(
            "no verdict files in {}; run `tpm monitor` first",
            args.common.out_dir.display()
        )));
    }
    let truth = log.levels(&spec);
    let times: Vec<f64> = log.samples.iter().map(|s| s.time).collect();
    let n = log.len();

    let mut confusion_rows = Vec::new();
    let mut q_rows = Vec::new();
    for (key, path) in runs {
        let mut warnings = vec![false; n];
        let mut min_levels: Vec<Option<[f64; 1]>> = vec![None; n];
        for row in read_verdicts(&path)? {
            let i = log.index_of(row.t).ok_or_else(|| {
                Error::Data(format!(
                    "{}: verdict time {} is not on the trajectory grid",
                    path.display(),
                    row.t
                ))
            })?;
            warnings[i] = row.warning;
            min_levels[i] = Some([row.min_level]);
        }
        let counts = label_confusion(&truth, &warnings, key.horizon)?;
        let leads = warning_leads(&times, &warnings, &truth, key.horizon, log.tau)?;
        let mean_lead = (!leads.is_empty()).then(|| leads.iter().sum::<f64>() / leads.len() as f64);
        let verdict_steps = (0..n)
            .take_while(|i| i + key.horizon < n)
            .filter(|&i| min_levels[i].is_some())
            .count() as u64;
        confusion_rows.push(confusion_line(&key, &counts));
        q_rows.push(
            QRow {
                unsafe_entries: leads.len(),
                mean_lead_steps: mean_lead,
                min_distance_error: min_safety_distance_error(&min_levels, &truth, key.horizon)?,
                evaluated_steps: counts.total(),
                verdict_steps,
                total_steps: n,
                key,
            }
            .to_csv_line(),
        );
    }

    let confusion_path = args.common.out_dir.join("confusion.csv");
    let q_path = args.common.out_dir.join("q_metrics.csv");
    write_lines(
        &confusion_path,
        CONFUSION_HEADER,
        confusion_rows.iter().cloned(),
    )?;
    write_lines(&q_path, Q_HEADER, q_rows.iter().cloned())?;
    println!("{CONFUSION_HEADER}");
    for row in &confusion_rows {
        println!("{row}");
    }
    println!(
        "wrote {} and {}",
        confusion_path.display(),
        q_path.display()
    );
    Ok(())
}

fn cmd_ablate(args: AblateArgs) -> Result<()> {
    non_empty(&args.degrees, "degree")?;
    non_empty(&args.horizons, "horizon")?;
    let spec = match &args.system {
        Some(name) => spec_for(name)?,
        None => SafetySpec::new("unconstrained", 0, |_| f64::INFINITY),
    };
    let log = load_log(&args.common, &args.input)?;
    prepare_out_dir(&args.common.out_dir)?;
    let horizon = *args.horizons.iter().max().expect("checked non-empty");

    let mut runs: Vec<(&str, usize)> = args.degrees.iter().map(|&l| ("tpm", l)).collect();
    if args.baseline {
        runs.push(("ttc", 1));
    }
    let mut lines = Vec::new();
    for (method, degree) in runs {
        let mut monitor = Monitor::new(MonitorConfig::new(log.tau, degree, horizon, spec.clone()))?;
        let mut sets = Vec::with_capacity(log.len());
        monitor.replay(&log.samples, |_, m| sets.extend(m.prediction_set()))?;
        let records = rmse_by_lookahead(&sets, &log)?;
        if let (Some(first), Some(last)) = (records.first(), records.last()) {
            println!(
                "{method} l={degree}: rmse {:.3e} at m={}, {:.3e} at m={}",
                first.rmse, first.lookahead_steps, last.rmse, last.lookahead_steps
            );
        }
        lines.extend(records.iter().map(|r| ablation_line(method, degree, r)));
    }
    let path = args.common.out_dir.join("ablation.csv");
    write_lines(&path, ABLATION_HEADER, lines)?;
    println!("wrote {}", path.display());
    Ok(())
}
