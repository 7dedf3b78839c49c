//! Command-line front end for the message-passing toolkit: execute the
//! bundled workloads, record and classify scaling curves, tabulate the
//! analytic models, and turn saved curves into speedup tables.
//!
//! Exit codes: 0 on success, 2 for unusable flags or inputs, 3 when a
//! measurement or workload fails at runtime.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use mpk::metrics::{amdahl_bound, efficiency, gustafson_bound, ParallelTimeModel};
use mpk::predictor::{
    predict, read_curve_file, report_from_curve, ClassifierConfig, PredictionReport, SpeedupCurve,
};
use mpk::runtime::{WorldConfig, DEFAULT_EAGER_THRESHOLD, EAGER_THRESHOLD_ENV};
use mpk::workloads::{PrimesConfig, WaveConfig, WorkloadOutput, WorkloadSpec};
use mpk::Error;

#[derive(Parser)]
#[command(
    name = "mpk",
    version,
    about = "Message-passing workloads with speedup measurement, modeling, and prediction"
)]
struct Cli {
    /// Payload size in bytes at or below which a send completes by
    /// buffering at the receiver instead of waiting for a matching receive.
    #[arg(
        long,
        global = true,
        env = EAGER_THRESHOLD_ENV,
        default_value_t = DEFAULT_EAGER_THRESHOLD,
        value_name = "BYTES"
    )]
    eager_threshold_bytes: u64,

    /// Print machine-readable JSON instead of human-oriented text.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one workload at a fixed rank count and report its timings.
    Run(RunArgs),
    /// Sweep rank counts on one CPU (or replay a saved curve) and classify
    /// the expected multi-processor behavior.
    Predict(PredictArgs),
    /// Tabulate an analytic speedup or execution-time model.
    Model(ModelArgs),
    /// Turn a recorded curve into a speedup and efficiency table.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum WorkloadName {
    /// Vibrating string solved by finite differences with halo exchange.
    Wave,
    /// Prime counting by trial division over a cyclic partition.
    Primes,
}

#[derive(Args)]
struct WorkloadFlags {
    /// Which workload to execute.
    #[arg(long, value_enum)]
    workload: Option<WorkloadName>,

    /// Points on the string (wave).
    #[arg(long, default_value_t = 800)]
    points: u64,

    /// Time steps to integrate (wave).
    #[arg(long, default_value_t = 2000)]
    steps: u64,

    /// Coupling coefficient of the stencil (wave).
    #[arg(long, default_value_t = 0.1)]
    c: f64,

    /// Count primes up to and including this bound (primes).
    #[arg(long, default_value_t = 200_000)]
    limit: u64,
}

impl WorkloadFlags {
    fn spec(&self) -> Result<WorkloadSpec, Error> {
        match self.workload {
            Some(WorkloadName::Wave) => Ok(WorkloadSpec::Wave(WaveConfig {
                total_points: self.points,
                time_steps: self.steps,
                c: self.c,
            })),
            Some(WorkloadName::Primes) => {
                Ok(WorkloadSpec::Primes(PrimesConfig { limit: self.limit }))
            }
            None => Err(Error::InvalidConfig("--workload is required".to_string())),
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    workload: WorkloadFlags,

    /// Number of ranks to spawn.
    #[arg(long, default_value_t = 1)]
    procs: u32,

    /// Timed repetitions; the reported seconds is the median.
    #[arg(long, default_value_t = 1)]
    reps: u32,

    /// Time the serial form instead of spawning ranks.
    #[arg(long)]
    serial: bool,

    /// Append the measurement to this curve CSV (header added when new).
    #[arg(long, value_name = "CSV")]
    out: Option<PathBuf>,

    /// Write the per-message trace of the last repetition to this file.
    #[arg(long, value_name = "FILE")]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    /// Classify a saved curve CSV instead of measuring one.
    #[arg(
        long,
        value_name = "CSV",
        conflicts_with = "workload",
        required_unless_present = "workload"
    )]
    curve_file: Option<PathBuf>,

    #[command(flatten)]
    workload: WorkloadFlags,

    /// Sweep every feasible rank count from 1 through this value.
    #[arg(long, default_value_t = 8)]
    max_procs: u32,

    /// Timed repetitions per point; the median is kept.
    #[arg(long, default_value_t = 3)]
    reps: u32,

    /// Normalized slope above which the verdict is POOR.
    #[arg(long, default_value_t = 0.25)]
    poor_threshold: f64,

    /// Normalized slope below which the verdict is LINEAR.
    #[arg(long, default_value_t = 0.05)]
    linear_threshold: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Law {
    /// Fixed-size speedup bound from the serial fraction f.
    Amdahl,
    /// Scaled speedup from the serial time fraction s.
    Gustafson,
    /// Execution time sigma + phi/p + kappa*p.
    TimeModel,
}

/// Inclusive process-count range written as `start..end`.
#[derive(Clone, Copy)]
struct ProcRange {
    start: u32,
    end: u32,
}

fn parse_range(text: &str) -> Result<ProcRange, String> {
    let (start, end) = text
        .split_once("..")
        .ok_or_else(|| format!("expected start..end, got {text:?}"))?;
    let start: u32 = start
        .trim()
        .parse()
        .map_err(|_| format!("bad range start {start:?}"))?;
    let end: u32 = end
        .trim()
        .parse()
        .map_err(|_| format!("bad range end {end:?}"))?;
    if start < 1 {
        return Err("range must start at 1 or above".to_string());
    }
    if end < start {
        return Err(format!("empty range {start}..{end}"));
    }
    Ok(ProcRange { start, end })
}

#[derive(Args)]
struct ModelArgs {
    /// Which law to tabulate.
    #[arg(long, value_enum)]
    law: Law,

    /// Serial fraction of the work, in [0, 1] (amdahl).
    #[arg(long, default_value_t = 0.1)]
    f: f64,

    /// Serial fraction of scaled execution time, in [0, 1] (gustafson).
    #[arg(long, default_value_t = 0.1)]
    s: f64,

    /// Inherently serial seconds (time-model).
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,

    /// Perfectly parallelizable seconds (time-model).
    #[arg(long, default_value_t = 0.0)]
    phi: f64,

    /// Coordination seconds charged per process (time-model).
    #[arg(long, default_value_t = 0.0)]
    kappa: f64,

    /// Inclusive process-count range, as start..end.
    #[arg(long, default_value = "1..8", value_parser = parse_range)]
    procs: ProcRange,
}

#[derive(Args)]
struct ReportArgs {
    /// Curve CSV to read: `procs,seconds` rows after a header, optionally
    /// preceded by a `# serial_seconds=` comment.
    #[arg(long, value_name = "CSV")]
    input: PathBuf,

    /// Serial baseline in seconds; overrides the file's value.
    #[arg(long)]
    serial: Option<f64>,

    /// Normalized slope above which the verdict is POOR.
    #[arg(long, default_value_t = 0.25)]
    poor_threshold: f64,

    /// Normalized slope below which the verdict is LINEAR.
    #[arg(long, default_value_t = 0.05)]
    linear_threshold: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(args) => cmd_run(args, cli.json, cli.eager_threshold_bytes),
        Command::Predict(args) => cmd_predict(args, cli.json, cli.eager_threshold_bytes),
        Command::Model(args) => cmd_model(args, cli.json),
        Command::Report(args) => cmd_report(args, cli.json),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

/// Usable-input problems exit 2; failures of an otherwise valid run exit 3.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::RankFailed { .. }
        | Error::RankPanicked { .. }
        | Error::DeadlockDetected { .. }
        | Error::WorkloadFailed { .. }
        | Error::BufferLimitExceeded { .. }
        | Error::Io(_) => 3,
        _ => 2,
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).expect("times are never NaN"));
    let mid = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[mid]
    } else {
        (xs[mid - 1] + xs[mid]) / 2.0
    }
}

fn result_line(output: &WorkloadOutput) -> String {
    match output {
        WorkloadOutput::Primes(r) => format!("count={} largest={}", r.prime_count, r.largest_prime),
        WorkloadOutput::Wave(v) => {
            let joined: Vec<String> = v.iter().map(f64::to_string).collect();
            format!("amplitudes={}", joined.join(","))
        }
    }
}

fn result_json(output: &WorkloadOutput) -> serde_json::Value {
    match output {
        WorkloadOutput::Primes(r) => json!({
            "prime_count": r.prime_count,
            "largest_prime": r.largest_prime,
        }),
        WorkloadOutput::Wave(v) => json!({ "amplitudes": v }),
    }
}

fn append_curve_row(path: &Path, procs: u32, seconds: f64) -> Result<(), Error> {
    let fresh = !path.exists();
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    if fresh {
        writeln!(file, "procs,seconds")?;
    }
    writeln!(file, "{procs},{seconds}")?;
    Ok(())
}

fn append_serial_comment(path: &Path, seconds: f64) -> Result<(), Error> {
    let fresh = !path.exists();
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    writeln!(file, "# serial_seconds={seconds}")?;
    if fresh {
        writeln!(file, "procs,seconds")?;
    }
    Ok(())
}

fn cmd_run(args: &RunArgs, json: bool, eager_threshold: u64) -> Result<(), Error> {
    let spec = args.workload.spec()?;
    if args.procs < 1 {
        return Err(Error::InvalidProcessorCount);
    }
    if args.reps < 1 {
        return Err(Error::InvalidConfig("--reps must be at least 1".to_string()));
    }

    if args.serial {
        let mut times = Vec::with_capacity(args.reps as usize);
        let mut output = None;
        for _ in 0..args.reps {
            let start = Instant::now();
            output = Some(spec.run_serial()?);
            times.push(start.elapsed().as_secs_f64());
        }
        let seconds = median(times);
        let output = output.expect("at least one repetition ran");
        if let Some(path) = &args.out {
            append_serial_comment(path, seconds)?;
        }
        if json {
            let doc = json!({
                "workload": spec.to_string(),
                "serial": true,
                "seconds": seconds,
                "result": result_json(&output),
            });
            println!("{}", serde_json::to_string_pretty(&doc).expect("doc serializes"));
        } else {
            println!("workload: {spec}");
            println!("serial seconds: {seconds}");
            println!("{}", result_line(&output));
        }
        return Ok(());
    }

    let config = WorldConfig::new(args.procs as usize)
        .eager_threshold(eager_threshold)
        .trace(args.trace.is_some());
    let mut times = Vec::with_capacity(args.reps as usize);
    let mut last = None;
    for _ in 0..args.reps {
        let start = Instant::now();
        let run = spec.run_parallel(config)?;
        times.push(start.elapsed().as_secs_f64());
        last = Some(run);
    }
    let seconds = median(times);
    let (output, report) = last.expect("at least one repetition ran");

    if let Some(path) = &args.trace {
        let mut file = std::fs::File::create(path)?;
        for line in &report.trace {
            writeln!(file, "{line}")?;
        }
    }
    if let Some(path) = &args.out {
        append_curve_row(path, args.procs, seconds)?;
    }

    if json {
        let doc = json!({
            "workload": spec.to_string(),
            "procs": args.procs,
            "seconds": seconds,
            "result": result_json(&output),
            "timings": report.timings,
            "stats": report.stats,
        });
        println!("{}", serde_json::to_string_pretty(&doc).expect("doc serializes"));
    } else {
        println!("workload: {spec}");
        println!("procs: {}", args.procs);
        println!("seconds: {seconds}");
        println!("{}", result_line(&output));
        println!("rank  t_comp      t_comm      t_idle      total");
        for (rank, t) in report.timings.iter().enumerate() {
            println!(
                "{rank:<5} {:<11.6} {:<11.6} {:<11.6} {:.6}",
                t.t_comp,
                t.t_comm,
                t.t_idle,
                t.total()
            );
        }
    }
    Ok(())
}

fn print_prediction(report: &PredictionReport, json: bool) {
    if json {
        println!("{}", report.to_json());
        return;
    }
    println!("workload: {}", report.workload);
    if let Some(serial) = report.serial_seconds {
        println!("serial seconds: {serial}");
    }
    println!("procs  seconds      speedup");
    for point in &report.points {
        let speedup = point
            .speedup
            .map_or_else(|| "-".to_string(), |s| format!("{s:.4}"));
        println!("{:<6} {:<12.6} {speedup}", point.procs, point.seconds);
    }
    println!("normalized slope: {}", report.normalized_slope);
    println!("verdict: {}", report.verdict);
}

fn cmd_predict(args: &PredictArgs, json: bool, eager_threshold: u64) -> Result<(), Error> {
    let config = ClassifierConfig {
        poor_threshold: args.poor_threshold,
        linear_threshold: args.linear_threshold,
        repetitions: args.reps,
    };

    let report = if let Some(path) = &args.curve_file {
        let curve = read_curve_file(path)?;
        report_from_curve(path.display().to_string(), &curve, &config)?
    } else {
        if args.max_procs < 2 {
            return Err(Error::InvalidConfig(
                "--max-procs must be at least 2 to measure a slope".to_string(),
            ));
        }
        let spec = args.workload.spec()?;
        let report = predict(&spec, args.max_procs, &config, eager_threshold)?;
        if !report.pinned_single_cpu {
            eprintln!("warning: could not pin to a single CPU; slopes may be understated");
        }
        report
    };

    print_prediction(&report, json);
    Ok(())
}

fn check_fraction_flag(name: &'static str, value: f64) -> Result<(), Error> {
    if !(0.0..=f64::INFINITY).contains(&value) {
        return Err(Error::DomainError {
            param: name,
            value,
            min: 0.0,
            max: f64::INFINITY,
        });
    }
    Ok(())
}

fn cmd_model(args: &ModelArgs, json: bool) -> Result<(), Error> {
    let time_model = ParallelTimeModel::new(
        {
            let sigma = args.sigma;
            move |_| sigma
        },
        {
            let phi = args.phi;
            move |_| phi
        },
        {
            let kappa = args.kappa;
            move |_, procs| kappa * f64::from(procs)
        },
    );
    if matches!(args.law, Law::TimeModel) {
        check_fraction_flag("sigma", args.sigma)?;
        check_fraction_flag("phi", args.phi)?;
        check_fraction_flag("kappa", args.kappa)?;
    }

    let mut rows = Vec::new();
    for procs in args.procs.start..=args.procs.end {
        let value = match args.law {
            Law::Amdahl => amdahl_bound(args.f, procs)?,
            Law::Gustafson => gustafson_bound(args.s, procs)?,
            Law::TimeModel => time_model.parallel_time(0.0, procs)?,
        };
        rows.push((procs, value));
    }

    if json {
        let law = match args.law {
            Law::Amdahl => "amdahl",
            Law::Gustafson => "gustafson",
            Law::TimeModel => "time-model",
        };
        let points: Vec<serde_json::Value> = rows
            .iter()
            .map(|(p, v)| json!({ "procs": p, "value": v }))
            .collect();
        let doc = json!({ "law": law, "points": points });
        println!("{}", serde_json::to_string_pretty(&doc).expect("doc serializes"));
    } else {
        println!("p,bound");
        for (procs, value) in rows {
            println!("{procs},{value}");
        }
    }
    Ok(())
}

fn cmd_report(args: &ReportArgs, json: bool) -> Result<(), Error> {
    let curve = read_curve_file(&args.input)?;
    let curve = match args.serial {
        Some(serial) => SpeedupCurve::new(curve.points().to_vec(), Some(serial))?,
        None => curve,
    };
    if curve.serial_seconds().is_none() {
        return Err(Error::InvalidCurve(
            "no serial baseline: pass --serial or include a # serial_seconds= line".to_string(),
        ));
    }

    let config = ClassifierConfig {
        poor_threshold: args.poor_threshold,
        linear_threshold: args.linear_threshold,
        ..ClassifierConfig::default()
    };
    let report = report_from_curve(args.input.display().to_string(), &curve, &config)?;

    if json {
        println!("{}", report.to_json());
        return Ok(());
    }
    println!("procs,seconds,speedup,efficiency");
    for point in &report.points {
        let psi = point.speedup.expect("baseline present for every point");
        let eff = efficiency(psi, point.procs)?;
        println!("{},{},{psi},{eff}", point.procs, point.seconds);
    }
    println!("verdict: {}", report.verdict);
    Ok(())
}
