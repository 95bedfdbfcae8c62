//! Operator command line for the simulated core.
//!
//! `run` executes one scenario and prints its report, `coldstorm` pairs a
//! warm and an evicted run of the same scenario and seed and reports the
//! deltas, `cost` prints the memory cost comparison, `codec` encodes and
//! decodes access-side frames, and `report` merges previously written run
//! outputs. Exit codes: 0 for a fully successful run, 1 when any device
//! failed, 2 for configuration errors, 3 when convergence was required
//! but never reached.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use pfaas::costmodel::CostParams;
use pfaas::loadgen::{
    self, calibration, RunOptions, ScenarioResult, ScenarioSpec, CALIBRATIONS,
};
use pfaas::metrics::{merge_reports, render_merged_table, Convergence, RunReport};
use pfaas::n2proxy::{self, N2Frame};
use pfaas::procedures::provision;

const EXIT_FAILED_DEVICES: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NO_CONVERGENCE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "pfaas",
    version,
    about = "Deterministic serverless 5G core emulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and print its report.
    Run(RunArgs),
    /// Run the same scenario warm and cold-evicted, and report the deltas.
    Coldstorm(ColdstormArgs),
    /// Print the memory cost comparison and break-even thresholds.
    Cost(CostArgs),
    /// Encode or decode access-side frames.
    Codec {
        #[command(subcommand)]
        op: CodecOp,
    },
    /// Render or merge previously written run outputs.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Json,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Preset name (idle, low, medium, high, burst) or path to a scenario
    /// JSON file.
    #[arg(long)]
    scenario: String,
    /// Enable the slice-admission, charging, and binding feature set.
    #[arg(long)]
    r17: bool,
    /// Master seed; falls back to PFAAS_SEED, then 42.
    #[arg(long)]
    seed: Option<u64>,
    /// Seconds a replica may sit idle before reclamation.
    #[arg(long)]
    idle_window_s: Option<u64>,
    /// Pod cold-start delay in milliseconds.
    #[arg(long)]
    cold_start_ms: Option<u64>,
    /// Symmetric execution-time jitter in percent.
    #[arg(long)]
    jitter_pct: Option<f64>,
    /// Timing profile applied over the scenario's radio and device delays.
    #[arg(long)]
    calibration: Option<String>,
    /// Subscriber provisioning file; synthesized from the scenario size
    /// when absent.
    #[arg(long)]
    subscribers: Option<PathBuf>,
    /// Session creation invokes user-plane setup inline.
    #[arg(long)]
    n4_nested: bool,
    /// Platform resident footprint used for the GB-s report, MB.
    #[arg(long, default_value_t = pfaas::costmodel::DEFAULT_PLATFORM_MB)]
    platform_mb: f64,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Start with every pod evicted and batch arrivals collapsed.
    #[arg(long)]
    cold_storm: bool,
    /// Write the full run result as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the invocation ledger as JSON lines.
    #[arg(long)]
    ledger: Option<PathBuf>,
    /// Write the final state-store contents as JSON.
    #[arg(long)]
    dump_state: Option<PathBuf>,
    /// Exit 3 unless registration latencies settled.
    #[arg(long)]
    require_convergence: bool,
}

#[derive(Args)]
struct ColdstormArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Write the paired comparison as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit 3 unless the evicted run settled.
    #[arg(long)]
    require_convergence: bool,
}

#[derive(Args)]
struct CostArgs {
    /// Always-on core footprint, MB.
    #[arg(long = "Ma", default_value_t = pfaas::costmodel::DEFAULT_ALWAYS_ON_MB)]
    ma: f64,
    /// Shared platform footprint, MB.
    #[arg(long = "Mp", default_value_t = pfaas::costmodel::DEFAULT_PLATFORM_MB)]
    mp: f64,
    /// Combined function replica footprint, MB.
    #[arg(long = "Mf", default_value_t = pfaas::costmodel::DEFAULT_FUNCTIONS_MB)]
    mf: f64,
    /// Full duty-cycled core footprint, MB.
    #[arg(long = "Ms", default_value_t = pfaas::costmodel::DEFAULT_FULL_CORE_MB)]
    ms: f64,
    /// Scale-to-zero resident floor, MB.
    #[arg(long = "Mi", default_value_t = pfaas::costmodel::DEFAULT_IDLE_FLOOR_MB)]
    mi: f64,
    /// Memory-time charged per invocation, GB-s.
    #[arg(long, default_value_t = pfaas::costmodel::DEFAULT_PER_INVOCATION_GB_S)]
    g: f64,
    /// Sustained invocation rate, per second.
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    /// Busy fraction of the horizon.
    #[arg(long, default_value_t = 0.33)]
    duty: f64,
    /// Deployments sharing one platform.
    #[arg(long, default_value_t = 1)]
    tenants: u32,
    /// Comparison horizon, seconds.
    #[arg(long, default_value_t = 1.0)]
    horizon_s: f64,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

#[derive(Subcommand)]
enum CodecOp {
    /// Decode a hex-encoded frame into a JSON message dump.
    Decode { hex: String },
    /// Encode a JSON message description into a hex frame.
    Encode { json: String },
}

#[derive(Args)]
struct ReportArgs {
    /// Run outputs to merge: full run results or their reports.
    #[arg(required = true)]
    paths: Vec<PathBuf>,
    /// Platform footprint when a full run result needs its report built, MB.
    #[arg(long, default_value_t = pfaas::costmodel::DEFAULT_PLATFORM_MB)]
    platform_mb: f64,
    /// Write the merged output as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Coldstorm(args) => cmd_coldstorm(args),
        Command::Cost(args) => cmd_cost(args),
        Command::Codec { op } => cmd_codec(op),
        Command::Report(args) => cmd_report(args),
    };
    match code {
        Ok(code) => ExitCode::from(code),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

fn resolve_seed(explicit: Option<u64>) -> Result<u64, String> {
    if let Some(seed) = explicit {
        return Ok(seed);
    }
    match std::env::var("PFAAS_SEED") {
        Ok(raw) => raw
            .parse::<u64>()
            .map_err(|_| format!("PFAAS_SEED must be a 64-bit unsigned integer, got {raw:?}")),
        Err(_) => Ok(42),
    }
}

fn resolve_inputs(args: &ScenarioArgs, cold_storm: bool) -> Result<(ScenarioSpec, RunOptions), String> {
    let mut spec = loadgen::resolve_scenario(&args.scenario).map_err(|e| e.to_string())?;
    if let Some(name) = &args.calibration {
        let cal = calibration(name).ok_or_else(|| {
            let known: Vec<&str> = CALIBRATIONS.iter().map(|c| c.name).collect();
            format!("unknown calibration {name:?}; expected one of {}", known.join(", "))
        })?;
        spec.apply_calibration(cal);
    }
    let subscribers = match &args.subscribers {
        Some(path) => Some(provision::load_file(path).map_err(|e| e.to_string())?),
        None => None,
    };
    let defaults = RunOptions::default();
    let opts = RunOptions {
        r17: args.r17,
        seed: resolve_seed(args.seed)?,
        cold_storm,
        idle_window_s: args.idle_window_s.unwrap_or(defaults.idle_window_s),
        cold_start_ms: args.cold_start_ms.unwrap_or(defaults.cold_start_ms),
        jitter_pct: args.jitter_pct.unwrap_or(defaults.jitter_pct),
        n4_nested: args.n4_nested,
        subscribers,
        capture_state: false,
    };
    Ok((spec, opts))
}

fn write_json(path: &PathBuf, value: &impl Serialize) -> Result<(), String> {
    let text = serde_json::to_string_pretty(value).map_err(|e| e.to_string())?;
    std::fs::write(path, text + "\n").map_err(|e| format!("writing {}: {e}", path.display()))
}

fn cmd_run(args: RunArgs) -> Result<u8, String> {
    let (spec, mut opts) = resolve_inputs(&args.scenario, args.cold_storm)?;
    opts.capture_state = args.dump_state.is_some();
    let result = loadgen::run_scenario(&spec, &opts).map_err(|e| e.to_string())?;
    let report = result.report(args.scenario.platform_mb);

    if let Some(path) = &args.out {
        write_json(path, &result)?;
    }
    if let Some(path) = &args.ledger {
        let mut lines = String::new();
        for record in &result.ledger {
            lines.push_str(&serde_json::to_string(record).map_err(|e| e.to_string())?);
            lines.push('\n');
        }
        std::fs::write(path, lines).map_err(|e| format!("writing {}: {e}", path.display()))?;
    }
    if let Some(path) = &args.dump_state {
        let state = result
            .final_state
            .as_ref()
            .expect("state captured when a dump path is given");
        write_json(path, state)?;
    }

    match args.scenario.format {
        Format::Table => print!("{}", report.render_table()),
        Format::Json => println!(
            "{}",
            serde_json::to_string_pretty(&report).map_err(|e| e.to_string())?
        ),
    }

    if args.require_convergence && report.convergence == Convergence::NoConvergence {
        return Ok(EXIT_NO_CONVERGENCE);
    }
    Ok(if result.success_rate == 1.0 {
        0
    } else {
        EXIT_FAILED_DEVICES
    })
}

/// Paired warm and evicted runs of one scenario under one seed.
#[derive(Debug, Serialize, Deserialize)]
struct ColdStormComparison {
    scenario: String,
    seed: u64,
    warm: RunReport,
    cold: RunReport,
    delta_p50_us: i64,
    delta_p95_us: i64,
    delta_p99_us: i64,
    cold_convergence: Convergence,
}

fn cmd_coldstorm(args: ColdstormArgs) -> Result<u8, String> {
    let (spec, warm_opts) = resolve_inputs(&args.scenario, false)?;
    let cold_opts = RunOptions {
        cold_storm: true,
        ..warm_opts.clone()
    };
    let warm = loadgen::run_scenario(&spec, &warm_opts).map_err(|e| e.to_string())?;
    let cold = loadgen::run_scenario(&spec, &cold_opts).map_err(|e| e.to_string())?;
    let warm_report = warm.report(args.scenario.platform_mb);
    let cold_report = cold.report(args.scenario.platform_mb);

    let delta = |c: u64, w: u64| c as i64 - w as i64;
    let comparison = ColdStormComparison {
        scenario: spec.name.clone(),
        seed: warm_opts.seed,
        delta_p50_us: delta(cold_report.registration.p50_us, warm_report.registration.p50_us),
        delta_p95_us: delta(cold_report.registration.p95_us, warm_report.registration.p95_us),
        delta_p99_us: delta(cold_report.registration.p99_us, warm_report.registration.p99_us),
        cold_convergence: cold_report.convergence,
        warm: warm_report,
        cold: cold_report,
    };

    if let Some(path) = &args.out {
        write_json(path, &comparison)?;
    }
    match args.scenario.format {
        Format::Table => {
            println!(
                "cold-start storm on {} (seed {}): dp50 {:+} us, dp95 {:+} us, dp99 {:+} us",
                comparison.scenario, comparison.seed, comparison.delta_p50_us,
                comparison.delta_p95_us, comparison.delta_p99_us
            );
            match comparison.cold_convergence {
                Convergence::Converged { at } => println!("cold run settled at {at}"),
                Convergence::NoConvergence => println!("cold run never settled"),
            }
            println!("--- warm ---");
            print!("{}", comparison.warm.render_table());
            println!("--- cold ---");
            print!("{}", comparison.cold.render_table());
        }
        Format::Json => println!(
            "{}",
            serde_json::to_string_pretty(&comparison).map_err(|e| e.to_string())?
        ),
    }

    if args.require_convergence && comparison.cold_convergence == Convergence::NoConvergence {
        return Ok(EXIT_NO_CONVERGENCE);
    }
    Ok(if warm.success_rate == 1.0 && cold.success_rate == 1.0 {
        0
    } else {
        EXIT_FAILED_DEVICES
    })
}

fn cmd_cost(args: CostArgs) -> Result<u8, String> {
    let params = CostParams {
        ms_mb: args.ms,
        mp_mb: args.mp,
        mf_mb: args.mf,
        ma_mb: args.ma,
        mi_mb: args.mi,
        g_gb_s: args.g,
        lambda_per_s: args.lambda,
        duty: args.duty,
        tenants: args.tenants,
        horizon_s: args.horizon_s,
    };
    let summary = params.summarize().map_err(|e| e.to_string())?;
    match args.format {
        Format::Table => print!("{}", summary.render_table()),
        Format::Json => println!(
            "{}",
            serde_json::to_string_pretty(&summary).map_err(|e| e.to_string())?
        ),
    }
    Ok(0)
}

fn cmd_codec(op: CodecOp) -> Result<u8, String> {
    match op {
        CodecOp::Decode { hex: raw } => {
            let bytes = hex::decode(raw.trim()).map_err(|e| format!("invalid hex: {e}"))?;
            let frame = N2Frame::decode(&bytes).map_err(|e| e.to_string())?;
            println!(
                "{}",
                serde_json::to_string_pretty(&n2proxy::frame_to_dto(&frame))
                    .map_err(|e| e.to_string())?
            );
        }
        CodecOp::Encode { json } => {
            let dto: n2proxy::FrameDto =
                serde_json::from_str(&json).map_err(|e| format!("invalid message JSON: {e}"))?;
            let frame = n2proxy::dto_to_frame(&dto).map_err(|e| e.to_string())?;
            let bytes = frame.encode().map_err(|e| e.to_string())?;
            println!("{}", hex::encode(bytes));
        }
    }
    Ok(0)
}

#[derive(Debug, Serialize)]
struct MergedOutput {
    runs: Vec<RunReport>,
    merged: Vec<pfaas::metrics::MergedMetric>,
}

fn load_report(path: &PathBuf, platform_mb: f64) -> Result<RunReport, String> {
    let text =
        std::fs::read_to_string(path).map_err(|e| format!("reading {}: {e}", path.display()))?;
    if let Ok(report) = serde_json::from_str::<RunReport>(&text) {
        return Ok(report);
    }
    let result: ScenarioResult = serde_json::from_str(&text).map_err(|e| {
        format!(
            "{} is neither a run report nor a full run result: {e}",
            path.display()
        )
    })?;
    Ok(result.report(platform_mb))
}

fn cmd_report(args: ReportArgs) -> Result<u8, String> {
    let reports: Vec<RunReport> = args
        .paths
        .iter()
        .map(|p| load_report(p, args.platform_mb))
        .collect::<Result<_, String>>()?;

    if reports.len() == 1 {
        let report = &reports[0];
        if let Some(path) = &args.out {
            write_json(path, report)?;
        }
        match args.format {
            Format::Table => print!("{}", report.render_table()),
            Format::Json => println!(
                "{}",
                serde_json::to_string_pretty(report).map_err(|e| e.to_string())?
            ),
        }
        return Ok(0);
    }

    let merged = merge_reports(&reports);
    let output = MergedOutput {
        runs: reports,
        merged,
    };
    if let Some(path) = &args.out {
        write_json(path, &output)?;
    }
    match args.format {
        Format::Table => print!("{}", render_merged_table(&output.merged, output.runs.len())),
        Format::Json => println!(
            "{}",
            serde_json::to_string_pretty(&output).map_err(|e| e.to_string())?
        ),
    }
    Ok(0)
}
