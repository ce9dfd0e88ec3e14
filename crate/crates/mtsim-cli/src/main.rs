//! `mtsim`: trace generation, simulation, policy tuning, hierarchy
//! recommendation, and skew characterization for multi-tier buffer
//! management experiments.
//!
//! Exit codes: 0 on success, 2 on usage errors, 3 on validation or
//! configuration errors.

mod parse;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mtsim_core::device::DEFAULT_BLOCK_SIZE;
use mtsim_core::engine::{run_trace, EngineConfig, MigrationPolicy, SimMetrics};
use mtsim_core::recommender::{recommend, CandidateSets, PolicySource};
use mtsim_core::tuner::{anneal, AnnealingConfig, PolicyGrid, TuningMode};
use mtsim_core::workload::{
    characterize, generate, generate_snapshot, read_trace, write_trace, WorkloadShape,
    WorkloadSpec,
};
use mtsim_core::{DeviceCatalog, Hierarchy, Snapshot};

/// Keeps the tuner's proposal stream independent from the engine's
/// probability stream when both derive from one user-facing seed.
const SEED_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Parser)]
#[command(name = "mtsim", version, about = "Multi-tier buffer management simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic workload trace (and optionally a warm snapshot).
    GenTrace(GenTraceArgs),
    /// Replay a trace against a hierarchy and report metrics.
    Simulate(SimulateArgs),
    /// Tune the migration policy with simulated annealing.
    Tune(TuneArgs),
    /// Rank candidate hierarchies under a cost budget.
    Recommend(RecommendArgs),
    /// Emit the per-block access-count CDF of a trace.
    Characterize(CharacterizeArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum WorkloadKind {
    /// Rank-skewed accesses (use --theta).
    Zipf,
    /// Data accesses interleaved with sequential log writes.
    Log,
    /// A hot window that slides over time.
    Shifting,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Replay,
    Online,
}

#[derive(Args)]
struct GenTraceArgs {
    #[arg(long, value_enum)]
    workload: WorkloadKind,
    #[arg(long)]
    blocks: u64,
    #[arg(long)]
    ops: u64,
    /// Zipf skew exponent (zipf only; default 1.0).
    #[arg(long)]
    theta: Option<f64>,
    /// Fraction of data operations that are reads (default 0.5).
    #[arg(long, value_parser = parse::parse_fraction)]
    read_ratio: Option<f64>,
    /// Fraction of operations that are log writes (log only; default 0.5).
    #[arg(long, value_parser = parse::parse_fraction)]
    log_fraction: Option<f64>,
    /// Hot window size in blocks (shifting only).
    #[arg(long)]
    hot_blocks: Option<u64>,
    /// Operations between hot-window shifts (shifting only).
    #[arg(long)]
    shift_period: Option<u64>,
    /// Probability an access hits the hot window (shifting only; default 0.9).
    #[arg(long, value_parser = parse::parse_fraction)]
    hot_prob: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trace file destination.
    #[arg(short = 'o', long = "output")]
    output: PathBuf,
    /// Also write a warm snapshot here (requires --hierarchy).
    #[arg(long)]
    snapshot: Option<PathBuf>,
    /// Fraction of each tier the snapshot fills.
    #[arg(long, value_parser = parse::parse_fraction, default_value_t = 1.0)]
    fill: f64,
    /// Hierarchy used to size the snapshot, e.g. dram:16GB,nvm:1TB,ssd:2TB.
    #[arg(long, value_parser = parse::parse_hierarchy)]
    hierarchy: Option<(u64, u64, u64)>,
    #[arg(long, default_value_t = DEFAULT_BLOCK_SIZE)]
    block_size: u32,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    trace: PathBuf,
    /// Tier capacities, e.g. dram:16GB,nvm:1TB,ssd:2TB (missing tier = 0).
    #[arg(long, value_parser = parse::parse_hierarchy)]
    hierarchy: (u64, u64, u64),
    /// Migration probabilities d_r,d_w,n_r,n_w.
    #[arg(long, value_parser = parse_policy, default_value = "1,1,1,1")]
    policy: MigrationPolicy,
    #[arg(long, default_value_t = DEFAULT_BLOCK_SIZE)]
    block_size: u32,
    #[arg(long, value_parser = parse::parse_fraction, default_value_t = 0.5)]
    warmup: f64,
    /// NVM latency as a multiple of DRAM latency.
    #[arg(long, default_value_t = 2.0)]
    nvm_latency_mult: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    format: OutputFormat,
    /// Device catalog file (defaults to built-in profiles).
    #[arg(long, env = "MTSIM_CATALOG")]
    catalog: Option<PathBuf>,
    /// Initial residency snapshot.
    #[arg(long)]
    snapshot: Option<PathBuf>,
    /// Write the metrics here instead of stdout.
    #[arg(short = 'o', long = "output")]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct TuneArgs {
    #[arg(long)]
    trace: PathBuf,
    #[arg(long, value_parser = parse::parse_hierarchy)]
    hierarchy: (u64, u64, u64),
    #[arg(long, default_value_t = 0.9)]
    alpha: f64,
    #[arg(long, default_value_t = 10)]
    gamma: u32,
    #[arg(long, default_value_t = 800.0)]
    t0: f64,
    #[arg(long, default_value_t = 0.00008)]
    tmin: f64,
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1_000_000)]
    epoch_ops: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Replay)]
    mode: ModeArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Initial policy configuration.
    #[arg(long, value_parser = parse_policy, default_value = "1,1,1,1")]
    policy: MigrationPolicy,
    /// Allowed probability values per coordinate.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = DEFAULT_BLOCK_SIZE)]
    block_size: u32,
    #[arg(long, value_parser = parse::parse_fraction, default_value_t = 0.5)]
    warmup: f64,
    #[arg(long, default_value_t = 2.0)]
    nvm_latency_mult: f64,
    #[arg(long, env = "MTSIM_CATALOG")]
    catalog: Option<PathBuf>,
    #[arg(long)]
    snapshot: Option<PathBuf>,
    /// Write the proposal history CSV here.
    #[arg(long)]
    history: Option<PathBuf>,
}

#[derive(Args)]
struct RecommendArgs {
    #[arg(long)]
    trace: PathBuf,
    /// System cost budget in dollars.
    #[arg(long)]
    budget: f64,
    /// Candidate DRAM capacities, e.g. 0,4GB,8GB.
    #[arg(long, value_parser = parse::parse_size_set, default_value = "0,4GB,8GB,16GB,32GB,64GB")]
    dram_set: parse::SizeSet,
    #[arg(long, value_parser = parse::parse_size_set, default_value = "0,512GB,1TB,2TB")]
    nvm_set: parse::SizeSet,
    #[arg(long, value_parser = parse::parse_size_set, default_value = "0,2TB")]
    ssd_set: parse::SizeSet,
    #[arg(long, env = "MTSIM_CATALOG")]
    catalog: Option<PathBuf>,
    /// Fixed policy applied to every candidate.
    #[arg(long, value_parser = parse_policy, default_value = "1,1,1,1", conflicts_with = "tune")]
    policy: MigrationPolicy,
    /// Anneal the policy per candidate before measuring.
    #[arg(long)]
    tune: bool,
    /// Concurrent candidate evaluations.
    #[arg(long, default_value_t = 1)]
    parallel: usize,
    #[arg(long, default_value_t = DEFAULT_BLOCK_SIZE)]
    block_size: u32,
    #[arg(long, value_parser = parse::parse_fraction, default_value_t = 0.5)]
    warmup: f64,
    #[arg(long, default_value_t = 2.0)]
    nvm_latency_mult: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Annealing epoch length when --tune is set.
    #[arg(long, default_value_t = 100_000)]
    epoch_ops: usize,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
    #[arg(short = 'o', long = "output")]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CharacterizeArgs {
    #[arg(long)]
    trace: PathBuf,
    #[arg(short = 'o', long = "output")]
    output: Option<PathBuf>,
}

fn parse_policy(s: &str) -> Result<MigrationPolicy, String> {
    s.parse().map_err(|e: mtsim_core::Error| e.to_string())
}

/// Usage errors exit 2; everything else (validation, configuration, I/O)
/// exits 3.
enum Failure {
    Usage(String),
    Run(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Run(e.into())
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure::Usage(message.into())
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenTrace(args) => run_gen_trace(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Tune(args) => run_tune(args),
        Command::Recommend(args) => run_recommend(args),
        Command::Characterize(args) => run_characterize(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
        Err(Failure::Run(error)) => {
            eprintln!("error: {error}");
            ExitCode::from(3)
        }
    }
}

fn emit(output: &Option<PathBuf>, content: &str) -> std::io::Result<()> {
    match output {
        Some(path) => std::fs::write(path, content),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(content.as_bytes())?;
            stdout.flush()
        }
    }
}

fn load_catalog(path: &Option<PathBuf>, nvm_latency_mult: f64) -> Result<DeviceCatalog, Failure> {
    let mut catalog = match path {
        Some(p) => DeviceCatalog::load(p)?,
        None => DeviceCatalog::default(),
    };
    catalog.set_nvm_latency_multiplier(nvm_latency_mult)?;
    Ok(catalog)
}

fn build_hierarchy(
    catalog: &DeviceCatalog,
    (dram, nvm, ssd): (u64, u64, u64),
) -> Result<Hierarchy, Failure> {
    Ok(Hierarchy::from_catalog(catalog, dram, nvm, ssd)?)
}

fn run_gen_trace(args: GenTraceArgs) -> CmdResult {
    let reject = |flag: &str, present: bool| -> CmdResult {
        if present {
            Err(usage(format!(
                "--{flag} does not apply to this workload"
            )))
        } else {
            Ok(())
        }
    };
    let read_ratio = args.read_ratio.unwrap_or(0.5);
    let shape = match args.workload {
        WorkloadKind::Zipf => {
            reject("log-fraction", args.log_fraction.is_some())?;
            reject("hot-blocks", args.hot_blocks.is_some())?;
            reject("shift-period", args.shift_period.is_some())?;
            reject("hot-prob", args.hot_prob.is_some())?;
            WorkloadShape::Zipf {
                theta: args.theta.unwrap_or(1.0),
            }
        }
        WorkloadKind::Log => {
            reject("theta", args.theta.is_some())?;
            reject("hot-blocks", args.hot_blocks.is_some())?;
            reject("shift-period", args.shift_period.is_some())?;
            reject("hot-prob", args.hot_prob.is_some())?;
            WorkloadShape::LogAppend {
                log_fraction: args.log_fraction.unwrap_or(0.5),
            }
        }
        WorkloadKind::Shifting => {
            reject("theta", args.theta.is_some())?;
            reject("log-fraction", args.log_fraction.is_some())?;
            let hot_set_blocks = args
                .hot_blocks
                .ok_or_else(|| usage("--hot-blocks is required for the shifting workload"))?;
            let shift_period = args
                .shift_period
                .ok_or_else(|| usage("--shift-period is required for the shifting workload"))?;
            WorkloadShape::ShiftingHotSet {
                hot_set_blocks,
                shift_period,
                hot_probability: args.hot_prob.unwrap_or(0.9),
            }
        }
    };
    let spec = WorkloadSpec {
        shape,
        blocks: args.blocks,
        ops: args.ops,
        read_ratio,
        seed: args.seed,
    };
    let trace = generate(&spec)?;
    write_trace(&trace, &args.output)?;

    if let Some(snapshot_path) = &args.snapshot {
        let (dram, nvm, _): (u64, u64, u64) = args
            .hierarchy
            .ok_or_else(|| usage("--snapshot requires --hierarchy to size the tiers"))?;
        let block = args.block_size as u64;
        if block == 0 {
            return Err(usage("--block-size must be positive"));
        }
        let snapshot = generate_snapshot(&spec, dram / block, nvm / block, args.fill)?;
        snapshot.save(snapshot_path)?;
    }
    Ok(())
}

fn metrics_document(metrics: &SimMetrics, format: OutputFormat) -> String {
    match format {
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(metrics).expect("metrics serialize");
            s.push('\n');
            s
        }
        OutputFormat::Csv => format!("{}\n{}\n", SimMetrics::CSV_HEADER, metrics.csv_row()),
    }
}

fn run_simulate(args: SimulateArgs) -> CmdResult {
    let catalog = load_catalog(&args.catalog, args.nvm_latency_mult)?;
    let hierarchy = build_hierarchy(&catalog, args.hierarchy)?;
    let trace = read_trace(&args.trace)?;
    let snapshot = match &args.snapshot {
        Some(p) => Some(Snapshot::load(p)?),
        None => None,
    };
    let config = EngineConfig {
        policy: args.policy,
        block_size: args.block_size,
        warmup_fraction: args.warmup,
        rng_seed: args.seed,
    };
    let metrics = run_trace(&config, &hierarchy, &trace, snapshot.as_ref())?;
    emit(&args.output, &metrics_document(&metrics, args.format))?;
    Ok(())
}

fn run_tune(args: TuneArgs) -> CmdResult {
    let catalog = load_catalog(&args.catalog, args.nvm_latency_mult)?;
    let hierarchy = build_hierarchy(&catalog, args.hierarchy)?;
    let trace = read_trace(&args.trace)?;
    let snapshot = match &args.snapshot {
        Some(p) => Some(Snapshot::load(p)?),
        None => None,
    };
    let grid = match args.grid {
        Some(values) => PolicyGrid::new(values)?,
        None => PolicyGrid::default(),
    };
    let annealing = AnnealingConfig {
        alpha: args.alpha,
        gamma: args.gamma,
        t0: args.t0,
        t_min: args.tmin,
        lambda: args.lambda,
        epoch_ops: args.epoch_ops,
        mode: match args.mode {
            ModeArg::Replay => TuningMode::Replay,
            ModeArg::Online => TuningMode::Online,
        },
        seed: args.seed,
    };
    let engine_config = EngineConfig {
        policy: args.policy,
        block_size: args.block_size,
        warmup_fraction: args.warmup,
        rng_seed: args.seed ^ SEED_SALT,
    };
    let result = anneal(
        &annealing,
        &engine_config,
        &hierarchy,
        &trace,
        snapshot.as_ref(),
        &grid,
        args.policy,
    )?;
    if let Some(history_path) = &args.history {
        std::fs::write(history_path, result.history_csv())?;
    }
    let accepted = result.history.iter().filter(|e| e.accepted).count();
    let summary = serde_json::json!({
        "best_policy": result.best_policy,
        "best_objective": result.best_objective,
        "proposals": result.history.len() - 1,
        "accepted": accepted,
    });
    println!("{}", serde_json::to_string_pretty(&summary).expect("summary serialize"));
    Ok(())
}

fn run_recommend(args: RecommendArgs) -> CmdResult {
    let catalog = load_catalog(&args.catalog, args.nvm_latency_mult)?;
    let trace = read_trace(&args.trace)?;
    let sets = CandidateSets::new(args.dram_set.0, args.nvm_set.0, args.ssd_set.0)?;
    let engine_config = EngineConfig {
        policy: args.policy,
        block_size: args.block_size,
        warmup_fraction: args.warmup,
        rng_seed: args.seed,
    };
    let source = if args.tune {
        PolicySource::Tuned {
            annealing: AnnealingConfig {
                seed: args.seed ^ SEED_SALT,
                epoch_ops: args.epoch_ops,
                ..AnnealingConfig::default()
            },
            grid: PolicyGrid::default(),
            initial: MigrationPolicy::EAGER,
        }
    } else {
        PolicySource::Fixed(args.policy)
    };
    if args.parallel == 0 {
        return Err(usage("--parallel must be at least 1"));
    }
    let recommendation = recommend(
        &sets,
        &catalog,
        args.budget,
        &trace,
        &engine_config,
        &source,
        args.parallel,
    )?;
    if recommendation.entries.is_empty() {
        eprintln!(
            "warning: no feasible hierarchy within budget ${}",
            args.budget
        );
    }
    let content = match args.format {
        OutputFormat::Csv => recommendation.to_csv(),
        OutputFormat::Json => {
            let mut s =
                serde_json::to_string_pretty(&recommendation).expect("recommendation serialize");
            s.push('\n');
            s
        }
    };
    emit(&args.output, &content)?;
    Ok(())
}

fn run_characterize(args: CharacterizeArgs) -> CmdResult {
    let trace = read_trace(&args.trace)?;
    let cdf = characterize(&trace)?;
    emit(&args.output, &cdf.to_csv())?;
    Ok(())
}
