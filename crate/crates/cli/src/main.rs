//! Command-line front end: generate, preprocess, run, inspect, and cost out
//! graphs from one binary.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::error::ErrorKind as ClapErrorKind;
use clap::{Args, Parser, Subcommand};

use semgraph_core::algo::{AlgorithmKind, AlgorithmSpec};
use semgraph_core::cache::{CacheConfig, CacheMode};
use semgraph_core::cost::{self, ComputationModel, CostInputs};
use semgraph_core::engine::{self, EngineConfig};
use semgraph_core::error::Error as CoreError;
use semgraph_core::gen::{generate, GenSpec, GraphKind};
use semgraph_core::preprocess::{
    preprocess, EdgeListFormat, EdgeListSource, PreprocessOptions, ShardingPolicy,
};
use semgraph_core::store::{self, ShardStore};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_INTERNAL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "semgraph",
    version,
    about = "Semi-external-memory graph analytics: vertices in memory, edge shards on disk"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic edge list
    Gen(GenArgs),
    /// Convert an edge list into a graph directory of CSR shards
    Preprocess(PreprocessArgs),
    /// Run an algorithm over a preprocessed graph
    Run(RunArgs),
    /// Print metadata and degree statistics of a graph directory
    Stats(StatsArgs),
    /// Evaluate the analytical I/O and memory cost of computation models
    Costmodel(CostArgs),
}

#[derive(Args)]
struct GenArgs {
    /// powerlaw | uniform | line | cycle | star | complete
    #[arg(long)]
    kind: String,
    /// Vertex count
    #[arg(long)]
    n: u64,
    /// Edge count (required for powerlaw and uniform)
    #[arg(long)]
    e: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output edge-list path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PreprocessArgs {
    /// Input edge-list path
    #[arg(long)]
    input: PathBuf,
    /// text | binary
    #[arg(long, default_value = "text")]
    format: String,
    /// Output graph directory
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1 << 20)]
    target_edges_per_shard: u64,
    #[arg(long)]
    max_shards: Option<u64>,
    /// Also add the reverse of every edge (needed for WCC)
    #[arg(long)]
    symmetrize: bool,
}

#[derive(Args)]
struct RunArgs {
    /// Preprocessed graph directory
    #[arg(long)]
    graph: PathBuf,
    /// pagerank | sssp | wcc
    #[arg(long)]
    algo: String,
    /// SSSP source vertex
    #[arg(long, default_value_t = 0)]
    source: u64,
    /// Worker threads (default: $SEMGRAPH_WORKERS, then all cores)
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value_t = 200)]
    max_iterations: usize,
    /// Disable Bloom-filter shard skipping
    #[arg(long)]
    no_selective: bool,
    /// Active-vertex ratio below which shard skipping engages
    #[arg(long, default_value_t = 0.001)]
    activation_threshold: f64,
    /// Shard cache compression mode (1 = none, 2 = snappy, 3 = zlib-1, 4 = zlib-3)
    #[arg(long, default_value_t = 1)]
    cache_mode: u8,
    /// Shard cache budget in bytes; accepts K/M/G/T suffixes and "max"; 0 disables
    #[arg(long, default_value = "0")]
    cache_budget: String,
    /// Treat |new - old| <= tolerance as unchanged (0 = exact equality)
    #[arg(long, default_value_t = 0.0)]
    float_tolerance: f64,
    /// Final vertex values (f64 LE array); default <graph>/values.bin
    #[arg(long)]
    values_out: Option<PathBuf>,
    /// Per-iteration JSON-lines metrics; default <graph>/metrics.jsonl
    #[arg(long)]
    metrics_out: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    /// Preprocessed graph directory
    #[arg(long)]
    graph: PathBuf,
}

#[derive(Args)]
struct CostArgs {
    /// C: bytes per vertex record
    #[arg(long, default_value_t = 8)]
    c_bytes: u64,
    /// D: bytes per edge record
    #[arg(long, default_value_t = 8)]
    d_bytes: u64,
    #[arg(long)]
    vertices: u64,
    #[arg(long)]
    edges: u64,
    /// P: shard/partition count
    #[arg(long, default_value_t = 16)]
    shards: u64,
    /// N: CPU workers
    #[arg(long, default_value_t = 4)]
    workers: u64,
    /// Cache miss ratio in [0, 1]
    #[arg(long, default_value_t = 1.0)]
    theta: f64,
    /// Evaluate a single model instead of all five
    #[arg(long)]
    model: Option<String>,
    /// Emit JSON instead of the text table
    #[arg(long)]
    json: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ClapErrorKind::DisplayHelp | ClapErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Preprocess(args) => cmd_preprocess(args),
        Command::Run(args) => cmd_run(args),
        Command::Stats(args) => cmd_stats(args),
        Command::Costmodel(args) => cmd_costmodel(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

/// Maps failures onto the documented exit codes. Anything that is not
/// clearly a bad invocation or bad data counts as internal.
fn exit_code_for(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<CoreError>() {
        Some(CoreError::InvalidArgument(_)) => EXIT_USAGE,
        Some(CoreError::UpdatePanic { .. }) => EXIT_INTERNAL,
        Some(_) => EXIT_DATA,
        None => {
            if e.downcast_ref::<UsageError>().is_some() {
                EXIT_USAGE
            } else if e.downcast_ref::<DataError>().is_some() {
                EXIT_DATA
            } else {
                EXIT_INTERNAL
            }
        }
    }
}

#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug)]
struct DataError(String);

impl std::fmt::Display for DataError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for DataError {}

fn usage_error<T>(msg: impl Into<String>) -> anyhow::Result<T> {
    Err(UsageError(msg.into()).into())
}

fn data_error<T>(msg: impl Into<String>) -> anyhow::Result<T> {
    Err(DataError(msg.into()).into())
}

fn cmd_gen(args: GenArgs) -> anyhow::Result<()> {
    let Some(kind) = GraphKind::parse(&args.kind) else {
        return usage_error(format!(
            "unknown graph kind {:?}; expected powerlaw, uniform, line, cycle, star or complete",
            args.kind
        ));
    };
    let spec = GenSpec {
        kind,
        vertex_count: args.n,
        edge_count: args.e,
        seed: args.seed,
    };
    generate(&spec, &args.out)?;
    println!("wrote {}", args.out.display());
    Ok(())
}

fn cmd_preprocess(args: PreprocessArgs) -> anyhow::Result<()> {
    if !args.input.exists() {
        return data_error(format!("input not found: {}", args.input.display()));
    }
    let format = match args.format.as_str() {
        "text" => EdgeListFormat::Text,
        "binary" => EdgeListFormat::Binary,
        other => return usage_error(format!("unknown format {other:?}; expected text or binary")),
    };
    let source = EdgeListSource {
        format,
        path: args.input.clone(),
    };
    let options = PreprocessOptions {
        policy: ShardingPolicy {
            target_edges_per_shard: args.target_edges_per_shard,
            max_shard_count: args.max_shards,
        },
        symmetrize: args.symmetrize,
    };
    let started = Instant::now();
    let summary = preprocess(&source, &args.out, &options)?;
    let meta = &summary.meta;
    println!(
        "preprocessed {} vertices, {} edges into {} shards ({:.2}s)",
        meta.vertex_count,
        meta.edge_count,
        meta.shard_count,
        started.elapsed().as_secs_f64()
    );
    println!("{:>6}  {:>12}  {:>12}  {:>12}", "shard", "lo", "hi", "edges");
    for (k, iv) in meta.intervals.iter().enumerate() {
        println!("{k:>6}  {:>12}  {:>12}  {:>12}", iv.lo, iv.hi, iv.edge_count);
    }
    println!("shard bytes: {}", summary.shard_bytes);
    if summary.remapped {
        println!("input ids were sparse; wrote {}", store::IDMAP_FILE);
    }
    Ok(())
}

fn resolve_workers(flag: Option<usize>) -> anyhow::Result<usize> {
    if let Some(w) = flag {
        return Ok(w);
    }
    if let Ok(env) = std::env::var("SEMGRAPH_WORKERS") {
        return match env.parse::<usize>() {
            Ok(w) if w >= 1 => Ok(w),
            _ => usage_error(format!("SEMGRAPH_WORKERS={env:?} is not a positive integer")),
        };
    }
    Ok(std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1))
}

/// Parses "4096", "64K", "16M", "1G", "2T" or "max" into bytes.
fn parse_budget(text: &str) -> Option<u64> {
    let t = text.trim();
    if t.eq_ignore_ascii_case("max") {
        return Some(u64::MAX);
    }
    let (digits, multiplier) = match t.chars().last()? {
        'k' | 'K' => (&t[..t.len() - 1], 1u64 << 10),
        'm' | 'M' => (&t[..t.len() - 1], 1 << 20),
        'g' | 'G' => (&t[..t.len() - 1], 1 << 30),
        't' | 'T' => (&t[..t.len() - 1], 1 << 40),
        _ => (t, 1),
    };
    digits
        .parse::<u64>()
        .ok()
        .and_then(|n| n.checked_mul(multiplier))
}

fn cmd_run(args: RunArgs) -> anyhow::Result<()> {
    let algo: AlgorithmKind = match args.algo.parse() {
        Ok(a) => a,
        Err(msg) => return usage_error(msg),
    };
    let Some(cache_mode) = CacheMode::from_level(args.cache_mode) else {
        return usage_error(format!("cache mode {} outside 1..=4", args.cache_mode));
    };
    let Some(budget_bytes) = parse_budget(&args.cache_budget) else {
        return usage_error(format!("cannot parse cache budget {:?}", args.cache_budget));
    };
    let workers = resolve_workers(args.workers)?;

    let store = ShardStore::open(&args.graph)?;
    let (meta, degrees, _) = store.read_metadata()?;
    let spec = AlgorithmSpec::with_source(algo, args.source);
    if let Err(msg) = spec.validate(meta.vertex_count) {
        return usage_error(msg);
    }

    let config = EngineConfig {
        worker_count: workers,
        max_iterations: args.max_iterations,
        selective_scheduling: !args.no_selective,
        activation_threshold: args.activation_threshold,
        cache: CacheConfig {
            budget_bytes,
            mode: cache_mode,
        },
        float_tolerance: args.float_tolerance,
    };
    let init = spec.initial_values(meta.vertex_count);
    let started = Instant::now();
    let (values, reports) = engine::run(
        &store,
        &meta,
        &degrees,
        spec.update_fn(config.float_tolerance),
        &init,
        &config,
    )?;
    let wall = started.elapsed();

    let values_path = args
        .values_out
        .unwrap_or_else(|| args.graph.join("values.bin"));
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in &values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    store::write_atomic(&values_path, &bytes)?;

    let metrics_path = args
        .metrics_out
        .unwrap_or_else(|| args.graph.join("metrics.jsonl"));
    let mut lines = String::new();
    for r in &reports {
        lines.push_str(&r.to_json_line());
        lines.push('\n');
    }
    store::write_atomic(&metrics_path, lines.as_bytes())?;

    let io = store.counters().snapshot();
    println!(
        "{algo}: {} iterations in {:.3}s (workers {workers})",
        reports.len(),
        wall.as_secs_f64()
    );
    println!(
        "io: {} shard loads, {} bytes read, {} cache hits, {} cache misses, {} vertex bytes written",
        io.shard_loads, io.shard_bytes_read, io.cache_hits, io.cache_misses, io.vertex_bytes_written
    );
    println!("values: {}", values_path.display());
    println!("metrics: {}", metrics_path.display());
    Ok(())
}

fn cmd_stats(args: StatsArgs) -> anyhow::Result<()> {
    let store = ShardStore::open(&args.graph)?;
    let (meta, degrees, _) = store.read_metadata()?;
    println!(
        "vertices {} edges {} shards {}",
        meta.vertex_count, meta.edge_count, meta.shard_count
    );
    println!("{:>6}  {:>12}  {:>12}  {:>12}", "shard", "lo", "hi", "edges");
    for (k, iv) in meta.intervals.iter().enumerate() {
        println!("{k:>6}  {:>12}  {:>12}  {:>12}", iv.lo, iv.hi, iv.edge_count);
    }
    let max_in = degrees.in_degree.iter().copied().max().unwrap_or(0);
    let max_out = degrees.out_degree.iter().copied().max().unwrap_or(0);
    let mean = meta.edge_count as f64 / meta.vertex_count as f64;
    println!("degrees: mean {mean:.3}, max in {max_in}, max out {max_out}");
    println!("in-degree histogram (powers of two):");
    let mut buckets = vec![0u64; 1];
    for &d in &degrees.in_degree {
        let b = if d == 0 {
            0
        } else {
            64 - d.leading_zeros() as usize
        };
        if buckets.len() <= b {
            buckets.resize(b + 1, 0);
        }
        buckets[b] += 1;
    }
    for (b, count) in buckets.iter().enumerate() {
        if *count == 0 {
            continue;
        }
        let label = if b == 0 {
            "0".to_string()
        } else {
            format!("{}..{}", 1u64 << (b - 1), (1u64 << b) - 1)
        };
        println!("{label:>16}: {count}");
    }
    if store.read_idmap()?.is_some() {
        println!("note: vertex ids were remapped; see {}", store::IDMAP_FILE);
    }
    Ok(())
}

fn cmd_costmodel(args: CostArgs) -> anyhow::Result<()> {
    let inputs = CostInputs {
        vertex_record_bytes: args.c_bytes,
        edge_record_bytes: args.d_bytes,
        vertex_count: args.vertices,
        edge_count: args.edges,
        shard_count: args.shards,
        worker_count: args.workers,
        cache_miss_ratio: args.theta,
    };
    let reports = match &args.model {
        Some(name) => {
            let Some(model) = ComputationModel::parse(name) else {
                return usage_error(format!(
                    "unknown model {name:?}; expected psw, esg, vsp, dsw or vsw"
                ));
            };
            vec![cost::evaluate(model, &inputs)?]
        }
        None => cost::compare_all(&inputs)?,
    };
    if args.json {
        println!("{}", serde_json::to_string_pretty(&reports)?);
    } else {
        println!(
            "{:<6} {:>20} {:>20} {:>20}",
            "model", "read_bytes", "write_bytes", "memory_bytes"
        );
        for r in &reports {
            println!(
                "{:<6} {:>20.2} {:>20.2} {:>20.2}",
                r.model.to_string(),
                r.read_bytes,
                r.write_bytes,
                r.memory_bytes
            );
        }
    }
    Ok(())
}
