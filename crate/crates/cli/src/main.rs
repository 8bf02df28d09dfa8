use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use ghsf::engine::{self, EngineConfig, HashTableSize, RunReport, TransportMode, WeightMode, DEFAULT_INTERVALS};
use ghsf::graph::{preprocess, read_edge_list, write_edge_list, EdgeFormat, EdgeList, GraphKind};
use ghsf::oracle::{first_difference, kruskal_msf};

const STATS_COLUMNS: &str = "Stats CSV columns: interval_index (0-based slice of the span from first to last \
flush), avg_bytes (mean aggregated block size in the slice, 0 if none), msgs_sent (protocol messages in those blocks).";

const BENCH_COLUMNS: &str = "Bench CSV columns: graph, workers, transport, time_s (wall-clock run time), \
total_messages, interval_index, avg_bytes, msgs_sent. One row per interval and configuration.";

#[derive(Parser)]
#[command(name = "ghsf", version, about = "Distributed minimum spanning forest over simulated workers")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a preprocessed graph file.
    Gen(GenArgs),
    /// Compute a minimum spanning forest.
    #[command(after_help = STATS_COLUMNS)]
    Run(RunArgs),
    /// Check a forest file against the sequential oracle.
    Verify(VerifyArgs),
    /// Per-interval block statistics over several worker counts.
    #[command(after_help = BENCH_COLUMNS)]
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Rmat,
    Ssca2,
    Uniform,
}

impl From<Kind> for GraphKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Rmat => GraphKind::Rmat,
            Kind::Ssca2 => GraphKind::Ssca2,
            Kind::Uniform => GraphKind::Uniform,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Binary,
    Text,
}

impl From<Format> for EdgeFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Binary => EdgeFormat::Binary,
            Format::Text => EdgeFormat::Text,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Transport {
    Deterministic,
    Threaded,
}

#[derive(Clone, Copy, ValueEnum)]
enum Compressed {
    Auto,
    On,
    Off,
}

#[derive(Args)]
struct GenArgs {
    kind: Kind,
    #[arg(long)]
    scale: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Average degree before deduplication (ignored by ssca2).
    #[arg(long, default_value_t = 32)]
    degree: u32,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Binary)]
    format: Format,
}

#[derive(Args)]
struct Source {
    /// Edge-list file (binary or text, detected from content).
    #[arg(long, conflicts_with = "gen", required_unless_present = "gen")]
    graph: Option<PathBuf>,
    /// Generate the input instead of reading it.
    #[arg(long, value_enum)]
    gen: Option<Kind>,
    #[arg(long, default_value_t = 10)]
    scale: u32,
    #[arg(long, default_value_t = 32)]
    degree: u32,
}

#[derive(Args)]
struct EngineArgs {
    /// Seed for generation and for the deterministic scheduler. GHSF_SEED
    /// overrides it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Transport::Deterministic)]
    transport: Transport,
    #[arg(long, default_value_t = 10_000)]
    max_msg_size: usize,
    #[arg(long, default_value_t = 5)]
    sending_frequency: u64,
    #[arg(long, default_value_t = 5)]
    check_frequency: u64,
    #[arg(long, default_value_t = 100_000)]
    quiescence_interval: u64,
    /// Hash table size as a multiple of local edge count (default 55/13).
    #[arg(long)]
    hash_table_factor: Option<f64>,
    #[arg(long, value_enum, default_value_t = Compressed::Auto)]
    compressed: Compressed,
    /// Number of stats intervals.
    #[arg(long, default_value_t = DEFAULT_INTERVALS)]
    intervals: usize,
}

impl EngineArgs {
    fn seed(&self) -> Result<u64> {
        effective_seed(self.seed)
    }

    fn config(&self, workers: usize) -> Result<EngineConfig> {
        Ok(EngineConfig {
            max_msg_size: self.max_msg_size,
            sending_frequency: self.sending_frequency,
            check_frequency: self.check_frequency,
            quiescence_interval: self.quiescence_interval,
            hash_table_size: self.hash_table_factor.map_or(HashTableSize::Default, HashTableSize::Factor),
            num_workers: workers,
            seed: self.seed()?,
            weight_mode: match self.compressed {
                Compressed::Auto => WeightMode::Auto,
                Compressed::On => WeightMode::Compressed,
                Compressed::Off => WeightMode::Wide,
            },
            transport: match self.transport {
                Transport::Deterministic => TransportMode::Deterministic,
                Transport::Threaded => TransportMode::Threaded,
            },
            ..EngineConfig::default()
        })
    }
}

/// `GHSF_SEED`, when set, wins over the command line.
fn effective_seed(flag: u64) -> Result<u64> {
    match std::env::var("GHSF_SEED") {
        Ok(s) => s.trim().parse().with_context(|| format!("GHSF_SEED={s:?} is not an integer")),
        Err(_) => Ok(flag),
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Forest output file.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Binary)]
    format: Format,
    /// Per-interval stats CSV.
    #[arg(long)]
    stats_out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    forest: PathBuf,
    graph: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
    workers: Vec<usize>,
    /// CSV output; stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.cmd {
        Command::Gen(a) => cmd_gen(a).map(|_| ExitCode::SUCCESS),
        Command::Run(a) => cmd_run(a).map(|_| ExitCode::SUCCESS),
        Command::Verify(a) => cmd_verify(a),
        Command::Bench(a) => cmd_bench(a).map(|_| ExitCode::SUCCESS),
    }
}

fn read_graph(path: &Path) -> Result<EdgeList> {
    let format = EdgeFormat::detect(path)?;
    Ok(read_edge_list(path, format)?)
}

fn load(source: &Source, seed: u64) -> Result<(String, EdgeList)> {
    match (&source.graph, source.gen) {
        (Some(path), _) => Ok((path.display().to_string(), preprocess(read_graph(path)?))),
        (None, Some(kind)) => {
            let kind = GraphKind::from(kind);
            let g = preprocess(kind.generate(source.scale, source.degree, seed)?);
            Ok((format!("{kind}-{}", source.scale), g))
        }
        (None, None) => bail!("one of --graph or --gen is required"),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn cmd_gen(a: GenArgs) -> Result<()> {
    let seed = effective_seed(a.seed)?;
    let g = preprocess(GraphKind::from(a.kind).generate(a.scale, a.degree, seed)?);
    write_edge_list(&a.out, &g, a.format.into())?;
    println!("vertices={} edges={} out={}", g.num_vertices, g.len(), a.out.display());
    Ok(())
}

fn cmd_run(a: RunArgs) -> Result<()> {
    let cfg = a.engine.config(a.workers)?;
    let (_, graph) = load(&a.source, cfg.seed)?;
    let report = engine::run(&graph, &cfg)?;
    if let Some(path) = &a.out {
        write_edge_list(path, &report.forest, a.format.into())?;
    }
    if let Some(path) = &a.stats_out {
        let mut out = create(path)?;
        engine::write_interval_csv(&mut out, &report.interval_stats(a.engine.intervals))?;
        out.flush()?;
    }
    if report.wire_mode_fallback {
        eprintln!("note: weights not unique within a worker; using wide tie-breakers");
    }
    println!("{}", report.summary());
    let kinds: Vec<String> = report.messages.iter().map(|(k, n)| format!("{}={n}", k.name())).collect();
    println!("messages: {}", kinds.join(" "));
    Ok(())
}

fn cmd_verify(a: VerifyArgs) -> Result<ExitCode> {
    let forest = read_graph(&a.forest)?;
    let graph = preprocess(read_graph(&a.graph)?);
    let expected = kruskal_msf(&graph);
    match first_difference(&forest, &expected.edges) {
        None => {
            println!("ok: {} edges, weight {}", forest.len(), expected.weight);
            Ok(ExitCode::SUCCESS)
        }
        Some((u, v)) => {
            let in_forest = forest.edges.iter().any(|e| e.endpoints() == (u.min(v), u.max(v)));
            let side = if in_forest { "only in the forest file" } else { "missing from the forest file" };
            println!("mismatch: edge ({u}, {v}) is {side}");
            Ok(ExitCode::from(1))
        }
    }
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    if a.workers.is_empty() {
        bail!("--workers needs at least one count");
    }
    let seed = a.engine.seed()?;
    let (name, graph) = load(&a.source, seed)?;
    let mut out: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(create(p)?),
        None => Box::new(io::stdout().lock()),
    };
    writeln!(out, "graph,workers,transport,time_s,total_messages,interval_index,avg_bytes,msgs_sent")?;
    for &w in &a.workers {
        let cfg = a.engine.config(w)?;
        let report: RunReport = engine::run(&graph, &cfg).with_context(|| format!("run with {w} workers"))?;
        let transport = match cfg.transport {
            TransportMode::Deterministic => "deterministic",
            TransportMode::Threaded => "threaded",
        };
        for s in report.interval_stats(a.engine.intervals) {
            writeln!(
                out,
                "{name},{w},{transport},{:.6},{},{},{:.3},{}",
                report.elapsed.as_secs_f64(),
                report.messages.total(),
                s.index,
                s.avg_bytes,
                s.msgs_sent
            )?;
        }
    }
    out.flush()?;
    Ok(())
}
