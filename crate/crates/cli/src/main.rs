//! `centrank`: generate graphs, compute exact centralities, train and apply
//! ranking models.
//!
//! Exit codes: 0 success, 2 usage or config error, 3 data error (missing or
//! malformed files, checkpoint mismatch), 4 numeric abort (non-finite loss or
//! scores).

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::ConfigArgs;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_NUMERIC: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "centrank", version, about = "Learned closeness/betweenness ranking on graphs")]
struct Cli {
    /// Worker threads (env CENTRANK_THREADS); defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug, Clone)]
enum Cmd {
    /// Write a generated graph, or a corpus of them.
    Generate(GenerateArgs),
    /// Exact centrality of every node: "node_id value rank".
    ComputeExact(ExactArgs),
    /// Train a model; writes checkpoints and a per-epoch log to --out.
    Train(TrainArgs),
    /// Score a graph with a checkpoint: "node_id score rank".
    Predict(PredictArgs),
    /// Tau-b of a checkpoint against exact centralities.
    Evaluate(EvaluateArgs),
    /// Decoder ablation over mixing orders and embedding widths.
    Ablate(AblateArgs),
    /// 2D PCA of a graph's embeddings: "node_id x y".
    Pca(PcaArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Args, Debug, Clone)]
struct GenerateArgs {
    #[arg(long, value_parser = ["ws", "ba", "plc"])]
    model: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    /// Ring degree (ws).
    #[arg(long, default_value_t = 4)]
    k: usize,
    /// Edges per new node (ba, plc).
    #[arg(long, default_value_t = 2)]
    m: usize,
    /// Rewiring (ws) or triad-closure (plc) probability.
    #[arg(long, default_value_t = 0.1)]
    p: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Generate this many WS/BA graphs into the --out directory.
    #[arg(long, conflicts_with = "model")]
    corpus: Option<usize>,
    #[arg(long, default_value_t = 100)]
    n_min: usize,
    #[arg(long, default_value_t = 1000)]
    n_max: usize,
    /// Fraction of WS graphs in a corpus.
    #[arg(long, default_value_t = 0.5)]
    mix: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct ExactArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, default_value = "cc", value_parser = ["cc", "bc", "dc"])]
    metric: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct TrainArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct PredictArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    graph: PathBuf,
    /// Neighbor-sampling seed; defaults to the checkpoint's.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct EvaluateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Edge-list files to evaluate on.
    #[arg(long = "graph")]
    graphs: Vec<PathBuf>,
    /// Also evaluate on the held-out split of the checkpoint's training data.
    #[arg(long)]
    test_split: bool,
    #[arg(long, default_value_t = 1)]
    runs: usize,
    /// Seed of the per-run neighbor samples; defaults to the checkpoint's.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct AblateArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Mixing orders to sweep.
    #[arg(long, value_delimiter = ',', default_value = "ctc,tct,ctct,tctc")]
    orders: Vec<String>,
    /// Embedding widths to sweep.
    #[arg(long, value_delimiter = ',', default_value = "32,128,512")]
    dims: Vec<usize>,
    /// Add the MLP decoder to the sweep.
    #[arg(long)]
    mlp: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct PcaArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct ReplayArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Write to this path instead of the recorded one.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Errors that are the caller's fault rather than the data's.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn code_of(e: &centrank::Error) -> u8 {
    use centrank::Error as E;
    match e {
        E::Config(_) | E::InvalidParameter(_) => EXIT_USAGE,
        E::NonFinite(_) => EXIT_NUMERIC,
        _ => EXIT_DATA,
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        if let Some(f) = cause.downcast_ref::<centrank::training::TrainFailure>() {
            return code_of(&f.error);
        }
        if let Some(e) = cause.downcast_ref::<centrank::Error>() {
            return code_of(e);
        }
        if cause.is::<std::io::Error>() {
            return EXIT_DATA;
        }
    }
    EXIT_DATA
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let threads = cli
        .threads
        .or_else(|| std::env::var("CENTRANK_THREADS").ok().and_then(|v| v.parse().ok()));
    if let Some(t) = threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match commands::run(cli.command, commands::Ctx::new(argv)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
