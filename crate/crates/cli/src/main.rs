mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<scoregraph::Error> for CliError {
    fn from(e: scoregraph::Error) -> Self {
        use scoregraph::Error as E;
        match e {
            E::Io(_) | E::Diverged { .. } | E::SamplerNonFinite { .. } | E::NonFinite { .. } => {
                CliError::Runtime(e.to_string())
            }
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "scoregraph",
    version,
    about = "Score-based graph diffusion pipelines"
)]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run directory (default: `$SCOREGRAPH_OUT`, then `runs/default`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Global seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker thread cap.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset and its train/test split.
    MakeData(MakeDataArgs),
    /// Train the score model by denoising score matching.
    Train(TrainArgs),
    /// Sample pseudo data from the trained model and fit the pseudo network on it.
    Pseudo(PseudoArgs),
    /// Generate graphs with the baseline or corrected sampler.
    Sample(SampleArgs),
    /// Compare generated graphs with a reference set.
    Eval(EvalArgs),
    /// Bias report: forward endpoints, score-norm traces, perturbation sweep, oracle checks.
    Diagnose(DiagnoseArgs),
}

#[derive(Debug, Args)]
pub struct MakeDataArgs {
    #[arg(long)]
    pub count: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training set (default: `<out>/data/train.jsonl`).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Total iterations to reach.
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Continue from a checkpoint that carries optimizer state.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PseudoArgs {
    /// Pretrained checkpoint (default: `<out>/checkpoints/model.ckpt`).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Training set, used for node counts and the default pseudo size.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Pseudo dataset size.
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
}

#[derive(Debug, Args, Default)]
pub struct SamplerFlags {
    /// Alignment iterations.
    #[arg(long = "M", allow_negative_numbers = true)]
    pub m: Option<i64>,
    /// Correction strength during alignment.
    #[arg(long)]
    pub lambda1: Option<f64>,
    /// Score divisor during alignment.
    #[arg(long)]
    pub omega1: Option<f64>,
    /// Correction strength inside the reverse loop.
    #[arg(long)]
    pub lambda2: Option<f64>,
    /// Score divisor inside the reverse loop.
    #[arg(long)]
    pub omega2: Option<f64>,
    /// Corrector cutoff time.
    #[arg(long)]
    pub tc: Option<f64>,
    /// Enable Langevin corrector steps (`--corrector` or `--corrector false`).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub corrector: Option<bool>,
    /// Reverse discretization steps N.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Langevin step-size ratio r.
    #[arg(long)]
    pub snr: Option<f64>,
    /// Corrector side of `tc`: `below` (t ≤ tc) or `above`.
    #[arg(long)]
    pub gate: Option<String>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub sampler: SamplerFlags,
    /// Number of graphs.
    #[arg(long)]
    pub count: Option<usize>,
    /// Pretrained checkpoint (default: `<out>/checkpoints/model.ckpt`).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Pseudo checkpoint (default: `<out>/checkpoints/pseudo.ckpt`).
    #[arg(long)]
    pub pseudo: Option<PathBuf>,
    /// Reference set for node counts (default: `<out>/data/train.jsonl`).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output file (default: `<out>/samples/samples.jsonl`).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Generated graphs (default: `<out>/samples/samples.jsonl`).
    #[arg(long)]
    pub gen: Option<PathBuf>,
    /// Reference graphs (default: `<out>/data/test.jsonl`).
    #[arg(long = "ref")]
    pub reference: Option<PathBuf>,
    /// Row label in the report.
    #[arg(long)]
    pub label: Option<String>,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub sampler: SamplerFlags,
    /// Pretrained checkpoint (default: `<out>/checkpoints/model.ckpt`).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Pseudo checkpoint (default: `<out>/checkpoints/pseudo.ckpt`).
    #[arg(long)]
    pub pseudo: Option<PathBuf>,
    /// Data for the forward traces (default: `<out>/data/train.jsonl`).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Reference for the sweep (default: `<out>/data/test.jsonl`).
    #[arg(long = "ref")]
    pub reference: Option<PathBuf>,
    /// Comma-separated attack times for the perturbation sweep.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub sweep: Option<Vec<f64>>,
    /// Start the sweep from forward-perturbed training graphs.
    #[arg(long)]
    pub true_start: bool,
    /// Only print the forward-endpoint table.
    #[arg(long)]
    pub table_only: bool,
    /// Run the exact-score alignment check instead of using a checkpoint.
    #[arg(long)]
    pub oracle: bool,
    #[arg(long)]
    pub oracle_chains: Option<usize>,
}

fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(o) = &cli.out {
        cfg.out_dir = Some(o.clone());
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Validation("--threads must be ≥ 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    }
    let mut cfg = resolve(&cli)?;
    match cli.command {
        Command::MakeData(a) => commands::make_data(&mut cfg, &a),
        Command::Train(a) => commands::train(&mut cfg, &a),
        Command::Pseudo(a) => commands::pseudo(&mut cfg, &a),
        Command::Sample(a) => commands::sample(&mut cfg, &a),
        Command::Eval(a) => commands::eval(&mut cfg, &a),
        Command::Diagnose(a) => commands::diagnose(&mut cfg, &a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
