//! `cohort`: cohort Shapley, IGCS and baseline attributions from CSV data.
//!
//! Exit status is 0 on success, 2 for configuration errors, 3 for data
//! errors and 4 for computation errors; failures also print a one-line JSON
//! error record on stderr.

mod commands;
mod config;
mod error;
mod output;

use clap::{Args, Parser, Subcommand};
use config::{DataFlags, Format, ParamFlags};
use error::{CliError, CliResult};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "cohort", version, about = "Model-free variable importance for CSV data")]
struct Cli {
    /// Worker threads for target-level parallelism (default: all cores).
    #[arg(long, global = true, env = "COHORT_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Attribute each target's response to its features.
    Attribute(AttributeArgs),
    /// Insertion/deletion ABCs for attribution files.
    Evaluate(EvaluateArgs),
    /// Run several methods on the same targets and tabulate their ABCs.
    Compare(CompareArgs),
    /// Soft-similarity convergence diagnostics per target.
    Diagnose(DiagnoseArgs),
    /// Dump the 0/1 similarity matrix of one target as CSV.
    Similarity(SimilarityArgs),
    /// Print n, d and per-column types and ranges.
    Summary(SummaryArgs),
}

#[derive(Args)]
struct DataArgs {
    /// TOML run configuration; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input CSV with a header row.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Name of the response column.
    #[arg(long)]
    response: Option<String>,
    /// raw, residual:COL, abs-residual:COL or squared-residual:COL.
    #[arg(long)]
    response_mode: Option<String>,
    /// Default similarity rule: equality, relative:DELTA or absolute:WIDTH.
    #[arg(long)]
    similarity: Option<String>,
    /// Per-column similarity rule, COLUMN=RULE (repeatable).
    #[arg(long, value_name = "COLUMN=RULE")]
    column_similarity: Vec<String>,
    /// Force a column type, COLUMN=numeric|categorical (repeatable).
    #[arg(long, value_name = "COLUMN=KIND")]
    column_kind: Vec<String>,
}

impl DataArgs {
    fn split(self) -> (Option<PathBuf>, DataFlags) {
        let flags = DataFlags {
            data: self.data,
            response: self.response,
            response_mode: self.response_mode,
            similarity: self.similarity,
            column_similarity: self.column_similarity,
            column_kinds: self.column_kind,
        };
        (self.config, flags)
    }
}

#[derive(Args)]
struct AttributeArgs {
    #[command(flatten)]
    data: DataArgs,
    /// cs-exact, igcs, cs-mc, gkw, uniqueness or random.
    #[arg(long)]
    method: Option<String>,
    /// `all`, or indices and ranges such as `0,5,10..20`.
    #[arg(long)]
    targets: Option<String>,
    /// Quadrature steps R (igcs).
    #[arg(long)]
    steps: Option<usize>,
    /// Sampled permutations (cs-mc).
    #[arg(long)]
    samples: Option<usize>,
    /// Kernel bandwidth (gkw).
    #[arg(long)]
    sigma: Option<f64>,
    /// Covariance ridge factor (gkw).
    #[arg(long)]
    ridge: Option<f64>,
    /// Random seed (cs-mc, random).
    #[arg(long)]
    seed: Option<u64>,
    /// Output file (default: stdout).
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Record wall-clock seconds per target (makes output run-dependent).
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Attribution files written by `attribute` (JSONL).
    #[arg(required = true)]
    attributions: Vec<PathBuf>,
    /// ABC table (default: stdout).
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Also write insertion/deletion curve points as CSV.
    #[arg(long)]
    plot_data: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Comma-separated methods.
    #[arg(long, value_delimiter = ',')]
    methods: Vec<String>,
    #[arg(long)]
    targets: Option<String>,
    /// Quadrature steps for igcs; a list runs one row per value.
    #[arg(long, value_delimiter = ',')]
    steps: Vec<usize>,
    /// Permutation budgets for cs-mc; a list runs one row per value.
    #[arg(long, value_delimiter = ',')]
    samples: Vec<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    ridge: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comparison table (default: stdout).
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Also write the timing table as CSV.
    #[arg(long)]
    timing_output: Option<PathBuf>,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    targets: Option<String>,
    /// Mass threshold epsilon in (0, 1).
    #[arg(long)]
    eps: Option<f64>,
    /// Monte Carlo points.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args)]
struct SimilarityArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Target row index.
    #[arg(long)]
    target: usize,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SummaryArgs {
    #[command(flatten)]
    data: DataArgs,
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::config("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config(format!("cannot start thread pool: {e}")))?;
    }
    match cli.command {
        Command::Attribute(a) => {
            let (config, data) = a.data.split();
            commands::attribute(commands::AttributeOpts {
                config,
                data,
                method: a.method,
                targets: a.targets,
                params: ParamFlags {
                    steps: a.steps.into_iter().collect(),
                    samples: a.samples.into_iter().collect(),
                    sigma: a.sigma,
                    ridge: a.ridge,
                    seed: a.seed,
                },
                output: a.output,
                format: a.format,
                timing: a.timing,
            })
        }
        Command::Evaluate(a) => {
            let (config, data) = a.data.split();
            commands::evaluate(commands::EvaluateOpts {
                config,
                data,
                attributions: a.attributions,
                output: a.output,
                plot_data: a.plot_data,
            })
        }
        Command::Compare(a) => {
            let (config, data) = a.data.split();
            commands::compare(commands::CompareOpts {
                config,
                data,
                methods: a.methods,
                targets: a.targets,
                params: ParamFlags { steps: a.steps, samples: a.samples, sigma: a.sigma, ridge: a.ridge, seed: a.seed },
                output: a.output,
                timing_output: a.timing_output,
            })
        }
        Command::Diagnose(a) => {
            let (config, data) = a.data.split();
            commands::diagnose(commands::DiagnoseOpts {
                config,
                data,
                targets: a.targets,
                eps: a.eps,
                samples: a.samples,
                seed: a.seed,
                output: a.output,
                format: a.format,
            })
        }
        Command::Similarity(a) => {
            let (config, data) = a.data.split();
            commands::similarity(commands::SimilarityOpts { config, data, target: a.target, output: a.output })
        }
        Command::Summary(a) => {
            let (config, data) = a.data.split();
            commands::summary(config, data)
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let err = CliError::config(e.to_string().trim().to_string());
            eprintln!("{}", err.record());
            std::process::exit(err.exit_code());
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("{}", e.record());
        std::process::exit(e.exit_code());
    }
}
