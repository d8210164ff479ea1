use std::path::PathBuf;
use std::process::ExitCode;

use bandit_cpe::bench::{bench_runtime, write_bench_csv, BenchOptions};
use bandit_cpe::config::{AllocationStrategy, ExperimentConfig, Overrides};
use bandit_cpe::experiment::run_experiment;
use bandit_cpe::report::report;
use bandit_cpe::tools::{run_dks, run_galloc};
use bandit_cpe::{HarnessError, Result};
use bandit_cpe_core::identification::Algorithm;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "bandit-cpe",
    version,
    about = "Combinatorial pure exploration with full-bandit feedback"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config.
    Run(RunArgs),
    /// Time one round of each algorithm for several n, with k = n/2.
    Bench(BenchArgs),
    /// Aggregate result files into summary CSV and plot data.
    Report {
        /// Glob matching results CSV files.
        pattern: String,
        #[arg(long, default_value = "report")]
        out: PathBuf,
    },
    /// Approximate densest k-subgraph of an `i,j,weight` edge list.
    Dks {
        input: PathBuf,
        #[arg(long)]
        k: usize,
        /// Enumerate all subsets instead of greedy peeling.
        #[arg(long)]
        exact: bool,
    },
    /// Print a static allocation and its rounding to t pulls.
    Galloc {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value = "g")]
        strategy: AllocationStrategy,
        #[arg(long)]
        t: u64,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    algorithm: Option<Algorithm>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    delta_min: Option<f64>,
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long)]
    alpha_override: Option<f64>,
    #[arg(long)]
    ell: Option<usize>,
    #[arg(long)]
    check_every: Option<u64>,
    #[arg(long)]
    allocation: Option<AllocationStrategy>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "10,12,14,16,18,20,22,24")]
    n: Vec<usize>,
    /// Algorithms to time; pass an empty string for none.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "saqm,safoa,icb,exhaustive"
    )]
    algos: Vec<String>,
    #[arg(long, default_value_t = 200)]
    rounds: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "bench.csv")]
    out: PathBuf,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(a) => {
            let mut cfg = ExperimentConfig::load(&a.config)?;
            Overrides {
                algorithm: a.algorithm,
                seeds: a.seeds,
                n: a.n,
                k: a.k,
                epsilon: a.epsilon,
                delta: a.delta,
                delta_min: a.delta_min,
                budget: a.budget,
                alpha_override: a.alpha_override,
                ell: a.ell,
                check_every: a.check_every,
                allocation: a.allocation,
            }
            .apply(&mut cfg);
            std::fs::create_dir_all(&a.out).map_err(|e| HarnessError::Io {
                path: a.out.clone(),
                source: e,
            })?;
            let out = run_experiment(&cfg, &a.out)?;
            let correct = out.rows.iter().filter(|r| r.correct).count();
            let stopped = out.rows.iter().filter(|r| r.stopped).count();
            eprintln!(
                "{} runs: {stopped} stopped, {correct} correct; wrote {}",
                out.rows.len(),
                out.results_path.display()
            );
        }
        Command::Bench(a) => {
            let algorithms = a
                .algos
                .iter()
                .filter(|s| !s.trim().is_empty())
                .map(|s| s.trim().parse::<Algorithm>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| HarnessError::Config(e.to_string()))?;
            let opts = BenchOptions {
                ns: a.n,
                algorithms,
                rounds: a.rounds,
                seed: a.seed,
                ..BenchOptions::default()
            };
            let out = bench_runtime(&opts)?;
            for note in &out.notices {
                eprintln!("{note}");
            }
            write_bench_csv(&a.out, &out.rows)?;
            eprintln!("wrote {}", a.out.display());
        }
        Command::Report { pattern, out } => {
            let rep = report(&pattern, &out)?;
            for f in &rep.files {
                eprintln!("wrote {}", f.display());
            }
        }
        Command::Dks { input, k, exact } => {
            run_dks(&input, k, exact, &mut std::io::stdout().lock())?;
        }
        Command::Galloc { n, k, strategy, t } => {
            run_galloc(n, k, strategy, t, &mut std::io::stdout().lock())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
