use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use bandit_cpe_core::allocation::Allocation;
use bandit_cpe_core::dks::{DksOracle, ExactDks, GreedyPeeling};
use bandit_cpe_core::env::{
    generate_synthetic, ingest_crowd, CrowdEnv, Environment, InstanceSpec, Noise,
};
use bandit_cpe_core::identification::{
    make_rule, run_with_rule, ConfidenceParams, RunOptions, RunResult, TraceRecord,
};
use bandit_cpe_core::model::DecisionClass;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{EnvironmentConfig, ExperimentConfig, NoiseKind, OracleChoice};
use crate::error::{HarnessError, Result};

/// Environment variable capping the worker pool.
pub const THREADS_ENV: &str = "BANDIT_CPE_THREADS";

pub const RESULTS_FILE: &str = "results.csv";
pub const TRACE_DIR: &str = "traces";

/// One line of the results CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub seed: u64,
    pub algorithm: String,
    pub n: usize,
    pub k: usize,
    /// Empty for crowd environments.
    pub delta_min: Option<f64>,
    pub epsilon: f64,
    pub samples: u64,
    pub stopped: bool,
    pub correct: bool,
    pub output: String,
    pub wall_clock_total: f64,
    pub wall_clock_per_round_mean: f64,
    /// Relative to the results file's directory.
    pub trace_file: String,
}

/// One line of a per-run trace CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub round: u64,
    pub empirical_best_value: f64,
    pub margin: f64,
    pub alpha: Option<f64>,
    pub ratio: Option<f64>,
    pub round_seconds: f64,
}

impl From<&TraceRecord> for TraceRow {
    fn from(r: &TraceRecord) -> Self {
        Self {
            round: r.round,
            empirical_best_value: r.empirical_best_value,
            margin: r.margin,
            alpha: r.alpha,
            ratio: r.ratio,
            round_seconds: r.round_seconds,
        }
    }
}

/// What a run produced on disk.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub results_path: PathBuf,
}

enum Source {
    Synthetic { noise: Noise },
    Crowd(Box<CrowdEnv>),
}

impl Source {
    fn env(&self, cfg: &ExperimentConfig, n: usize, seed: u64) -> Result<Box<dyn Environment>> {
        Ok(match self {
            Source::Synthetic { noise } => {
                let spec = InstanceSpec {
                    n,
                    k: cfg.k,
                    delta_min: cfg.delta_min.unwrap_or_default(),
                    seed,
                };
                Box::new(generate_synthetic(&spec, *noise)?)
            }
            Source::Crowd(env) => Box::new(env.reseeded(seed)),
        })
    }
}

/// Size of the worker pool: available parallelism, capped by `BANDIT_CPE_THREADS`.
pub fn thread_count() -> usize {
    let available = std::thread::available_parallelism().map_or(1, |v| v.get());
    match std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
    {
        Some(cap) if cap > 0 => cap.min(available),
        _ => available,
    }
}

fn oracle(choice: OracleChoice) -> Arc<dyn DksOracle> {
    match choice {
        OracleChoice::Greedy => Arc::new(GreedyPeeling),
        OracleChoice::Exact => Arc::new(ExactDks::default()),
    }
}

fn trace_name(cfg: &ExperimentConfig, n: usize, seed: u64) -> String {
    format!(
        "{TRACE_DIR}/{}_n{n}_k{}_seed{seed}.csv",
        cfg.algorithm, cfg.k
    )
}

fn run_seed(
    cfg: &ExperimentConfig,
    source: &Source,
    dc: &DecisionClass,
    p: &Allocation,
    params: &ConfidenceParams,
    seed: u64,
) -> Result<RunResult> {
    let n = dc.n();
    let mut env = source.env(cfg, n, seed)?;
    let mut rule = make_rule(
        cfg.algorithm,
        dc,
        oracle(cfg.oracle),
        cfg.alpha_override,
        cfg.ell,
        seed,
    )?;
    let opts = RunOptions {
        budget: cfg.budget,
        check_every: cfg.check_every,
        trace_every: cfg.trace_every,
        record_ratio: cfg.record_ratio,
        seed,
        ignore_stop: false,
    };
    Ok(run_with_rule(
        env.as_mut(),
        dc,
        p,
        params,
        rule.as_mut(),
        &opts,
        None,
    )?)
}

/// Run every seed of `cfg` and write `results.csv` plus one trace CSV per
/// seed under `out_dir`. Rows come back in the order of `cfg.seeds`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let (source, n, r) = match &cfg.environment {
        EnvironmentConfig::Synthetic { noise, noise_scale } => {
            let noise = match noise {
                NoiseKind::Gaussian => Noise::Gaussian {
                    sigma: *noise_scale,
                },
                NoiseKind::Uniform => Noise::Uniform { r: *noise_scale },
                NoiseKind::None => Noise::None,
            };
            let n = cfg.n.expect("validated");
            (
                Source::Synthetic { noise },
                n,
                cfg.r.unwrap_or(noise.scale()),
            )
        }
        EnvironmentConfig::Crowd { labels, truth } => {
            let env = ingest_crowd(labels, truth, 0)?;
            let n = env.n();
            if let Some(declared) = cfg.n {
                if declared != n {
                    return Err(HarnessError::Config(format!(
                        "config declares n = {declared}, the data has {n} workers"
                    )));
                }
            }
            if cfg.k >= n {
                return Err(HarnessError::Config(format!(
                    "need k < n, the data has {n} workers"
                )));
            }
            cfg.check_exhaustive(n)?;
            let r = cfg.r.unwrap_or(env.noise_scale());
            (Source::Crowd(Box::new(env)), n, r)
        }
    };
    let dc = DecisionClass::top_k(n, cfg.k)?;
    let p = cfg.allocation.build(&dc, 0)?;
    let params = ConfidenceParams::new(r, cfg.k, cfg.delta, cfg.epsilon)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count())
        .build()
        .map_err(|e| HarnessError::Data(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<(RunResult, bool)>> = pool.install(|| {
        cfg.seeds
            .par_iter()
            .map(|&seed| {
                let result = run_seed(cfg, &source, &dc, &p, &params, seed)?;
                let theta = source.env(cfg, n, seed)?.theta().clone();
                let correct = result.is_epsilon_optimal(&theta, &dc, cfg.epsilon)?;
                Ok((result, correct))
            })
            .collect()
    });

    let traces = out_dir.join(TRACE_DIR);
    fs::create_dir_all(&traces).map_err(|e| HarnessError::io(&traces, e))?;
    let mut rows = Vec::with_capacity(cfg.seeds.len());
    for (&seed, outcome) in cfg.seeds.iter().zip(results) {
        let (result, correct) = outcome?;
        let trace_file = trace_name(cfg, n, seed);
        write_csv(
            &out_dir.join(&trace_file),
            result.trace.iter().map(TraceRow::from),
        )?;
        rows.push(ResultRow {
            seed,
            algorithm: cfg.algorithm.name().to_string(),
            n,
            k: cfg.k,
            delta_min: cfg.delta_min,
            epsilon: cfg.epsilon,
            samples: result.samples,
            stopped: result.stopped,
            correct,
            output: result.output.label(),
            wall_clock_total: result.wall_clock_total,
            wall_clock_per_round_mean: result.wall_clock_per_round(),
            trace_file,
        });
    }
    let results_path = out_dir.join(RESULTS_FILE);
    write_csv(&results_path, rows.iter().cloned())?;
    Ok(ExperimentOutput { rows, results_path })
}

/// A serializable CSV record with a fixed header.
pub trait CsvRecord: Serialize {
    const HEADER: &'static [&'static str];
}

impl CsvRecord for ResultRow {
    const HEADER: &'static [&'static str] = &[
        "seed",
        "algorithm",
        "n",
        "k",
        "delta_min",
        "epsilon",
        "samples",
        "stopped",
        "correct",
        "output",
        "wall_clock_total",
        "wall_clock_per_round_mean",
        "trace_file",
    ];
}

impl CsvRecord for TraceRow {
    const HEADER: &'static [&'static str] = &[
        "round",
        "empirical_best_value",
        "margin",
        "alpha",
        "ratio",
        "round_seconds",
    ];
}

/// Write `rows` under `T::HEADER`; an empty iterator gives a header-only file.
pub fn write_csv<T: CsvRecord>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| HarnessError::csv(path, e))?;
    w.write_record(T::HEADER)
        .map_err(|e| HarnessError::csv(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| HarnessError::csv(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}
