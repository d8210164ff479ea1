use std::path::Path;
use std::sync::Arc;

use bandit_cpe_core::combin::binomial;
use bandit_cpe_core::dks::GreedyPeeling;
use bandit_cpe_core::env::{generate_synthetic, InstanceSpec, Noise};
use bandit_cpe_core::identification::{
    make_rule, run_with_rule, Algorithm, ConfidenceParams, RunOptions,
};
use bandit_cpe_core::model::DecisionClass;
use serde::Serialize;

use crate::config::{AllocationStrategy, EXHAUSTIVE_LIMIT};
use crate::error::{HarnessError, Result};
use crate::experiment::{write_csv, CsvRecord};

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub ns: Vec<usize>,
    pub algorithms: Vec<Algorithm>,
    /// Timed rounds per (algorithm, n), after initialization.
    pub rounds: u64,
    pub delta_min: f64,
    pub seed: u64,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            ns: (10..=24).step_by(2).collect(),
            algorithms: Algorithm::ALL.to_vec(),
            rounds: 200,
            delta_min: 0.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub algorithm: String,
    pub n: usize,
    pub k: usize,
    pub rounds: u64,
    pub per_round_seconds: f64,
}

impl CsvRecord for BenchRow {
    const HEADER: &'static [&'static str] = &["algorithm", "n", "k", "rounds", "per_round_seconds"];
}

#[derive(Debug, Clone, Default)]
pub struct BenchOutput {
    pub rows: Vec<BenchRow>,
    /// Human-readable notes about skipped combinations.
    pub notices: Vec<String>,
}

/// Time one round (update plus stopping check) with `k = n/2`, running each
/// algorithm for `rounds` rounds with stopping disabled.
pub fn bench_runtime(opts: &BenchOptions) -> Result<BenchOutput> {
    if opts.rounds == 0 {
        return Err(HarnessError::Config("rounds must be positive".into()));
    }
    if let Some(bad) = opts.ns.iter().find(|&&n| n < 4 || n % 2 != 0) {
        return Err(HarnessError::Config(format!(
            "n must be even and at least 4, got {bad}"
        )));
    }
    let mut out = BenchOutput::default();
    for &n in &opts.ns {
        let k = n / 2;
        let dc = DecisionClass::top_k(n, k)?;
        let p = AllocationStrategy::G.build(&dc, opts.seed)?;
        let params = ConfidenceParams::new(1.0, k, 0.05, 0.0)?;
        let spec = InstanceSpec {
            n,
            k,
            delta_min: opts.delta_min,
            seed: opts.seed,
        };
        for &alg in &opts.algorithms {
            if alg == Algorithm::Exhaustive && binomial(n, k) > EXHAUSTIVE_LIMIT {
                out.notices.push(format!(
                    "skipping exhaustive at n = {n}: C({n},{k}) = {} exceeds {EXHAUSTIVE_LIMIT}",
                    binomial(n, k)
                ));
                continue;
            }
            let mut env = generate_synthetic(&spec, Noise::Gaussian { sigma: 1.0 })?;
            let mut rule = make_rule(alg, &dc, Arc::new(GreedyPeeling), None, 1, opts.seed)?;
            let run = RunOptions {
                budget: p.len() as u64 + opts.rounds,
                trace_every: u64::MAX,
                seed: opts.seed,
                ignore_stop: true,
                ..RunOptions::default()
            };
            let r = run_with_rule(&mut env, &dc, &p, &params, rule.as_mut(), &run, None)?;
            out.rows.push(BenchRow {
                algorithm: alg.name().to_string(),
                n,
                k,
                rounds: r.timed_rounds,
                per_round_seconds: r.wall_clock_per_round(),
            });
        }
    }
    Ok(out)
}

pub fn write_bench_csv(path: &Path, rows: &[BenchRow]) -> Result<()> {
    write_csv(path, rows.iter().cloned())
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 || points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return None;
    }
    let m = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|&(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
