//! Reward environments with full-bandit feedback: a pull of super-arm `M`
//! returns one noisy observation of `theta(M)` and nothing per arm.

use std::collections::HashMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use log::warn;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::model::{SuperArm, ThetaVector};

/// A stochastic environment. `pull` advances the internal rng
/// deterministically, so equal seeds give bitwise-equal reward streams.
pub trait Environment: Send {
    fn n(&self) -> usize;

    fn pull(&mut self, arm: &SuperArm) -> f64;

    /// Expected reward of each single arm.
    fn theta(&self) -> &ThetaVector;

    /// Per-arm noise scale `R` to plug into confidence radii.
    fn noise_scale(&self) -> f64;
}

/// Per-arm additive noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Noise {
    None,
    Gaussian {
        sigma: f64,
    },
    /// Uniform on `[-r, r]`.
    Uniform {
        r: f64,
    },
}

impl Noise {
    /// The `R` surrogate. For Gaussian noise this is sigma, which is a
    /// heuristic: Gaussian noise is unbounded.
    pub fn scale(&self) -> f64 {
        match *self {
            Noise::None => 0.0,
            Noise::Gaussian { sigma } => sigma,
            Noise::Uniform { r } => r,
        }
    }
}

/// Fixed `theta` plus independent per-arm noise on every pull.
#[derive(Debug, Clone)]
pub struct SyntheticEnv {
    theta: ThetaVector,
    noise: Noise,
    normal: Option<Normal<f64>>,
    rng: ChaCha8Rng,
}

const NOISE_STREAM: u64 = 0;
const THETA_STREAM: u64 = 1;

impl SyntheticEnv {
    pub fn new(theta: ThetaVector, noise: Noise, seed: u64) -> Result<Self> {
        let normal = match noise {
            Noise::Gaussian { sigma } => Some(
                Normal::new(0.0, sigma)
                    .map_err(|e| Error::InvalidArgument(format!("gaussian sigma {sigma}: {e}")))?,
            ),
            Noise::Uniform { r } if !(r >= 0.0) => {
                return Err(Error::InvalidArgument(format!("uniform noise bound {r}")))
            }
            _ => None,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(NOISE_STREAM);
        Ok(Self {
            theta,
            noise,
            normal,
            rng,
        })
    }

    /// Same instance and noise model with a fresh rng.
    pub fn reseeded(&self, seed: u64) -> Self {
        let mut env = self.clone();
        env.rng = ChaCha8Rng::seed_from_u64(seed);
        env.rng.set_stream(NOISE_STREAM);
        env
    }

    pub fn noise(&self) -> Noise {
        self.noise
    }
}

impl Environment for SyntheticEnv {
    fn n(&self) -> usize {
        self.theta.n()
    }

    fn pull(&mut self, arm: &SuperArm) -> f64 {
        let values = self.theta.values();
        let mut r = 0.0;
        for &e in arm.indices() {
            let eps = match self.noise {
                Noise::None => 0.0,
                Noise::Gaussian { .. } => self
                    .normal
                    .as_ref()
                    .map_or(0.0, |d| d.sample(&mut self.rng)),
                Noise::Uniform { r } => {
                    if r > 0.0 {
                        self.rng.gen_range(-r..=r)
                    } else {
                        0.0
                    }
                }
            };
            r += values[e] + eps;
        }
        r
    }

    fn theta(&self) -> &ThetaVector {
        &self.theta
    }

    fn noise_scale(&self) -> f64 {
        self.noise.scale()
    }
}

/// Parameters of a gap-controlled synthetic instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceSpec {
    pub n: usize,
    pub k: usize,
    pub delta_min: f64,
    pub seed: u64,
}

/// Draw `theta` for `spec`: the top-k arms uniform in `[0, 1]`, the
/// (k+1)-th exactly `delta_min` below the smallest of them, the rest uniform
/// in `[-1, theta_min_k - delta_min]`. Arm positions are shuffled.
pub fn generate_theta(spec: &InstanceSpec) -> Result<ThetaVector> {
    let InstanceSpec {
        n,
        k,
        delta_min,
        seed,
    } = *spec;
    if !(0.0..=1.0).contains(&delta_min) {
        return Err(Error::InvalidArgument(format!(
            "delta_min {delta_min} outside [0, 1]"
        )));
    }
    if k < 1 || k + 1 > n {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= k < n, got n = {n}, k = {k}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(THETA_STREAM);
    let mut values: Vec<f64> = (0..k).map(|_| rng.gen::<f64>()).collect();
    let min_top = values.iter().copied().fold(f64::INFINITY, f64::min);
    let ceiling = min_top - delta_min;
    values.push(ceiling);
    for _ in k + 1..n {
        let u: f64 = rng.gen();
        values.push(-1.0 + u * (ceiling + 1.0));
    }
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        values.swap(i, j);
    }
    ThetaVector::new(values)
}

/// Synthetic environment for `spec` with the given noise model. The noise
/// rng is seeded from `spec.seed` on a separate stream from `theta`.
pub fn generate_synthetic(spec: &InstanceSpec, noise: Noise) -> Result<SyntheticEnv> {
    SyntheticEnv::new(generate_theta(spec)?, noise, spec.seed)
}

/// Dataset statistics in the layout `#task, #worker, average, best`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrowdSummary {
    pub tasks: usize,
    pub workers: usize,
    pub average_accuracy: f64,
    pub best_accuracy: f64,
}

impl CrowdSummary {
    pub fn table_row(&self, name: &str) -> String {
        format!(
            "{name},{},{},{:.2},{:.2}",
            self.tasks, self.workers, self.average_accuracy, self.best_accuracy
        )
    }
}

/// Crowdsourcing environment: workers are arms; a pull draws one task
/// uniformly and returns how many workers in the team labeled it correctly.
/// Missing labels count as incorrect.
#[derive(Debug, Clone)]
pub struct CrowdEnv {
    workers: Vec<String>,
    tasks: Vec<String>,
    /// `correct[task][worker]`.
    correct: Vec<Vec<bool>>,
    accuracy: Vec<f64>,
    theta: ThetaVector,
    summary: CrowdSummary,
    warnings: Vec<String>,
    rng: ChaCha8Rng,
}

impl CrowdEnv {
    pub fn workers(&self) -> &[String] {
        &self.workers
    }

    pub fn tasks(&self) -> &[String] {
        &self.tasks
    }

    /// Correct / attempted per worker (0 for workers with no attempts).
    pub fn accuracy(&self) -> &[f64] {
        &self.accuracy
    }

    pub fn summary(&self) -> &CrowdSummary {
        &self.summary
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn reseeded(&self, seed: u64) -> Self {
        let mut env = self.clone();
        env.rng = ChaCha8Rng::seed_from_u64(seed);
        env
    }
}

impl Environment for CrowdEnv {
    fn n(&self) -> usize {
        self.workers.len()
    }

    fn pull(&mut self, arm: &SuperArm) -> f64 {
        let task = self.rng.gen_range(0..self.tasks.len());
        let row = &self.correct[task];
        arm.indices().iter().filter(|&&w| row[w]).count() as f64
    }

    fn theta(&self) -> &ThetaVector {
        &self.theta
    }

    /// Per-worker rewards are in `{0, 1}`.
    fn noise_scale(&self) -> f64 {
        1.0
    }
}

fn parse_err(path: &str, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_string(),
        line: line as usize,
        message: message.into(),
    }
}

fn read_table(reader: impl Read, path: &str, header: &[&str]) -> Result<Vec<(u64, Vec<String>)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let found: Vec<String> = rdr
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if found != header {
        return Err(parse_err(
            path,
            1,
            format!(
                "expected header {}, found {}",
                header.join(","),
                found.join(",")
            ),
        ));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        rows.push((line, rec.iter().map(|f| f.trim().to_string()).collect()));
    }
    Ok(rows)
}

/// Load a crowd environment from the two CSV files
/// (`task_id,worker_id,label` and `task_id,label`).
pub fn ingest_crowd(labels: &Path, truth: &Path, seed: u64) -> Result<CrowdEnv> {
    ingest_crowd_from_readers(
        File::open(labels)?,
        &labels.display().to_string(),
        File::open(truth)?,
        &truth.display().to_string(),
        seed,
    )
}

/// As [`ingest_crowd`], from arbitrary readers. A labels row with an empty
/// label declares a worker without recording an answer.
pub fn ingest_crowd_from_readers(
    labels: impl Read,
    labels_name: &str,
    truth: impl Read,
    truth_name: &str,
    seed: u64,
) -> Result<CrowdEnv> {
    let truth_rows = read_table(truth, truth_name, &["task_id", "label"])?;
    let mut tasks: Vec<String> = Vec::new();
    let mut gold: HashMap<String, (usize, String)> = HashMap::new();
    for (line, row) in truth_rows {
        if row[0].is_empty() {
            return Err(parse_err(truth_name, line, "empty task_id"));
        }
        if gold.contains_key(&row[0]) {
            return Err(parse_err(
                truth_name,
                line,
                format!("duplicate task {}", row[0]),
            ));
        }
        gold.insert(row[0].clone(), (tasks.len(), row[1].clone()));
        tasks.push(row[0].clone());
    }
    if tasks.is_empty() {
        return Err(parse_err(truth_name, 1, "no tasks"));
    }

    let label_rows = read_table(labels, labels_name, &["task_id", "worker_id", "label"])?;
    let mut workers: Vec<String> = Vec::new();
    let mut worker_idx: HashMap<String, usize> = HashMap::new();
    let mut answers: HashMap<(usize, usize), bool> = HashMap::new();
    for (line, row) in label_rows {
        let (task, worker, label) = (&row[0], &row[1], &row[2]);
        if worker.is_empty() {
            return Err(parse_err(labels_name, line, "empty worker_id"));
        }
        let w = *worker_idx.entry(worker.clone()).or_insert_with(|| {
            workers.push(worker.clone());
            workers.len() - 1
        });
        if label.is_empty() {
            continue;
        }
        let (t, gold_label) = gold.get(task).ok_or_else(|| {
            parse_err(labels_name, line, format!("task {task} has no gold label"))
        })?;
        if answers.insert((*t, w), label == gold_label).is_some() {
            return Err(parse_err(
                labels_name,
                line,
                format!("duplicate label for task {task}, worker {worker}"),
            ));
        }
    }
    if workers.is_empty() {
        return Err(parse_err(labels_name, 1, "no workers"));
    }

    let mut correct = vec![vec![false; workers.len()]; tasks.len()];
    let mut attempted = vec![0usize; workers.len()];
    let mut right = vec![0usize; workers.len()];
    for (&(t, w), &ok) in &answers {
        attempted[w] += 1;
        if ok {
            right[w] += 1;
            correct[t][w] = true;
        }
    }
    let mut warnings = Vec::new();
    let accuracy: Vec<f64> = (0..workers.len())
        .map(|w| {
            if attempted[w] == 0 {
                let msg = format!("worker {} labeled no task; accuracy set to 0", workers[w]);
                warn!("{msg}");
                warnings.push(msg);
                0.0
            } else {
                right[w] as f64 / attempted[w] as f64
            }
        })
        .collect();
    let mean_reward: Vec<f64> = right
        .iter()
        .map(|&r| r as f64 / tasks.len() as f64)
        .collect();
    let summary = CrowdSummary {
        tasks: tasks.len(),
        workers: workers.len(),
        average_accuracy: accuracy.iter().sum::<f64>() / workers.len() as f64,
        best_accuracy: accuracy.iter().copied().fold(0.0, f64::max),
    };
    Ok(CrowdEnv {
        workers,
        tasks,
        correct,
        accuracy,
        theta: ThetaVector::new(mean_reward)?,
        summary,
        warnings,
        rng: ChaCha8Rng::seed_from_u64(seed),
    })
}
