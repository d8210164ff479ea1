use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use bandit_cpe_core::allocation::{
    cyclic_design, default_candidates, g_allocation, uniform_allocation, Allocation, GOptions,
};
use bandit_cpe_core::combin::binomial;
use bandit_cpe_core::identification::{Algorithm, DEFAULT_BUDGET};
use bandit_cpe_core::model::DecisionClass;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{HarnessError, Result};

/// Largest class the exhaustive algorithm is configured for.
pub const EXHAUSTIVE_LIMIT: f64 = 1e6;

/// One experiment: an algorithm, an environment and a list of seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(serialize_with = "ser_algorithm", deserialize_with = "de_algorithm")]
    pub algorithm: Algorithm,
    #[serde(default)]
    pub environment: EnvironmentConfig,
    /// Number of base arms; taken from the data for crowd environments.
    #[serde(default)]
    pub n: Option<usize>,
    pub k: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
    pub epsilon: f64,
    /// Gap of the generated synthetic instance.
    #[serde(default)]
    pub delta_min: Option<f64>,
    #[serde(default)]
    pub allocation: AllocationStrategy,
    pub seeds: Vec<u64>,
    #[serde(default = "default_budget")]
    pub budget: u64,
    #[serde(default)]
    pub alpha_override: Option<f64>,
    #[serde(default = "default_one")]
    pub ell: usize,
    #[serde(default = "default_one_u64")]
    pub check_every: u64,
    #[serde(default = "default_one_u64")]
    pub trace_every: u64,
    #[serde(default)]
    pub record_ratio: bool,
    /// Noise bound used in the confidence radii; defaults to the
    /// environment's noise scale.
    #[serde(default)]
    pub r: Option<f64>,
    #[serde(default)]
    pub oracle: OracleChoice,
}

fn default_delta() -> f64 {
    0.05
}

fn default_budget() -> u64 {
    DEFAULT_BUDGET
}

fn default_one() -> usize {
    1
}

fn default_one_u64() -> u64 {
    1
}

fn ser_algorithm<S: Serializer>(a: &Algorithm, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(a.name())
}

fn de_algorithm<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Algorithm, D::Error> {
    let s = String::deserialize(d)?;
    s.parse().map_err(serde::de::Error::custom)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum EnvironmentConfig {
    Synthetic {
        #[serde(default)]
        noise: NoiseKind,
        #[serde(default = "default_noise_scale")]
        noise_scale: f64,
    },
    Crowd {
        labels: PathBuf,
        truth: PathBuf,
    },
}

fn default_noise_scale() -> f64 {
    1.0
}

impl Default for EnvironmentConfig {
    fn default() -> Self {
        EnvironmentConfig::Synthetic {
            noise: NoiseKind::Gaussian,
            noise_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    #[default]
    Gaussian,
    Uniform,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleChoice {
    #[default]
    Greedy,
    Exact,
}

/// How the static allocation is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AllocationStrategy {
    /// Uniform over the default candidate super-arms.
    Uniform,
    /// G-allocation over the default candidate super-arms.
    #[default]
    G,
    /// Uniform over the cyclic block design.
    Cyclic,
}

impl AllocationStrategy {
    pub fn build(&self, dc: &DecisionClass, seed: u64) -> Result<Allocation> {
        let (n, k) = (dc.n(), dc.size());
        Ok(match self {
            AllocationStrategy::Uniform => uniform_allocation(default_candidates(n, k, seed)?)?,
            AllocationStrategy::G => {
                let candidates = default_candidates(n, k, seed)?;
                g_allocation(dc, &candidates, GOptions::default())?.allocation
            }
            AllocationStrategy::Cyclic => uniform_allocation(cyclic_design(n, k)?.blocks)?,
        })
    }
}

impl fmt::Display for AllocationStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AllocationStrategy::Uniform => "uniform",
            AllocationStrategy::G => "g",
            AllocationStrategy::Cyclic => "cyclic",
        })
    }
}

impl FromStr for AllocationStrategy {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(AllocationStrategy::Uniform),
            "g" => Ok(AllocationStrategy::G),
            "cyclic" => Ok(AllocationStrategy::Cyclic),
            other => Err(HarnessError::Config(format!(
                "unknown allocation strategy '{other}'"
            ))),
        }
    }
}

/// Command-line values that replace config file entries.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub algorithm: Option<Algorithm>,
    pub seeds: Option<Vec<u64>>,
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub delta_min: Option<f64>,
    pub budget: Option<u64>,
    pub alpha_override: Option<f64>,
    pub ell: Option<usize>,
    pub check_every: Option<u64>,
    pub allocation: Option<AllocationStrategy>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        macro_rules! set {
            ($field:ident) => {
                if let Some(v) = &self.$field {
                    cfg.$field = v.clone();
                }
            };
            ($field:ident, some) => {
                if let Some(v) = &self.$field {
                    cfg.$field = Some(v.clone());
                }
            };
        }
        set!(algorithm);
        set!(seeds);
        set!(n, some);
        set!(k);
        set!(epsilon);
        set!(delta);
        set!(delta_min, some);
        set!(budget);
        set!(alpha_override, some);
        set!(ell);
        set!(check_every);
        set!(allocation);
    }
}

impl ExperimentConfig {
    /// Parse JSON; relative crowd paths are resolved against `base`.
    pub fn from_json(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        if let (Some(base), EnvironmentConfig::Crowd { labels, truth }) =
            (base, &mut cfg.environment)
        {
            for p in [labels, truth] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_json(&text, path.parent())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Check every field that can be checked without reading data files.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta must lie in (0,1), got {}", self.delta));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return bad(format!(
                "epsilon must be non-negative, got {}",
                self.epsilon
            ));
        }
        if self.k < 2 {
            return bad(format!("k must be at least 2, got {}", self.k));
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return bad("seeds must be distinct".into());
        }
        if self.budget == 0 {
            return bad("budget must be positive".into());
        }
        if self.ell == 0 || self.check_every == 0 || self.trace_every == 0 {
            return bad("ell, check_every and trace_every must be positive".into());
        }
        if let Some(a) = self.alpha_override {
            if !(a > 0.0 && a <= 1.0) {
                return bad(format!("alpha_override must lie in (0,1], got {a}"));
            }
        }
        if let Some(r) = self.r {
            if !(r.is_finite() && r > 0.0) {
                return bad(format!("r must be positive, got {r}"));
            }
        }
        match &self.environment {
            EnvironmentConfig::Synthetic { noise, noise_scale } => {
                let Some(n) = self.n else {
                    return bad("synthetic environments need n".into());
                };
                if self.k >= n {
                    return bad(format!("need k < n, got n = {n}, k = {}", self.k));
                }
                match self.delta_min {
                    Some(d) if (0.0..=1.0).contains(&d) => {}
                    Some(d) => return bad(format!("delta_min must lie in [0,1], got {d}")),
                    None => return bad("synthetic environments need delta_min".into()),
                }
                if *noise != NoiseKind::None && !(noise_scale.is_finite() && *noise_scale > 0.0) {
                    return bad(format!("noise_scale must be positive, got {noise_scale}"));
                }
                if *noise == NoiseKind::None && self.r.is_none() {
                    return bad("noise-free environments need an explicit r".into());
                }
                self.check_exhaustive(n)?;
            }
            EnvironmentConfig::Crowd { .. } => {
                if self.delta_min.is_some() {
                    return bad("delta_min is only meaningful for synthetic environments".into());
                }
                if let Some(n) = self.n {
                    self.check_exhaustive(n)?;
                }
            }
        }
        Ok(())
    }

    pub(crate) fn check_exhaustive(&self, n: usize) -> Result<()> {
        if self.algorithm == Algorithm::Exhaustive && binomial(n, self.k) > EXHAUSTIVE_LIMIT {
            return Err(HarnessError::Config(format!(
                "exhaustive search over C({n},{}) super-arms exceeds the limit of {EXHAUSTIVE_LIMIT}",
                self.k
            )));
        }
        Ok(())
    }
}
