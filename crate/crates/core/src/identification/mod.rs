//! Fixed-confidence identification with a static allocation.
//!
//! Every algorithm shares the same loop: pull each support element once,
//! then pull by the tracking rule, update the least-squares estimate and,
//! once the design matrix is invertible, evaluate a stopping rule. The four
//! rules differ only in how they bound the gap between the empirical best
//! super-arm and the rest:
//!
//! - [`Saqm`]: confidence ellipsoid maximized approximately by QP.
//! - [`SaFoa`]: first-order surrogate of the gap's ellipsoid bound.
//! - [`Icb`]: diagonal (independent) confidence bounds, exact by linear maximization.
//! - [`Exhaustive`]: exact ellipsoid bound by enumerating the class.

mod confidence;
mod exhaustive;
mod icb;
mod safoa;
mod saqm;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

pub use confidence::{conf_radius_ellipsoid, conf_radius_independent, ConfidenceParams};
pub use exhaustive::{EnumeratedArms, Exhaustive};
pub use icb::{icb_challenge, Icb};
pub use safoa::{foa_gamma, foa_surrogate, SaFoa};
pub use saqm::Saqm;

use crate::allocation::{next_pull, Allocation};
use crate::dks::DksOracle;
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::linalg::DesignState;
use crate::model::{best_super_arm, DecisionClass, SuperArm, ThetaVector};

/// Default sampling budget.
pub const DEFAULT_BUDGET: u64 = 10_000_000;

/// Largest class enumerated to measure approximation ratios.
pub const RATIO_ENUMERATION_BUDGET: f64 = 1e4;

/// The four identification algorithms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Saqm,
    SaFoa,
    Icb,
    Exhaustive,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Saqm,
        Algorithm::SaFoa,
        Algorithm::Icb,
        Algorithm::Exhaustive,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Saqm => "saqm",
            Algorithm::SaFoa => "safoa",
            Algorithm::Icb => "icb",
            Algorithm::Exhaustive => "exhaustive",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "saqm" => Ok(Algorithm::Saqm),
            "safoa" | "sa-foa" => Ok(Algorithm::SaFoa),
            "icb" => Ok(Algorithm::Icb),
            "exhaustive" => Ok(Algorithm::Exhaustive),
            other => Err(Error::InvalidArgument(format!(
                "unknown algorithm '{other}'"
            ))),
        }
    }
}

/// Loop settings shared by all algorithms.
#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Maximum number of pulls; reaching it ends the run with `stopped = false`.
    pub budget: u64,
    /// Evaluate the stopping rule only on rounds divisible by this.
    pub check_every: u64,
    /// Record a trace entry every this many checks.
    pub trace_every: u64,
    /// Measure the approximation ratio of the rule's maximization (small classes only).
    pub record_ratio: bool,
    /// Seed for the rule's internal randomness.
    pub seed: u64,
    /// Keep sampling even when the rule says stop (runtime benchmarks).
    pub ignore_stop: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            budget: DEFAULT_BUDGET,
            check_every: 1,
            trace_every: 1,
            record_ratio: false,
            seed: 0,
            ignore_stop: false,
        }
    }
}

/// Everything a stopping rule may look at in one check.
#[derive(Debug)]
pub struct CheckContext<'a> {
    pub state: &'a DesignState,
    pub dc: &'a DecisionClass,
    pub params: &'a ConfidenceParams,
    pub allocation: &'a Allocation,
    pub theta_hat: &'a [f64],
    pub empirical_best: &'a SuperArm,
    pub record_ratio: bool,
}

impl CheckContext<'_> {
    pub fn rounds(&self) -> u64 {
        self.state.rounds()
    }
}

/// Outcome of one stopping-rule evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct StoppingDiagnostics {
    /// Empirical best super-arm at this round.
    pub empirical_best: SuperArm,
    /// Strongest competitor found by the rule's maximization.
    pub challenger: SuperArm,
    /// `theta_hat(best) - theta_hat(challenger)`.
    pub empirical_gap: f64,
    /// Confidence radius `C_t` used.
    pub radius: f64,
    /// The rule's maximized quantity (`Z_t`, `Z'_t` or `Z*_t`).
    pub objective: f64,
    /// Slack of the stopping inequality; the rule stops when `stop` is set,
    /// which for every rule means `margin >= 0` (strictly `> 0` for ICB and
    /// the exhaustive rule).
    pub margin: f64,
    pub stop: bool,
    /// CEM approximation ratio used in the stopping rule (SAQM).
    pub alpha: Option<f64>,
    /// Conservative approximation certificate, always computed by SAQM.
    pub certificate: Option<f64>,
    /// Measured approximation ratio of the rule's maximization.
    pub ratio: Option<f64>,
}

/// A stopping rule plugged into the common loop.
pub trait StoppingRule {
    fn algorithm(&self) -> Algorithm;

    /// `Ok(None)` means the rule cannot be evaluated yet and sampling goes on.
    fn check(&mut self, ctx: &CheckContext<'_>) -> Result<Option<StoppingDiagnostics>>;
}

/// One recorded check.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub round: u64,
    pub empirical_best_value: f64,
    pub margin: f64,
    pub alpha: Option<f64>,
    pub ratio: Option<f64>,
    /// Seconds spent on this round's update and check, excluding the pull.
    pub round_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub algorithm: Algorithm,
    pub output: SuperArm,
    pub samples: u64,
    pub stopped: bool,
    pub trace: Vec<TraceRecord>,
    /// Algorithm time (updates and checks) summed over post-initialization rounds.
    pub wall_clock_total: f64,
    pub timed_rounds: u64,
    pub checks: u64,
    pub last: Option<StoppingDiagnostics>,
}

impl RunResult {
    pub fn wall_clock_per_round(&self) -> f64 {
        if self.timed_rounds == 0 {
            0.0
        } else {
            self.wall_clock_total / self.timed_rounds as f64
        }
    }

    /// Whether `output` is within `epsilon` of the best under the true `theta`.
    pub fn is_epsilon_optimal(
        &self,
        theta: &ThetaVector,
        dc: &DecisionClass,
        epsilon: f64,
    ) -> Result<bool> {
        let best = best_super_arm(theta, dc)?;
        Ok(theta.reward(&best) - theta.reward(&self.output) <= epsilon + 1e-12)
    }
}

/// Read-only view handed to an observer after every check.
#[derive(Debug)]
pub struct CheckView<'a> {
    pub state: &'a DesignState,
    pub diagnostics: &'a StoppingDiagnostics,
}

/// Run the common loop with `rule`.
pub fn run_with_rule(
    env: &mut dyn Environment,
    dc: &DecisionClass,
    p: &Allocation,
    params: &ConfidenceParams,
    rule: &mut dyn StoppingRule,
    opts: &RunOptions,
    mut observer: Option<&mut dyn FnMut(&CheckView<'_>)>,
) -> Result<RunResult> {
    let n = dc.n();
    if env.n() != n || p.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: env.n(),
        });
    }
    if let Some(bad) = p.support().iter().find(|m| !dc.is_feasible(m)) {
        return Err(Error::InvalidArgument(format!(
            "support element {bad} is not feasible"
        )));
    }
    if params.k != dc.size() {
        return Err(Error::InvalidArgument(format!(
            "confidence parameters use k = {}, decision class has size {}",
            params.k,
            dc.size()
        )));
    }
    let check_every = opts.check_every.max(1);
    let trace_every = opts.trace_every.max(1);
    let support = p.support();
    let mut state = DesignState::new(n);
    let mut counts = vec![0u64; support.len()];

    for (i, arm) in support.iter().enumerate() {
        if state.rounds() >= opts.budget {
            break;
        }
        let r = env.pull(arm);
        state.update(arm, r)?;
        counts[i] += 1;
    }

    let mut result = RunResult {
        algorithm: rule.algorithm(),
        output: support[0].clone(),
        samples: 0,
        stopped: false,
        trace: Vec::new(),
        wall_clock_total: 0.0,
        timed_rounds: 0,
        checks: 0,
        last: None,
    };

    while state.rounds() < opts.budget {
        let i = next_pull(p, &counts);
        let r = env.pull(&support[i]);
        let clock = Instant::now();
        state.update(&support[i], r)?;
        counts[i] += 1;

        let mut checked = None;
        if state.is_invertible() && state.rounds() % check_every == 0 {
            let theta_hat = state
                .theta_hat()
                .expect("invertible state has an estimate")
                .to_vec();
            let best = best_super_arm(&ThetaVector::new(theta_hat.clone())?, dc)?;
            let ctx = CheckContext {
                state: &state,
                dc,
                params,
                allocation: p,
                theta_hat: &theta_hat,
                empirical_best: &best,
                record_ratio: opts.record_ratio,
            };
            checked = rule.check(&ctx)?.map(|d| (d, best.value(&theta_hat)));
        }
        let seconds = clock.elapsed().as_secs_f64();
        result.wall_clock_total += seconds;
        result.timed_rounds += 1;

        if let Some((diag, best_value)) = checked {
            if result.checks % trace_every == 0 {
                result.trace.push(TraceRecord {
                    round: state.rounds(),
                    empirical_best_value: best_value,
                    margin: diag.margin,
                    alpha: diag.alpha,
                    ratio: diag.ratio,
                    round_seconds: seconds,
                });
            }
            result.checks += 1;
            if let Some(obs) = observer.as_mut() {
                obs(&CheckView {
                    state: &state,
                    diagnostics: &diag,
                });
            }
            let stop = diag.stop && !opts.ignore_stop;
            result.output = diag.empirical_best.clone();
            result.last = Some(diag);
            if stop {
                result.stopped = true;
                break;
            }
        }
    }

    if !result.stopped {
        if let Some(th) = state.theta_hat() {
            result.output = best_super_arm(&ThetaVector::new(th.to_vec())?, dc)?;
        }
    }
    result.samples = state.rounds();
    Ok(result)
}

/// Construct the stopping rule for `algorithm`.
///
/// `alpha_override` only affects SAQM and `ell` only SA-FOA.
pub fn make_rule(
    algorithm: Algorithm,
    dc: &DecisionClass,
    oracle: Arc<dyn DksOracle>,
    alpha_override: Option<f64>,
    ell: usize,
    seed: u64,
) -> Result<Box<dyn StoppingRule>> {
    Ok(match algorithm {
        Algorithm::Saqm => Box::new(Saqm::new(oracle, alpha_override)?),
        Algorithm::SaFoa => Box::new(SaFoa::new(oracle, ell, seed)?),
        Algorithm::Icb => Box::new(Icb::new()),
        Algorithm::Exhaustive => Box::new(Exhaustive::new(dc, exhaustive::EXHAUSTIVE_BUDGET)?),
    })
}

/// SAQM with the given DkS oracle.
pub fn run_saqm(
    env: &mut dyn Environment,
    dc: &DecisionClass,
    p: &Allocation,
    params: &ConfidenceParams,
    oracle: Arc<dyn DksOracle>,
    alpha_override: Option<f64>,
    opts: &RunOptions,
) -> Result<RunResult> {
    let mut rule = Saqm::new(oracle, alpha_override)?;
    run_with_rule(env, dc, p, params, &mut rule, opts, None)
}

/// SA-FOA with `ell * n` surrogate candidates per check.
pub fn run_safoa(
    env: &mut dyn Environment,
    dc: &DecisionClass,
    p: &Allocation,
    params: &ConfidenceParams,
    oracle: Arc<dyn DksOracle>,
    ell: usize,
    opts: &RunOptions,
) -> Result<RunResult> {
    let mut rule = SaFoa::new(oracle, ell, opts.seed)?;
    run_with_rule(env, dc, p, params, &mut rule, opts, None)
}

pub fn run_icb(
    env: &mut dyn Environment,
    dc: &DecisionClass,
    p: &Allocation,
    params: &ConfidenceParams,
    opts: &RunOptions,
) -> Result<RunResult> {
    let mut rule = Icb::new();
    run_with_rule(env, dc, p, params, &mut rule, opts, None)
}

pub fn run_exhaustive(
    env: &mut dyn Environment,
    dc: &DecisionClass,
    p: &Allocation,
    params: &ConfidenceParams,
    opts: &RunOptions,
) -> Result<RunResult> {
    let mut rule = Exhaustive::new(dc, exhaustive::EXHAUSTIVE_BUDGET)?;
    run_with_rule(env, dc, p, params, &mut rule, opts, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::{cyclic_design, uniform_allocation};
    use crate::dks::GreedyPeeling;
    use crate::env::{generate_synthetic, InstanceSpec, Noise, SyntheticEnv};

    fn all_pairs(n: usize) -> Allocation {
        let dc = DecisionClass::top_k(n, 2).unwrap();
        uniform_allocation(dc.enumerate(1e3).unwrap()).unwrap()
    }

    fn zero_noise(seed: u64) -> SyntheticEnv {
        let spec = InstanceSpec {
            n: 4,
            k: 2,
            delta_min: 1.0,
            seed,
        };
        generate_synthetic(&spec, Noise::None).unwrap()
    }

    fn true_best(env: &SyntheticEnv, dc: &DecisionClass) -> SuperArm {
        best_super_arm(env.theta(), dc).unwrap()
    }

    #[test]
    fn zero_noise_saqm_and_exhaustive_find_the_best() {
        let dc = DecisionClass::top_k(4, 2).unwrap();
        let p = all_pairs(4);
        let params = ConfidenceParams::new(1e-6, 2, 0.05, 0.0).unwrap();
        for seed in 0..5 {
            let mut env = zero_noise(seed);
            let expected = true_best(&env, &dc);
            let r = run_saqm(
                &mut env,
                &dc,
                &p,
                &params,
                Arc::new(GreedyPeeling),
                None,
                &RunOptions::default(),
            )
            .unwrap();
            assert!(r.stopped);
            assert!(r.samples >= 4 && r.samples <= 200, "{}", r.samples);
            assert_eq!(r.output, expected);
            let mut env = zero_noise(seed);
            let r = run_exhaustive(&mut env, &dc, &p, &params, &RunOptions::default()).unwrap();
            assert!(r.stopped);
            assert_eq!(r.output, expected);
        }
    }

    #[test]
    fn large_epsilon_stops_at_first_check() {
        let dc = DecisionClass::top_k(6, 2).unwrap();
        let p = all_pairs(6);
        let params = ConfidenceParams::new(1.0, 2, 0.05, 1e4).unwrap();
        let spec = InstanceSpec {
            n: 6,
            k: 2,
            delta_min: 0.2,
            seed: 3,
        };
        for alg in Algorithm::ALL {
            let mut env = generate_synthetic(&spec, Noise::Gaussian { sigma: 1.0 }).unwrap();
            let mut rule = make_rule(alg, &dc, Arc::new(GreedyPeeling), None, 1, 0).unwrap();
            let r = run_with_rule(
                &mut env,
                &dc,
                &p,
                &params,
                rule.as_mut(),
                &RunOptions::default(),
                None,
            )
            .unwrap();
            assert!(r.stopped, "{alg}");
            assert_eq!(r.checks, 1, "{alg}");
            assert_eq!(r.samples, p.len() as u64 + 1);
        }
    }

    #[test]
    fn budget_exhaustion_is_not_an_error() {
        let dc = DecisionClass::top_k(6, 3).unwrap();
        let p = uniform_allocation(cyclic_design(6, 3).unwrap().blocks).unwrap();
        let params = ConfidenceParams::new(1.0, 3, 0.05, 0.0).unwrap();
        let spec = InstanceSpec {
            n: 6,
            k: 3,
            delta_min: 0.0,
            seed: 1,
        };
        let mut env = generate_synthetic(&spec, Noise::Gaussian { sigma: 1.0 }).unwrap();
        let opts = RunOptions {
            budget: 60,
            ..RunOptions::default()
        };
        let r = run_icb(&mut env, &dc, &p, &params, &opts).unwrap();
        assert!(!r.stopped);
        assert_eq!(r.samples, 60);
        assert_eq!(r.output.len(), 3);
    }

    #[test]
    fn trace_and_ratio_are_recorded() {
        let dc = DecisionClass::top_k(6, 3).unwrap();
        let p = uniform_allocation(dc.enumerate(1e3).unwrap()).unwrap();
        let params = ConfidenceParams::new(1.0, 3, 0.05, 0.5).unwrap();
        let spec = InstanceSpec {
            n: 6,
            k: 3,
            delta_min: 0.5,
            seed: 2,
        };
        let mut env = generate_synthetic(&spec, Noise::Gaussian { sigma: 1.0 }).unwrap();
        let opts = RunOptions {
            budget: 400,
            record_ratio: true,
            trace_every: 2,
            ignore_stop: true,
            ..RunOptions::default()
        };
        let r = run_saqm(
            &mut env,
            &dc,
            &p,
            &params,
            Arc::new(GreedyPeeling),
            Some(0.9),
            &opts,
        )
        .unwrap();
        assert!(!r.stopped);
        assert_eq!(r.samples, 400);
        assert_eq!(r.trace.len() as u64, r.checks.div_ceil(2));
        for rec in &r.trace {
            let ratio = rec.ratio.unwrap();
            assert!(ratio > 0.0 && ratio <= 1.0 + 1e-9, "{ratio}");
            assert!((rec.alpha.unwrap() - 0.9f64.sqrt()).abs() < 1e-12);
        }
        assert!(r.wall_clock_per_round() > 0.0);
    }

    #[test]
    fn observer_sees_every_check() {
        let dc = DecisionClass::top_k(5, 2).unwrap();
        let p = all_pairs(5);
        let params = ConfidenceParams::new(1.0, 2, 0.1, 0.2).unwrap();
        let spec = InstanceSpec {
            n: 5,
            k: 2,
            delta_min: 0.5,
            seed: 9,
        };
        let mut env = generate_synthetic(&spec, Noise::Gaussian { sigma: 0.5 }).unwrap();
        let mut rule = SaFoa::new(Arc::new(GreedyPeeling), 2, 4).unwrap();
        let mut seen = 0u64;
        let mut last_stop = false;
        let mut obs = |v: &CheckView<'_>| {
            seen += 1;
            last_stop = v.diagnostics.stop;
            assert!(!v.diagnostics.stop || v.diagnostics.margin >= 0.0);
        };
        let opts = RunOptions {
            check_every: 3,
            ..RunOptions::default()
        };
        let r =
            run_with_rule(&mut env, &dc, &p, &params, &mut rule, &opts, Some(&mut obs)).unwrap();
        assert_eq!(seen, r.checks);
        assert_eq!(last_stop, r.stopped);
        assert_eq!(r.samples % 3, 0);
    }

    #[test]
    fn mismatched_inputs_rejected() {
        let dc = DecisionClass::top_k(4, 2).unwrap();
        let p = all_pairs(4);
        let params = ConfidenceParams::new(1.0, 3, 0.05, 0.0).unwrap();
        let mut env = zero_noise(0);
        assert!(run_icb(&mut env, &dc, &p, &params, &RunOptions::default()).is_err());
        let p5 = all_pairs(5);
        let params = ConfidenceParams::new(1.0, 2, 0.05, 0.0).unwrap();
        assert!(run_icb(&mut env, &dc, &p5, &params, &RunOptions::default()).is_err());
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("foo".parse::<Algorithm>().is_err());
    }
}
