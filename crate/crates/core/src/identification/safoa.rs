use std::collections::BTreeSet;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::exhaustive::EnumeratedArms;
use super::{
    conf_radius_ellipsoid, Algorithm, CheckContext, StoppingDiagnostics, StoppingRule,
    RATIO_ENUMERATION_BUDGET,
};
use crate::dks::{quadratic_maximize_unchecked, DksOracle};
use crate::error::{Error, Result};
use crate::linalg::DesignState;
use crate::model::{linear_maximize, SuperArm};

const CANDIDATE_STREAM: u64 = 2;

/// `gamma = c_t / (2 ||chi_bar - chi_best||_{A^{-1}})`.
pub fn foa_gamma(state: &DesignState, c_t: f64, bar: &SuperArm, best: &SuperArm) -> Result<f64> {
    let d = state.diff_norm_sq(bar, best)?.sqrt();
    if !(d > 0.0) {
        return Err(Error::InvalidArgument(
            "reference super-arm coincides with the empirical best".into(),
        ));
    }
    Ok(c_t / (2.0 * d))
}

/// `B = gamma A^{-1} - Diag(2 gamma A^{-1} chi_best) + Diag(theta_hat)`.
pub fn foa_surrogate(
    inv: &[f64],
    n: usize,
    theta_hat: &[f64],
    best: &SuperArm,
    gamma: f64,
) -> Vec<f64> {
    let mut b: Vec<f64> = inv.iter().map(|v| gamma * v).collect();
    for i in 0..n {
        let v: f64 = best.indices().iter().map(|&j| inv[i * n + j]).sum();
        b[i * n + i] += theta_hat[i] - 2.0 * gamma * v;
    }
    b
}

/// First-order surrogate rule: `ell * n` candidate super-arms per check.
#[derive(Debug)]
pub struct SaFoa {
    oracle: Arc<dyn DksOracle>,
    ell: usize,
    rng: ChaCha8Rng,
    ratio_arms: Option<Option<EnumeratedArms>>,
    fallbacks: u64,
}

impl SaFoa {
    pub fn new(oracle: Arc<dyn DksOracle>, ell: usize, seed: u64) -> Result<Self> {
        if ell == 0 {
            return Err(Error::InvalidArgument("ell must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(CANDIDATE_STREAM);
        Ok(Self {
            oracle,
            ell,
            rng,
            ratio_arms: None,
            fallbacks: 0,
        })
    }

    /// Checks in which no surrogate candidate differed from the empirical
    /// best and the linear runner-up was evaluated instead.
    pub fn fallbacks(&self) -> u64 {
        self.fallbacks
    }

    /// The candidate set `F` for one check.
    pub fn candidates(&mut self, ctx: &CheckContext<'_>, c_t: f64) -> Result<BTreeSet<SuperArm>> {
        let n = ctx.dc.n();
        let k = ctx.dc.size();
        let best = ctx.empirical_best;
        let support = ctx.allocation.support();
        if support.iter().all(|m| m == best) {
            return Err(Error::InvalidArgument(
                "allocation support contains only the empirical best".into(),
            ));
        }
        let inv = ctx.state.inverse()?;
        let mut found = BTreeSet::new();
        for _ in 0..self.ell * n {
            let bar = loop {
                let m = &support[self.rng.gen_range(0..support.len())];
                if m != best {
                    break m;
                }
            };
            let gamma = foa_gamma(ctx.state, c_t, bar, best)?;
            let b = foa_surrogate(inv, n, ctx.theta_hat, best, gamma);
            let (cand, _) = quadratic_maximize_unchecked(&b, n, k, self.oracle.as_ref())?;
            if ctx.dc.is_feasible(&cand) {
                found.insert(cand);
            }
        }
        Ok(found)
    }
}

impl StoppingRule for SaFoa {
    fn algorithm(&self) -> Algorithm {
        Algorithm::SaFoa
    }

    fn check(&mut self, ctx: &CheckContext<'_>) -> Result<Option<StoppingDiagnostics>> {
        let c_t = conf_radius_ellipsoid(ctx.params, ctx.rounds(), ctx.dc.log_cardinality())?;
        let best = ctx.empirical_best;
        let mut found = self.candidates(ctx, c_t)?;
        found.remove(best);
        if found.is_empty() {
            self.fallbacks += 1;
            found.insert(linear_maximize(ctx.theta_hat, ctx.dc, Some(best))?.0);
        }
        let mut top: Option<(SuperArm, f64)> = None;
        for m in found {
            let v = m.value(ctx.theta_hat) + c_t * ctx.state.diff_norm_sq(&m, best)?.sqrt();
            if top.as_ref().map_or(true, |(_, t)| v > *t) {
                top = Some((m, v));
            }
        }
        let (challenger, z) = top.expect("candidate set is non-empty");
        let best_value = best.value(ctx.theta_hat);
        let margin = ctx.params.epsilon / 2.0 - (z - best_value);

        let ratio = if ctx.record_ratio {
            let arms = self
                .ratio_arms
                .get_or_insert_with(|| EnumeratedArms::new(ctx.dc, RATIO_ENUMERATION_BUDGET).ok());
            match arms {
                Some(a) => a
                    .max_gap_bound(ctx.state.inverse()?, ctx.theta_hat, c_t, best)
                    .map(|(_, exact)| z / exact),
                None => None,
            }
        } else {
            None
        };

        Ok(Some(StoppingDiagnostics {
            empirical_gap: best_value - challenger.value(ctx.theta_hat),
            empirical_best: best.clone(),
            challenger,
            radius: c_t,
            objective: z,
            margin,
            stop: margin >= 0.0,
            alpha: None,
            certificate: None,
            ratio,
        }))
    }
}
