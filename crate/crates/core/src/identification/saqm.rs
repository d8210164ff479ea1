use std::sync::Arc;

use super::exhaustive::EnumeratedArms;
use super::{
    conf_radius_ellipsoid, Algorithm, CheckContext, StoppingDiagnostics, StoppingRule,
    RATIO_ENUMERATION_BUDGET,
};
use crate::dks::{quadratic_maximize_warm, DksOracle};
use crate::error::{Error, Result};
use crate::linalg::WarmStart;
use crate::model::linear_maximize;

/// Stopping rule that bounds the confidence ellipsoid's extent by
/// approximate quadratic maximization over `A^{-1}`.
#[derive(Debug)]
pub struct Saqm {
    oracle: Arc<dyn DksOracle>,
    alpha_override: Option<f64>,
    warm: WarmStart,
    ratio_arms: Option<Option<EnumeratedArms>>,
}

impl Saqm {
    /// `alpha_override`, when set, replaces the certified QP ratio; the
    /// stopping rule then uses its square root.
    pub fn new(oracle: Arc<dyn DksOracle>, alpha_override: Option<f64>) -> Result<Self> {
        if let Some(a) = alpha_override {
            if !(a > 0.0 && a <= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "alpha override must lie in (0,1], got {a}"
                )));
            }
        }
        Ok(Self {
            oracle,
            alpha_override,
            warm: WarmStart::default(),
            ratio_arms: None,
        })
    }
}

impl StoppingRule for Saqm {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Saqm
    }

    fn check(&mut self, ctx: &CheckContext<'_>) -> Result<Option<StoppingDiagnostics>> {
        let n = ctx.dc.n();
        let k = ctx.dc.size();
        let inv = ctx.state.inverse()?;
        let qp = match quadratic_maximize_warm(inv, n, k, self.oracle.as_ref(), &mut self.warm) {
            Ok(qp) => qp,
            Err(Error::NotPositiveDefinite { .. }) => return Ok(None),
            Err(e) => return Err(e),
        };
        let c_t = conf_radius_ellipsoid(ctx.params, ctx.rounds(), ctx.dc.log_cardinality())?;
        let z = c_t * qp.qp_value.max(0.0).sqrt();
        let certificate = qp.certificate.expect("checked QP carries a certificate");
        let alpha = self.alpha_override.unwrap_or(certificate).sqrt();

        let best = ctx.empirical_best;
        let best_value = best.value(ctx.theta_hat);
        let best_norm = ctx.state.arm_norm_sq(best)?.sqrt();
        let (challenger, second) = linear_maximize(ctx.theta_hat, ctx.dc, Some(best))?;
        let lhs = best_value - c_t * best_norm;
        let rhs = second + z / alpha - ctx.params.epsilon;
        let margin = lhs - rhs;

        let ratio = if ctx.record_ratio {
            let arms = self
                .ratio_arms
                .get_or_insert_with(|| EnumeratedArms::new(ctx.dc, RATIO_ENUMERATION_BUDGET).ok());
            arms.as_ref()
                .map(|a| (qp.qp_value / a.max_quad(inv)).sqrt())
        } else {
            None
        };

        Ok(Some(StoppingDiagnostics {
            empirical_gap: best_value - second,
            empirical_best: best.clone(),
            challenger,
            radius: c_t,
            objective: z,
            margin,
            stop: margin >= 0.0,
            alpha: Some(alpha),
            certificate: Some(certificate),
            ratio,
        }))
    }
}
