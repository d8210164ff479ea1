use super::{conf_radius_independent, Algorithm, CheckContext, StoppingDiagnostics, StoppingRule};
use crate::error::Result;
use crate::model::{linear_maximize, DecisionClass, SuperArm};

/// Stopping rule with per-arm (diagonal) confidence bounds.
#[derive(Debug, Clone, Default)]
pub struct Icb;

impl Icb {
    pub fn new() -> Self {
        Self
    }
}

/// `Z* = max_{M != best} theta_hat(M) + c_t sum_{i in M xor best} d_i`,
/// solved as a linear maximization. Returns the maximizer and `Z*`.
pub fn icb_challenge(
    theta_hat: &[f64],
    d: &[f64],
    c_t: f64,
    best: &SuperArm,
    dc: &DecisionClass,
) -> Result<(SuperArm, f64)> {
    let u: Vec<f64> = (0..theta_hat.len())
        .map(|i| {
            if best.contains(i) {
                theta_hat[i] - c_t * d[i]
            } else {
                theta_hat[i] + c_t * d[i]
            }
        })
        .collect();
    let constant: f64 = best.indices().iter().map(|&i| c_t * d[i]).sum();
    let (arm, value) = linear_maximize(&u, dc, Some(best))?;
    Ok((arm, value + constant))
}

impl StoppingRule for Icb {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Icb
    }

    fn check(&mut self, ctx: &CheckContext<'_>) -> Result<Option<StoppingDiagnostics>> {
        let n = ctx.dc.n();
        let c_t = conf_radius_independent(ctx.params, ctx.rounds(), n)?;
        let inv = ctx.state.inverse()?;
        let d: Vec<f64> = (0..n).map(|i| inv[i * n + i].max(0.0).sqrt()).collect();
        let best = ctx.empirical_best;
        let (challenger, z) = icb_challenge(ctx.theta_hat, &d, c_t, best, ctx.dc)?;
        let best_value = best.value(ctx.theta_hat);
        let margin = ctx.params.epsilon - (z - best_value);
        Ok(Some(StoppingDiagnostics {
            empirical_gap: best_value - challenger.value(ctx.theta_hat),
            empirical_best: best.clone(),
            challenger,
            radius: c_t,
            objective: z,
            margin,
            stop: margin > 0.0,
            alpha: None,
            certificate: None,
            ratio: None,
        }))
    }
}
