use super::{conf_radius_ellipsoid, Algorithm, CheckContext, StoppingDiagnostics, StoppingRule};
use crate::error::{Error, Result};
use crate::model::{DecisionClass, SuperArm};

/// Largest class the exhaustive rule accepts.
pub const EXHAUSTIVE_BUDGET: f64 = 1e6;

/// A decision class enumerated once into a flat index table.
#[derive(Debug, Clone)]
pub struct EnumeratedArms {
    n: usize,
    k: usize,
    flat: Vec<usize>,
}

impl EnumeratedArms {
    pub fn new(dc: &DecisionClass, budget: f64) -> Result<Self> {
        let arms = dc.enumerate(budget)?;
        let k = dc.size();
        let mut flat = Vec::with_capacity(arms.len() * k);
        for a in &arms {
            flat.extend_from_slice(a.indices());
        }
        Ok(Self { n: dc.n(), k, flat })
    }

    pub fn len(&self) -> usize {
        self.flat.len() / self.k
    }

    pub fn is_empty(&self) -> bool {
        self.flat.is_empty()
    }

    pub fn arm(&self, i: usize) -> SuperArm {
        SuperArm::new(self.n, self.flat[i * self.k..(i + 1) * self.k].to_vec())
            .expect("enumerated arms are valid")
    }

    fn quad(&self, inv: &[f64], set: &[usize]) -> f64 {
        let n = self.n;
        let mut s = 0.0;
        for (a, &i) in set.iter().enumerate() {
            let row = &inv[i * n..(i + 1) * n];
            s += row[i];
            for &j in &set[a + 1..] {
                s += 2.0 * row[j];
            }
        }
        s
    }

    /// `max_M chi_M^T W chi_M` over the class.
    pub fn max_quad(&self, w: &[f64]) -> f64 {
        self.flat
            .chunks_exact(self.k)
            .map(|set| self.quad(w, set))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `max_{M != best} theta_hat(M) + c_t ||chi_M - chi_best||_{A^{-1}}`,
    /// with the maximizing index.
    pub fn max_gap_bound(
        &self,
        inv: &[f64],
        theta_hat: &[f64],
        c_t: f64,
        best: &SuperArm,
    ) -> Option<(usize, f64)> {
        let n = self.n;
        let b = best.indices();
        let v: Vec<f64> = (0..n)
            .map(|i| b.iter().map(|&j| inv[i * n + j]).sum())
            .collect();
        let q_best = self.quad(inv, b);
        let mut found: Option<(usize, f64)> = None;
        for (idx, set) in self.flat.chunks_exact(self.k).enumerate() {
            if set == b {
                continue;
            }
            let cross: f64 = set.iter().map(|&i| v[i]).sum();
            let d2 = (self.quad(inv, set) - 2.0 * cross + q_best).max(0.0);
            let val: f64 = set.iter().map(|&i| theta_hat[i]).sum::<f64>() + c_t * d2.sqrt();
            if found.map_or(true, |(_, f)| val > f) {
                found = Some((idx, val));
            }
        }
        found
    }
}

/// Exact ellipsoidal stopping rule by enumeration of the class.
#[derive(Debug, Clone)]
pub struct Exhaustive {
    arms: EnumeratedArms,
}

impl Exhaustive {
    /// Fails when the class has more than `budget` members.
    pub fn new(dc: &DecisionClass, budget: f64) -> Result<Self> {
        let arms = EnumeratedArms::new(dc, budget)?;
        if arms.len() < 2 {
            return Err(Error::ExclusionImpossible);
        }
        Ok(Self { arms })
    }

    pub fn arms(&self) -> &EnumeratedArms {
        &self.arms
    }
}

impl StoppingRule for Exhaustive {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Exhaustive
    }

    fn check(&mut self, ctx: &CheckContext<'_>) -> Result<Option<StoppingDiagnostics>> {
        let c_t = conf_radius_ellipsoid(ctx.params, ctx.rounds(), ctx.dc.log_cardinality())?;
        let inv = ctx.state.inverse()?;
        let best = ctx.empirical_best;
        let (idx, z) = self
            .arms
            .max_gap_bound(inv, ctx.theta_hat, c_t, best)
            .ok_or(Error::ExclusionImpossible)?;
        let challenger = self.arms.arm(idx);
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
            ratio: ctx.record_ratio.then_some(1.0),
        }))
    }
}
