use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Confidence-level parameters shared by all algorithms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceParams {
    /// Per-arm noise bound (or its sub-Gaussian surrogate).
    pub r: f64,
    /// Super-arm size.
    pub k: usize,
    pub delta: f64,
    pub epsilon: f64,
}

impl ConfidenceParams {
    pub fn new(r: f64, k: usize, delta: f64, epsilon: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "delta must lie in (0,1), got {delta}"
            )));
        }
        if !(r.is_finite() && r > 0.0) || k == 0 {
            return Err(Error::InvalidArgument(format!(
                "sigma = kR must be positive (k={k}, R={r})"
            )));
        }
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be non-negative, got {epsilon}"
            )));
        }
        Ok(Self {
            r,
            k,
            delta,
            epsilon,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.k as f64 * self.r
    }

    pub fn c(&self) -> f64 {
        2.0 * std::f64::consts::SQRT_2 * self.sigma()
    }

    pub fn c_prime() -> f64 {
        6.0 / (PI * PI)
    }

    fn log_term(&self, t: u64, log_count: f64) -> Result<f64> {
        if t == 0 {
            return Err(Error::RadiusUndefined(
                "round index must be at least 1".into(),
            ));
        }
        let arg = Self::c_prime().ln() + 2.0 * (t as f64).ln() + log_count - self.delta.ln();
        if !(arg >= 0.0) {
            return Err(Error::RadiusUndefined(format!(
                "log argument {arg} is negative at t={t}"
            )));
        }
        Ok(arg)
    }
}

/// Ellipsoidal radius `C_t = c * sqrt(ln(c' t^2 K / delta))`, with `log_k = ln K`.
pub fn conf_radius_ellipsoid(params: &ConfidenceParams, t: u64, log_k: f64) -> Result<f64> {
    Ok(params.c() * params.log_term(t, log_k)?.sqrt())
}

/// Per-arm radius `sigma * sqrt(2 ln(c' t^2 n / delta))`.
pub fn conf_radius_independent(params: &ConfidenceParams, t: u64, n: usize) -> Result<f64> {
    Ok(params.sigma() * (2.0 * params.log_term(t, (n as f64).ln())?).sqrt())
}
