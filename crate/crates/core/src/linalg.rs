//! Dense symmetric linear algebra for the design matrix.
//!
//! Matrices are row-major `Vec<f64>` of length `n * n`. The design state
//! keeps `A = sum chi chi^T`, its inverse (maintained by rank-1 updates once
//! `A` is full rank), `b = sum chi r` and the least-squares estimate.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::SuperArm;

/// Pivot threshold below which a Cholesky factorization is declared singular.
pub const PIVOT_THRESHOLD: f64 = 1e-10;

/// Number of rank-1 updates between full re-inversions.
pub const REFRESH_INTERVAL: usize = 1000;

pub fn identity(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

pub fn mat_vec(a: &[f64], n: usize, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (i, o) in out.iter_mut().enumerate() {
        let row = &a[i * n..(i + 1) * n];
        *o = row.iter().zip(x).map(|(r, v)| r * v).sum();
    }
    out
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `x^T A x`.
pub fn quad_form(a: &[f64], n: usize, x: &[f64]) -> f64 {
    dot(x, &mat_vec(a, n, x))
}

/// `chi_S^T A chi_S = sum_{i,j in S} A_ij`.
pub fn subset_quad(a: &[f64], n: usize, set: &[usize]) -> f64 {
    let mut s = 0.0;
    for &i in set {
        let row = &a[i * n..(i + 1) * n];
        for &j in set {
            s += row[j];
        }
    }
    s
}

/// Frobenius norm of `a - b`.
pub fn frobenius_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Numeric rank by Gaussian elimination with partial pivoting.
pub fn numeric_rank(a: &[f64], n: usize) -> usize {
    let mut m = a.to_vec();
    let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);
    let tol = 1e-9 * scale;
    let mut rank = 0;
    let mut row = 0;
    for col in 0..n {
        if row == n {
            break;
        }
        let (piv, best) = (row..n)
            .map(|r| (r, m[r * n + col].abs()))
            .fold((row, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best <= tol {
            continue;
        }
        for c in 0..n {
            m.swap(row * n + c, piv * n + c);
        }
        for r in row + 1..n {
            let f = m[r * n + col] / m[row * n + col];
            if f != 0.0 {
                for c in col..n {
                    m[r * n + c] -= f * m[row * n + c];
                }
            }
        }
        row += 1;
        rank += 1;
    }
    rank
}

/// Lower-triangular Cholesky factor; fails when a pivot drops to
/// `PIVOT_THRESHOLD` or below.
fn cholesky(a: &[f64], n: usize) -> Result<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > PIVOT_THRESHOLD) {
            return Err(Error::Singular {
                rank: numeric_rank(a, n),
                n,
            });
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / d;
        }
    }
    Ok(l)
}

/// Inverse of a symmetric positive definite matrix via Cholesky.
pub fn invert_spd(a: &[f64], n: usize) -> Result<Vec<f64>> {
    let l = cholesky(a, n)?;
    // L^{-1} by forward substitution, column by column.
    let mut linv = vec![0.0; n * n];
    for c in 0..n {
        for i in c..n {
            let mut s = if i == c { 1.0 } else { 0.0 };
            for k in c..i {
                s -= l[i * n + k] * linv[k * n + c];
            }
            linv[i * n + c] = s / l[i * n + i];
        }
    }
    // A^{-1} = L^{-T} L^{-1}.
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = 0.0;
            for k in i..n {
                s += linv[k * n + i] * linv[k * n + j];
            }
            inv[i * n + j] = s;
            inv[j * n + i] = s;
        }
    }
    Ok(inv)
}

/// Extreme eigenvalues of a symmetric matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralSummary {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub iterations: usize,
    /// Largest eigen-residual `||W v - lambda v||` of the two estimates.
    pub residual: f64,
}

impl SpectralSummary {
    /// `(lambda_min - residual, lambda_max + residual)`: bounds that widen
    /// the spectrum, so ratios built from them are never optimistic.
    pub fn conservative_bounds(&self) -> (f64, f64) {
        (
            self.lambda_min - self.residual,
            self.lambda_max + self.residual,
        )
    }
}

/// Power-iteration settings.
#[derive(Debug, Clone, Copy)]
pub struct PowerIteration {
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Return the current estimate, with its residual, when the residual
    /// stops improving or the iteration budget runs out, instead of failing.
    pub accept_stalled: bool,
}

impl Default for PowerIteration {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 100_000,
            accept_stalled: false,
        }
    }
}

impl PowerIteration {
    /// Settings for callers that only need conservative bounds.
    pub fn relaxed() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 20_000,
            accept_stalled: true,
        }
    }
}

/// Eigenvectors from a previous call, reused as starting points when the
/// matrix changes slowly (the design matrix between rounds).
#[derive(Debug, Clone, Default)]
pub struct WarmStart {
    top: Option<Vec<f64>>,
    bottom: Option<Vec<f64>>,
}

fn start_vector(n: usize) -> Vec<f64> {
    // Fixed pseudo-random start so that no structured eigenvector is missed.
    let mut state = 0x9E37_79B9_7F4A_7C15u64;
    let mut v: Vec<f64> = (0..n)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            0.5 + (state >> 11) as f64 / (1u64 << 53) as f64
        })
        .collect();
    normalize(&mut v);
    v
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

const STALL_WINDOW: usize = 50;

/// Rayleigh quotient of unit `v`, the product `m v` and the residual norm.
fn rayleigh(m: &[f64], n: usize, v: &[f64]) -> (f64, Vec<f64>, f64) {
    let w = mat_vec(m, n, v);
    let lambda = dot(v, &w);
    let residual = w
        .iter()
        .zip(v)
        .map(|(wi, vi)| (wi - lambda * vi).powi(2))
        .sum::<f64>()
        .sqrt();
    (lambda, w, residual)
}

/// Dominant eigenpair of a symmetric positive semidefinite matrix `m`.
/// Returns `(lambda, vector, iterations, residual)`.
fn dominant_psd(
    m: &[f64],
    n: usize,
    start: Option<&Vec<f64>>,
    opts: PowerIteration,
    scale: f64,
) -> Result<(f64, Vec<f64>, usize, f64)> {
    let mut v = match start {
        Some(s) if s.len() == n && dot(s, s) > 0.0 => {
            let mut s = s.clone();
            normalize(&mut s);
            s
        }
        _ => start_vector(n),
    };
    let mut checkpoint = f64::INFINITY;
    for it in 1..=opts.max_iterations {
        let (lambda, w, residual) = rayleigh(m, n, &v);
        if residual <= opts.tolerance * scale {
            return Ok((lambda, v, it, residual));
        }
        if opts.accept_stalled && it % STALL_WINDOW == 0 {
            // Clustered eigenvalues: the vector barely moves any more.
            if residual > 0.9 * checkpoint {
                return Ok((lambda, v, it, residual));
            }
            checkpoint = residual;
        }
        let mut next = w;
        if normalize(&mut next) == 0.0 {
            // v lies in the null space: the matrix is zero on it, lambda = 0.
            return Ok((0.0, v, it, 0.0));
        }
        v = next;
    }
    let (lambda, _, residual) = rayleigh(m, n, &v);
    if opts.accept_stalled {
        return Ok((lambda, v, opts.max_iterations, residual));
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iterations,
        residual,
    })
}

/// `lambda_min` and `lambda_max` of a symmetric matrix by power iteration.
pub fn extreme_eigenvalues(w: &[f64], n: usize) -> Result<SpectralSummary> {
    extreme_eigenvalues_with(w, n, PowerIteration::default(), &mut WarmStart::default())
}

/// As `extreme_eigenvalues`, with explicit settings and a reusable warm start.
///
/// Asymmetry up to 1e-10 (relative) is tolerated and symmetrized away.
pub fn extreme_eigenvalues_with(
    w: &[f64],
    n: usize,
    opts: PowerIteration,
    warm: &mut WarmStart,
) -> Result<SpectralSummary> {
    if w.len() != n * n {
        return Err(Error::DimensionMismatch {
            expected: n * n,
            got: w.len(),
        });
    }
    if n == 0 {
        return Err(Error::InvalidArgument("empty matrix".into()));
    }
    let scale = w.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if !scale.is_finite() {
        return Err(Error::NonFinite("matrix entry".into()));
    }
    let mut sym = w.to_vec();
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (w[i * n + j], w[j * n + i]);
            if (a - b).abs() > 1e-10 * scale.max(1.0) {
                return Err(Error::InvalidArgument(format!(
                    "matrix is not symmetric at ({i},{j}): {a} vs {b}"
                )));
            }
            let mean = 0.5 * (a + b);
            sym[i * n + j] = mean;
            sym[j * n + i] = mean;
        }
    }
    if scale == 0.0 {
        return Ok(SpectralSummary {
            lambda_min: 0.0,
            lambda_max: 0.0,
            iterations: 0,
            residual: 0.0,
        });
    }

    // Gershgorin lower bound; shift to PSD when it is negative.
    let gersh_lo = (0..n)
        .map(|i| {
            let off: f64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| sym[i * n + j].abs())
                .sum();
            sym[i * n + i] - off
        })
        .fold(f64::INFINITY, f64::min);
    let shift = if gersh_lo < 0.0 { -gersh_lo } else { 0.0 };
    let mut shifted = sym.clone();
    for i in 0..n {
        shifted[i * n + i] += shift;
    }
    let gersh_radius = (0..n)
        .map(|i| (0..n).map(|j| shifted[i * n + j].abs()).sum::<f64>())
        .fold(0.0f64, f64::max);

    let (top, top_vec, it_top, res_top) =
        dominant_psd(&shifted, n, warm.top.as_ref(), opts, gersh_radius)?;
    let lambda_max = top - shift;

    // lambda_max I - W is PSD; its dominant eigenvalue is lambda_max - lambda_min.
    let mut flipped = sym.iter().map(|v| -v).collect::<Vec<_>>();
    for i in 0..n {
        flipped[i * n + i] += lambda_max + res_top;
    }
    let (spread, bottom_vec, it_bottom, res_bottom) =
        dominant_psd(&flipped, n, warm.bottom.as_ref(), opts, gersh_radius)?;
    let lambda_min = (lambda_max + res_top - spread).min(lambda_max);

    warm.top = Some(top_vec);
    warm.bottom = Some(bottom_vec);
    Ok(SpectralSummary {
        lambda_min,
        lambda_max,
        iterations: it_top + it_bottom,
        residual: res_top.max(res_bottom),
    })
}

/// Running least-squares statistics of a full-bandit experiment.
#[derive(Debug, Clone)]
pub struct DesignState {
    n: usize,
    t: u64,
    a: Vec<f64>,
    a_inv: Option<Vec<f64>>,
    b: Vec<f64>,
    theta_hat: Option<Vec<f64>>,
    pull_counts: BTreeMap<SuperArm, u64>,
    since_refresh: usize,
}

impl DesignState {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            t: 0,
            a: vec![0.0; n * n],
            a_inv: None,
            b: vec![0.0; n],
            theta_hat: None,
            pull_counts: BTreeMap::new(),
            since_refresh: 0,
        }
    }

    /// A state whose accumulated matrix is `a` (no rewards, no pulls).
    /// Useful for fixtures and for regularized starts.
    pub fn from_gram(n: usize, a: Vec<f64>) -> Result<Self> {
        if a.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: a.len(),
            });
        }
        let mut s = Self::new(n);
        s.a = a;
        s.try_invert();
        Ok(s)
    }

    fn try_invert(&mut self) {
        if let Ok(inv) = invert_spd(&self.a, self.n) {
            self.a_inv = Some(inv);
            self.since_refresh = 0;
            self.recompute_theta();
        }
    }

    fn recompute_theta(&mut self) {
        self.theta_hat = self.a_inv.as_ref().map(|inv| mat_vec(inv, self.n, &self.b));
    }

    /// Record one observation `reward` of super-arm `arm`.
    pub fn update(&mut self, arm: &SuperArm, reward: f64) -> Result<()> {
        if !reward.is_finite() {
            return Err(Error::NonFinite(format!("reward {reward}")));
        }
        if arm.n() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: arm.n(),
            });
        }
        let n = self.n;
        let idx = arm.indices();
        for &i in idx {
            for &j in idx {
                self.a[i * n + j] += 1.0;
            }
            self.b[i] += reward;
        }
        self.t += 1;
        *self.pull_counts.entry(arm.clone()).or_insert(0) += 1;

        match self.a_inv.as_mut() {
            Some(inv) => {
                self.since_refresh += 1;
                if self.since_refresh >= REFRESH_INTERVAL {
                    self.a_inv = None;
                    self.try_invert();
                    if self.a_inv.is_none() {
                        return Err(Error::Singular {
                            rank: numeric_rank(&self.a, n),
                            n,
                        });
                    }
                } else {
                    // Sherman-Morrison: (A + x x^T)^{-1} = A^{-1} - u u^T / (1 + x^T u).
                    let mut u = vec![0.0; n];
                    for (r, ur) in u.iter_mut().enumerate() {
                        let row = &inv[r * n..(r + 1) * n];
                        *ur = idx.iter().map(|&c| row[c]).sum();
                    }
                    let denom = 1.0 + idx.iter().map(|&i| u[i]).sum::<f64>();
                    for r in 0..n {
                        let f = u[r] / denom;
                        if f != 0.0 {
                            let row = &mut inv[r * n..(r + 1) * n];
                            for (c, v) in row.iter_mut().enumerate() {
                                *v -= f * u[c];
                            }
                        }
                    }
                    self.recompute_theta();
                }
            }
            None => {
                if self.t >= n as u64 {
                    self.try_invert();
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Rounds observed so far.
    pub fn rounds(&self) -> u64 {
        self.t
    }

    pub fn gram(&self) -> &[f64] {
        &self.a
    }

    pub fn is_invertible(&self) -> bool {
        self.a_inv.is_some()
    }

    pub fn inverse(&self) -> Result<&[f64]> {
        self.a_inv.as_deref().ok_or_else(|| Error::Singular {
            rank: numeric_rank(&self.a, self.n),
            n: self.n,
        })
    }

    pub fn rewards_sum(&self) -> &[f64] {
        &self.b
    }

    pub fn theta_hat(&self) -> Option<&[f64]> {
        self.theta_hat.as_deref()
    }

    pub fn pull_counts(&self) -> &BTreeMap<SuperArm, u64> {
        &self.pull_counts
    }

    pub fn count(&self, arm: &SuperArm) -> u64 {
        self.pull_counts.get(arm).copied().unwrap_or(0)
    }

    /// `||x||_{A^{-1}} = sqrt(x^T A^{-1} x)`.
    pub fn ellipsoid_norm(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        let inv = self.inverse()?;
        Ok(quad_form(inv, self.n, x).max(0.0).sqrt())
    }

    /// `||chi_M||^2_{A^{-1}}`.
    pub fn arm_norm_sq(&self, arm: &SuperArm) -> Result<f64> {
        Ok(subset_quad(self.inverse()?, self.n, arm.indices()).max(0.0))
    }

    /// `||chi_M - chi_M'||^2_{A^{-1}}`.
    pub fn diff_norm_sq(&self, m: &SuperArm, other: &SuperArm) -> Result<f64> {
        let inv = self.inverse()?;
        let n = self.n;
        let cross: f64 = m
            .indices()
            .iter()
            .map(|&i| other.indices().iter().map(|&j| inv[i * n + j]).sum::<f64>())
            .sum();
        let v =
            subset_quad(inv, n, m.indices()) + subset_quad(inv, n, other.indices()) - 2.0 * cross;
        Ok(v.max(0.0))
    }
}

/// `lambda_max(A) / lambda_min(A)` of the accumulated design matrix.
pub fn condition_number(state: &DesignState) -> Result<f64> {
    state.inverse()?;
    let s = extreme_eigenvalues(state.gram(), state.n())?;
    if s.lambda_min <= 0.0 {
        return Err(Error::Singular {
            rank: numeric_rank(state.gram(), state.n()),
            n: state.n(),
        });
    }
    Ok(s.lambda_max / s.lambda_min)
}
