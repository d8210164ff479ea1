//! Static allocations over an explicit support of super-arms.
//!
//! An allocation `p` prescribes the fraction of pulls each support element
//! receives. It is realized online by the tracking rule ([`next_pull`]) or
//! offline by apportionment ([`round_allocation`]).

use std::collections::BTreeSet;
use std::f64::consts::PI;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::combin::{binomial, Combinations};
use crate::error::{Error, Result};
use crate::linalg::{invert_spd, numeric_rank, subset_quad};
use crate::model::{gap_report, DecisionClass, SuperArm, ThetaVector};

/// Enumeration budget for exact maxima over the decision class.
pub const ENUMERATION_BUDGET: f64 = 1e6;

/// `sum_M weight_M chi_M chi_M^T`.
pub fn weighted_gram(n: usize, support: &[SuperArm], weights: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; n * n];
    for (arm, &w) in support.iter().zip(weights) {
        for &i in arm.indices() {
            for &j in arm.indices() {
                g[i * n + j] += w;
            }
        }
    }
    g
}

/// Rank of the span of the support's indicator vectors.
pub fn support_rank(n: usize, support: &[SuperArm]) -> usize {
    numeric_rank(&weighted_gram(n, support, &vec![1.0; support.len()]), n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    support: Vec<SuperArm>,
    probs: Vec<f64>,
}

impl Allocation {
    /// Validates positivity, normalization (within 1e-9, then renormalized)
    /// and that the support spans `R^n`.
    pub fn new(support: Vec<SuperArm>, probs: Vec<f64>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::InvalidArgument("empty support".into()));
        }
        if support.len() != probs.len() {
            return Err(Error::DimensionMismatch {
                expected: support.len(),
                got: probs.len(),
            });
        }
        let n = support[0].n();
        if support.iter().any(|m| m.n() != n) {
            return Err(Error::InvalidArgument("support mixes ground sets".into()));
        }
        if probs.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
            return Err(Error::InvalidArgument(
                "probabilities must be positive".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "probabilities sum to {total}"
            )));
        }
        let rank = support_rank(n, &support);
        if rank < n {
            return Err(Error::NonIdentifiable { rank, n });
        }
        let probs = probs.iter().map(|p| p / total).collect();
        Ok(Self { support, probs })
    }

    pub fn support(&self) -> &[SuperArm] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn n(&self) -> usize {
        self.support[0].n()
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn min_prob(&self) -> f64 {
        self.probs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `Lambda_p = sum_M p_M chi_M chi_M^T`.
    pub fn design_matrix(&self) -> Vec<f64> {
        weighted_gram(self.n(), &self.support, &self.probs)
    }
}

/// Equal weight on every support element.
pub fn uniform_allocation(support: Vec<SuperArm>) -> Result<Allocation> {
    let s = support.len().max(1);
    Allocation::new(support, vec![1.0 / s as f64; s])
}

/// Eigenvalue `j` of the Gram matrix of the `n` cyclic blocks of length `k`:
/// `|sum_{m<k} e^{2 pi i j m / n}|^2 = sin^2(pi j k / n) / sin^2(pi j / n)`.
pub fn circulant_eigenvalue(n: usize, k: usize, j: usize) -> f64 {
    if j % n == 0 {
        return (k * k) as f64;
    }
    let num = (PI * (j * k) as f64 / n as f64).sin();
    let den = (PI * j as f64 / n as f64).sin();
    (num * num) / (den * den)
}

/// Result of [`cyclic_design`].
#[derive(Debug, Clone)]
pub struct CyclicDesign {
    /// The `n` shifted blocks, followed by any augmentation blocks.
    pub blocks: Vec<SuperArm>,
    /// Whether the plain cyclic blocks have a singular Gram matrix.
    pub base_singular: bool,
    /// Number of single-swap blocks appended to restore full rank.
    pub augmented: usize,
}

/// The blocks `{i, i+1, ..., i+k-1} mod n` for `i = 0..n`, augmented with
/// single-swap perturbations when their Gram matrix is singular (which
/// happens exactly when `gcd(n, k) > 1`).
pub fn cyclic_design(n: usize, k: usize) -> Result<CyclicDesign> {
    if k < 2 || k >= n {
        return Err(Error::InvalidArgument(format!(
            "cyclic design needs 2 <= k < n, got n = {n}, k = {k}"
        )));
    }
    let mut blocks: Vec<SuperArm> = (0..n)
        .map(|i| SuperArm::from_unsorted(n, (0..k).map(|m| (i + m) % n).collect()))
        .collect::<Result<_>>()?;
    let base_singular = (1..n).any(|j| circulant_eigenvalue(n, k, j) < 1e-9);
    let mut augmented = 0;
    let mut rank = support_rank(n, &blocks);
    if rank < n {
        let mut seen: BTreeSet<SuperArm> = blocks.iter().cloned().collect();
        let base = blocks.clone();
        'outer: for block in &base {
            for &out in block.indices() {
                for inn in (0..n).filter(|e| !block.contains(*e)) {
                    let mut idx: Vec<usize> = block
                        .indices()
                        .iter()
                        .copied()
                        .filter(|&e| e != out)
                        .collect();
                    idx.push(inn);
                    let cand = SuperArm::from_unsorted(n, idx)?;
                    if seen.contains(&cand) {
                        continue;
                    }
                    blocks.push(cand.clone());
                    let r = support_rank(n, &blocks);
                    if r > rank {
                        rank = r;
                        seen.insert(cand);
                        augmented += 1;
                        if rank == n {
                            break 'outer;
                        }
                    } else {
                        blocks.pop();
                    }
                }
            }
        }
    }
    Ok(CyclicDesign {
        blocks,
        base_singular,
        augmented,
    })
}

/// Default candidate support for a top-k class: the cyclic design plus
/// random k-subsets up to `3n` distinct candidates, or every k-subset when
/// there are fewer than `3n` of them.
pub fn default_candidates(n: usize, k: usize, seed: u64) -> Result<Vec<SuperArm>> {
    let target = 3 * n;
    if binomial(n, k) <= target as f64 {
        return Combinations::new(n, k)
            .map(|s| SuperArm::new(n, s))
            .collect();
    }
    let design = cyclic_design(n, k)?;
    let mut seen: BTreeSet<SuperArm> = BTreeSet::new();
    let mut out = Vec::with_capacity(target);
    for b in design.blocks {
        if seen.insert(b.clone()) {
            out.push(b);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while out.len() < target {
        let cand = SuperArm::from_unsorted(n, sample(&mut rng, n, k).into_vec())?;
        if seen.insert(cand.clone()) {
            out.push(cand);
        }
    }
    Ok(out)
}

/// Settings for [`g_allocation`].
#[derive(Debug, Clone, Copy)]
pub struct GOptions {
    pub iterations: usize,
    /// Probabilities below this are dropped before renormalizing.
    pub prune_below: f64,
}

impl Default for GOptions {
    fn default() -> Self {
        Self {
            iterations: 500,
            prune_below: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GAllocation {
    pub allocation: Allocation,
    /// Best objective `max_M ||chi_M||^2_{Lambda_p^{-1}}` seen after each
    /// iteration (entry 0 is the uniform start).
    pub objective_trace: Vec<f64>,
}

/// `max_{M in candidates} ||chi_M||^2_{Lambda_p^{-1}}` and its argmax.
fn max_norm(n: usize, candidates: &[SuperArm], probs: &[f64]) -> Result<(f64, usize)> {
    let inv = invert_spd(&weighted_gram(n, candidates, probs), n)?;
    let mut best = (f64::NEG_INFINITY, 0);
    for (pos, m) in candidates.iter().enumerate() {
        let v = subset_quad(&inv, n, m.indices());
        if v > best.0 {
            best = (v, pos);
        }
    }
    Ok(best)
}

/// Approximate G-optimal allocation over `candidates`.
///
/// Frank-Wolfe on the relaxed design problem: each step moves mass toward
/// the candidate with the largest `||chi_M||_{Lambda_p^{-1}}`, with step
/// `2 / (i + s + 2)` where `s` is the number of candidates (the uniform
/// start stands in for the first `s` iterations). The best iterate is kept,
/// so the reported objective never increases.
pub fn g_allocation(
    dc: &DecisionClass,
    candidates: &[SuperArm],
    opts: GOptions,
) -> Result<GAllocation> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("empty candidate support".into()));
    }
    let n = dc.n();
    if let Some(bad) = candidates.iter().find(|m| !dc.is_feasible(m)) {
        return Err(Error::InvalidArgument(format!(
            "candidate {bad} is not feasible"
        )));
    }
    let rank = support_rank(n, candidates);
    if rank < n {
        return Err(Error::NonIdentifiable { rank, n });
    }
    let s = candidates.len();
    let mut probs = vec![1.0 / s as f64; s];
    let (mut best_obj, mut argmax) = max_norm(n, candidates, &probs)?;
    let mut best = probs.clone();
    let mut trace = vec![best_obj];
    for it in 0..opts.iterations {
        let step = 2.0 / (it + s + 2) as f64;
        for p in probs.iter_mut() {
            *p *= 1.0 - step;
        }
        probs[argmax] += step;
        let (obj, next) = max_norm(n, candidates, &probs)?;
        argmax = next;
        if obj < best_obj * (1.0 - 1e-12) {
            best_obj = obj;
            best = probs.clone();
        }
        trace.push(best_obj);
    }

    let kept: Vec<usize> = (0..s).filter(|&i| best[i] >= opts.prune_below).collect();
    let pruned_support: Vec<SuperArm> = kept.iter().map(|&i| candidates[i].clone()).collect();
    let allocation = if support_rank(n, &pruned_support) == n {
        let total: f64 = kept.iter().map(|&i| best[i]).sum();
        Allocation::new(
            pruned_support,
            kept.iter().map(|&i| best[i] / total).collect(),
        )?
    } else {
        Allocation::new(candidates.to_vec(), best)?
    };
    Ok(GAllocation {
        allocation,
        objective_trace: trace,
    })
}

/// Efficient apportionment of `t` pulls: start from
/// `ceil((t - s/2) p_i)` and fix up one unit at a time (increment the argmin
/// of `t_i / p_i`, or decrement the argmax of `(t_i - 1) / p_i`; ties go to
/// the lowest index) until the counts sum to `t`.
pub fn round_allocation(p: &Allocation, t: u64) -> Result<Vec<u64>> {
    let s = p.len();
    if t < s as u64 {
        return Err(Error::InvalidArgument(format!(
            "cannot apportion {t} pulls over a support of {s}"
        )));
    }
    let scale = t as f64 - 0.5 * s as f64;
    let mut counts: Vec<u64> = p
        .probs()
        .iter()
        .map(|&pi| (scale * pi - 1e-9).ceil().max(0.0) as u64)
        .collect();
    let mut total: u64 = counts.iter().sum();
    while total < t {
        let j = argmin_by(p.probs(), |i, pi| counts[i] as f64 / pi);
        counts[j] += 1;
        total += 1;
    }
    while total > t {
        let j = argmax_by(p.probs(), |i, pi| {
            if counts[i] == 0 {
                f64::NEG_INFINITY
            } else {
                (counts[i] - 1) as f64 / pi
            }
        });
        counts[j] -= 1;
        total -= 1;
    }
    Ok(counts)
}

fn argmin_by(probs: &[f64], f: impl Fn(usize, f64) -> f64) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (i, &pi) in probs.iter().enumerate() {
        let v = f(i, pi);
        if v < best.0 {
            best = (v, i);
        }
    }
    best.1
}

fn argmax_by(probs: &[f64], f: impl Fn(usize, f64) -> f64) -> usize {
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, &pi) in probs.iter().enumerate() {
        let v = f(i, pi);
        if v > best.0 {
            best = (v, i);
        }
    }
    best.1
}

/// Tracking rule: the support position minimizing `T_M / p_M`, ties to the
/// lowest position. `counts` is aligned with the support.
pub fn next_pull(p: &Allocation, counts: &[u64]) -> usize {
    argmin_by(p.probs(), |i, pi| counts[i] as f64 / pi)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityReport {
    /// `max_M ||chi_M||^2_{Lambda_p^{-1}}`.
    pub rho: f64,
    /// `(max_{M,M'} sum_i |chi_M(i) - chi_M'(i)| sqrt(Lambda_p^{-1}(i,i)))^2`.
    pub rho_prime: f64,
    pub h_eps: f64,
    pub h_eps_prime: f64,
    pub delta_min: f64,
    /// False when a maximum was taken over a subset of the class, in which
    /// case the values are lower bounds.
    pub exact: bool,
}

/// Complexity terms of allocation `p` on instance `theta`.
pub fn complexity_report(
    p: &Allocation,
    theta: &ThetaVector,
    dc: &DecisionClass,
    eps: f64,
) -> Result<ComplexityReport> {
    let n = dc.n();
    if p.n() != n || theta.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: p.n(),
        });
    }
    let inv = invert_spd(&p.design_matrix(), n)?;
    let diag: Vec<f64> = (0..n).map(|i| inv[i * n + i].max(0.0).sqrt()).collect();

    let enumerated = dc.enumerate(ENUMERATION_BUDGET).ok();
    let pool: &[SuperArm] = enumerated.as_deref().unwrap_or(p.support());
    let mut exact = enumerated.is_some();
    let rho = pool
        .iter()
        .map(|m| subset_quad(&inv, n, m.indices()))
        .fold(0.0f64, f64::max);

    let rho_prime_root = if dc.is_top_k() {
        // Any 2j arms can form the symmetric difference, j <= min(k, n - k).
        let j = dc.size().min(n - dc.size());
        let mut d = diag.clone();
        d.sort_by(|a, b| b.total_cmp(a));
        d[..2 * j].iter().sum::<f64>()
    } else {
        let pairs_pool: &[SuperArm] = match &enumerated {
            Some(all) if (all.len() as f64).powi(2) <= ENUMERATION_BUDGET => all,
            _ => {
                exact = false;
                p.support()
            }
        };
        let mut best = 0.0f64;
        for a in pairs_pool {
            for b in pairs_pool {
                let v: f64 = (0..n)
                    .filter(|&i| a.contains(i) != b.contains(i))
                    .map(|i| diag[i])
                    .sum();
                best = best.max(v);
            }
        }
        best
    };
    let rho_prime = rho_prime_root * rho_prime_root;
    let delta_min = gap_report(theta, dc)?.delta_min;
    let denom = (delta_min + eps).powi(2);
    Ok(ComplexityReport {
        rho,
        rho_prime,
        h_eps: rho / denom,
        h_eps_prime: rho_prime / denom,
        delta_min,
        exact,
    })
}
