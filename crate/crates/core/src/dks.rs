//! 0-1 quadratic maximization `max chi^T W chi` s.t. `|chi| = k`.
//!
//! The matrix is turned into a complete graph with edge weights
//! `w~_ij = w_ij + w_ii + w_jj`, which is nonnegative whenever `W` is
//! positive definite, and handed to a densest-k-subgraph oracle. For PD `W`
//! the result carries an approximation certificate
//! `(1 / (k - 1)) * (lambda_min / lambda_max) * alpha_dks`.

use std::fmt;

use crate::combin::{binomial, Combinations};
use crate::error::{Error, Result};
use crate::linalg::{
    extreme_eigenvalues_with, subset_quad, PowerIteration, SpectralSummary, WarmStart,
};
use crate::model::SuperArm;

/// Complete undirected graph with symmetric nonnegative edge weights and no
/// self-loops.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    n: usize,
    weights: Vec<f64>,
}

impl WeightedGraph {
    /// Graph on `n` vertices with all weights zero.
    pub fn new(n: usize) -> Self {
        Self {
            n,
            weights: vec![0.0; n * n],
        }
    }

    /// Build from `(i, j, weight)` triples. Repeated edges accumulate.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut g = Self::new(n);
        for &(i, j, w) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidArgument(format!(
                    "edge ({i},{j}) out of range for {n} vertices"
                )));
            }
            if i == j {
                return Err(Error::InvalidArgument(format!("self-loop at vertex {i}")));
            }
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "edge ({i},{j}) has invalid weight {w}"
                )));
            }
            g.weights[i * n + j] += w;
            g.weights[j * n + i] += w;
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n + j]
    }

    /// `w(S)`: total weight of edges inside `set`.
    pub fn subset_weight(&self, set: &[usize]) -> f64 {
        let mut s = 0.0;
        for (pos, &i) in set.iter().enumerate() {
            for &j in &set[pos + 1..] {
                s += self.weights[i * self.n + j];
            }
        }
        s
    }
}

/// Output of [`build_reduction_graph`].
#[derive(Debug, Clone)]
pub struct Reduction {
    pub graph: WeightedGraph,
    /// Edges whose raw weight was negative and got clamped to zero. Always
    /// zero for positive definite input.
    pub clamped: usize,
}

/// `w~_ij = w_ij + w_ii + w_jj` on the complete graph, negatives clamped.
pub fn build_reduction_graph(w: &[f64], n: usize) -> Result<Reduction> {
    if w.len() != n * n {
        return Err(Error::DimensionMismatch {
            expected: n * n,
            got: w.len(),
        });
    }
    let mut graph = WeightedGraph::new(n);
    let mut clamped = 0;
    for i in 0..n {
        for j in i + 1..n {
            let raw = 0.5 * (w[i * n + j] + w[j * n + i]) + w[i * n + i] + w[j * n + j];
            let v = if raw < 0.0 {
                clamped += 1;
                0.0
            } else {
                raw
            };
            graph.weights[i * n + j] = v;
            graph.weights[j * n + i] = v;
        }
    }
    Ok(Reduction { graph, clamped })
}

/// A densest-k-subgraph approximation algorithm.
pub trait DksOracle: fmt::Debug + Send + Sync {
    /// A vertex set of size exactly `k`.
    fn densest(&self, graph: &WeightedGraph, k: usize) -> Result<SuperArm>;

    /// Declared worst-case approximation ratio on graphs with `n` vertices.
    fn guarantee(&self, n: usize, k: usize) -> f64;
}

/// Greedy peeling: repeatedly delete a vertex of minimum weighted degree.
#[derive(Debug, Clone, Copy, Default)]
pub struct GreedyPeeling;

impl DksOracle for GreedyPeeling {
    fn densest(&self, graph: &WeightedGraph, k: usize) -> Result<SuperArm> {
        greedy_peeling(graph, k)
    }

    /// Deleting a minimum-degree vertex from a set of size m keeps at least
    /// a (m - 2) / m fraction of its weight, so peeling from n down to k
    /// keeps `k(k-1) / (n(n-1))` of `w(V) >= OPT`.
    fn guarantee(&self, n: usize, k: usize) -> f64 {
        if n < 2 || k >= n {
            return 1.0;
        }
        (k * (k - 1)) as f64 / (n * (n - 1)) as f64
    }
}

/// Exact densest-k-subgraph by enumeration, for small instances and tests.
#[derive(Debug, Clone, Copy)]
pub struct ExactDks {
    pub budget: f64,
}

impl Default for ExactDks {
    fn default() -> Self {
        Self { budget: 1e6 }
    }
}

impl DksOracle for ExactDks {
    fn densest(&self, graph: &WeightedGraph, k: usize) -> Result<SuperArm> {
        let n = graph.n();
        check_k(n, k)?;
        let count = binomial(n, k);
        if count > self.budget {
            return Err(Error::BudgetExceeded {
                count,
                budget: self.budget,
            });
        }
        let mut best: Option<(Vec<usize>, f64)> = None;
        for set in Combinations::new(n, k) {
            let v = graph.subset_weight(&set);
            if best.as_ref().map_or(true, |(_, bv)| v > *bv) {
                best = Some((set, v));
            }
        }
        SuperArm::new(n, best.map(|b| b.0).unwrap_or_default())
    }

    fn guarantee(&self, _n: usize, _k: usize) -> f64 {
        1.0
    }
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "k = {k} out of range 1..={n}"
        )));
    }
    Ok(())
}

/// Peel minimum weighted-degree vertices until `k` remain. Among tied
/// minimum-degree vertices the largest index is peeled, so the smallest
/// indices survive. O(n^2).
pub fn greedy_peeling(graph: &WeightedGraph, k: usize) -> Result<SuperArm> {
    let n = graph.n();
    check_k(n, k)?;
    let mut degree: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| graph.weight(i, j)).sum())
        .collect();
    let mut alive = vec![true; n];
    for _ in 0..n - k {
        let mut victim = usize::MAX;
        for v in 0..n {
            if alive[v] && (victim == usize::MAX || degree[v] <= degree[victim]) {
                victim = v;
            }
        }
        alive[victim] = false;
        for u in 0..n {
            if alive[u] {
                degree[u] -= graph.weight(u, victim);
            }
        }
    }
    SuperArm::new(n, (0..n).filter(|&v| alive[v]).collect())
}

/// `chi_S^T W chi_S` restricted to a subset.
pub fn qp_value(w: &[f64], n: usize, set: &[usize]) -> f64 {
    subset_quad(w, n, set)
}

/// Weight of `S` in the graph of `W` with self-loops:
/// `sum_{i<j in S} w_ij + sum_{i in S} w_ii`.
pub fn induced_weight(w: &[f64], n: usize, set: &[usize]) -> f64 {
    let mut s = 0.0;
    for (pos, &i) in set.iter().enumerate() {
        s += w[i * n + i];
        for &j in &set[pos + 1..] {
            s += w[i * n + j];
        }
    }
    s
}

/// `(1 / (k - 1)) * (lambda_min / lambda_max) * alpha_dks`.
pub fn qp_certificate(k: usize, lambda_min: f64, lambda_max: f64, alpha_dks: f64) -> f64 {
    (lambda_min / lambda_max) * alpha_dks / (k - 1) as f64
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub subset: SuperArm,
    pub qp_value: f64,
    /// Certified approximation ratio, present when `W` was verified PD.
    pub certificate: Option<f64>,
    pub spectrum: Option<SpectralSummary>,
}

/// Approximate QP on a positive definite `W` with a certificate.
pub fn quadratic_maximize(
    w: &[f64],
    n: usize,
    k: usize,
    oracle: &dyn DksOracle,
) -> Result<QpSolution> {
    quadratic_maximize_warm(w, n, k, oracle, &mut WarmStart::default())
}

/// As [`quadratic_maximize`], reusing eigenvectors across calls.
pub fn quadratic_maximize_warm(
    w: &[f64],
    n: usize,
    k: usize,
    oracle: &dyn DksOracle,
    warm: &mut WarmStart,
) -> Result<QpSolution> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "QP certificate needs k >= 2, got {k}"
        )));
    }
    check_k(n, k)?;
    let spectrum = extreme_eigenvalues_with(w, n, PowerIteration::relaxed(), warm)?;
    let (lo, hi) = spectrum.conservative_bounds();
    if !(lo > 0.0) {
        return Err(Error::NotPositiveDefinite { lambda_min: lo });
    }
    let reduction = build_reduction_graph(w, n)?;
    let subset = oracle.densest(&reduction.graph, k)?;
    let value = qp_value(w, n, subset.indices());
    Ok(QpSolution {
        qp_value: value,
        certificate: Some(qp_certificate(k, lo, hi, oracle.guarantee(n, k))),
        spectrum: Some(spectrum),
        subset,
    })
}

/// Run the reduction and oracle on an arbitrary symmetric matrix, without
/// the positive definiteness check or certificate. Returns the subset and
/// the number of clamped edges.
pub fn quadratic_maximize_unchecked(
    w: &[f64],
    n: usize,
    k: usize,
    oracle: &dyn DksOracle,
) -> Result<(SuperArm, usize)> {
    check_k(n, k)?;
    let reduction = build_reduction_graph(w, n)?;
    Ok((oracle.densest(&reduction.graph, k)?, reduction.clamped))
}

/// Exact QP by enumerating all `C(n, k)` subsets (first maximizer in
/// lexicographic order).
pub fn brute_force_qp(w: &[f64], n: usize, k: usize, budget: f64) -> Result<QpSolution> {
    check_k(n, k)?;
    if w.len() != n * n {
        return Err(Error::DimensionMismatch {
            expected: n * n,
            got: w.len(),
        });
    }
    let count = binomial(n, k);
    if count > budget {
        return Err(Error::BudgetExceeded { count, budget });
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    for set in Combinations::new(n, k) {
        let v = qp_value(w, n, &set);
        if best.as_ref().map_or(true, |(_, bv)| v > *bv) {
            best = Some((set, v));
        }
    }
    let (set, value) = best.expect("k <= n yields at least one subset");
    Ok(QpSolution {
        subset: SuperArm::new(n, set)?,
        qp_value: value,
        certificate: Some(1.0),
        spectrum: None,
    })
}
