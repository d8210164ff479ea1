//! Arms, super-arms, decision classes and gaps.
//!
//! A decision class is either the top-k class (all size-k subsets of `n`
//! arms) or the bases of a matroid given by an independence oracle. Both
//! support exact linear maximization, optionally excluding one super-arm,
//! which is all the identification algorithms need from them.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use crate::combin::{binomial, ln_binomial, Combinations};
use crate::error::{Error, Result};

/// A feasible set of single arms, stored as a strictly increasing index list.
///
/// Equality, hashing and ordering look at the index list only; ordering is
/// lexicographic, which is the tie-break used throughout the crate.
#[derive(Debug, Clone)]
pub struct SuperArm {
    indices: Vec<usize>,
    n: usize,
}

impl SuperArm {
    /// Build from an already sorted, duplicate-free index list.
    pub fn new(n: usize, indices: Vec<usize>) -> Result<Self> {
        for w in indices.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::InvalidSuperArm(format!(
                    "indices must be strictly increasing, got {indices:?}"
                )));
            }
        }
        if let Some(&last) = indices.last() {
            if last >= n {
                return Err(Error::InvalidSuperArm(format!(
                    "index {last} out of range for n = {n}"
                )));
            }
        }
        Ok(Self { indices, n })
    }

    /// Build from an arbitrary index list; sorts and rejects duplicates.
    pub fn from_unsorted(n: usize, mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        Self::new(n, indices)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, e: usize) -> bool {
        self.indices.binary_search(&e).is_ok()
    }

    /// The 0/1 indicator vector of length `n`.
    pub fn indicator(&self) -> Vec<f64> {
        let mut chi = vec![0.0; self.n];
        for &i in &self.indices {
            chi[i] = 1.0;
        }
        chi
    }

    /// `sum_{e in M} weights[e]`.
    pub fn value(&self, weights: &[f64]) -> f64 {
        self.indices.iter().map(|&i| weights[i]).sum()
    }

    /// Space-separated index list, safe to embed in a CSV field.
    pub fn label(&self) -> String {
        self.indices
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl PartialEq for SuperArm {
    fn eq(&self, other: &Self) -> bool {
        self.indices == other.indices
    }
}

impl Eq for SuperArm {}

impl Hash for SuperArm {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.indices.hash(state);
    }
}

impl PartialOrd for SuperArm {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SuperArm {
    fn cmp(&self, other: &Self) -> Ordering {
        self.indices.cmp(&other.indices)
    }
}

impl fmt::Display for SuperArm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (pos, i) in self.indices.iter().enumerate() {
            if pos > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

/// Expected rewards of the single arms.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaVector(Vec<f64>);

impl ThetaVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("theta[{pos}] = {}", values[pos])));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn n(&self) -> usize {
        self.0.len()
    }

    /// `theta(M)`.
    pub fn reward(&self, arm: &SuperArm) -> f64 {
        arm.value(&self.0)
    }
}

/// Independence oracle of a matroid over the ground set `0..n`.
///
/// Sets are passed as sorted index slices.
pub trait IndependenceOracle: fmt::Debug + Send + Sync {
    fn is_independent(&self, set: &[usize]) -> bool;
}

/// `U(k, n)`: every set of size at most `k` is independent.
#[derive(Debug, Clone)]
pub struct UniformMatroid {
    pub k: usize,
}

impl IndependenceOracle for UniformMatroid {
    fn is_independent(&self, set: &[usize]) -> bool {
        set.len() <= self.k
    }
}

/// Partition matroid: element `e` belongs to block `block_of[e]`, and an
/// independent set takes at most `capacity[b]` elements from block `b`.
#[derive(Debug, Clone)]
pub struct PartitionMatroid {
    pub block_of: Vec<usize>,
    pub capacity: Vec<usize>,
}

impl IndependenceOracle for PartitionMatroid {
    fn is_independent(&self, set: &[usize]) -> bool {
        let mut used = vec![0usize; self.capacity.len()];
        for &e in set {
            let b = self.block_of[e];
            used[b] += 1;
            if used[b] > self.capacity[b] {
                return false;
            }
        }
        true
    }
}

#[derive(Debug, Clone)]
enum ClassKind {
    TopK,
    Matroid(Arc<dyn IndependenceOracle>),
}

/// The family of feasible super-arms.
#[derive(Debug, Clone)]
pub struct DecisionClass {
    n: usize,
    size: usize,
    log_cardinality: f64,
    kind: ClassKind,
}

/// Matroids with at most this many size-r candidate sets have their basis
/// count enumerated exactly; larger ones use `ln C(n, r)` as an upper bound.
const MATROID_COUNT_LIMIT: f64 = 1e5;

impl DecisionClass {
    /// All size-k subsets of `n` arms. Requires `2 <= k <= n`.
    pub fn top_k(n: usize, k: usize) -> Result<Self> {
        if k < 2 || k > n {
            return Err(Error::InvalidDecisionClass(format!(
                "top-k requires 2 <= k <= n, got n = {n}, k = {k}"
            )));
        }
        Ok(Self {
            n,
            size: k,
            log_cardinality: ln_binomial(n, k),
            kind: ClassKind::TopK,
        })
    }

    /// Bases of the matroid described by `oracle` over ground set `0..n`.
    pub fn matroid(n: usize, oracle: Arc<dyn IndependenceOracle>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDecisionClass("empty ground set".into()));
        }
        if !oracle.is_independent(&[]) {
            return Err(Error::InconsistentMatroid(
                "the empty set must be independent".into(),
            ));
        }
        // Rank = size of any greedy basis.
        let mut basis: Vec<usize> = Vec::new();
        for e in 0..n {
            basis.push(e);
            if !oracle.is_independent(&basis) {
                basis.pop();
            }
        }
        let rank = basis.len();
        if rank == 0 {
            return Err(Error::InvalidDecisionClass("matroid has rank 0".into()));
        }
        let log_cardinality = if binomial(n, rank) <= MATROID_COUNT_LIMIT {
            let count = Combinations::new(n, rank)
                .filter(|s| oracle.is_independent(s))
                .count();
            (count as f64).ln()
        } else {
            ln_binomial(n, rank)
        };
        Ok(Self {
            n,
            size: rank,
            log_cardinality,
            kind: ClassKind::Matroid(oracle),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Size of every feasible super-arm (`k` for top-k, the rank for matroids).
    pub fn size(&self) -> usize {
        self.size
    }

    /// `ln K`, exact for top-k and small matroids, an upper bound otherwise.
    pub fn log_cardinality(&self) -> f64 {
        self.log_cardinality
    }

    pub fn is_top_k(&self) -> bool {
        matches!(self.kind, ClassKind::TopK)
    }

    /// Whether `arm` is a member of the class.
    pub fn is_feasible(&self, arm: &SuperArm) -> bool {
        if arm.n() != self.n || arm.len() != self.size {
            return false;
        }
        match &self.kind {
            ClassKind::TopK => true,
            ClassKind::Matroid(oracle) => oracle.is_independent(arm.indices()),
        }
    }

    /// Every feasible super-arm in lexicographic order, provided the number
    /// of size-`size` candidate sets is at most `budget`.
    pub fn enumerate(&self, budget: f64) -> Result<Vec<SuperArm>> {
        let count = binomial(self.n, self.size);
        if count > budget {
            return Err(Error::BudgetExceeded { count, budget });
        }
        let mut out = Vec::with_capacity(count as usize);
        for set in Combinations::new(self.n, self.size) {
            let keep = match &self.kind {
                ClassKind::TopK => true,
                ClassKind::Matroid(oracle) => oracle.is_independent(&set),
            };
            if keep {
                out.push(SuperArm {
                    indices: set,
                    n: self.n,
                });
            }
        }
        Ok(out)
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: len,
            });
        }
        Ok(())
    }
}

/// Arms sorted by decreasing weight, ties by increasing index.
fn greedy_order(weights: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    order
}

fn unconstrained_max(weights: &[f64], dc: &DecisionClass) -> Result<SuperArm> {
    let order = greedy_order(weights);
    match &dc.kind {
        ClassKind::TopK => SuperArm::from_unsorted(dc.n, order[..dc.size].to_vec()),
        ClassKind::Matroid(oracle) => {
            let mut basis: Vec<usize> = Vec::with_capacity(dc.size);
            for e in order {
                let mut trial = basis.clone();
                let pos = trial.binary_search(&e).unwrap_err();
                trial.insert(pos, e);
                if oracle.is_independent(&trial) {
                    basis = trial;
                }
            }
            if basis.len() != dc.size {
                return Err(Error::InconsistentMatroid(format!(
                    "greedy basis has size {} but rank is {}",
                    basis.len(),
                    dc.size
                )));
            }
            // Hereditary spot check on the result.
            for skip in 0..basis.len() {
                let sub: Vec<usize> = basis
                    .iter()
                    .enumerate()
                    .filter(|&(p, _)| p != skip)
                    .map(|(_, &e)| e)
                    .collect();
                if !oracle.is_independent(&sub) {
                    return Err(Error::InconsistentMatroid(format!(
                        "accepted {basis:?} but rejected its subset {sub:?}"
                    )));
                }
            }
            SuperArm::new(dc.n, basis)
        }
    }
}

/// The best super-arm under `theta`: the k largest entries for top-k, the
/// greedy basis for matroids. Ties resolve to the lexicographically
/// smallest index set.
pub fn best_super_arm(theta: &ThetaVector, dc: &DecisionClass) -> Result<SuperArm> {
    dc.check_len(theta.n())?;
    unconstrained_max(theta.values(), dc)
}

/// Maximize `sum_{e in M} weights[e]` over the class, optionally excluding
/// one super-arm. Returns the maximizer and its value.
///
/// With an exclusion that hits the unconstrained optimum, the answer is the
/// best single exchange of the optimum (one element out, one in), which is
/// exact for any matroid, top-k included.
pub fn linear_maximize(
    weights: &[f64],
    dc: &DecisionClass,
    exclude: Option<&SuperArm>,
) -> Result<(SuperArm, f64)> {
    dc.check_len(weights.len())?;
    if let Some(pos) = weights.iter().position(|w| !w.is_finite()) {
        return Err(Error::NonFinite(format!(
            "weights[{pos}] = {}",
            weights[pos]
        )));
    }
    let best = unconstrained_max(weights, dc)?;
    let best_value = best.value(weights);
    match exclude {
        Some(ex) if *ex == best => best_exchange(weights, dc, &best, best_value),
        _ => Ok((best, best_value)),
    }
}

fn best_exchange(
    weights: &[f64],
    dc: &DecisionClass,
    base: &SuperArm,
    base_value: f64,
) -> Result<(SuperArm, f64)> {
    let mut found: Option<(SuperArm, f64)> = None;
    let outside: Vec<usize> = (0..dc.n).filter(|&e| !base.contains(e)).collect();
    for &out in base.indices() {
        for &inn in &outside {
            let mut set: Vec<usize> = base
                .indices()
                .iter()
                .copied()
                .filter(|&e| e != out)
                .collect();
            let pos = set.binary_search(&inn).unwrap_err();
            set.insert(pos, inn);
            if let ClassKind::Matroid(oracle) = &dc.kind {
                if !oracle.is_independent(&set) {
                    continue;
                }
            }
            let value = base_value - weights[out] + weights[inn];
            let better = match &found {
                None => true,
                Some((arm, v)) => value > *v || (value == *v && set < arm.indices),
            };
            if better {
                found = Some((
                    SuperArm {
                        indices: set,
                        n: dc.n,
                    },
                    value,
                ));
            }
        }
    }
    found.ok_or(Error::ExclusionImpossible)
}

/// Best super-arm and its minimum gap to every other feasible super-arm.
#[derive(Debug, Clone, PartialEq)]
pub struct GapReport {
    pub best: SuperArm,
    pub best_value: f64,
    pub runner_up: SuperArm,
    pub delta_min: f64,
}

impl GapReport {
    /// `theta(M) - theta(M')`.
    pub fn gap(theta: &ThetaVector, m: &SuperArm, other: &SuperArm) -> f64 {
        theta.reward(m) - theta.reward(other)
    }
}

pub fn gap_report(theta: &ThetaVector, dc: &DecisionClass) -> Result<GapReport> {
    dc.check_len(theta.n())?;
    if dc.log_cardinality < 2f64.ln() - 1e-12 {
        return Err(Error::InvalidArgument(
            "gap report needs at least two feasible super-arms".into(),
        ));
    }
    let best = best_super_arm(theta, dc)?;
    let best_value = theta.reward(&best);
    let (runner_up, second) = linear_maximize(theta.values(), dc, Some(&best))?;
    Ok(GapReport {
        best,
        best_value,
        runner_up,
        delta_min: best_value - second,
    })
}

/// Exhaustively check the three matroid axioms on every subset of a ground
/// set with at most 16 elements. Returns a description of the first
/// violation found.
pub fn verify_matroid_axioms(
    n: usize,
    oracle: &dyn IndependenceOracle,
) -> std::result::Result<(), String> {
    assert!(n <= 16, "exhaustive axiom check limited to n <= 16");
    let subsets = 1usize << n;
    let members = |mask: usize| -> Vec<usize> { (0..n).filter(|&e| mask >> e & 1 == 1).collect() };
    let indep: Vec<bool> = (0..subsets)
        .map(|m| oracle.is_independent(&members(m)))
        .collect();
    if !indep[0] {
        return Err("empty set is dependent".into());
    }
    for y in 0..subsets {
        if !indep[y] {
            continue;
        }
        for e in 0..n {
            if y >> e & 1 == 1 && !indep[y & !(1 << e)] {
                return Err(format!(
                    "{:?} independent but subset without {e} is not",
                    members(y)
                ));
            }
        }
    }
    for x in 0..subsets {
        if !indep[x] {
            continue;
        }
        for y in 0..subsets {
            if !indep[y] || y.count_ones() <= x.count_ones() {
                continue;
            }
            let extendable =
                (0..n).any(|e| y >> e & 1 == 1 && x >> e & 1 == 0 && indep[x | 1 << e]);
            if !extendable {
                return Err(format!(
                    "exchange fails for X = {:?}, Y = {:?}",
                    members(x),
                    members(y)
                ));
            }
        }
    }
    Ok(())
}
