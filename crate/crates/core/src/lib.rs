//! Combinatorial pure exploration with full-bandit feedback.
//!
//! The agent pulls size-k super-arms (or matroid bases) and observes only the
//! sum of the pulled arms' rewards. The goal is to identify an
//! epsilon-optimal super-arm with probability at least `1 - delta`.
//!
//! Modules:
//! - [`model`]: super-arms, decision classes, gaps.
//! - [`linalg`]: design matrix, rank-1 inverse maintenance, power iteration.
//! - [`dks`]: 0-1 quadratic maximization through a densest-k-subgraph oracle.
//! - [`allocation`]: static allocations, rounding, tracking, complexity terms.
//! - [`identification`]: SAQM, SA-FOA, ICB and the exhaustive baseline.
//! - [`env`]: synthetic and crowdsourcing reward environments.

pub mod allocation;
pub mod combin;
pub mod dks;
pub mod env;
pub mod error;
pub mod identification;
pub mod linalg;
pub mod model;

pub use error::{Error, Result};
pub use model::{
    best_super_arm, gap_report, linear_maximize, DecisionClass, GapReport, SuperArm, ThetaVector,
};
