//! The per-frame binary program and its exact solver.
//!
//! ```text
//! min  Φᵀ Λ   over Λ ∈ {0,1}^J
//! (a)  Σ_n a[n][d] ≤ 1                 for every candidate d
//! (b)  a[n][fake] + Σ_d a[n][d] = 1    for every target n
//! (c)  a[n][d] = 0                     when types differ
//! (d)  s[d][e] ≤ Σ_n a[n][d],  s[d][e] ≤ Σ_n a[n][e]
//! ```
//!
//! [`branch_and_bound`] solves it through LP relaxations computed by the
//! bounded-variable simplex in [`simplex`]; [`exhaustive_oracle`] enumerates
//! target assignments directly and is used to cross-check the solver.

mod bnb;
mod feasibility;
mod oracle;
mod problem;
pub mod simplex;

pub use bnb::{branch_and_bound, lp_relax_solve, BoundPoint, Relaxation, INTEGRALITY_TOLERANCE};
pub use feasibility::{check_feasible, FeasibilityReport, Violation};
pub use oracle::{exhaustive_oracle, ORACLE_LIMIT};
pub use problem::{build_problem, AssignmentProblem, ConstraintKind, CostInputs, Row, Sense, Solution};

#[cfg(test)]
pub(crate) mod testing;
