//! Solvers for [`PackingInstance`]s.
//!
//! [`solve_exact`] is a depth-first branch-and-bound seeded by
//! [`solve_heuristic`]. [`brute_force`] enumerates every packing of tiny
//! instances and exists to check the other two.

mod bound;
mod brute;
mod exact;
mod heuristic;

use std::time::Duration;

use thiserror::Error;

pub use bound::lower_bound;
pub use brute::{brute_force, BRUTE_FORCE_MAX_CHOICES, BRUTE_FORCE_MAX_ITEMS};
pub use exact::solve_exact;
pub use heuristic::solve_heuristic;

use crate::packing::{PackingInstance, Solution};

#[derive(Debug, Error, PartialEq)]
pub enum SolveError {
    #[error("item `{0}` fits no bin type with any of its choices")]
    Infeasible(String),
    #[error("search limits exhausted before any feasible solution was found")]
    ResourceExhausted,
    #[error("instance too large for exhaustive enumeration: {0}")]
    TooLarge(String),
    #[error("solver produced a solution that failed verification")]
    Unverified,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverLimits {
    pub max_nodes: u64,
    pub time_budget: Duration,
    /// When set, hitting a limit is an error instead of returning the
    /// incumbent with `optimal = false`.
    pub optimality_required: bool,
}

impl Default for SolverLimits {
    fn default() -> Self {
        SolverLimits {
            max_nodes: 10_000_000,
            time_budget: Duration::from_secs(60),
            optimality_required: false,
        }
    }
}

fn checked(inst: &PackingInstance, sol: Solution) -> Result<Solution, SolveError> {
    if crate::packing::verify(inst, &sol) {
        Ok(sol)
    } else {
        Err(SolveError::Unverified)
    }
}
