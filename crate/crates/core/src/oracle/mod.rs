//! Ground-truth solvers and KKT certificates for desk-scale problems.
//!
//! Everything here works on the centralised ("stacked") form of a problem
//! and shares no code with the iteration, so it can be used to check it.

mod active_set;
mod kkt;
mod lp;
mod stacked;

pub use active_set::{solve_active_set, OracleSolution, MAX_INEQUALITY_ROWS};
pub use kkt::{kkt_check, kkt_check_from_mu, KktReport};
pub use lp::{consensus_lp, solve_lp_vertex, SmallLp, MAX_LP_DIM, MAX_LP_ROWS};
pub use stacked::StackedProblem;

use nalgebra::DVector;

use crate::error::Result;
use crate::problem::ProblemGraph;

/// Picks the oracle suited to the objectives: vertex enumeration when every
/// node is linear, active-set enumeration otherwise.
pub fn reference_solution(problem: &ProblemGraph) -> Result<Vec<DVector<f64>>> {
    if problem.nodes().iter().all(|n| !n.objective.is_quadratic()) {
        solve_lp_vertex(problem)
    } else {
        Ok(solve_active_set(problem)?.x)
    }
}
