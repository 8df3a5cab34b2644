//! Linear programming: a small modelling layer, a deterministic simplex and
//! the per-iteration subproblem of the DCA loop.

mod problem;
mod simplex;
mod subproblem;

pub use problem::{LinearProgram, RowKind};
pub use simplex::{solve, LpSolution};
pub use subproblem::{build_lp, solve_lp, solve_lp_direct, LpOutcome, LpSubproblem};
