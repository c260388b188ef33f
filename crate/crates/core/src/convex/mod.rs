//! Small-scale convex solvers: dense simplex for linear programs, a
//! log-barrier Newton method for smooth convex programs, and a bisection
//! helper for monotone integer searches.

mod barrier;
mod bisect;
pub mod linalg;
mod lp;

pub use barrier::{
    solve_barrier, BarrierOptions, ConstraintSink, HessianLayout, SmoothConvexProgram,
};
pub use bisect::{bisect_max_feasible, BisectOutcome};
pub use lp::{solve_lp, solve_lp_with_duals, LinearProgram};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIters,
}

/// Result of a solver call.
#[derive(Clone, Debug, PartialEq)]
pub struct SolveOutcome {
    pub x: Vec<f64>,
    pub objective: f64,
    pub status: SolveStatus,
    pub iterations: usize,
    /// Duality-gap estimate (`m / t` for the barrier method, 0 for simplex).
    pub gap: f64,
}

impl SolveOutcome {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}
