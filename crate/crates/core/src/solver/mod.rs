//! Dense interior-point solvers: a primal-dual SDP solver, a convex QP solver
//! and an exact 2D concave-quadratic maximizer.

mod box2d;
mod qp;
mod sdp;

pub use box2d::{max_concave_quadratic_2d, Rect};
pub use qp::{solve_qp, QpProblem, QpSolution};
pub use sdp::{solve_sdp, LinearConstraint, LinearFunctional, LmiConstraint, Relation, SdpProblem, SdpSolution};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIter,
}

/// One interior-point iteration, in the units of the caller's problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterStats<T> {
    pub primal_objective: T,
    pub dual_objective: T,
    /// Complementarity `⟨X, S⟩` (SDP) or `sᵀz` (QP).
    pub gap: T,
    pub primal_residual: T,
    pub dual_residual: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport<T> {
    pub status: SolveStatus,
    pub objective: T,
    pub dual_objective: T,
    pub primal_residual: T,
    pub dual_residual: T,
    pub gap: T,
    pub iterations: usize,
    pub history: Vec<IterStats<T>>,
}

impl<T> SolveReport<T> {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}
