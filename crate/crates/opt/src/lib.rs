//! Self-contained linear and mixed-integer linear optimization kernel.
//!
//! Programs are built with [`LinearProgram`] (continuous variables with
//! bounds, sparse rows) and optionally wrapped into a
//! [`MixedIntegerProgram`] that flags some variables as binary.
//!
//! * [`solve_lp`] runs a two-phase bounded primal simplex on a dense
//!   tableau. Pricing is Dantzig's rule; after a run of degenerate pivots
//!   the solver switches to Bland's smallest-index rule until progress
//!   resumes, so it never cycles and always lands on the same basis for
//!   the same input.
//! * [`solve_milp`] is best-first branch-and-bound over LP relaxations,
//!   branching on the most fractional binary.
//! * [`write_lp`] renders any program in a human-readable LP text format.

mod format;
mod milp;
mod model;
mod simplex;

pub use format::write_lp;
pub use milp::{solve_milp, MilpOptions};
pub use model::{Constraint, LinearProgram, MixedIntegerProgram, ModelError, Sense, VarId, Variable};
pub use simplex::{solve_lp, solve_lp_with, SimplexOptions};

/// Absolute, row-scaled feasibility tolerance used when certifying solutions.
pub const FEASIBILITY_TOL: f64 = 1e-6;
/// Distance from {0, 1} within which a binary counts as integral.
pub const INTEGRALITY_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Branch-and-bound stopped at its node budget. `values` holds the best
    /// incumbent when one was found and is empty otherwise.
    NodeLimit,
    /// The simplex hit a pivot below the breakdown threshold, exceeded its
    /// iteration budget, or produced a point that failed certification.
    NumericalFailure,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Objective value including the program's constant offset.
    pub objective: f64,
    /// One entry per variable, indexed by [`VarId`].
    pub values: Vec<f64>,
    /// Relative optimality gap (MIP only; 0 for pure LPs).
    pub gap: f64,
    pub iterations: usize,
    pub nodes: usize,
}

impl SolveResult {
    pub(crate) fn failed(status: SolveStatus, iterations: usize) -> Self {
        SolveResult {
            status,
            objective: f64::NAN,
            values: Vec::new(),
            gap: f64::INFINITY,
            iterations,
            nodes: 0,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    /// True when `values` holds a usable point (optimal or an incumbent).
    pub fn has_solution(&self) -> bool {
        !self.values.is_empty()
    }

    pub fn value(&self, var: VarId) -> f64 {
        self.values[var.0]
    }
}
