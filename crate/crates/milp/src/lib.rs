//! Small exact MILP kernel: a bounded dense-tableau simplex for LP
//! relaxations, best-bound branch-and-bound over binaries, and an LP-format
//! file bridge for handing larger models to an external solver.
//!
//! All tolerances are absolute; the intended data (kW, kWh, EUR) are O(1) to
//! O(100).

mod bnb;
pub mod error;
pub mod lpfile;
mod model;
mod simplex;

pub use error::MilpError;
pub use lpfile::{read_solution_file, write_lp, write_lp_file};
pub use model::{ConstrId, Constraint, LinExpr, Model, Relation, VarId, VarKind, Variable};

pub const FEAS_TOL: f64 = 1e-6;
pub const INT_TOL: f64 = 1e-6;
pub const OPT_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    NodeLimit,
}

#[derive(Clone, Debug)]
pub struct SolverOptions {
    pub feas_tol: f64,
    pub int_tol: f64,
    pub opt_tol: f64,
    /// Largest binary count accepted by [`solve_milp`].
    pub max_binaries: usize,
    /// Pivot guard per LP solve; `None` derives one from the problem size.
    pub max_lp_iterations: Option<usize>,
    /// Stop once `(incumbent - bound) <= rel_gap * max(1, |incumbent|)`.
    /// Zero asks for proven optimality.
    pub rel_gap: f64,
    /// Run an LP dive from the root (and from every `dive_every`-th node
    /// while no incumbent exists) to find early incumbents.
    pub diving: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            feas_tol: FEAS_TOL,
            int_tol: INT_TOL,
            opt_tol: OPT_TOL,
            max_binaries: 200,
            max_lp_iterations: None,
            rel_gap: 0.0,
            diving: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub status: Status,
    /// One entry per model variable; empty when no point is available.
    pub values: Vec<f64>,
    pub objective: f64,
    pub nodes: usize,
    pub lp_iterations: usize,
    /// Objective of every improving incumbent, in discovery order.
    pub incumbent_trace: Vec<f64>,
    /// Lowest bound still open when the search stopped (equals the
    /// objective when proven optimal).
    pub best_bound: f64,
}

impl Solution {
    pub fn value(&self, var: VarId) -> f64 {
        self.values[var.index()]
    }

    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }
}

/// Solves the LP relaxation of `model` (binaries relaxed to their bounds).
pub fn solve_lp(model: &Model, opts: &SolverOptions) -> Result<Solution, MilpError> {
    let lo: Vec<f64> = model.vars().iter().map(|v| v.lo).collect();
    let hi: Vec<f64> = model.vars().iter().map(|v| v.hi).collect();
    let out = simplex::solve_bounded(model, &lo, &hi, opts.feas_tol, opts.max_lp_iterations)?;
    let status = match out.status {
        simplex::LpStatus::Optimal => Status::Optimal,
        simplex::LpStatus::Infeasible => Status::Infeasible,
        simplex::LpStatus::Unbounded => Status::Unbounded,
    };
    let objective = match status {
        Status::Optimal => out.objective,
        Status::Unbounded => f64::NEG_INFINITY,
        _ => f64::INFINITY,
    };
    Ok(Solution {
        status,
        values: out.values,
        objective,
        nodes: 1,
        lp_iterations: out.iterations,
        incumbent_trace: Vec::new(),
        best_bound: objective,
    })
}

/// Solves `model` to proven optimality over its binaries, exploring at most
/// `node_limit` nodes. On exhaustion the best incumbent (if any) is returned
/// with [`Status::NodeLimit`].
pub fn solve_milp(
    model: &Model,
    node_limit: usize,
    opts: &SolverOptions,
) -> Result<Solution, MilpError> {
    bnb::branch_and_bound(model, node_limit, opts)
}
