//! Sparse linear/quadratic programs and the pluggable solver interface.
//!
//! Model assembly in this crate produces a [`Program`]: minimize
//! `½ xᵀQx + cᵀx` subject to equality and `<=` rows over variables that are
//! either nonnegative or free. Anything that can solve a `Program` and report
//! duals in the convention below can be plugged in via [`ProgramSolver`]; the
//! default backend is Clarabel ([`clarabel::ClarabelSolver`]).
//!
//! # Dual convention
//!
//! For row `i` written `aᵢ·x (= | <=) bᵢ`, the returned `dual[i] = yᵢ` is the
//! multiplier in the Lagrangian `L = obj + Σᵢ yᵢ (aᵢ·x − bᵢ)`, so `yᵢ >= 0`
//! on `<=` rows and free on `=` rows, and stationarity reads
//!
//! ```text
//! Qx + c + Aᵀy = β,    β >= 0,  βⱼ = 0 for free variables,
//! ```
//!
//! with `β` the reduced costs on nonnegative variables. A positive `yᵢ` on a
//! `<=` row means tightening `bᵢ` by one unit raises the optimum by `yᵢ`.

pub mod clarabel;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Eq,
    Le,
}

#[derive(Debug, Clone)]
pub struct Row {
    pub relation: Relation,
    /// Sparse coefficients as (variable, value); variables may repeat (summed).
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

/// A convex program in the form documented at the module level.
#[derive(Debug, Clone)]
pub struct Program {
    num_vars: usize,
    cost: Vec<f64>,
    /// Upper-triangle entries (i, j, v) with i <= j of the symmetric matrix Q
    /// in the quadratic term ½ xᵀQx. Empty for an LP.
    quad: Vec<(usize, usize, f64)>,
    rows: Vec<Row>,
    nonneg: Vec<bool>,
}

impl Program {
    /// A program over `num_vars` variables, all nonnegative by default
    /// (call [`Program::mark_free`] for sign-unrestricted ones).
    pub fn new(num_vars: usize) -> Self {
        Program {
            num_vars,
            cost: vec![0.0; num_vars],
            quad: Vec::new(),
            rows: Vec::new(),
            nonneg: vec![true; num_vars],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn cost(&self) -> &[f64] {
        &self.cost
    }

    pub fn quad(&self) -> &[(usize, usize, f64)] {
        &self.quad
    }

    pub fn is_nonneg(&self, var: usize) -> bool {
        self.nonneg[var]
    }

    pub fn mark_free(&mut self, var: usize) {
        self.nonneg[var] = false;
    }

    pub fn add_cost(&mut self, var: usize, value: f64) {
        self.cost[var] += value;
    }

    /// Add `value · x_i x_j` (i ≠ j) or `value/2 · x_i²` (i = j) to the
    /// objective, i.e. an entry of Q in `½ xᵀQx`.
    pub fn add_quad(&mut self, i: usize, j: usize, value: f64) {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        self.quad.push((lo, hi, value));
    }

    /// Append an equality row, returning its index (dual lookup key).
    pub fn eq(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) -> usize {
        self.push(Relation::Eq, coeffs, rhs)
    }

    /// Append a `<=` row, returning its index (dual lookup key).
    pub fn le(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) -> usize {
        self.push(Relation::Le, coeffs, rhs)
    }

    fn push(&mut self, relation: Relation, coeffs: Vec<(usize, f64)>, rhs: f64) -> usize {
        debug_assert!(coeffs.iter().all(|&(v, _)| v < self.num_vars));
        self.rows.push(Row { relation, coeffs, rhs });
        self.rows.len() - 1
    }

    /// Objective value of an arbitrary point (not necessarily feasible).
    pub fn objective_at(&self, x: &[f64]) -> f64 {
        let mut obj: f64 = self.cost.iter().zip(x).map(|(c, v)| c * v).sum();
        for &(i, j, q) in &self.quad {
            obj += if i == j { 0.5 * q * x[i] * x[i] } else { q * x[i] * x[j] };
        }
        obj
    }

    /// Lagrangian dual objective of an LP at dual point `y` (one entry per
    /// row): `−Σ yᵢ bᵢ`. Only meaningful when the program has no quadratic
    /// term and the reduced costs at `y` are nonnegative.
    pub fn dual_objective_at(&self, y: &[f64]) -> f64 {
        -self.rows.iter().zip(y).map(|(r, yi)| r.rhs * yi).sum::<f64>()
    }
}

#[derive(Debug, Error)]
pub enum SolverFailure {
    #[error("problem is primal infeasible")]
    Infeasible,
    #[error("problem is unbounded below")]
    Unbounded,
    #[error("solver did not reach the requested accuracy: {0}")]
    Numerical(String),
}

/// The solve result: primal point, one dual per row (see module docs for the
/// sign convention), and the objective value.
#[derive(Debug, Clone)]
pub struct Solution {
    pub primal: Vec<f64>,
    pub dual: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

pub trait ProgramSolver: Sync {
    fn solve(&self, program: &Program) -> Result<Solution, SolverFailure>;
}

/// The crate-default backend with tolerances suitable for the checks in
/// [`crate::tol`].
pub fn default_solver() -> clarabel::ClarabelSolver {
    clarabel::ClarabelSolver::default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn objective_at_handles_quadratic_diagonal_and_cross_terms() {
        let mut p = Program::new(2);
        p.add_cost(0, 1.0);
        p.add_quad(0, 0, 2.0); // + x0^2
        p.add_quad(0, 1, 3.0); // + 3 x0 x1
        let x = [2.0, 5.0];
        assert_eq!(p.objective_at(&x), 2.0 + 4.0 + 30.0);
    }

    #[test]
    fn row_indices_are_stable_handles() {
        let mut p = Program::new(1);
        let a = p.eq(vec![(0, 1.0)], 1.0);
        let b = p.le(vec![(0, 1.0)], 2.0);
        assert_eq!((a, b), (0, 1));
        assert_eq!(p.rows()[b].relation, Relation::Le);
    }
}
