//! Clarabel backend for [`ProgramSolver`].
//!
//! Clarabel solves `min ½xᵀPx + qᵀx  s.t.  Ax + s = b, s ∈ K` and returns the
//! conic dual `z` satisfying `Px + q + Aᵀz = 0`, which is exactly the
//! convention documented on [`crate::lp`]. The adapter therefore only has to
//! (a) order rows as [equalities | inequalities] to match a `[ZeroCone,
//! NonnegativeCone]` layout, (b) append an explicit `−xⱼ <= 0` row per
//! nonnegative variable since Clarabel has no variable bounds, and (c) map row
//! duals back to the caller's row order.
//!
//! Being an interior-point method, Clarabel returns *an* optimal dual, not
//! necessarily a vertex of the dual polytope; on degenerate problems
//! individual multipliers can differ from a simplex answer by more than the
//! solver tolerance while every KKT residual still vanishes. Downstream checks
//! must (and do) assert identities against the returned vector rather than
//! against an assumed-unique dual.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use super::{Program, ProgramSolver, Relation, Solution, SolverFailure};

#[derive(Debug, Clone)]
pub struct ClarabelSolver {
    /// Used for Clarabel's absolute/relative gap and feasibility tolerances.
    /// Kept well below [`crate::tol`] levels so model-level checks are not
    /// limited by the solver.
    pub tol: f64,
    pub max_iter: u32,
    pub verbose: bool,
}

impl Default for ClarabelSolver {
    fn default() -> Self {
        ClarabelSolver { tol: 1e-11, max_iter: 200, verbose: false }
    }
}

impl ProgramSolver for ClarabelSolver {
    fn solve(&self, program: &Program) -> Result<Solution, SolverFailure> {
        let n = program.num_vars();

        // Row order seen by Clarabel: equalities, then <= rows, then bounds.
        let eq_rows: Vec<usize> = indices_with(program, Relation::Eq);
        let le_rows: Vec<usize> = indices_with(program, Relation::Le);
        let bound_vars: Vec<usize> = (0..n).filter(|&v| program.is_nonneg(v)).collect();
        let m = eq_rows.len() + le_rows.len() + bound_vars.len();

        let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
        let mut b = Vec::with_capacity(m);
        for (pos, &r) in eq_rows.iter().chain(le_rows.iter()).enumerate() {
            let row = &program.rows()[r];
            for &(var, val) in &row.coeffs {
                triplets.push((pos, var, val));
            }
            b.push(row.rhs);
        }
        let offset = eq_rows.len() + le_rows.len();
        for (k, &var) in bound_vars.iter().enumerate() {
            triplets.push((offset + k, var, -1.0));
            b.push(0.0);
        }
        let a = csc_from_triplets(m, n, triplets);

        let quad: Vec<(usize, usize, f64)> = program.quad().to_vec();
        let p = csc_from_triplets(n, n, quad);

        let cones = [
            SupportedConeT::ZeroConeT(eq_rows.len()),
            SupportedConeT::NonnegativeConeT(le_rows.len() + bound_vars.len()),
        ];

        let settings = DefaultSettingsBuilder::default()
            .verbose(self.verbose)
            .max_iter(self.max_iter)
            .tol_gap_abs(self.tol)
            .tol_gap_rel(self.tol)
            .tol_feas(self.tol)
            .build()
            .map_err(|e| SolverFailure::Numerical(format!("bad solver settings: {e}")))?;

        let mut solver = DefaultSolver::new(&p, program.cost(), &a, &b, &cones, settings)
            .map_err(|e| SolverFailure::Numerical(format!("solver setup failed: {e:?}")))?;
        solver.solve();

        let sol = &solver.solution;
        match sol.status {
            // AlmostSolved means the reduced-accuracy targets were met; the
            // point is usable and callers with stricter needs re-check
            // feasibility and gap against their own tolerances anyway.
            SolverStatus::Solved | SolverStatus::AlmostSolved => {}
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                return Err(SolverFailure::Infeasible)
            }
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
                return Err(SolverFailure::Unbounded)
            }
            other => {
                return Err(SolverFailure::Numerical(format!(
                    "terminated with status {other:?} after {} iterations",
                    sol.iterations
                )))
            }
        }

        // Undo the row reordering; bound-row duals (reduced costs) are implied
        // by stationarity and not returned.
        let mut dual = vec![0.0; program.num_rows()];
        for (pos, &r) in eq_rows.iter().chain(le_rows.iter()).enumerate() {
            dual[r] = sol.z[pos];
        }

        Ok(Solution {
            primal: sol.x.clone(),
            dual,
            objective: sol.obj_val,
            iterations: sol.iterations as usize,
        })
    }
}

fn indices_with(program: &Program, relation: Relation) -> Vec<usize> {
    (0..program.num_rows()).filter(|&r| program.rows()[r].relation == relation).collect()
}

/// Build a CSC matrix from (row, col, value) triplets, summing duplicates.
fn csc_from_triplets(nrows: usize, ncols: usize, mut t: Vec<(usize, usize, f64)>) -> CscMatrix {
    t.sort_unstable_by_key(|&(r, c, _)| (c, r));
    let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(t.len());
    for (r, c, v) in t {
        debug_assert!(r < nrows && c < ncols);
        match merged.last_mut() {
            Some(last) if last.0 == r && last.1 == c => last.2 += v,
            _ => merged.push((r, c, v)),
        }
    }
    let mut colptr = vec![0usize; ncols + 1];
    for &(_, c, _) in &merged {
        colptr[c + 1] += 1;
    }
    for c in 0..ncols {
        colptr[c + 1] += colptr[c];
    }
    let rowval = merged.iter().map(|&(r, _, _)| r).collect();
    let nzval = merged.iter().map(|&(_, _, v)| v).collect();
    CscMatrix::new(nrows, ncols, colptr, rowval, nzval)
}
