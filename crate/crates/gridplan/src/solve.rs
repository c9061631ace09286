//! The hourly planning LP: assembly, solve, and dual extraction.
//!
//! Decision variables per instance (m generators, n hours):
//!
//! - `x[g,h]` dispatch, `z[g]` built capacity,
//! - `t` storage power rating (door), `u` storage energy capacity (room),
//! - `r[h]` storage flow, positive when charging (free sign),
//! - `s[h]` state of charge at the end of hour `h`.
//!
//! Constraints and the duals extracted from them:
//!
//! ```text
//! Σ_g x[g,h] − r[h] = d[h]        price λ_h   (= −row dual)
//! s[h] − s[prev(h)] − r[h] = 0    SOC value Ω_h
//! x[g,h] ≤ a[g,h]·z[g]            capacity rent ρ_{g,h}
//! r[h] ≤ t,  −r[h] ≤ t            door rents δc_h, δd_h
//! s[h] ≤ u                        room rent τ_h
//! ```
//!
//! Charging adds to load, so the balance reads `Σx = d + r`; with that
//! orientation the rent identities hold with their natural signs: λ_h equals
//! variable cost plus capacity rent of any dispatched generator,
//! `Ω_h = λ_h + δc_h − δd_h` whenever the door is in use, built capacity
//! recovers its cost from rents (`c_z = Σ_h a·ρ`), and likewise
//! `c_t = Σ(δc+δd)` and `c_u = Σ τ` when door/room are built. [`crate::value`]
//! builds on exactly these identities.
//!
//! The boundary condition comes from [`TimeGrid::cyclic`]: cyclic grids tie
//! `s[0]` to `s[n−1] + r[0]` (wrap), open grids start empty.

use ndarray::Array2;
use serde::Serialize;
use thiserror::Error;

use crate::lp::{self, Program, ProgramSolver, SolverFailure};
use crate::model::{ModelError, SystemInstance};
use crate::tol;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Invalid(#[from] ModelError),
    /// Demand cannot be met: some demand is positive while every generator
    /// has zero availability in enough hours that storage cannot bridge it.
    #[error("instance is infeasible: demand cannot be met with any capacity build-out")]
    Infeasible,
    /// Only possible with malformed (negative) cost data.
    #[error("planning LP is unbounded below; check cost signs")]
    Unbounded,
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl From<SolverFailure> for SolveError {
    fn from(f: SolverFailure) -> Self {
        match f {
            SolverFailure::Infeasible => SolveError::Infeasible,
            SolverFailure::Unbounded => SolveError::Unbounded,
            SolverFailure::Numerical(msg) => SolveError::Numerical(msg),
        }
    }
}

/// Optimal primal and dual solution of the hourly planning LP.
///
/// Dual sign conventions (see module docs): all rents `rho`, `delta_*`, `tau`
/// are nonnegative; `lambda` is the marginal cost of demand (nonnegative for
/// valid cost data); `omega` is the marginal value of stored energy.
#[derive(Debug, Clone, Serialize)]
pub struct SolveResult {
    pub objective: f64,
    /// Dispatch, `m × n`.
    pub x: Array2<f64>,
    /// Built generator capacity.
    pub z: Vec<f64>,
    /// Storage power rating (`t`).
    pub door: f64,
    /// Storage energy capacity (`u`).
    pub room: f64,
    /// Storage flow per hour, positive = charging (`r`).
    pub charge: Vec<f64>,
    /// State of charge at the end of each hour (`s`).
    pub soc: Vec<f64>,
    /// Hourly demand price (`λ`).
    pub lambda: Vec<f64>,
    /// Generator capacity rent (`ρ`), `m × n`.
    pub rho: Array2<f64>,
    /// Marginal value of stored energy (`Ω`).
    pub omega: Vec<f64>,
    /// Door rent on the charging side (`δc`).
    pub delta_charge: Vec<f64>,
    /// Door rent on the discharging side (`δd`).
    pub delta_discharge: Vec<f64>,
    /// Room rent (`τ`).
    pub tau: Vec<f64>,
    pub iterations: usize,
}

/// Variable/row indexing shared by assembly and extraction.
struct Layout {
    m: usize,
    n: usize,
}

impl Layout {
    fn x(&self, g: usize, h: usize) -> usize {
        g * self.n + h
    }
    fn z(&self, g: usize) -> usize {
        self.m * self.n + g
    }
    fn t(&self) -> usize {
        self.m * self.n + self.m
    }
    fn u(&self) -> usize {
        self.t() + 1
    }
    fn r(&self, h: usize) -> usize {
        self.u() + 1 + h
    }
    fn s(&self, h: usize) -> usize {
        self.u() + 1 + self.n + h
    }
    fn num_vars(&self) -> usize {
        self.m * self.n + self.m + 2 + 2 * self.n
    }

    fn row_demand(&self, h: usize) -> usize {
        h
    }
    fn row_soc(&self, h: usize) -> usize {
        self.n + h
    }
    fn row_cap(&self, g: usize, h: usize) -> usize {
        2 * self.n + g * self.n + h
    }
    fn row_door_charge(&self, h: usize) -> usize {
        2 * self.n + self.m * self.n + h
    }
    fn row_door_discharge(&self, h: usize) -> usize {
        2 * self.n + self.m * self.n + self.n + h
    }
    fn row_room(&self, h: usize) -> usize {
        2 * self.n + self.m * self.n + 2 * self.n + h
    }
}

fn build_program(instance: &SystemInstance) -> (Program, Layout) {
    let (m, n) = (instance.n_generators(), instance.n_hours());
    let layout = Layout { m, n };
    let mut p = Program::new(layout.num_vars());

    for (g, gen) in instance.generators.iter().enumerate() {
        for h in 0..n {
            p.add_cost(layout.x(g, h), gen.var_cost[h]);
        }
        p.add_cost(layout.z(g), gen.cap_cost);
    }
    p.add_cost(layout.t(), instance.storage.door_cost);
    p.add_cost(layout.u(), instance.storage.room_cost);
    for h in 0..n {
        p.mark_free(layout.r(h));
    }

    // Row order must match Layout::row_*.
    for h in 0..n {
        let mut coeffs: Vec<(usize, f64)> = (0..m).map(|g| (layout.x(g, h), 1.0)).collect();
        coeffs.push((layout.r(h), -1.0));
        p.eq(coeffs, instance.demand[h]);
    }
    for h in 0..n {
        let mut coeffs = vec![(layout.s(h), 1.0), (layout.r(h), -1.0)];
        if h > 0 {
            coeffs.push((layout.s(h - 1), -1.0));
        } else if instance.grid.cyclic && n > 1 {
            coeffs.push((layout.s(n - 1), -1.0));
        } else if instance.grid.cyclic {
            // n == 1: s[0] − s[0] − r[0] = 0 collapses to r[0] = 0
            coeffs = vec![(layout.r(0), -1.0)];
        }
        // open grid, h == 0: s[0] − r[0] = 0 (starts empty)
        p.eq(coeffs, 0.0);
    }
    for g in 0..m {
        for h in 0..n {
            p.le(
                vec![(layout.x(g, h), 1.0), (layout.z(g), -instance.generators[g].availability[h])],
                0.0,
            );
        }
    }
    for h in 0..n {
        p.le(vec![(layout.r(h), 1.0), (layout.t(), -1.0)], 0.0);
    }
    for h in 0..n {
        p.le(vec![(layout.r(h), -1.0), (layout.t(), -1.0)], 0.0);
    }
    for h in 0..n {
        p.le(vec![(layout.s(h), 1.0), (layout.u(), -1.0)], 0.0);
    }

    (p, layout)
}

/// Solve with the default backend. See [`solve_core_with`].
pub fn solve_core(instance: &SystemInstance) -> Result<SolveResult, SolveError> {
    solve_core_with(instance, &lp::default_solver())
}

/// Solve the hourly planning LP and extract the full dual set.
///
/// On success the solution has been verified to satisfy primal feasibility
/// within [`tol::FEAS`] and close the duality gap within [`tol::GAP_REL`]
/// relative; anything less accurate is reported as
/// [`SolveError::Numerical`] rather than returned.
pub fn solve_core_with(
    instance: &SystemInstance,
    solver: &dyn ProgramSolver,
) -> Result<SolveResult, SolveError> {
    instance.validate()?;
    let (program, layout) = build_program(instance);
    let sol = solver.solve(&program)?;

    let feas = max_row_violation(&program, &sol.primal);
    if feas > tol::FEAS {
        return Err(SolveError::Numerical(format!(
            "solution violates constraints by {feas:.3e} (limit {:.1e})",
            tol::FEAS
        )));
    }
    let gap = (sol.objective - program.dual_objective_at(&sol.dual)).abs();
    if gap > tol::GAP_REL * (1.0 + sol.objective.abs()) {
        return Err(SolveError::Numerical(format!(
            "duality gap {gap:.3e} exceeds {:.1e} relative",
            tol::GAP_REL
        )));
    }

    Ok(extract(&layout, &sol))
}

fn max_row_violation(program: &Program, x: &[f64]) -> f64 {
    let mut worst = 0.0_f64;
    for row in program.rows() {
        let lhs: f64 = row.coeffs.iter().map(|&(v, c)| c * x[v]).sum();
        let viol = match row.relation {
            lp::Relation::Eq => (lhs - row.rhs).abs(),
            lp::Relation::Le => (lhs - row.rhs).max(0.0),
        };
        worst = worst.max(viol);
    }
    for (v, &xi) in x.iter().enumerate() {
        if program.is_nonneg(v) {
            worst = worst.max(-xi);
        }
    }
    worst
}

fn extract(layout: &Layout, sol: &lp::Solution) -> SolveResult {
    let (m, n) = (layout.m, layout.n);
    let x = Array2::from_shape_fn((m, n), |(g, h)| sol.primal[layout.x(g, h)]);
    let rho = Array2::from_shape_fn((m, n), |(g, h)| sol.dual[layout.row_cap(g, h)]);
    SolveResult {
        objective: sol.objective,
        x,
        z: (0..m).map(|g| sol.primal[layout.z(g)]).collect(),
        door: sol.primal[layout.t()],
        room: sol.primal[layout.u()],
        charge: (0..n).map(|h| sol.primal[layout.r(h)]).collect(),
        soc: (0..n).map(|h| sol.primal[layout.s(h)]).collect(),
        lambda: (0..n).map(|h| -sol.dual[layout.row_demand(h)]).collect(),
        rho,
        omega: (0..n).map(|h| sol.dual[layout.row_soc(h)]).collect(),
        delta_charge: (0..n).map(|h| sol.dual[layout.row_door_charge(h)]).collect(),
        delta_discharge: (0..n).map(|h| sol.dual[layout.row_door_discharge(h)]).collect(),
        tau: (0..n).map(|h| sol.dual[layout.row_room(h)]).collect(),
        iterations: sol.iterations,
    }
}

/// Integrate a flow series into a state-of-charge series: cyclic grids anchor
/// the minimum at zero (the level is otherwise a free constant), open grids
/// start empty.
pub(crate) fn accumulate_soc(charge: &[f64], cyclic: bool) -> Vec<f64> {
    let mut soc: Vec<f64> = Vec::with_capacity(charge.len());
    let mut level = 0.0;
    for &r in charge {
        level += r;
        soc.push(level);
    }
    if cyclic {
        let min = soc.iter().cloned().fold(f64::INFINITY, f64::min);
        for v in &mut soc {
            *v -= min;
        }
    }
    soc
}
