//! Solving the aggregated planning LP and expanding its solution back to
//! hours.
//!
//! The aggregated model replaces the hour index with the state index σ and
//! re-weights only the dispatch cost (capacity is built once either way):
//!
//! ```text
//! min Σ_g Σ_σ w_σ c̄ˣ_{g,σ} x̄_{g,σ} + Σ_g c^z_g z_g + c^t t + c^u u
//!
//! Σ_g x̄_{g,σ} − r̄_σ = d̄_σ                    price λ̄_σ
//! s̄_σ − Σ_j P_{jσ} s̄_j − q_σ r̄_σ = 0         SOC value Ω̄_σ
//! x̄_{g,σ} ≤ ā_{g,σ} z_g                       rent ρ̄_{g,σ}
//! r̄_σ ≤ t, −r̄_σ ≤ t, s̄_σ ≤ u                 rents δ̄c, δ̄d, τ̄
//! ```
//!
//! Storage couples states through the predecessor mix `Σ_j P_{jσ} s̄_j`: the
//! charge carried into σ is the transition-weighted average of what the
//! predecessor states hold. A visit to σ lasts `q_σ` hours, so the flow `r̄_σ`
//! enters the balance scaled by `q_σ` while the door limit stays per-hour.
//!
//! [`expand_solution`] maps an aggregated optimum back to an hourly
//! [`SolveResult`]: primal values by state lookup (SOC re-integrated from the
//! flows), prices by weight. Each aggregated balance row stands for `w_σ`
//! hourly rows, so `λ`, `ρ`, `δ` divide by `w_σ`; the SOC row stands for one
//! wrap-up per visit covering `q_σ` hours, so `Ω` carries `q_σ/w_σ`; room
//! rent concentrates where the room constraint actually binds in the hourly
//! model — the final hour of each visit — at `τ̄_σ` split over the visits.
//! When the aggregation passes [`super::check_lossless`], the expanded
//! solution satisfies the hourly KKT system exactly (see
//! `crate::kkt::audit_kkt`); for lossy aggregations it is a heuristic
//! reconstruction and the aggregated objective is only an estimate.

use ndarray::Array2;
use serde::Serialize;

use super::{cyclic_runs, AggError, Aggregation};
use crate::lp::{self, Program, ProgramSolver};
use crate::model::SystemInstance;
use crate::solve::{accumulate_soc, SolveError, SolveResult};
use crate::tol;

/// Optimum of the aggregated LP, everything indexed by state.
#[derive(Debug, Clone, Serialize)]
pub struct AggSolveResult {
    pub objective: f64,
    /// Dispatch per state, `m × S`.
    pub x: Array2<f64>,
    pub z: Vec<f64>,
    pub door: f64,
    pub room: f64,
    /// Hourly storage flow while in each state (`r̄`).
    pub charge: Vec<f64>,
    /// State of charge on leaving each state (`s̄`).
    pub soc: Vec<f64>,
    pub lambda: Vec<f64>,
    pub rho: Array2<f64>,
    pub omega: Vec<f64>,
    pub delta_charge: Vec<f64>,
    pub delta_discharge: Vec<f64>,
    pub tau: Vec<f64>,
    pub iterations: usize,
}

struct Layout {
    m: usize,
    s: usize,
}

impl Layout {
    fn x(&self, g: usize, sigma: usize) -> usize {
        g * self.s + sigma
    }
    fn z(&self, g: usize) -> usize {
        self.m * self.s + g
    }
    fn t(&self) -> usize {
        self.m * self.s + self.m
    }
    fn u(&self) -> usize {
        self.t() + 1
    }
    fn r(&self, sigma: usize) -> usize {
        self.u() + 1 + sigma
    }
    fn sbar(&self, sigma: usize) -> usize {
        self.u() + 1 + self.s + sigma
    }
    fn num_vars(&self) -> usize {
        self.m * self.s + self.m + 2 + 2 * self.s
    }

    fn row_demand(&self, sigma: usize) -> usize {
        sigma
    }
    fn row_balance(&self, sigma: usize) -> usize {
        self.s + sigma
    }
    fn row_cap(&self, g: usize, sigma: usize) -> usize {
        2 * self.s + g * self.s + sigma
    }
    fn row_door_charge(&self, sigma: usize) -> usize {
        2 * self.s + self.m * self.s + sigma
    }
    fn row_door_discharge(&self, sigma: usize) -> usize {
        2 * self.s + self.m * self.s + self.s + sigma
    }
    fn row_room(&self, sigma: usize) -> usize {
        2 * self.s + self.m * self.s + 2 * self.s + sigma
    }
}

fn build_program(instance: &SystemInstance, agg: &Aggregation) -> (Program, Layout) {
    let (m, s_count) = (instance.n_generators(), agg.n_states());
    let layout = Layout { m, s: s_count };
    let mut p = Program::new(layout.num_vars());

    let var_cost = agg.state_var_cost(instance);
    for g in 0..m {
        for sigma in 0..s_count {
            p.add_cost(layout.x(g, sigma), agg.w[sigma] * var_cost[g][sigma]);
        }
        p.add_cost(layout.z(g), instance.generators[g].cap_cost);
    }
    p.add_cost(layout.t(), instance.storage.door_cost);
    p.add_cost(layout.u(), instance.storage.room_cost);
    for sigma in 0..s_count {
        p.mark_free(layout.r(sigma));
    }

    // Row order must match Layout::row_*.
    for sigma in 0..s_count {
        let mut coeffs: Vec<(usize, f64)> = (0..m).map(|g| (layout.x(g, sigma), 1.0)).collect();
        coeffs.push((layout.r(sigma), -1.0));
        p.eq(coeffs, agg.profiles.demand[sigma]);
    }
    // Balance rows are assembled column-wise: P is stored by origin state, so
    // walk every transition once and drop `−P_{jσ} s̄_j` into row σ. A
    // self-loop contributes both the +1 and a −P entry on the same variable;
    // the solver merges duplicates.
    let mut balance: Vec<Vec<(usize, f64)>> = (0..s_count)
        .map(|sigma| vec![(layout.sbar(sigma), 1.0), (layout.r(sigma), -agg.q[sigma])])
        .collect();
    for j in 0..s_count {
        for &(to, prob) in agg.p.row(j) {
            balance[to].push((layout.sbar(j), -prob));
        }
    }
    for coeffs in balance {
        p.eq(coeffs, 0.0);
    }
    for g in 0..m {
        for sigma in 0..s_count {
            p.le(
                vec![
                    (layout.x(g, sigma), 1.0),
                    (layout.z(g), -agg.profiles.availability[g][sigma]),
                ],
                0.0,
            );
        }
    }
    for sigma in 0..s_count {
        p.le(vec![(layout.r(sigma), 1.0), (layout.t(), -1.0)], 0.0);
    }
    for sigma in 0..s_count {
        p.le(vec![(layout.r(sigma), -1.0), (layout.t(), -1.0)], 0.0);
    }
    for sigma in 0..s_count {
        p.le(vec![(layout.sbar(sigma), 1.0), (layout.u(), -1.0)], 0.0);
    }

    (p, layout)
}

/// Solve the aggregated LP with the default backend.
pub fn solve_aggregated(
    instance: &SystemInstance,
    agg: &Aggregation,
) -> Result<AggSolveResult, AggError> {
    solve_aggregated_with(instance, agg, &lp::default_solver())
}

pub fn solve_aggregated_with(
    instance: &SystemInstance,
    agg: &Aggregation,
    solver: &dyn ProgramSolver,
) -> Result<AggSolveResult, AggError> {
    instance.validate().map_err(SolveError::from)?;
    if !instance.grid.cyclic {
        return Err(AggError::OpenGrid);
    }
    agg.validate(instance)?;

    let (program, layout) = build_program(instance, agg);
    let sol = solver.solve(&program).map_err(SolveError::from)?;

    let feas = max_row_violation(&program, &sol.primal);
    if feas > tol::FEAS {
        return Err(SolveError::Numerical(format!(
            "aggregated solution violates constraints by {feas:.3e} (limit {:.1e})",
            tol::FEAS
        ))
        .into());
    }
    let gap = (sol.objective - program.dual_objective_at(&sol.dual)).abs();
    if gap > tol::GAP_REL * (1.0 + sol.objective.abs()) {
        return Err(SolveError::Numerical(format!(
            "aggregated duality gap {gap:.3e} exceeds {:.1e} relative",
            tol::GAP_REL
        ))
        .into());
    }

    let (m, s_count) = (layout.m, layout.s);
    let x = Array2::from_shape_fn((m, s_count), |(g, sigma)| sol.primal[layout.x(g, sigma)]);
    let rho = Array2::from_shape_fn((m, s_count), |(g, sigma)| sol.dual[layout.row_cap(g, sigma)]);
    Ok(AggSolveResult {
        objective: sol.objective,
        x,
        z: (0..m).map(|g| sol.primal[layout.z(g)]).collect(),
        door: sol.primal[layout.t()],
        room: sol.primal[layout.u()],
        charge: (0..s_count).map(|sigma| sol.primal[layout.r(sigma)]).collect(),
        soc: (0..s_count).map(|sigma| sol.primal[layout.sbar(sigma)]).collect(),
        lambda: (0..s_count).map(|sigma| -sol.dual[layout.row_demand(sigma)]).collect(),
        rho,
        omega: (0..s_count).map(|sigma| sol.dual[layout.row_balance(sigma)]).collect(),
        delta_charge: (0..s_count).map(|sigma| sol.dual[layout.row_door_charge(sigma)]).collect(),
        delta_discharge: (0..s_count)
            .map(|sigma| sol.dual[layout.row_door_discharge(sigma)])
            .collect(),
        tau: (0..s_count).map(|sigma| sol.dual[layout.row_room(sigma)]).collect(),
        iterations: sol.iterations,
    })
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

/// Map an aggregated optimum back to the hourly index.
///
/// Primal: every hour inherits its state's dispatch and flow; SOC is the
/// running integral of the flows (minimum anchored at zero, which matches the
/// aggregated trajectory whenever room carries a positive cost); the objective
/// is recomputed against the original hourly data, so for lossy aggregations
/// it reports what the reconstructed plan actually costs, not the aggregated
/// estimate.
///
/// Dual: `λ`, `ρ`, `δ` divide by the state weight, `Ω` is scaled by
/// `q_σ/w_σ`, and `τ̄` is split equally over the final hours of the state's
/// visits. Under a lossless aggregation this reproduces an exact hourly dual
/// solution.
pub fn expand_solution(
    instance: &SystemInstance,
    agg: &Aggregation,
    aggregated: &AggSolveResult,
) -> Result<SolveResult, AggError> {
    agg.validate(instance)?;
    if !instance.grid.cyclic {
        return Err(AggError::OpenGrid);
    }
    let (m, n, s_count) = (instance.n_generators(), instance.n_hours(), agg.n_states());
    if aggregated.charge.len() != s_count || aggregated.x.dim() != (m, s_count) {
        return Err(AggError::Invalid(format!(
            "aggregated solution has {} states, aggregation has {s_count}",
            aggregated.charge.len()
        )));
    }

    let x = Array2::from_shape_fn((m, n), |(g, h)| aggregated.x[(g, agg.gamma[h])]);
    let charge: Vec<f64> = (0..n).map(|h| aggregated.charge[agg.gamma[h]]).collect();
    let soc = accumulate_soc(&charge, true);
    let objective = instance.objective_value(&x, &aggregated.z, aggregated.door, aggregated.room);

    let per_hour = |bar: &[f64]| -> Vec<f64> {
        (0..n).map(|h| bar[agg.gamma[h]] / agg.w[agg.gamma[h]]).collect()
    };

    let runs = cyclic_runs(&agg.gamma);
    let mut visits = vec![0usize; s_count];
    for &(sigma, _, _) in &runs {
        visits[sigma] += 1;
    }
    let mut tau = vec![0.0; n];
    for &(sigma, start, len) in &runs {
        tau[(start + len - 1) % n] = aggregated.tau[sigma] / visits[sigma] as f64;
    }

    Ok(SolveResult {
        objective,
        x,
        z: aggregated.z.clone(),
        door: aggregated.door,
        room: aggregated.room,
        charge,
        soc,
        lambda: per_hour(&aggregated.lambda),
        rho: Array2::from_shape_fn((m, n), |(g, h)| {
            aggregated.rho[(g, agg.gamma[h])] / agg.w[agg.gamma[h]]
        }),
        omega: (0..n)
            .map(|h| {
                let sigma = agg.gamma[h];
                aggregated.omega[sigma] * agg.q[sigma] / agg.w[sigma]
            })
            .collect(),
        delta_charge: per_hour(&aggregated.delta_charge),
        delta_discharge: per_hour(&aggregated.delta_discharge),
        tau,
        iterations: aggregated.iterations,
    })
}

/// Room rent read off the SOC-value transitions: `Σ_σ ((P·Ω̄)_σ − Ω̄_σ)⁺`.
///
/// Stationarity in `s̄_σ` gives `Ω̄_σ − Σ_j P_{σj} Ω̄_j + τ̄_σ ≥ 0`, tight
/// wherever charge is held, and `τ̄_σ` can only be positive where the room
/// binds — so state by state `τ̄_σ = ((P·Ω̄)_σ − Ω̄_σ)⁺` whenever room is
/// built, making this sum equal both `Σ τ̄` and (through `u`-stationarity)
/// the room price `c^u`. With the identity aggregation `P` is the unit shift
/// and this reduces to the hourly rule: room rent = the sum of positive
/// SOC-value increments around the cycle.
pub fn omega_transition_sum(agg: &Aggregation, omega: &[f64]) -> f64 {
    (0..agg.n_states()).map(|sigma| (agg.p.row_dot(sigma, omega) - omega[sigma]).max(0.0)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agg::{aggregate_identity, compress_lossless};
    use crate::kkt::audit_kkt;
    use crate::model::{GeneratorSpec, StorageSpec, SystemInstance, TimeGrid};
    use crate::solve::solve_core;
    use approx::assert_abs_diff_eq;

    fn peaky(demand: Vec<f64>) -> SystemInstance {
        let n = demand.len();
        SystemInstance {
            grid: TimeGrid::cyclic(n),
            demand,
            generators: vec![GeneratorSpec::flat("base", 1.0, 3.0, vec![1.0; n])],
            storage: StorageSpec { door_cost: 0.2, room_cost: 0.05 },
        }
    }

    #[test]
    fn identity_aggregation_reproduces_hourly_solution() {
        let inst = peaky(vec![1.0, 1.0, 1.0, 9.0, 9.0, 1.0]);
        let hourly = solve_core(&inst).unwrap();
        let agg = aggregate_identity(&inst).unwrap();
        let agg_sol = solve_aggregated(&inst, &agg).unwrap();
        assert_abs_diff_eq!(
            agg_sol.objective,
            hourly.objective,
            epsilon = 1e-8 * (1.0 + hourly.objective)
        );
        let expanded = expand_solution(&inst, &agg, &agg_sol).unwrap();
        assert_abs_diff_eq!(expanded.objective, hourly.objective, epsilon = 1e-7);
        let report = audit_kkt(&inst, &expanded, crate::tol::KKT).unwrap();
        assert!(report.is_clean(), "{:#?}", report.violations);
    }

    #[test]
    fn lossless_compression_keeps_objective_and_hourly_kkt() {
        // two plateaus, visited twice per cycle: states with q = 3 and q = 2
        let inst = peaky(vec![1.0, 1.0, 1.0, 9.0, 9.0, 1.0, 1.0, 1.0, 9.0, 9.0]);
        let agg = compress_lossless(&inst, 0.0).unwrap();
        assert!(agg.n_states() < inst.n_hours());

        let hourly = solve_core(&inst).unwrap();
        let agg_sol = solve_aggregated(&inst, &agg).unwrap();
        assert_abs_diff_eq!(
            agg_sol.objective,
            hourly.objective,
            epsilon = 1e-8 * (1.0 + hourly.objective)
        );

        let expanded = expand_solution(&inst, &agg, &agg_sol).unwrap();
        assert_abs_diff_eq!(expanded.objective, hourly.objective, epsilon = 1e-7);
        let report = audit_kkt(&inst, &expanded, crate::tol::KKT).unwrap();
        assert!(report.is_clean(), "{:#?}", report.violations);
    }

    #[test]
    fn alternating_pattern_compresses_to_two_states_exactly() {
        let inst = peaky(vec![2.0, 8.0, 2.0, 8.0, 2.0, 8.0, 2.0, 8.0]);
        let agg = compress_lossless(&inst, 0.0).unwrap();
        assert_eq!(agg.n_states(), 2);
        let hourly = solve_core(&inst).unwrap();
        let agg_sol = solve_aggregated(&inst, &agg).unwrap();
        let expanded = expand_solution(&inst, &agg, &agg_sol).unwrap();
        assert_abs_diff_eq!(expanded.objective, hourly.objective, epsilon = 1e-7);
        assert!(audit_kkt(&inst, &expanded, crate::tol::KKT).unwrap().is_clean());
    }

    #[test]
    fn flat_demand_aggregates_to_one_state_without_storage() {
        let inst = peaky(vec![4.0; 6]);
        let agg = compress_lossless(&inst, 0.0).unwrap();
        assert_eq!(agg.n_states(), 1);
        let agg_sol = solve_aggregated(&inst, &agg).unwrap();
        assert_abs_diff_eq!(agg_sol.door, 0.0, epsilon = 1e-7);
        assert_abs_diff_eq!(agg_sol.room, 0.0, epsilon = 1e-7);
        // 6 hours of 4 at cost 1, plus 4 capacity at cost 3
        assert_abs_diff_eq!(agg_sol.objective, 24.0 + 12.0, epsilon = 1e-6);
    }

    #[test]
    fn expansion_rejects_open_grids_and_shape_mismatch() {
        let inst = peaky(vec![1.0, 2.0, 3.0, 4.0]);
        let agg = aggregate_identity(&inst).unwrap();
        let agg_sol = solve_aggregated(&inst, &agg).unwrap();

        let mut open = inst.clone();
        open.grid = TimeGrid::open(4);
        assert!(matches!(
            expand_solution(&open, &agg, &agg_sol),
            Err(AggError::OpenGrid) | Err(AggError::Invalid(_))
        ));

        let smaller = peaky(vec![1.0, 2.0]);
        let agg2 = aggregate_identity(&smaller).unwrap();
        assert!(expand_solution(&smaller, &agg2, &agg_sol).is_err());
    }

    #[test]
    fn omega_transitions_price_the_room_in_the_aggregated_model() {
        // storage is built on the compressed two-plateau instance, so the
        // positive SOC-value transitions must add up to the room price, which
        // also equals the direct room-rent sum
        let inst = peaky(vec![1.0, 1.0, 1.0, 9.0, 9.0, 1.0, 1.0, 1.0, 9.0, 9.0]);
        let agg = compress_lossless(&inst, 0.0).unwrap();
        let agg_sol = solve_aggregated(&inst, &agg).unwrap();
        assert!(agg_sol.room > 1e-3, "room {} not built", agg_sol.room);
        let gain = omega_transition_sum(&agg, &agg_sol.omega);
        assert_abs_diff_eq!(gain, inst.storage.room_cost, epsilon = 1e-6);
        assert_abs_diff_eq!(gain, agg_sol.tau.iter().sum::<f64>(), epsilon = 1e-6);
    }

    #[test]
    fn lossy_aggregation_still_solves_and_reports_true_plan_cost() {
        // demand varies within the single state, so this is deliberately lossy
        let inst = peaky(vec![1.0, 2.0, 3.0, 6.0]);
        let agg = Aggregation {
            gamma: vec![0; 4],
            w: vec![4.0],
            q: vec![4.0],
            p: crate::agg::TransitionMatrix::shifted_identity(1),
            profiles: crate::agg::StateProfiles {
                demand: vec![3.0],
                availability: vec![vec![1.0]],
            },
        };
        let agg_sol = solve_aggregated(&inst, &agg).unwrap();
        // aggregated model sees flat demand 3.0: no storage, z = 3
        assert_abs_diff_eq!(agg_sol.z[0], 3.0, epsilon = 1e-6);
        let expanded = expand_solution(&inst, &agg, &agg_sol).unwrap();
        // reconstructed plan dispatches 3.0 every hour; its recomputed cost
        // uses the real hourly data, and its KKT audit must fail (hour 3 is
        // short by 3 units of demand)
        assert_abs_diff_eq!(expanded.objective, 4.0 * 3.0 + 3.0 * 3.0, epsilon = 1e-6);
        let report = audit_kkt(&inst, &expanded, crate::tol::KKT).unwrap();
        assert!(!report.is_clean());
    }
}
