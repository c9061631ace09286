//! Solving the full-resolution planning LP by consensus decomposition.
//!
//! The LP couples hours only through the capacity variables (`z`, `t`, `u`)
//! and the storage balance. Splitting the horizon into chunks therefore
//! yields independent dispatch problems if each chunk gets its own *copy* of
//! the capacity variables and of the state of charge it inherits — plus
//! consensus constraints forcing every copy to agree with its owner:
//!
//! ```text
//! ẑ_{j,g} = z_g,  t̂_j = t,  û_j = u        (chunk j vs capacity block)
//! ŝin_j = s_{j−1, last}                     (chunk j vs its predecessor)
//! ```
//!
//! These are the split constraints; everything else stays a hard constraint
//! inside its block, so every block subproblem is feasible at every iterate.
//! The consensus system is solved in sharing-ADMM form: each constraint gets
//! one scalar dual `α_c` and one target per participating side; per
//! iteration, all blocks solve their penalized subproblem in parallel
//! (`argmin f_i − Σ α_c (A_i v_i)_c + β/2 Σ ((A_i v_i)_c − y_{i,c})²`), then
//! the coordinator redistributes: the consensus residual is split equally
//! between the two sides of each constraint and `α_c ← α_c − β·resid_c/2`.
//! Targets always satisfy `Σ_sides y = 0` exactly after the update.
//!
//! Convergence is tracked by `‖resid‖₂/√K` (primal) and `β‖Δy‖₂/√K` (dual),
//! K the number of consensus scalars. The assembled [`SolveResult`] is
//! accurate to those residuals — good for objectives and plans, not for
//! tight dual identity work (use [`crate::solve::solve_core`] for that).
//!
//! [`BlockScheme::Single`] is the degenerate partition: no split remains, the
//! one block is the whole LP, and the first "iteration" is already exact.

use std::time::Instant;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{self, Program, ProgramSolver, Solution};
use crate::model::{ModelError, SystemInstance};
use crate::solve::{solve_core_with, SolveError, SolveResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockScheme {
    /// One block holding everything: exact in one iteration.
    Single,
    PerHour,
    PerDay,
    PerWeek,
}

impl BlockScheme {
    fn chunk_len(&self, n: usize) -> Option<usize> {
        match self {
            BlockScheme::Single => Some(n),
            BlockScheme::PerHour => Some(1),
            BlockScheme::PerDay => (n % 24 == 0).then_some(24),
            BlockScheme::PerWeek => (n % 168 == 0).then_some(168),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdmmConfig {
    /// Consensus penalty β.
    pub beta: f64,
    pub max_iters: usize,
    pub eps_primal: f64,
    pub eps_dual: f64,
    pub partition: BlockScheme,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        AdmmConfig {
            beta: 1.0,
            max_iters: 2000,
            eps_primal: 1e-4,
            eps_dual: 1e-4,
            partition: BlockScheme::PerDay,
        }
    }
}

impl AdmmConfig {
    fn validate(&self) -> Result<(), AdmmError> {
        if self.beta.is_nan() || self.beta <= 0.0 {
            return Err(AdmmError::Config(format!("beta must be positive, got {}", self.beta)));
        }
        if self.eps_primal.is_nan()
            || self.eps_primal <= 0.0
            || self.eps_dual.is_nan()
            || self.eps_dual <= 0.0
        {
            return Err(AdmmError::Config("residual tolerances must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(AdmmError::Config("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum AdmmError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{scheme:?} blocks do not divide a {n}-hour horizon")]
    Indivisible { scheme: BlockScheme, n: usize },
    #[error("invalid ADMM configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    /// `‖consensus residual‖₂ / √K`.
    pub primal_residual: f64,
    /// `β·‖y_{k+1} − y_k‖₂ / √K`.
    pub dual_residual: f64,
    /// True cost of the current combined iterate (owner capacities, block
    /// dispatch), whether or not consensus holds yet.
    pub objective: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AdmmTrace {
    pub iterations: Vec<IterationRecord>,
    /// False when the iteration budget ran out first; the returned solution
    /// is then the last iterate, accurate only to its recorded residuals.
    pub converged: bool,
}

impl AdmmTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,primal_residual,dual_residual,objective,seconds\n");
        for r in &self.iterations {
            out.push_str(&format!(
                "{},{:.6e},{:.6e},{:.10e},{:.3}\n",
                r.iter, r.primal_residual, r.dual_residual, r.objective, r.seconds
            ));
        }
        out
    }
}

/// Hour ranges of the dispatch blocks under a scheme.
#[derive(Debug, Clone)]
pub struct Partition {
    pub scheme: BlockScheme,
    /// `(first hour, hour count)` per dispatch block, in horizon order.
    pub chunks: Vec<(usize, usize)>,
}

pub fn partition_blocks(
    instance: &SystemInstance,
    scheme: BlockScheme,
) -> Result<Partition, AdmmError> {
    instance.validate()?;
    let n = instance.n_hours();
    let len = scheme.chunk_len(n).ok_or(AdmmError::Indivisible { scheme, n })?;
    let chunks = (0..n / len).map(|j| (j * len, len)).collect();
    Ok(Partition { scheme, chunks })
}

/// Variable/row indexing inside one dispatch block.
struct BlockLayout {
    m: usize,
    len: usize,
    /// Copy of the incoming SOC, present when the predecessor lives in
    /// another block.
    has_sin: bool,
}

impl BlockLayout {
    fn x(&self, g: usize, i: usize) -> usize {
        g * self.len + i
    }
    fn r(&self, i: usize) -> usize {
        self.m * self.len + i
    }
    fn s(&self, i: usize) -> usize {
        self.m * self.len + self.len + i
    }
    fn zc(&self, g: usize) -> usize {
        self.m * self.len + 2 * self.len + g
    }
    fn tc(&self) -> usize {
        self.zc(self.m)
    }
    fn uc(&self) -> usize {
        self.zc(self.m) + 1
    }
    fn sin(&self) -> usize {
        debug_assert!(self.has_sin);
        self.zc(self.m) + 2
    }
    fn num_vars(&self) -> usize {
        self.m * self.len + 2 * self.len + self.m + 2 + usize::from(self.has_sin)
    }
    fn row_demand(&self, i: usize) -> usize {
        i
    }
    fn row_soc(&self, i: usize) -> usize {
        self.len + i
    }
    fn row_cap(&self, g: usize, i: usize) -> usize {
        2 * self.len + g * self.len + i
    }
    fn row_door_charge(&self, i: usize) -> usize {
        2 * self.len + self.m * self.len + i
    }
    fn row_door_discharge(&self, i: usize) -> usize {
        2 * self.len + self.m * self.len + self.len + i
    }
    fn row_room(&self, i: usize) -> usize {
        2 * self.len + self.m * self.len + 2 * self.len + i
    }
}

/// One block's stake in one consensus scalar.
struct Link {
    var: usize,
    scalar: usize,
    /// +1 for the copy side, −1 for the owner side.
    sign: f64,
}

struct Block {
    /// Hard constraints, dispatch costs, and the constant β diagonal on
    /// linked variables; per-iteration terms are linear only.
    base: Program,
    links: Vec<Link>,
}

impl Block {
    fn solve_step(
        &self,
        beta: f64,
        alpha: &[f64],
        y: &[[f64; 2]],
        solver: &dyn ProgramSolver,
    ) -> Result<Solution, SolveError> {
        let mut program = self.base.clone();
        for link in &self.links {
            let side = if link.sign > 0.0 { 0 } else { 1 };
            program.add_cost(
                link.var,
                -link.sign * (alpha[link.scalar] + beta * y[link.scalar][side]),
            );
        }
        solver.solve(&program).map_err(SolveError::from)
    }
}

fn build_dispatch_block(
    instance: &SystemInstance,
    start: usize,
    len: usize,
    single_chunk: bool,
) -> (Block, BlockLayout) {
    let m = instance.n_generators();
    let cyclic = instance.grid.cyclic;
    // the only block that keeps its SOC boundary internal is a single chunk
    // on a cyclic grid (wrap) or the first chunk of an open grid (starts empty)
    let has_sin = if single_chunk { false } else { cyclic || start > 0 };
    let layout = BlockLayout { m, len, has_sin };
    let mut p = Program::new(layout.num_vars());

    for g in 0..m {
        for i in 0..len {
            p.add_cost(layout.x(g, i), instance.generators[g].var_cost[start + i]);
        }
    }
    for i in 0..len {
        p.mark_free(layout.r(i));
    }

    for i in 0..len {
        let mut coeffs: Vec<(usize, f64)> = (0..m).map(|g| (layout.x(g, i), 1.0)).collect();
        coeffs.push((layout.r(i), -1.0));
        p.eq(coeffs, instance.demand[start + i]);
    }
    for i in 0..len {
        let mut coeffs = vec![(layout.s(i), 1.0), (layout.r(i), -1.0)];
        if i > 0 {
            coeffs.push((layout.s(i - 1), -1.0));
        } else if layout.has_sin {
            coeffs.push((layout.sin(), -1.0));
        } else if single_chunk && cyclic && len > 1 {
            coeffs.push((layout.s(len - 1), -1.0));
        } else if single_chunk && cyclic {
            coeffs = vec![(layout.r(0), -1.0)];
        }
        // open grid, first chunk, i == 0: s − r = 0 (starts empty)
        p.eq(coeffs, 0.0);
    }
    for g in 0..m {
        for i in 0..len {
            p.le(
                vec![
                    (layout.x(g, i), 1.0),
                    (layout.zc(g), -instance.generators[g].availability[start + i]),
                ],
                0.0,
            );
        }
    }
    for i in 0..len {
        p.le(vec![(layout.r(i), 1.0), (layout.tc(), -1.0)], 0.0);
    }
    for i in 0..len {
        p.le(vec![(layout.r(i), -1.0), (layout.tc(), -1.0)], 0.0);
    }
    for i in 0..len {
        p.le(vec![(layout.s(i), 1.0), (layout.uc(), -1.0)], 0.0);
    }
    if layout.has_sin {
        // inherited charge must fit the room copy too
        p.le(vec![(layout.sin(), 1.0), (layout.uc(), -1.0)], 0.0);
    }

    (Block { base: p, links: Vec::new() }, layout)
}

struct Assembled {
    blocks: Vec<Block>,
    layouts: Vec<BlockLayout>,
    capacity: Block,
    /// `[(block, var); 2]` per scalar: copy side then owner side.
    sides: Vec<[(usize, usize); 2]>,
}

const CAPACITY_BLOCK: usize = usize::MAX;

fn assemble(instance: &SystemInstance, partition: &Partition, beta: f64) -> Assembled {
    let m = instance.n_generators();
    let chunks = &partition.chunks;
    let j_count = chunks.len();
    let single_chunk = j_count == 1;

    let mut blocks = Vec::with_capacity(j_count);
    let mut layouts = Vec::with_capacity(j_count);
    for &(start, len) in chunks {
        let (block, layout) = build_dispatch_block(instance, start, len, single_chunk);
        blocks.push(block);
        layouts.push(layout);
    }

    // capacity block: owns (z, t, u) with their costs, no hard rows
    let mut cap_program = Program::new(m + 2);
    for (g, gen) in instance.generators.iter().enumerate() {
        cap_program.add_cost(g, gen.cap_cost);
    }
    cap_program.add_cost(m, instance.storage.door_cost);
    cap_program.add_cost(m + 1, instance.storage.room_cost);
    let mut capacity = Block { base: cap_program, links: Vec::new() };

    let mut sides: Vec<[(usize, usize); 2]> = Vec::new();
    let mut add_scalar =
        |copy: (usize, usize), owner: (usize, usize), blocks: &mut [Block], cap: &mut Block| {
            let scalar = sides.len();
            sides.push([copy, owner]);
            for ((b, var), sign) in [(copy, 1.0), (owner, -1.0)] {
                let target = if b == CAPACITY_BLOCK { &mut *cap } else { &mut blocks[b] };
                target.base.add_quad(var, var, beta);
                target.links.push(Link { var, scalar, sign });
            }
        };

    for (j, layout) in layouts.iter().enumerate() {
        for g in 0..m {
            add_scalar((j, layout.zc(g)), (CAPACITY_BLOCK, g), &mut blocks, &mut capacity);
        }
        add_scalar((j, layout.tc()), (CAPACITY_BLOCK, m), &mut blocks, &mut capacity);
        add_scalar((j, layout.uc()), (CAPACITY_BLOCK, m + 1), &mut blocks, &mut capacity);
    }
    for j in 0..j_count {
        if layouts[j].has_sin {
            let pred = (j + j_count - 1) % j_count;
            let pred_last = layouts[pred].s(layouts[pred].len - 1);
            add_scalar((j, layouts[j].sin()), (pred, pred_last), &mut blocks, &mut capacity);
        }
    }

    Assembled { blocks, layouts, capacity, sides }
}

/// Solve via ADMM with the default backend. See [`admm_solve_with`].
pub fn admm_solve(
    instance: &SystemInstance,
    cfg: &AdmmConfig,
) -> Result<(SolveResult, AdmmTrace), AdmmError> {
    admm_solve_with(instance, cfg, &lp::default_solver())
}

/// Decompose, iterate to consensus, and assemble an hourly solution.
///
/// Runs dispatch blocks concurrently within each iteration. If `max_iters`
/// runs out before both residuals pass their tolerances, the last iterate is
/// still returned with `trace.converged == false` — callers deciding whether
/// to trust it should look at the trace.
pub fn admm_solve_with(
    instance: &SystemInstance,
    cfg: &AdmmConfig,
    solver: &dyn ProgramSolver,
) -> Result<(SolveResult, AdmmTrace), AdmmError> {
    cfg.validate()?;
    let partition = partition_blocks(instance, cfg.partition)?;

    if matches!(cfg.partition, BlockScheme::Single) {
        // no split constraints: the one block is the original LP
        let started = Instant::now();
        let result = solve_core_with(instance, solver)?;
        let record = IterationRecord {
            iter: 1,
            primal_residual: 0.0,
            dual_residual: 0.0,
            objective: result.objective,
            seconds: started.elapsed().as_secs_f64(),
        };
        return Ok((result, AdmmTrace { iterations: vec![record], converged: true }));
    }

    let assembled = assemble(instance, &partition, cfg.beta);
    let k = assembled.sides.len();
    let scale = (k.max(1) as f64).sqrt();

    let mut alpha = vec![0.0; k];
    let mut y = vec![[0.0, 0.0]; k];
    let mut trace = AdmmTrace { iterations: Vec::new(), converged: false };
    let started = Instant::now();
    let mut dispatch_sols: Vec<Solution> = Vec::new();
    let mut capacity_sol: Option<Solution> = None;

    for iter in 1..=cfg.max_iters {
        let mut jobs: Vec<&Block> = assembled.blocks.iter().collect();
        jobs.push(&assembled.capacity);
        let mut sols = jobs
            .into_par_iter()
            .map(|b| b.solve_step(cfg.beta, &alpha, &y, solver))
            .collect::<Result<Vec<_>, _>>()?;
        let cap_sol = sols.pop().expect("capacity block present");

        let value = |b: usize, var: usize| -> f64 {
            if b == CAPACITY_BLOCK {
                cap_sol.primal[var]
            } else {
                sols[b].primal[var]
            }
        };

        let mut primal_sq = 0.0;
        let mut dual_sq = 0.0;
        for (c, &[copy, owner]) in assembled.sides.iter().enumerate() {
            let g_copy = value(copy.0, copy.1);
            let g_owner = -value(owner.0, owner.1);
            let resid = g_copy + g_owner;
            primal_sq += resid * resid;
            let next = [g_copy - resid / 2.0, g_owner - resid / 2.0];
            dual_sq += (next[0] - y[c][0]).powi(2) + (next[1] - y[c][1]).powi(2);
            y[c] = next;
            alpha[c] -= cfg.beta * resid / 2.0;
        }
        let primal_residual = primal_sq.sqrt() / scale;
        let dual_residual = cfg.beta * dual_sq.sqrt() / scale;

        let objective = combined_objective(instance, &partition, &assembled, &sols, &cap_sol);
        trace.iterations.push(IterationRecord {
            iter,
            primal_residual,
            dual_residual,
            objective,
            seconds: started.elapsed().as_secs_f64(),
        });

        dispatch_sols = sols;
        capacity_sol = Some(cap_sol);
        if primal_residual <= cfg.eps_primal && dual_residual <= cfg.eps_dual {
            trace.converged = true;
            break;
        }
    }

    let result = assemble_result(
        instance,
        &partition,
        &assembled,
        &dispatch_sols,
        &capacity_sol.expect("at least one iteration ran"),
        trace.iterations.len(),
    );
    Ok((result, trace))
}

fn combined_objective(
    instance: &SystemInstance,
    partition: &Partition,
    assembled: &Assembled,
    sols: &[Solution],
    cap: &Solution,
) -> f64 {
    let m = instance.n_generators();
    let mut total = 0.0;
    for (j, &(start, len)) in partition.chunks.iter().enumerate() {
        let layout = &assembled.layouts[j];
        for (g, gen) in instance.generators.iter().enumerate() {
            for i in 0..len {
                total += gen.var_cost[start + i] * sols[j].primal[layout.x(g, i)];
            }
        }
    }
    for (g, gen) in instance.generators.iter().enumerate() {
        total += gen.cap_cost * cap.primal[g];
    }
    total += instance.storage.door_cost * cap.primal[m];
    total += instance.storage.room_cost * cap.primal[m + 1];
    total
}

fn assemble_result(
    instance: &SystemInstance,
    partition: &Partition,
    assembled: &Assembled,
    sols: &[Solution],
    cap: &Solution,
    iterations: usize,
) -> SolveResult {
    let (m, n) = (instance.n_generators(), instance.n_hours());
    let mut x = Array2::zeros((m, n));
    let mut rho = Array2::zeros((m, n));
    let mut charge = vec![0.0; n];
    let mut soc = vec![0.0; n];
    let mut lambda = vec![0.0; n];
    let mut omega = vec![0.0; n];
    let mut delta_charge = vec![0.0; n];
    let mut delta_discharge = vec![0.0; n];
    let mut tau = vec![0.0; n];

    for (j, &(start, len)) in partition.chunks.iter().enumerate() {
        let layout = &assembled.layouts[j];
        let sol = &sols[j];
        for i in 0..len {
            let h = start + i;
            for g in 0..m {
                x[(g, h)] = sol.primal[layout.x(g, i)];
                rho[(g, h)] = sol.dual[layout.row_cap(g, i)];
            }
            charge[h] = sol.primal[layout.r(i)];
            soc[h] = sol.primal[layout.s(i)];
            lambda[h] = -sol.dual[layout.row_demand(i)];
            omega[h] = sol.dual[layout.row_soc(i)];
            delta_charge[h] = sol.dual[layout.row_door_charge(i)];
            delta_discharge[h] = sol.dual[layout.row_door_discharge(i)];
            tau[h] = sol.dual[layout.row_room(i)];
        }
    }

    let z: Vec<f64> = (0..m).map(|g| cap.primal[g]).collect();
    let door = cap.primal[m];
    let room = cap.primal[m + 1];
    let objective = instance.objective_value(&x, &z, door, room);
    SolveResult {
        objective,
        x,
        z,
        door,
        room,
        charge,
        soc,
        lambda,
        rho,
        omega,
        delta_charge,
        delta_discharge,
        tau,
        iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{GeneratorSpec, StorageSpec, TimeGrid};
    use crate::solve::solve_core;
    use crate::synth::{generate_synthetic, SyntheticProfile};
    use approx::assert_abs_diff_eq;

    fn two_day_instance() -> SystemInstance {
        generate_synthetic(SyntheticProfile::AlternatingDays, 48, 1, 42).unwrap()
    }

    /// Small-magnitude single-generator system: consensus ADMM reaches 1e-4
    /// residuals in well under a hundred iterations on it, keeping these
    /// tests fast. (Residual tolerances are absolute, so instance scale sets
    /// the iteration count.)
    fn conditioned_instance(cyclic: bool) -> SystemInstance {
        let n = 48;
        let demand = (0..n)
            .map(|h| {
                let t = (h % 24) as f64 / 24.0;
                1.2 + 0.5 * (std::f64::consts::TAU * (t - 0.4)).sin()
            })
            .collect();
        SystemInstance {
            grid: if cyclic { TimeGrid::cyclic(n) } else { TimeGrid::open(n) },
            demand,
            generators: vec![GeneratorSpec::flat("base", 0.5, 4.0, vec![1.0; n])],
            storage: StorageSpec { door_cost: 0.6, room_cost: 0.08 },
        }
    }

    #[test]
    fn partition_counts_match_scheme() {
        let inst = two_day_instance();
        let per_day = partition_blocks(&inst, BlockScheme::PerDay).unwrap();
        assert_eq!(per_day.chunks, vec![(0, 24), (24, 24)]);
        let per_hour = partition_blocks(&inst, BlockScheme::PerHour).unwrap();
        assert_eq!(per_hour.chunks.len(), 48);
        let single = partition_blocks(&inst, BlockScheme::Single).unwrap();
        assert_eq!(single.chunks, vec![(0, 48)]);
        assert!(matches!(
            partition_blocks(&inst, BlockScheme::PerWeek),
            Err(AdmmError::Indivisible { .. })
        ));
    }

    #[test]
    fn consensus_scalar_bookkeeping() {
        // 2 chunks, m generators: per chunk m+2 capacity links, plus 2 cyclic
        // SOC links
        let inst = two_day_instance();
        let partition = partition_blocks(&inst, BlockScheme::PerDay).unwrap();
        let assembled = assemble(&inst, &partition, 1.0);
        let m = inst.n_generators();
        assert_eq!(assembled.sides.len(), 2 * (m + 2) + 2);
        // single chunk: capacity links only, SOC wrap stays internal
        let single = partition_blocks(&inst, BlockScheme::Single).unwrap();
        let assembled = assemble(&inst, &single, 1.0);
        assert_eq!(assembled.sides.len(), m + 2);
        assert!(!assembled.layouts[0].has_sin);
    }

    #[test]
    fn single_block_is_exact_immediately() {
        let inst = two_day_instance();
        let direct = solve_core(&inst).unwrap();
        let cfg = AdmmConfig { partition: BlockScheme::Single, ..AdmmConfig::default() };
        let (res, trace) = admm_solve(&inst, &cfg).unwrap();
        assert!(trace.converged);
        assert_eq!(trace.iterations.len(), 1);
        assert_eq!(trace.iterations[0].primal_residual, 0.0);
        assert_abs_diff_eq!(
            res.objective,
            direct.objective,
            epsilon = 1e-8 * (1.0 + direct.objective)
        );
    }

    #[test]
    fn per_day_blocks_converge_to_the_direct_objective() {
        let inst = conditioned_instance(true);
        let direct = solve_core(&inst).unwrap();
        let cfg = AdmmConfig { partition: BlockScheme::PerDay, ..AdmmConfig::default() };
        let (res, trace) = admm_solve(&inst, &cfg).unwrap();
        assert!(trace.converged, "ran {} iters", trace.iterations.len());
        let last = trace.iterations.last().unwrap();
        assert!(last.primal_residual <= cfg.eps_primal);
        let rel = (res.objective - direct.objective).abs() / (1.0 + direct.objective.abs());
        assert!(rel <= 1e-3, "relative gap {rel:.2e} after {} iters", last.iter);
        // the plan itself, not just its cost, should line up at this accuracy
        assert_abs_diff_eq!(res.room, direct.room, epsilon = 1e-2);
        assert_abs_diff_eq!(res.door, direct.door, epsilon = 1e-2);
    }

    #[test]
    fn trace_tail_hugs_the_direct_objective() {
        // not a monotonicity assertion (ADMM oscillates); the tail of the
        // trace must settle onto the direct objective
        let inst = conditioned_instance(true);
        let direct = solve_core(&inst).unwrap();
        let cfg = AdmmConfig { partition: BlockScheme::PerDay, ..AdmmConfig::default() };
        let (_, trace) = admm_solve(&inst, &cfg).unwrap();
        let tail = &trace.iterations[trace.iterations.len().saturating_sub(3)..];
        for rec in tail {
            let rel = (rec.objective - direct.objective).abs() / (1.0 + direct.objective.abs());
            assert!(rel < 5e-3, "iter {}: rel {rel:.2e}", rec.iter);
        }
    }

    #[test]
    fn iteration_budget_exhaustion_is_flagged_not_fatal() {
        let inst = two_day_instance();
        let cfg =
            AdmmConfig { partition: BlockScheme::PerDay, max_iters: 3, ..AdmmConfig::default() };
        let (res, trace) = admm_solve(&inst, &cfg).unwrap();
        assert!(!trace.converged);
        assert_eq!(trace.iterations.len(), 3);
        assert!(res.objective.is_finite());
    }

    #[test]
    fn open_grid_decomposes_too() {
        let inst = conditioned_instance(false);
        let direct = solve_core(&inst).unwrap();
        let cfg = AdmmConfig { partition: BlockScheme::PerDay, ..AdmmConfig::default() };
        let (res, trace) = admm_solve(&inst, &cfg).unwrap();
        assert!(trace.converged);
        let rel = (res.objective - direct.objective).abs() / (1.0 + direct.objective.abs());
        assert!(rel <= 1e-3, "relative gap {rel:.2e}");
    }

    #[test]
    fn bad_config_is_rejected() {
        let inst = two_day_instance();
        let cfg = AdmmConfig { beta: 0.0, ..AdmmConfig::default() };
        assert!(matches!(admm_solve(&inst, &cfg), Err(AdmmError::Config(_))));
    }

    #[test]
    fn csv_trace_has_header_and_rows() {
        let inst = two_day_instance();
        let cfg =
            AdmmConfig { partition: BlockScheme::PerDay, max_iters: 2, ..AdmmConfig::default() };
        let (_, trace) = admm_solve(&inst, &cfg).unwrap();
        let csv = trace.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "iter,primal_residual,dual_residual,objective,seconds");
        assert_eq!(lines.len(), 3);
    }
}
