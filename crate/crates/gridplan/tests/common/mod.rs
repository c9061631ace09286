//! Shared test support, most importantly an independent LP oracle.
//!
//! The oracle is a dense two-phase simplex with Bland's rule plus its own
//! standard-form assembly of the planning problem. It deliberately shares no
//! assembly or solve code with the library: variable ordering differs, the
//! free flow variable is split into charge/discharge parts, and inequalities
//! carry explicit slacks. Agreement between the two routes is therefore
//! evidence about the model, not about one implementation agreeing with
//! itself. Simplex also returns vertex duals, which the interior-point
//! backend does not guarantee — useful when a test needs *the* basic optimal
//! dual of a nondegenerate instance.

#![allow(dead_code)] // each test target uses a different slice of this module
#![allow(clippy::needless_range_loop)] // textbook tableau subscripts stay subscripts

use gridplan::SystemInstance;

const PIVOT_EPS: f64 = 1e-9;

/// `min cost·v  s.t.  rows·v = rhs, v >= 0` (dense).
pub struct StandardForm {
    pub cost: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

pub enum SimplexOutcome {
    Optimal(SimplexSolution),
    Infeasible,
    Unbounded,
}

pub struct SimplexSolution {
    pub v: Vec<f64>,
    pub objective: f64,
    /// `∂objective/∂rhs_i` per row, from the optimal basis.
    pub shadow_prices: Vec<f64>,
}

impl SimplexOutcome {
    pub fn unwrap(self) -> SimplexSolution {
        match self {
            SimplexOutcome::Optimal(s) => s,
            SimplexOutcome::Infeasible => panic!("oracle LP infeasible"),
            SimplexOutcome::Unbounded => panic!("oracle LP unbounded"),
        }
    }
}

pub fn simplex_solve(sf: &StandardForm) -> SimplexOutcome {
    let m = sf.rows.len();
    let n = sf.cost.len();
    let width = n + m; // artificial variable i lives at column n + i
    debug_assert!(sf.rows.iter().all(|r| r.len() == n));

    // Tableau with rhs >= 0; remember row flips to fix dual signs later.
    let mut flipped = vec![false; m];
    let mut t: Vec<Vec<f64>> = Vec::with_capacity(m);
    for i in 0..m {
        let mut row = vec![0.0; width + 1];
        let sign = if sf.rhs[i] < 0.0 { -1.0 } else { 1.0 };
        flipped[i] = sign < 0.0;
        for j in 0..n {
            row[j] = sign * sf.rows[i][j];
        }
        row[n + i] = 1.0;
        row[width] = sign * sf.rhs[i];
        t.push(row);
    }
    let mut basis: Vec<usize> = (0..m).map(|i| n + i).collect();

    // Phase 1: minimize the artificial sum (always bounded).
    let mut phase1 = vec![0.0; width];
    phase1[n..width].fill(1.0);
    optimize(&mut t, &mut basis, &phase1, n);
    let p1: f64 = basis.iter().enumerate().map(|(i, &j)| phase1[j] * t[i][width]).sum();
    if p1 > 1e-7 {
        return SimplexOutcome::Infeasible;
    }
    // Pivot leftover artificials out where the row has any real coefficient;
    // rows where it hasn't are redundant and keep a zero-valued artificial.
    for i in 0..m {
        if basis[i] >= n {
            if let Some(j) = (0..n).find(|&j| t[i][j].abs() > PIVOT_EPS) {
                pivot(&mut t, &mut basis, i, j);
            }
        }
    }

    // Phase 2 over the real columns only (artificials must not re-enter).
    let mut cost = vec![0.0; width];
    cost[..n].copy_from_slice(&sf.cost);
    if !optimize(&mut t, &mut basis, &cost, n) {
        return SimplexOutcome::Unbounded;
    }

    let mut v = vec![0.0; n];
    for (i, &j) in basis.iter().enumerate() {
        if j < n {
            v[j] = t[i][width];
        }
    }
    let objective: f64 = sf.cost.iter().zip(&v).map(|(c, x)| c * x).sum();
    // The reduced cost of artificial i is −y_i in the original row orientation.
    let shadow_prices: Vec<f64> = (0..m)
        .map(|i| {
            let y: f64 = basis.iter().enumerate().map(|(k, &j)| cost[j] * t[k][n + i]).sum();
            if flipped[i] {
                -y
            } else {
                y
            }
        })
        .collect();
    SimplexOutcome::Optimal(SimplexSolution { v, objective, shadow_prices })
}

/// Bland's rule throughout: entering = lowest-index improving column,
/// leaving = lowest basis index among minimum ratios. Returns false on
/// unboundedness.
fn optimize(t: &mut [Vec<f64>], basis: &mut [usize], cost: &[f64], allow: usize) -> bool {
    let m = t.len();
    let width = t[0].len() - 1;
    loop {
        let mut entering = None;
        for j in 0..allow {
            if basis.contains(&j) {
                continue;
            }
            let rc: f64 =
                cost[j] - basis.iter().enumerate().map(|(i, &bj)| cost[bj] * t[i][j]).sum::<f64>();
            if rc < -PIVOT_EPS {
                entering = Some(j);
                break;
            }
        }
        let Some(j) = entering else {
            return true;
        };
        let mut leave: Option<usize> = None;
        let mut best = f64::INFINITY;
        for i in 0..m {
            if t[i][j] > PIVOT_EPS {
                let ratio = t[i][width] / t[i][j];
                let better = ratio < best - PIVOT_EPS
                    || (ratio < best + PIVOT_EPS && leave.is_some_and(|li| basis[i] < basis[li]));
                if leave.is_none() || better {
                    best = ratio.min(best);
                    leave = Some(i);
                }
            }
        }
        let Some(i) = leave else {
            return false;
        };
        pivot(t, basis, i, j);
    }
}

fn pivot(t: &mut [Vec<f64>], basis: &mut [usize], row: usize, col: usize) {
    let m = t.len();
    let width = t[0].len();
    let p = t[row][col];
    for v in &mut t[row] {
        *v /= p;
    }
    for i in 0..m {
        if i != row && t[i][col].abs() > 0.0 {
            let f = t[i][col];
            for j in 0..width {
                t[i][j] -= f * t[row][j];
            }
        }
    }
    basis[row] = col;
}

/// Oracle solution of a planning instance, duals translated to the library's
/// conventions (lambda = marginal demand cost, rents nonnegative).
pub struct OraclePlan {
    pub objective: f64,
    pub x: Vec<Vec<f64>>, // m × n
    pub z: Vec<f64>,
    pub door: f64,
    pub room: f64,
    pub charge: Vec<f64>,
    pub soc: Vec<f64>,
    pub lambda: Vec<f64>,
    pub omega: Vec<f64>,
    pub rho: Vec<Vec<f64>>,
    pub delta_charge: Vec<f64>,
    pub delta_discharge: Vec<f64>,
    pub tau: Vec<f64>,
}

/// Assemble and solve the planning LP by the independent route.
/// Panics on infeasible/unbounded input — oracle tests use feasible data.
pub fn oracle_plan(instance: &SystemInstance) -> OraclePlan {
    let m = instance.n_generators();
    let n = instance.n_hours();
    let cyclic = instance.grid.cyclic;

    // Columns, h-major for dispatch (the library is g-major):
    // [z (m)] [t] [u] [x (n·m)] [charge+ (n)] [charge− (n)] [s (n)]
    // [slack cap (n·m)] [slack door+ (n)] [slack door− (n)] [slack room (n)]
    let zi = |g: usize| g;
    let ti = m;
    let ui = m + 1;
    let xi = |h: usize, g: usize| m + 2 + h * m + g;
    let rp = |h: usize| m + 2 + n * m + h;
    let rn = |h: usize| m + 2 + n * m + n + h;
    let si = |h: usize| m + 2 + n * m + 2 * n + h;
    let slack0 = m + 2 + n * m + 3 * n;
    let n_cols = slack0 + n * m + 3 * n;

    let mut cost = vec![0.0; n_cols];
    for g in 0..m {
        cost[zi(g)] = instance.generators[g].cap_cost;
        for h in 0..n {
            cost[xi(h, g)] = instance.generators[g].var_cost[h];
        }
    }
    cost[ti] = instance.storage.door_cost;
    cost[ui] = instance.storage.room_cost;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    let mut slack = slack0;
    // demand: Σ_g x[h,g] − r⁺ + r⁻ = d   (charging adds to load)
    for h in 0..n {
        let mut row = vec![0.0; n_cols];
        for g in 0..m {
            row[xi(h, g)] = 1.0;
        }
        row[rp(h)] = -1.0;
        row[rn(h)] = 1.0;
        rows.push(row);
        rhs.push(instance.demand[h]);
    }
    // state of charge: s_h − s_prev − r_h = 0
    for h in 0..n {
        let mut row = vec![0.0; n_cols];
        row[si(h)] = 1.0;
        row[rp(h)] -= 1.0;
        row[rn(h)] += 1.0;
        if h > 0 {
            row[si(h - 1)] -= 1.0;
        } else if cyclic {
            row[si(n - 1)] -= 1.0;
        }
        rows.push(row);
        rhs.push(0.0);
    }
    // dispatch cap: x − a·z + slack = 0
    for h in 0..n {
        for g in 0..m {
            let mut row = vec![0.0; n_cols];
            row[xi(h, g)] = 1.0;
            row[zi(g)] = -instance.generators[g].availability[h];
            row[slack] = 1.0;
            slack += 1;
            rows.push(row);
            rhs.push(0.0);
        }
    }
    // door both ways: ±r − t + slack = 0
    for h in 0..n {
        let mut row = vec![0.0; n_cols];
        row[rp(h)] = 1.0;
        row[rn(h)] = -1.0;
        row[ti] = -1.0;
        row[slack] = 1.0;
        slack += 1;
        rows.push(row);
        rhs.push(0.0);
    }
    for h in 0..n {
        let mut row = vec![0.0; n_cols];
        row[rp(h)] = -1.0;
        row[rn(h)] = 1.0;
        row[ti] = -1.0;
        row[slack] = 1.0;
        slack += 1;
        rows.push(row);
        rhs.push(0.0);
    }
    // room: s − u + slack = 0
    for h in 0..n {
        let mut row = vec![0.0; n_cols];
        row[si(h)] = 1.0;
        row[ui] = -1.0;
        row[slack] = 1.0;
        slack += 1;
        rows.push(row);
        rhs.push(0.0);
    }
    assert_eq!(slack, n_cols);

    let sol = simplex_solve(&StandardForm { cost, rows, rhs }).unwrap();

    let y = &sol.shadow_prices;
    let row_demand = |h: usize| h;
    let row_soc = |h: usize| n + h;
    let row_cap = |h: usize, g: usize| 2 * n + h * m + g;
    let row_dc = |h: usize| 2 * n + n * m + h;
    let row_dd = |h: usize| 2 * n + n * m + n + h;
    let row_room = |h: usize| 2 * n + n * m + 2 * n + h;

    OraclePlan {
        objective: sol.objective,
        x: (0..m).map(|g| (0..n).map(|h| sol.v[xi(h, g)]).collect()).collect(),
        z: (0..m).map(|g| sol.v[zi(g)]).collect(),
        door: sol.v[ti],
        room: sol.v[ui],
        charge: (0..n).map(|h| sol.v[rp(h)] - sol.v[rn(h)]).collect(),
        soc: (0..n).map(|h| sol.v[si(h)]).collect(),
        // Raising demand raises cost: λ is the demand shadow price as-is.
        lambda: (0..n).map(|h| y[row_demand(h)]).collect(),
        // Raising the rhs of "s − s_prev − r = 0" injects free stored energy,
        // lowering cost by its value: Ω is minus that shadow price.
        omega: (0..n).map(|h| -y[row_soc(h)]).collect(),
        // Slack in "x ≤ a·z" style rows lowers cost when relaxed: rents are
        // minus the shadow prices.
        rho: (0..m).map(|g| (0..n).map(|h| -y[row_cap(h, g)]).collect()).collect(),
        delta_charge: (0..n).map(|h| -y[row_dc(h)]).collect(),
        delta_discharge: (0..n).map(|h| -y[row_dd(h)]).collect(),
        tau: (0..n).map(|h| -y[row_room(h)]).collect(),
    }
}
