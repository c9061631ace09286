//! What is storage worth? Reading the answer off the duals.
//!
//! At an optimum of the planning LP, every built unit of storage exactly
//! recovers its cost from constraint rents: `Σ_h τ_h = c^u` when room is
//! built, `Σ_h (δc_h + δd_h) = c^t` when the door is built. The SOC value
//! series `Ω` carries the same information in telescoped form — `Ω` rises
//! only while the room constraint binds (by `τ_h`) and falls only at empty
//! hours, so the positive increments of `Ω` also sum to `c^u`, and grouping
//! them between empty-storage instants splits the total into per-cycle
//! arbitrage values ([`cycle_decomposition`]).
//!
//! [`energy_capacity_split`] divides realized storage profit `−Σ r_h λ_h`
//! into an energy part and a capacity part by peeling the scarcity premium
//! `γ*_h` off the price: `γ*_h` is the smallest capacity rent among
//! generators dispatched in hour `h` (the margin the *marginal* unit earns
//! over its fuel cost), `λ* = λ − γ*` is the energy-only price, and the two
//! products `−Σ r λ*`, `−Σ r γ*` add back to the total by construction.
//!
//! Everything here is read-only analytics over a [`SolveResult`]; nothing is
//! re-solved. All operations require a KKT-clean input (checked via
//! [`audit_kkt`]) because every formula leans on complementary slackness.

use serde::Serialize;
use thiserror::Error;

use crate::kkt::{audit_kkt, AuditError};
use crate::model::SystemInstance;
use crate::solve::SolveResult;
use crate::tol;

#[derive(Debug, Error)]
pub enum ValueError {
    #[error(transparent)]
    Audit(#[from] AuditError),
    #[error("solution is not optimal: {count} KKT violations, worst {worst:.3e}")]
    NotOptimal { count: usize, worst: f64 },
    #[error("dual identity violated: {0}")]
    Identity(String),
}

/// One charge/discharge arc: storage leaves empty at the end of `start − 1`,
/// holds charge through the interior, and is empty again at the end of `end`.
#[derive(Debug, Clone, Serialize)]
pub struct Cycle {
    pub start: usize,
    pub end: usize,
    /// `Ω_end − Ω_start`: what one marginal unit of room earned this cycle.
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CycleDecomposition {
    pub cycles: Vec<Cycle>,
    /// Storage deployed but never empty: the whole horizon is reported as a
    /// single cycle and the per-cycle split is not meaningful.
    pub no_zero_soc: bool,
}

/// Hourly record relating the SOC value to the local electricity price.
#[derive(Debug, Clone, Serialize)]
pub struct OmegaPriceRecord {
    pub omega: f64,
    pub lambda: f64,
    pub delta_charge: f64,
    pub delta_discharge: f64,
    /// Whether storage moved energy this hour; the relation
    /// `Ω = λ + δc − δd` is asserted only on active hours.
    pub active: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValueReport {
    /// `Σ_h τ_h`; equals `c^u` when room is built.
    pub room_rent_sum: f64,
    /// `Σ_h (δc_h + δd_h)`; equals `c^t` when the door is built.
    pub door_rent_sum: f64,
    /// `Σ_h (Ω_{h+1} − Ω_h)⁺`; equals `c^u` when room is built.
    pub omega_pos_diff_sum: f64,
    pub cycles: Vec<Cycle>,
    pub no_zero_soc: bool,
    /// `−Σ_h r_h λ*_h`: arbitrage profit at energy-only prices.
    pub energy_value: f64,
    /// `−Σ_h r_h γ*_h`: profit from dispatching into scarcity premia.
    pub capacity_value: f64,
    /// `γ*_h` per hour.
    pub scarcity_premium: Vec<f64>,
    /// Hours where no generator was dispatched, so `γ*` fell back to the
    /// anchor rule (price minus the dearest built generator, floored at 0).
    pub anchored_hours: Vec<usize>,
}

fn require_clean(instance: &SystemInstance, result: &SolveResult) -> Result<(), ValueError> {
    let report = audit_kkt(instance, result, tol::KKT)?;
    if report.is_clean() {
        Ok(())
    } else {
        Err(ValueError::NotOptimal { count: report.violations.len(), worst: report.max_residual })
    }
}

/// Full dual-based valuation: rent sums with their cost-recovery identities
/// checked, cycle decomposition, and the energy/capacity profit split.
///
/// Errors with [`ValueError::NotOptimal`] if the input fails the KKT audit,
/// and with [`ValueError::Identity`] if a cost-recovery identity that should
/// hold (storage built, audit clean) is violated beyond the identity
/// tolerance — either means the solution cannot be trusted for valuation.
pub fn marginal_values(
    instance: &SystemInstance,
    result: &SolveResult,
) -> Result<ValueReport, ValueError> {
    require_clean(instance, result)?;
    let n = instance.n_hours();
    let eps_id =
        tol::ID_REL * tol::identity_scale(instance.storage.door_cost, instance.storage.room_cost);

    let room_rent_sum: f64 = result.tau.iter().sum();
    let door_rent_sum: f64 =
        result.delta_charge.iter().zip(&result.delta_discharge).map(|(c, d)| c + d).sum();

    let mut omega_pos_diff_sum = 0.0;
    for h in 0..n {
        let next = if h + 1 < n {
            result.omega[h + 1]
        } else if instance.grid.cyclic {
            result.omega[0]
        } else {
            0.0 // open horizon: no hour after the last values stored energy
        };
        omega_pos_diff_sum += (next - result.omega[h]).max(0.0);
    }

    let built = |v: f64| v > tol::FEAS;
    if built(result.room) {
        let err = (room_rent_sum - instance.storage.room_cost).abs();
        if err > eps_id {
            return Err(ValueError::Identity(format!(
                "room rents sum to {room_rent_sum:.6} but room cost is {:.6} (err {err:.3e})",
                instance.storage.room_cost
            )));
        }
        let err = (omega_pos_diff_sum - instance.storage.room_cost).abs();
        if err > eps_id {
            return Err(ValueError::Identity(format!(
                "positive Ω increments sum to {omega_pos_diff_sum:.6} but room cost is {:.6}",
                instance.storage.room_cost
            )));
        }
    }
    if built(result.door) {
        let err = (door_rent_sum - instance.storage.door_cost).abs();
        if err > eps_id {
            return Err(ValueError::Identity(format!(
                "door rents sum to {door_rent_sum:.6} but door cost is {:.6} (err {err:.3e})",
                instance.storage.door_cost
            )));
        }
    }

    let decomposition = cycle_decomposition(result);
    for c in &decomposition.cycles {
        if c.value < -eps_id {
            return Err(ValueError::Identity(format!(
                "cycle {}..{} has negative value {:.3e}",
                c.start, c.end, c.value
            )));
        }
    }

    let split = premium_split(instance, result);
    Ok(ValueReport {
        room_rent_sum,
        door_rent_sum,
        omega_pos_diff_sum,
        cycles: decomposition.cycles,
        no_zero_soc: decomposition.no_zero_soc,
        energy_value: split.energy,
        capacity_value: split.capacity,
        scarcity_premium: split.gamma,
        anchored_hours: split.anchored,
    })
}

/// Split the SOC value series into charge/discharge cycles delimited by
/// empty-storage instants.
///
/// The hour index is treated cyclically: a cycle may wrap the year boundary.
/// If storage is deployed but never empties, the whole horizon is returned as
/// one cycle (valued at the total positive Ω movement) with `no_zero_soc`
/// set. Undeployed storage yields no cycles.
pub fn cycle_decomposition(result: &SolveResult) -> CycleDecomposition {
    let n = result.soc.len();
    let zero_tol = tol::FEAS * (1.0 + result.room);
    if result.room <= tol::FEAS || n == 0 {
        return CycleDecomposition { cycles: Vec::new(), no_zero_soc: false };
    }

    let Some(z0) = (0..n).find(|&h| result.soc[h] <= zero_tol) else {
        let value: f64 =
            (0..n).map(|h| (result.omega[(h + 1) % n] - result.omega[h]).max(0.0)).sum();
        return CycleDecomposition {
            cycles: vec![Cycle { start: 0, end: n - 1, value }],
            no_zero_soc: true,
        };
    };

    // walk one full cycle starting just past the first empty instant,
    // collecting maximal runs of hours that hold charge
    let mut cycles = Vec::new();
    let mut run_start: Option<usize> = None;
    for i in 1..=n {
        let h = (z0 + i) % n;
        if result.soc[h] > zero_tol {
            run_start.get_or_insert(h);
        } else if let Some(start) = run_start.take() {
            // `h` is the hour that drained the storage back to empty
            cycles.push(Cycle { start, end: h, value: result.omega[h] - result.omega[start] });
        }
    }
    // i == n lands back on z0 (SOC zero), so any open run has been closed
    CycleDecomposition { cycles, no_zero_soc: false }
}

/// Relate the SOC value to the price storage actually faces each hour:
/// whenever storage moves energy, `Ω_h = λ_h + δc_h − δd_h`.
///
/// Hours with no flow are reported `active = false` and not asserted (the
/// relation needs the flow variable to be basic). Violation on an active hour
/// means the input was not an optimum.
pub fn omega_price_relation(result: &SolveResult) -> Result<Vec<OmegaPriceRecord>, ValueError> {
    let n = result.soc.len();
    let mut records = Vec::with_capacity(n);
    for h in 0..n {
        let active = result.charge[h].abs() > tol::FEAS * (1.0 + result.door);
        let record = OmegaPriceRecord {
            omega: result.omega[h],
            lambda: result.lambda[h],
            delta_charge: result.delta_charge[h],
            delta_discharge: result.delta_discharge[h],
            active,
        };
        if active {
            let residual =
                record.lambda + record.delta_charge - record.delta_discharge - record.omega;
            let scale =
                [1.0, record.lambda.abs(), record.omega.abs()].into_iter().fold(0.0_f64, f64::max);
            if residual.abs() > tol::ID_REL * scale {
                return Err(ValueError::Identity(format!(
                    "hour {h}: Ω = {:.6} but λ + δc − δd = {:.6}",
                    record.omega,
                    record.lambda + record.delta_charge - record.delta_discharge
                )));
            }
        }
        records.push(record);
    }
    Ok(records)
}

/// Storage profit split into `(energy_value, capacity_value)`; the two add
/// back to the total arbitrage profit `−Σ_h r_h λ_h` by construction.
pub fn energy_capacity_split(
    instance: &SystemInstance,
    result: &SolveResult,
) -> Result<(f64, f64), ValueError> {
    require_clean(instance, result)?;
    let split = premium_split(instance, result);
    Ok((split.energy, split.capacity))
}

/// [`energy_capacity_split`] without the optimality audit.
///
/// For solutions that are *deliberately* not exact hourly optima — expanded
/// lossy aggregations, decomposition iterates — the split is still the right
/// lens for comparing what each method believes storage earns, but the KKT
/// gate would reject them. The numbers inherit whatever error the input
/// carries; anything needing trustworthy values should take the audited path.
pub fn energy_capacity_split_unchecked(
    instance: &SystemInstance,
    result: &SolveResult,
) -> (f64, f64) {
    let split = premium_split(instance, result);
    (split.energy, split.capacity)
}

struct PremiumSplit {
    gamma: Vec<f64>,
    anchored: Vec<usize>,
    energy: f64,
    capacity: f64,
}

fn premium_split(instance: &SystemInstance, result: &SolveResult) -> PremiumSplit {
    let n = instance.n_hours();
    let scale = 1.0 + instance.demand.iter().cloned().fold(0.0_f64, f64::max);
    let dispatched = tol::FEAS * scale;

    let mut gamma = Vec::with_capacity(n);
    let mut anchored = Vec::new();
    for h in 0..n {
        let premium = instance
            .generators
            .iter()
            .enumerate()
            .filter(|&(g, _)| result.x[(g, h)] > dispatched)
            .map(|(_, gen)| result.lambda[h] - gen.var_cost[h])
            .fold(f64::INFINITY, f64::min);
        if premium.is_finite() {
            gamma.push(premium);
        } else {
            // nothing ran this hour: anchor the premium on the dearest built
            // generator, so a price above it still reads as scarcity
            let dearest = instance
                .generators
                .iter()
                .enumerate()
                .filter(|&(g, _)| result.z[g] > dispatched)
                .map(|(_, gen)| gen.var_cost[h])
                .fold(f64::NEG_INFINITY, f64::max);
            let fallback =
                if dearest.is_finite() { (result.lambda[h] - dearest).max(0.0) } else { 0.0 };
            gamma.push(fallback);
            anchored.push(h);
        }
    }

    let mut energy = 0.0;
    let mut capacity = 0.0;
    for h in 0..n {
        energy -= result.charge[h] * (result.lambda[h] - gamma[h]);
        capacity -= result.charge[h] * gamma[h];
    }
    PremiumSplit { gamma, anchored, energy, capacity }
}
