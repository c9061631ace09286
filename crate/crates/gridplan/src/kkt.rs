//! Independent optimality audit of a primal/dual solution pair.
//!
//! [`audit_kkt`] re-derives every KKT condition of the planning LP directly
//! from instance data — it shares no code with the solver path on purpose, so
//! it can certify solutions produced by any route (direct solve, expansion of
//! an aggregated solve, ADMM assembly, hand-constructed candidates in tests).
//!
//! Feasibility and stationarity residuals are absolute. Complementary
//! slackness products are measured relative to `max(1, |dual|, |slack|)`, so
//! "tiny rent times huge slack" on a large instance is judged by the size of
//! the factors rather than by an absolute product that no floating-point
//! solution could meet.

use thiserror::Error;

use crate::model::SystemInstance;
use crate::solve::SolveResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KktKind {
    PrimalFeasibility,
    DualFeasibility,
    Stationarity,
    ComplementarySlackness,
}

#[derive(Debug, Clone)]
pub struct KktViolation {
    pub kind: KktKind,
    /// Human-readable identification of the violated condition, e.g.
    /// `"demand balance, hour 17"`.
    pub what: String,
    pub magnitude: f64,
}

#[derive(Debug, Clone)]
pub struct KktReport {
    pub tolerance: f64,
    /// Largest residual seen across all conditions, violating or not.
    pub max_residual: f64,
    pub checks: usize,
    pub violations: Vec<KktViolation>,
}

impl KktReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("solution shape does not match instance: {0}")]
    ShapeMismatch(String),
}

struct Auditor {
    eps: f64,
    max_residual: f64,
    checks: usize,
    violations: Vec<KktViolation>,
}

impl Auditor {
    fn residual(&mut self, kind: KktKind, what: impl Fn() -> String, magnitude: f64) {
        self.checks += 1;
        self.max_residual = self.max_residual.max(magnitude);
        if magnitude > self.eps {
            self.violations.push(KktViolation { kind, what: what(), magnitude });
        }
    }

    /// Complementarity product, scaled as documented at module level.
    fn product(&mut self, what: impl Fn() -> String, dual: f64, slack: f64) {
        let scale = 1.0_f64.max(dual.abs()).max(slack.abs());
        self.residual(KktKind::ComplementarySlackness, what, (dual * slack).abs() / scale);
    }
}

pub fn audit_kkt(
    instance: &SystemInstance,
    result: &SolveResult,
    eps: f64,
) -> Result<KktReport, AuditError> {
    let (m, n) = (instance.n_generators(), instance.n_hours());
    check_shapes(result, m, n)?;

    let mut a = Auditor { eps, max_residual: 0.0, checks: 0, violations: Vec::new() };
    let cyclic = instance.grid.cyclic;

    // --- primal feasibility ---
    for h in 0..n {
        let gen: f64 = (0..m).map(|g| result.x[[g, h]]).sum();
        a.residual(
            KktKind::PrimalFeasibility,
            || format!("demand balance, hour {h}"),
            (gen - result.charge[h] - instance.demand[h]).abs(),
        );

        let prev = if h > 0 {
            result.soc[h - 1]
        } else if cyclic {
            result.soc[n - 1]
        } else {
            0.0
        };
        a.residual(
            KktKind::PrimalFeasibility,
            || format!("state-of-charge balance, hour {h}"),
            (result.soc[h] - prev - result.charge[h]).abs(),
        );

        for g in 0..m {
            a.residual(
                KktKind::PrimalFeasibility,
                || format!("dispatch cap, generator {g}, hour {h}"),
                (result.x[[g, h]] - instance.generators[g].availability[h] * result.z[g]).max(0.0),
            );
        }
        a.residual(
            KktKind::PrimalFeasibility,
            || format!("door limit (charge), hour {h}"),
            (result.charge[h] - result.door).max(0.0),
        );
        a.residual(
            KktKind::PrimalFeasibility,
            || format!("door limit (discharge), hour {h}"),
            (-result.charge[h] - result.door).max(0.0),
        );
        a.residual(
            KktKind::PrimalFeasibility,
            || format!("room limit, hour {h}"),
            (result.soc[h] - result.room).max(0.0),
        );
        a.residual(
            KktKind::PrimalFeasibility,
            || format!("nonnegative state of charge, hour {h}"),
            (-result.soc[h]).max(0.0),
        );
        for g in 0..m {
            a.residual(
                KktKind::PrimalFeasibility,
                || format!("nonnegative dispatch, generator {g}, hour {h}"),
                (-result.x[[g, h]]).max(0.0),
            );
        }
    }
    for g in 0..m {
        a.residual(
            KktKind::PrimalFeasibility,
            || format!("nonnegative capacity, generator {g}"),
            (-result.z[g]).max(0.0),
        );
    }
    a.residual(KktKind::PrimalFeasibility, || "nonnegative door".into(), (-result.door).max(0.0));
    a.residual(KktKind::PrimalFeasibility, || "nonnegative room".into(), (-result.room).max(0.0));

    // --- dual feasibility (rents are prices, never negative) ---
    for h in 0..n {
        for (name, series) in [
            ("capacity rent", None),
            ("door rent (charge)", Some(&result.delta_charge)),
            ("door rent (discharge)", Some(&result.delta_discharge)),
            ("room rent", Some(&result.tau)),
        ] {
            match series {
                Some(s) => a.residual(
                    KktKind::DualFeasibility,
                    || format!("{name}, hour {h}"),
                    (-s[h]).max(0.0),
                ),
                None => {
                    for g in 0..m {
                        a.residual(
                            KktKind::DualFeasibility,
                            || format!("{name}, generator {g}, hour {h}"),
                            (-result.rho[[g, h]]).max(0.0),
                        );
                    }
                }
            }
        }
    }

    // --- stationarity + complementarity with the implied reduced costs ---
    for g in 0..m {
        let gen = &instance.generators[g];
        for h in 0..n {
            // ∂/∂x: c_var − λ + ρ = β_x >= 0, β_x·x = 0
            let beta = gen.var_cost[h] - result.lambda[h] + result.rho[[g, h]];
            a.residual(
                KktKind::Stationarity,
                || format!("reduced cost of dispatch, generator {g}, hour {h}"),
                (-beta).max(0.0),
            );
            a.product(
                || format!("dispatch × reduced cost, generator {g}, hour {h}"),
                beta,
                result.x[[g, h]],
            );
            // rent × headroom
            let slack = gen.availability[h] * result.z[g] - result.x[[g, h]];
            a.product(
                || format!("capacity rent × headroom, generator {g}, hour {h}"),
                result.rho[[g, h]],
                slack,
            );
        }
        // ∂/∂z: c_cap − Σ_h a·ρ = β_z >= 0, β_z·z = 0
        let beta: f64 =
            gen.cap_cost - (0..n).map(|h| gen.availability[h] * result.rho[[g, h]]).sum::<f64>();
        a.residual(
            KktKind::Stationarity,
            || format!("reduced cost of capacity, generator {g}"),
            (-beta).max(0.0),
        );
        a.product(|| format!("capacity × reduced cost, generator {g}"), beta, result.z[g]);
    }

    // ∂/∂t and ∂/∂u
    let beta_t: f64 = instance.storage.door_cost
        - (0..n).map(|h| result.delta_charge[h] + result.delta_discharge[h]).sum::<f64>();
    a.residual(KktKind::Stationarity, || "reduced cost of door".into(), (-beta_t).max(0.0));
    a.product(|| "door × reduced cost".into(), beta_t, result.door);
    let beta_u: f64 = instance.storage.room_cost - result.tau.iter().sum::<f64>();
    a.residual(KktKind::Stationarity, || "reduced cost of room".into(), (-beta_u).max(0.0));
    a.product(|| "room × reduced cost".into(), beta_u, result.room);

    for h in 0..n {
        // ∂/∂r (free): λ + δc − δd − Ω = 0 exactly
        let resid =
            result.lambda[h] + result.delta_charge[h] - result.delta_discharge[h] - result.omega[h];
        a.residual(
            KktKind::Stationarity,
            || format!("stationarity of storage flow, hour {h}"),
            resid.abs(),
        );

        // ∂/∂s: Ω_h − Ω_next + τ = β_s >= 0, β_s·s = 0
        // (open grid: the last hour has no successor term)
        let omega_next = if h + 1 < n {
            result.omega[h + 1]
        } else if cyclic {
            result.omega[0]
        } else {
            0.0
        };
        let beta_s = result.omega[h] - omega_next + result.tau[h];
        a.residual(
            KktKind::Stationarity,
            || format!("reduced cost of state of charge, hour {h}"),
            (-beta_s).max(0.0),
        );
        a.product(|| format!("state of charge × reduced cost, hour {h}"), beta_s, result.soc[h]);

        // door rents × slack on both sides
        a.product(
            || format!("door rent (charge) × slack, hour {h}"),
            result.delta_charge[h],
            result.door - result.charge[h],
        );
        a.product(
            || format!("door rent (discharge) × slack, hour {h}"),
            result.delta_discharge[h],
            result.door + result.charge[h],
        );
        a.product(
            || format!("room rent × slack, hour {h}"),
            result.tau[h],
            result.room - result.soc[h],
        );
    }

    Ok(KktReport {
        tolerance: eps,
        max_residual: a.max_residual,
        checks: a.checks,
        violations: a.violations,
    })
}

fn check_shapes(result: &SolveResult, m: usize, n: usize) -> Result<(), AuditError> {
    let dims = [
        ("x", result.x.dim() == (m, n)),
        ("rho", result.rho.dim() == (m, n)),
        ("z", result.z.len() == m),
        ("charge", result.charge.len() == n),
        ("soc", result.soc.len() == n),
        ("lambda", result.lambda.len() == n),
        ("omega", result.omega.len() == n),
        ("delta_charge", result.delta_charge.len() == n),
        ("delta_discharge", result.delta_discharge.len() == n),
        ("tau", result.tau.len() == n),
    ];
    for (name, ok) in dims {
        if !ok {
            return Err(AuditError::ShapeMismatch(format!(
                "field '{name}' does not have instance dimensions (m={m}, n={n})"
            )));
        }
    }
    Ok(())
}
