//! Numeric tolerances used across the crate.
//!
//! Everything that compares floats against a model-level contract uses one of
//! these constants so the meaning of "equal" is uniform and greppable. The
//! solver's own convergence tolerances are tighter (see [`crate::lp::clarabel`])
//! precisely so that checks at these levels are comfortably attainable.

/// Absolute feasibility tolerance for primal constraint residuals.
pub const FEAS: f64 = 1e-6;

/// Absolute tolerance for KKT residuals (dual feasibility, stationarity,
/// complementary slackness) in [`crate::kkt::audit_kkt`].
pub const KKT: f64 = 1e-6;

/// Relative duality-gap tolerance: a solve is accepted when
/// `|primal - dual| <= GAP_REL * (1 + |primal|)`.
pub const GAP_REL: f64 = 1e-8;

/// Relative tolerance for the storage valuation identities, applied as
/// `ID_REL * max(1, c_room, c_door)`.
pub const ID_REL: f64 = 1e-5;

/// Row-stochasticity tolerance for transition matrices.
pub const ROW_SUM: f64 = 1e-9;

/// Scale for the valuation identity checks on a given instance: identities
/// relate sums of duals to the door/room capacity costs, so the natural scale
/// is the larger of those costs (floored at 1 to keep the check meaningful on
/// near-free storage).
pub fn identity_scale(door_cost: f64, room_cost: f64) -> f64 {
    1.0_f64.max(door_cost).max(room_cost)
}
