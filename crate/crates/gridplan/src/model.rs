//! Problem data for the planning model.
//!
//! A [`SystemInstance`] is a self-contained description of one greenfield
//! planning problem: an hourly demand series, a set of candidate generators
//! (each with capacity cost, per-hour variable cost, and an availability
//! profile), and one storage resource whose power rating ("door") and energy
//! capacity ("room") are priced separately. Instances are plain data with
//! public fields; [`SystemInstance::validate`] checks the structural
//! invariants once, and the solve/aggregation entry points call it so that
//! malformed data fails fast with a description instead of a bad LP.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The time axis of an instance: number of hours and the storage boundary
/// condition. `cyclic = true` ties the state of charge at the end of the
/// horizon back to the start (`s_0 = s_n`), which is the right choice for
/// representative periods; `cyclic = false` starts the horizon empty
/// (`s_0 = 0`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub n_hours: usize,
    pub cyclic: bool,
}

impl TimeGrid {
    pub fn cyclic(n_hours: usize) -> Self {
        TimeGrid { n_hours, cyclic: true }
    }

    pub fn open(n_hours: usize) -> Self {
        TimeGrid { n_hours, cyclic: false }
    }
}

/// One candidate generator. `var_cost` and `availability` are per-hour series
/// of the same length as the demand series; availability is a capacity factor
/// in `[0, 1]` multiplying the built capacity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub name: String,
    /// Variable (dispatch) cost per unit of energy, one entry per hour.
    pub var_cost: Vec<f64>,
    /// Annualized cost per unit of built capacity.
    pub cap_cost: f64,
    /// Fraction of built capacity usable in each hour, in `[0, 1]`.
    pub availability: Vec<f64>,
}

impl GeneratorSpec {
    /// Convenience constructor for a generator with a flat variable cost.
    pub fn flat(name: &str, var_cost: f64, cap_cost: f64, availability: Vec<f64>) -> Self {
        GeneratorSpec {
            name: name.to_string(),
            var_cost: vec![var_cost; availability.len()],
            cap_cost,
            availability,
        }
    }
}

/// Storage cost data. The power rating bounds charge and discharge symmetrically
/// (one "door" both ways); the energy capacity bounds the state of charge
/// ("room"). Efficiency losses are out of scope, which is what makes the
/// dual identities in [`crate::value`] exact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StorageSpec {
    /// Annualized cost per unit of power rating.
    pub door_cost: f64,
    /// Annualized cost per unit of energy capacity.
    pub room_cost: f64,
}

/// A complete planning problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemInstance {
    pub grid: TimeGrid,
    /// Demand per hour, nonnegative.
    pub demand: Vec<f64>,
    pub generators: Vec<GeneratorSpec>,
    pub storage: StorageSpec,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("{series} has {got} entries, expected {expected} (one per hour)")]
    SeriesLength { series: String, expected: usize, got: usize },
    #[error("{what} contains a non-finite value at index {index}")]
    NonFinite { what: String, index: usize },
    #[error("{what} is negative at index {index} ({value})")]
    Negative { what: String, index: usize, value: f64 },
    #[error("availability of generator '{name}' exceeds 1 at hour {hour} ({value})")]
    AvailabilityAboveOne { name: String, hour: usize, value: f64 },
    #[error("instance has no hours")]
    EmptyGrid,
    #[error("instance has no generators")]
    NoGenerators,
    #[error("{context}: dimension mismatch, {detail}")]
    DimensionMismatch { context: String, detail: String },
}

impl SystemInstance {
    pub fn n_hours(&self) -> usize {
        self.grid.n_hours
    }

    pub fn n_generators(&self) -> usize {
        self.generators.len()
    }

    /// Total variable + capacity cost of a fully specified primal point.
    /// Panics on dimension mismatch; callers pass solver output.
    pub fn objective_value(
        &self,
        x: &ndarray::Array2<f64>,
        z: &[f64],
        door: f64,
        room: f64,
    ) -> f64 {
        let mut total = self.storage.door_cost * door + self.storage.room_cost * room;
        for (g, spec) in self.generators.iter().enumerate() {
            total += spec.cap_cost * z[g];
            for h in 0..self.n_hours() {
                total += spec.var_cost[h] * x[[g, h]];
            }
        }
        total
    }

    /// Check structural invariants: series lengths match the grid, all data
    /// finite, demand/costs/availabilities nonnegative, availability <= 1.
    pub fn validate(&self) -> Result<(), ModelError> {
        let n = self.grid.n_hours;
        if n == 0 {
            return Err(ModelError::EmptyGrid);
        }
        if self.generators.is_empty() {
            return Err(ModelError::NoGenerators);
        }
        check_series("demand", &self.demand, n)?;
        check_nonneg("demand", &self.demand)?;
        for g in &self.generators {
            check_series(&format!("var_cost of '{}'", g.name), &g.var_cost, n)?;
            check_series(&format!("availability of '{}'", g.name), &g.availability, n)?;
            check_nonneg(&format!("availability of '{}'", g.name), &g.availability)?;
            if !g.cap_cost.is_finite() {
                return Err(ModelError::NonFinite {
                    what: format!("cap_cost of '{}'", g.name),
                    index: 0,
                });
            }
            for (h, &a) in g.availability.iter().enumerate() {
                if a > 1.0 {
                    return Err(ModelError::AvailabilityAboveOne {
                        name: g.name.clone(),
                        hour: h,
                        value: a,
                    });
                }
            }
        }
        for (what, v) in
            [("door_cost", self.storage.door_cost), ("room_cost", self.storage.room_cost)]
        {
            if !v.is_finite() {
                return Err(ModelError::NonFinite { what: what.into(), index: 0 });
            }
            if v < 0.0 {
                return Err(ModelError::Negative { what: what.into(), index: 0, value: v });
            }
        }
        Ok(())
    }
}

fn check_series(series: &str, data: &[f64], expected: usize) -> Result<(), ModelError> {
    if data.len() != expected {
        return Err(ModelError::SeriesLength {
            series: series.to_string(),
            expected,
            got: data.len(),
        });
    }
    if let Some(i) = data.iter().position(|v| !v.is_finite()) {
        return Err(ModelError::NonFinite { what: series.to_string(), index: i });
    }
    Ok(())
}

fn check_nonneg(what: &str, data: &[f64]) -> Result<(), ModelError> {
    if let Some(i) = data.iter().position(|&v| v < 0.0) {
        return Err(ModelError::Negative { what: what.to_string(), index: i, value: data[i] });
    }
    Ok(())
}
