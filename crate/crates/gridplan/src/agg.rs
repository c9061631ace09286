//! Temporal aggregation: hours → weighted system states.
//!
//! An [`Aggregation`] maps each hour to one of `S` states and equips the
//! states with weights `w` (member-hour counts), run lengths `q` (hours spent
//! in the state per visit), a row-stochastic successor matrix `P`, and
//! per-state demand/availability profiles. The aggregated planning model
//! ([`solve_aggregated`]) replaces `n` hours by `S` states: variable costs are
//! weighted by `w`, and the storage balance couples a state's end-of-run
//! charge level to its predecessors through the columns of `P`:
//!
//! ```text
//! s̄_σ = Σ_j P[j,σ]·s̄_j + q_σ·r̄_σ
//! ```
//!
//! Under the identity aggregation (`P` the shifted identity, `w = q = 1`)
//! this is exactly the hourly model. Aggregation is exact ("lossless") more
//! generally when member hours are indistinguishable, transitions are
//! deterministic, and visits have uniform length — [`check_lossless`] tests
//! those conditions and [`compress_lossless`] constructs the coarsest such
//! aggregation a profile admits (up to a tolerance).
//!
//! Construction strategies for lossy compression live in submodules:
//! [`representative_days`], [`system_states`], [`adjacent_clusters`].
//!
//! All aggregation machinery requires a cyclic grid: a row-stochastic
//! successor matrix cannot express "the last state has no successor", and
//! representative periods are cyclic by nature.

mod adjacent;
mod cluster;
mod lossless;
mod rep_days;
mod solve;
mod states;

pub use adjacent::adjacent_clusters;
pub use lossless::{check_lossless, compress_lossless, LosslessCondition, LosslessReport};
pub use rep_days::{representative_days, DayLinkage, DaySelection};
pub use solve::{
    expand_solution, omega_transition_sum, solve_aggregated, solve_aggregated_with, AggSolveResult,
};
pub use states::system_states;

use thiserror::Error;

use crate::model::{ModelError, SystemInstance};
use crate::solve::SolveError;
use crate::tol;

#[derive(Debug, Error)]
pub enum AggError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("aggregation requires a cyclic grid (open horizons have no successor structure)")]
    OpenGrid,
    #[error("invalid aggregation: {0}")]
    Invalid(String),
    #[error("clustering failed: {0}")]
    Clustering(String),
}

/// Row-sparse row-stochastic successor matrix. Row `s` holds the probability
/// of each successor state of `s`; stored sparse because lossless-style
/// aggregations are permutations (one entry per row) and `S` can be as large
/// as the hour count itself.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    rows: Vec<Vec<(usize, f64)>>,
}

impl TransitionMatrix {
    pub fn zeros(n_states: usize) -> Self {
        TransitionMatrix { rows: vec![Vec::new(); n_states] }
    }

    /// The cyclic successor chain: state `s` goes to `s+1`, the last wraps.
    pub fn shifted_identity(n_states: usize) -> Self {
        let rows = (0..n_states).map(|s| vec![((s + 1) % n_states, 1.0)]).collect();
        TransitionMatrix { rows }
    }

    pub fn n_states(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, s: usize) -> &[(usize, f64)] {
        &self.rows[s]
    }

    /// Add `p` to the entry (from, to), creating it if absent.
    pub fn add(&mut self, from: usize, to: usize, p: f64) {
        match self.rows[from].iter_mut().find(|(j, _)| *j == to) {
            Some((_, v)) => *v += p,
            None => self.rows[from].push((to, p)),
        }
    }

    pub fn entry(&self, from: usize, to: usize) -> f64 {
        self.rows[from].iter().find(|(j, _)| *j == to).map_or(0.0, |&(_, v)| v)
    }

    /// `p_s · v`, the expected value of `v` over the successors of `s`.
    pub fn row_dot(&self, s: usize, v: &[f64]) -> f64 {
        self.rows[s].iter().map(|&(j, p)| p * v[j]).sum()
    }

    pub fn max_row_sum_deviation(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| (r.iter().map(|&(_, p)| p).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn min_entry(&self) -> f64 {
        self.rows.iter().flatten().map(|&(_, p)| p).fold(0.0_f64, f64::min)
    }

    /// Normalize every row to sum 1; rows with no mass get a self-loop.
    pub fn normalize_rows(&mut self) {
        for (s, row) in self.rows.iter_mut().enumerate() {
            let sum: f64 = row.iter().map(|&(_, p)| p).sum();
            if sum > 0.0 {
                for (_, p) in row.iter_mut() {
                    *p /= sum;
                }
            } else {
                row.push((s, 1.0));
            }
        }
    }

    /// If row `s` is exactly one entry of probability ~1, that successor.
    pub fn sole_successor(&self, s: usize) -> Option<usize> {
        match self.rows[s].as_slice() {
            [(j, p)] if (p - 1.0).abs() <= tol::ROW_SUM => Some(*j),
            _ => None,
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.n_states();
        let mut dense = vec![vec![0.0; n]; n];
        for (s, row) in self.rows.iter().enumerate() {
            for &(j, p) in row {
                dense[s][j] += p;
            }
        }
        dense
    }

    pub fn from_dense(dense: &[Vec<f64>]) -> Result<Self, AggError> {
        let n = dense.len();
        if dense.iter().any(|r| r.len() != n) {
            return Err(AggError::Invalid("transition matrix is not square".into()));
        }
        let mut t = TransitionMatrix::zeros(n);
        for (s, row) in dense.iter().enumerate() {
            for (j, &p) in row.iter().enumerate() {
                if p != 0.0 {
                    t.add(s, j, p);
                }
            }
        }
        Ok(t)
    }
}

/// Per-state model data: what the aggregated LP sees instead of hourly series.
#[derive(Debug, Clone, PartialEq)]
pub struct StateProfiles {
    pub demand: Vec<f64>,
    /// `availability[g][s]` per generator and state.
    pub availability: Vec<Vec<f64>>,
}

/// A complete hour→state aggregation; see module docs for the semantics of
/// each field. Constructors in this module guarantee [`Aggregation::validate`]
/// passes; hand-built ones should be validated before use.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregation {
    /// State of each hour (`γ`), length `n`.
    pub gamma: Vec<usize>,
    /// Member-hour count per state (`w`).
    pub w: Vec<f64>,
    /// Hours per visit of the state (`q`).
    pub q: Vec<f64>,
    /// Row-stochastic successor matrix (`P`).
    pub p: TransitionMatrix,
    pub profiles: StateProfiles,
}

impl Aggregation {
    pub fn n_states(&self) -> usize {
        self.w.len()
    }

    pub fn n_hours(&self) -> usize {
        self.gamma.len()
    }

    /// Hours assigned to each state.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut members = vec![Vec::new(); self.n_states()];
        for (h, &s) in self.gamma.iter().enumerate() {
            members[s].push(h);
        }
        members
    }

    /// Structural invariants: shapes line up with the instance, every hour
    /// maps to a real state, every state is inhabited with `w` equal to its
    /// member count, `q >= 1`, and `P` is row-stochastic with nonnegative
    /// entries (within [`tol::ROW_SUM`]).
    pub fn validate(&self, instance: &SystemInstance) -> Result<(), AggError> {
        let n = instance.n_hours();
        let m = instance.n_generators();
        let s_count = self.n_states();
        if self.gamma.len() != n {
            return Err(AggError::Invalid(format!(
                "gamma has {} hours, instance has {n}",
                self.gamma.len()
            )));
        }
        if self.q.len() != s_count || self.p.n_states() != s_count {
            return Err(AggError::Invalid("w, q, P sizes disagree".into()));
        }
        if self.profiles.demand.len() != s_count
            || self.profiles.availability.len() != m
            || self.profiles.availability.iter().any(|a| a.len() != s_count)
        {
            return Err(AggError::Invalid("profile shapes do not match states/generators".into()));
        }
        if let Some(&bad) = self.gamma.iter().find(|&&s| s >= s_count) {
            return Err(AggError::Invalid(format!("gamma refers to missing state {bad}")));
        }
        let mut count = vec![0usize; s_count];
        for &s in &self.gamma {
            count[s] += 1;
        }
        for s in 0..s_count {
            if count[s] == 0 {
                return Err(AggError::Invalid(format!("state {s} has no member hours")));
            }
            if (self.w[s] - count[s] as f64).abs() > tol::ROW_SUM {
                return Err(AggError::Invalid(format!(
                    "w[{s}] = {} but state has {} member hours",
                    self.w[s], count[s]
                )));
            }
            if self.q[s] < 1.0 - tol::ROW_SUM {
                return Err(AggError::Invalid(format!("q[{s}] = {} < 1", self.q[s])));
            }
        }
        if self.p.min_entry() < -tol::ROW_SUM {
            return Err(AggError::Invalid("P has a negative entry".into()));
        }
        let dev = self.p.max_row_sum_deviation();
        if dev > tol::ROW_SUM {
            return Err(AggError::Invalid(format!("P row sums deviate from 1 by {dev:.3e}")));
        }
        Ok(())
    }

    /// Mean variable cost per generator and state over member hours (exact
    /// when members agree, which is the lossless case).
    pub(crate) fn state_var_cost(&self, instance: &SystemInstance) -> Vec<Vec<f64>> {
        let members = self.members();
        instance
            .generators
            .iter()
            .map(|gen| {
                members
                    .iter()
                    .map(|hours| mean_of(hours.iter().map(|&h| gen.var_cost[h])))
                    .collect()
            })
            .collect()
    }
}

/// Mean that returns the exact common value when all inputs are identical,
/// so zero-tolerance lossless checks are not defeated by rounding.
pub(crate) fn mean_of(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let mut iter = values.clone();
    let first = iter.next().expect("mean of empty set");
    if iter.all(|v| v == first) {
        return first;
    }
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    sum / count as f64
}

/// Maximal runs of equal values in `gamma`, cyclically: a run touching both
/// ends is reported once. Returns `(state, start_hour, length)` in
/// chronological order of run start (the wrapped run, if any, comes last).
pub(crate) fn cyclic_runs(gamma: &[usize]) -> Vec<(usize, usize, usize)> {
    let n = gamma.len();
    if n == 0 {
        return Vec::new();
    }
    // rotate to a run boundary; if there is none the whole cycle is one run
    let Some(first_change) = (0..n).find(|&h| gamma[h] != gamma[(h + n - 1) % n]) else {
        return vec![(gamma[0], 0, n)];
    };
    let mut runs = Vec::new();
    let mut start = first_change;
    let mut len = 1;
    for i in 1..n {
        let h = (first_change + i) % n;
        if gamma[h] == gamma[start] {
            len += 1;
        } else {
            runs.push((gamma[start], start, len));
            start = h;
            len = 1;
        }
    }
    runs.push((gamma[start], start, len));
    runs.sort_by_key(|&(_, start, _)| start);
    runs
}

/// The trivial exact aggregation: every hour is its own state, `P` the cyclic
/// shift, profiles the raw hourly data.
pub fn aggregate_identity(instance: &SystemInstance) -> Result<Aggregation, AggError> {
    instance.validate()?;
    if !instance.grid.cyclic {
        return Err(AggError::OpenGrid);
    }
    let n = instance.n_hours();
    Ok(Aggregation {
        gamma: (0..n).collect(),
        w: vec![1.0; n],
        q: vec![1.0; n],
        p: TransitionMatrix::shifted_identity(n),
        profiles: StateProfiles {
            demand: instance.demand.clone(),
            availability: instance.generators.iter().map(|g| g.availability.clone()).collect(),
        },
    })
}
