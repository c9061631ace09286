//! Greenfield electricity capacity planning with energy storage.
//!
//! The core object is a linear program that co-optimizes generator capacity,
//! hourly dispatch, and a single storage resource (power "door" and energy
//! "room" are sized separately) against an hourly demand series. Around that
//! core the crate provides:
//!
//! - temporal aggregation of the hourly model onto weighted system states
//!   connected by a transition matrix, with several construction strategies
//!   (representative days, clustered system states, adjacent segments) and a
//!   checker/compressor for the conditions under which aggregation is exact
//!   ([`agg`]),
//! - solution of the aggregated model and expansion of its primal/dual
//!   solution back to hours ([`agg::solve_aggregated`], [`agg::expand_solution`]),
//! - dual-based storage valuation: scarcity decomposition of hourly prices,
//!   storage-cycle decomposition of the state-of-charge dual, and the split of
//!   storage profit into energy and capacity components ([`value`]),
//! - selection of extreme days as a covering of normalized feature-space
//!   vertices ([`extreme`]),
//! - a consensus ADMM decomposition of the planning LP into per-chunk dispatch
//!   blocks plus a capacity block ([`admm`]),
//! - synthetic instance generators and a comparison harness that runs several
//!   planning methods on one instance and tabulates capacity/value outcomes
//!   ([`synth`], [`scenario`]).
//!
//! Solves go through a small pluggable interface ([`lp::ProgramSolver`]); the
//! default backend is the pure-Rust interior-point solver Clarabel. All dual
//! conventions are documented on [`solve::SolveResult`].

// Index loops are kept wherever several parallel arrays share an hour/state
// subscript; iterator chains there would bury the formulas.
#![allow(clippy::needless_range_loop)]

pub mod admm;
pub mod agg;
pub mod extreme;
pub mod kkt;
pub mod lp;
pub mod model;
pub mod report;
pub mod scenario;
pub mod solve;
pub mod synth;
pub mod value;

pub mod tol;

pub use model::{GeneratorSpec, ModelError, StorageSpec, SystemInstance, TimeGrid};
pub use solve::{solve_core, SolveError, SolveResult};
