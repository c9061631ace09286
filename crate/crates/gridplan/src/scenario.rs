//! Scenario files and the method-comparison harness.
//!
//! A [`Scenario`] names an instance (a JSON file or a synthetic generator
//! call), a list of solution methods to run on it, an optional carbon price,
//! and an optional storage-cost sweep. [`run_comparison`] executes every
//! method on the *same* instance and collects, per method: the built storage
//! (room and door), the objective, the dual-based energy/capacity value
//! split, and wall-clock seconds. Failures are captured per row so one
//! diverging method doesn't take down the table.
//!
//! Aggregation methods report their own model's objective — the estimate a
//! planner relying on that aggregation would act on — not the cost of the
//! expanded plan under true hourly data. Comparing those estimates against
//! the full-resolution row is the point of the harness; the expansion is
//! still used to price storage (the value split needs hourly prices).
//!
//! The carbon price is a pure variable-cost adder, `c^x_{g,h} + p·e_g`, with
//! per-generator emission rates supplied alongside the price; the core model
//! is untouched.
//!
//! The sweep re-solves each method over a list of room-cost points (all else
//! fixed) and emits `(room cost, optimal room)` pairs — the marginal-value
//! curve of storage as each temporal representation sees it. Aggregations
//! are clustered once and re-priced per point, since clustering never looks
//! at storage costs.

use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::admm::{admm_solve, AdmmConfig, BlockScheme};
use crate::agg::{
    adjacent_clusters, aggregate_identity, expand_solution, representative_days, solve_aggregated,
    system_states, Aggregation, DayLinkage, DaySelection,
};
use crate::model::{GeneratorSpec, ModelError, StorageSpec, SystemInstance, TimeGrid};
use crate::solve::solve_core;
use crate::synth::{generate_synthetic, SynthError, SyntheticProfile};
use crate::value::{energy_capacity_split, energy_capacity_split_unchecked};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InstanceSource {
    File { path: String },
    Synthetic { profile: SyntheticProfile, n_hours: usize, regions: usize, seed: u64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum MethodSpec {
    /// Direct hourly solve; the comparison baseline.
    Full,
    /// The identity aggregation run through the aggregated pipeline. Lossless
    /// by construction, so its row doubles as an equivalence check.
    Identity,
    RepDays {
        k: usize,
        selection: DaySelection,
        linkage: DayLinkage,
    },
    SystemStates {
        k: usize,
    },
    Adjacent {
        k: usize,
    },
    Admm {
        #[serde(flatten)]
        config: AdmmConfig,
    },
}

impl MethodSpec {
    pub fn label(&self) -> String {
        match self {
            MethodSpec::Full => "full".into(),
            MethodSpec::Identity => "identity".into(),
            MethodSpec::RepDays { k, selection, linkage } => {
                let sel = match selection {
                    DaySelection::KmeansMedoid => "kmeans-medoid",
                    DaySelection::PeakMedian => "peak-median",
                };
                let link = match linkage {
                    DayLinkage::Isolated => "isolated",
                    DayLinkage::Chained => "chained",
                };
                format!("rep-days(k={k}, {sel}, {link})")
            }
            MethodSpec::SystemStates { k } => format!("system-states(k={k})"),
            MethodSpec::Adjacent { k } => format!("adjacent(k={k})"),
            MethodSpec::Admm { config } => {
                let blocks = match config.partition {
                    BlockScheme::Single => "single",
                    BlockScheme::PerHour => "per-hour",
                    BlockScheme::PerDay => "per-day",
                    BlockScheme::PerWeek => "per-week",
                };
                format!("admm({blocks}, beta={})", config.beta)
            }
        }
    }
}

/// Carbon price `p` with one emission rate per generator, in instance order;
/// enters dispatch costs as `c^x_{g,h} + p·e_g`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CarbonPrice {
    pub price: f64,
    pub emission_rates: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub source: InstanceSource,
    pub methods: Vec<MethodSpec>,
    #[serde(default)]
    pub carbon_price: Option<CarbonPrice>,
    /// Room-cost points for the marginal-value sweep.
    #[serde(default)]
    pub sweep: Option<Vec<f64>>,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    // display stays cause-free: callers print the full chain, so embedding
    // {source} here would repeat the underlying message
    #[error("cannot read {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse {path}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.methods.is_empty() {
            return Err(ScenarioError::Invalid("no methods to compare".into()));
        }
        if let Some(points) = &self.sweep {
            if points.iter().any(|&c| c.is_nan() || c <= 0.0) {
                return Err(ScenarioError::Invalid("sweep points must be positive".into()));
            }
        }
        if let Some(cp) = &self.carbon_price {
            if !cp.price.is_finite() || cp.emission_rates.iter().any(|e| !e.is_finite()) {
                return Err(ScenarioError::Invalid("carbon price data must be finite".into()));
            }
        }
        Ok(())
    }

    /// Load or generate the instance and apply the carbon-price adder.
    pub fn materialize(&self) -> Result<SystemInstance, ScenarioError> {
        let mut instance = match &self.source {
            InstanceSource::File { path } => load_instance(path)?,
            InstanceSource::Synthetic { profile, n_hours, regions, seed } => {
                generate_synthetic(*profile, *n_hours, *regions, *seed)?
            }
        };
        if let Some(cp) = &self.carbon_price {
            if cp.emission_rates.len() != instance.n_generators() {
                return Err(ScenarioError::Invalid(format!(
                    "{} emission rates for {} generators",
                    cp.emission_rates.len(),
                    instance.n_generators()
                )));
            }
            for (gen, &rate) in instance.generators.iter_mut().zip(&cp.emission_rates) {
                for c in &mut gen.var_cost {
                    *c += cp.price * rate;
                }
            }
        }
        instance.validate()?;
        Ok(instance)
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|e| ScenarioError::Io { path: path.display().to_string(), source: e })?;
    serde_json::from_str(&text)
        .map_err(|e| ScenarioError::Parse { path: path.display().to_string(), source: e })
}

/// On-disk instance schema: [`SystemInstance`] with scalar-or-series
/// shorthand for per-hour generator data (a scalar broadcasts to the whole
/// horizon; availability defaults to firm).
#[derive(Serialize, Deserialize)]
struct InstanceFile {
    cyclic: bool,
    demand: Vec<f64>,
    generators: Vec<GeneratorFile>,
    storage: StorageSpec,
}

#[derive(Serialize, Deserialize)]
struct GeneratorFile {
    name: String,
    var_cost: ScalarOrSeries,
    cap_cost: f64,
    #[serde(default = "firm")]
    availability: ScalarOrSeries,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ScalarOrSeries {
    Scalar(f64),
    Series(Vec<f64>),
}

fn firm() -> ScalarOrSeries {
    ScalarOrSeries::Scalar(1.0)
}

impl ScalarOrSeries {
    fn broadcast(self, n: usize) -> Vec<f64> {
        match self {
            ScalarOrSeries::Scalar(v) => vec![v; n],
            ScalarOrSeries::Series(v) => v,
        }
    }
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<SystemInstance, ScenarioError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|e| ScenarioError::Io { path: path.display().to_string(), source: e })?;
    let file: InstanceFile = serde_json::from_str(&text)
        .map_err(|e| ScenarioError::Parse { path: path.display().to_string(), source: e })?;
    let n = file.demand.len();
    let instance = SystemInstance {
        grid: if file.cyclic { TimeGrid::cyclic(n) } else { TimeGrid::open(n) },
        demand: file.demand,
        generators: file
            .generators
            .into_iter()
            .map(|g| GeneratorSpec {
                name: g.name,
                var_cost: g.var_cost.broadcast(n),
                cap_cost: g.cap_cost,
                availability: g.availability.broadcast(n),
            })
            .collect(),
        storage: file.storage,
    };
    instance.validate()?;
    Ok(instance)
}

pub fn save_instance(
    path: impl AsRef<Path>,
    instance: &SystemInstance,
) -> Result<(), ScenarioError> {
    let path = path.as_ref();
    let file = InstanceFile {
        cyclic: instance.grid.cyclic,
        demand: instance.demand.clone(),
        generators: instance
            .generators
            .iter()
            .map(|g| GeneratorFile {
                name: g.name.clone(),
                var_cost: ScalarOrSeries::Series(g.var_cost.clone()),
                cap_cost: g.cap_cost,
                availability: ScalarOrSeries::Series(g.availability.clone()),
            })
            .collect(),
        storage: instance.storage,
    };
    let text = serde_json::to_string_pretty(&file).expect("instance serializes");
    fs::write(path, text)
        .map_err(|e| ScenarioError::Io { path: path.display().to_string(), source: e })
}

/// One method's results on the scenario instance, absolute.
#[derive(Debug, Clone, Serialize)]
pub struct MethodOutcome {
    pub room: f64,
    pub door: f64,
    pub objective: f64,
    pub energy_value: f64,
    pub capacity_value: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodRow {
    pub label: String,
    pub outcome: Result<MethodOutcome, String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub room_cost: f64,
    pub optimal_room: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepCurve {
    pub label: String,
    pub points: Result<Vec<SweepPoint>, String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub rows: Vec<MethodRow>,
    /// Index of the comparison baseline: the first successful full-resolution
    /// row, when there is one.
    pub baseline: Option<usize>,
    pub sweep: Vec<SweepCurve>,
}

impl ComparisonReport {
    pub fn baseline_outcome(&self) -> Option<&MethodOutcome> {
        self.baseline.and_then(|i| self.rows[i].outcome.as_ref().ok())
    }
}

/// How a method turns an instance into a plan; aggregations are prepared
/// once so sweeps don't re-cluster.
enum Prepared {
    Direct,
    Aggregated(Aggregation),
    Decomposed(AdmmConfig),
}

fn prepare(instance: &SystemInstance, spec: &MethodSpec) -> Result<Prepared, String> {
    let agg = match spec {
        MethodSpec::Full => return Ok(Prepared::Direct),
        MethodSpec::Admm { config } => return Ok(Prepared::Decomposed(config.clone())),
        MethodSpec::Identity => aggregate_identity(instance),
        MethodSpec::RepDays { k, selection, linkage } => {
            representative_days(instance, *k, *selection, *linkage)
        }
        MethodSpec::SystemStates { k } => system_states(instance, *k),
        MethodSpec::Adjacent { k } => adjacent_clusters(instance, *k),
    };
    agg.map(Prepared::Aggregated).map_err(|e| e.to_string())
}

fn run_method(instance: &SystemInstance, spec: &MethodSpec) -> Result<MethodOutcome, String> {
    let started = Instant::now();
    let prepared = prepare(instance, spec)?;
    let outcome = match &prepared {
        Prepared::Direct => {
            let result = solve_core(instance).map_err(|e| e.to_string())?;
            let (energy, capacity) =
                energy_capacity_split(instance, &result).map_err(|e| e.to_string())?;
            MethodOutcome {
                room: result.room,
                door: result.door,
                objective: result.objective,
                energy_value: energy,
                capacity_value: capacity,
                seconds: 0.0,
            }
        }
        Prepared::Aggregated(agg) => {
            let agg_sol = solve_aggregated(instance, agg).map_err(|e| e.to_string())?;
            let expanded = expand_solution(instance, agg, &agg_sol).map_err(|e| e.to_string())?;
            let (energy, capacity) = energy_capacity_split_unchecked(instance, &expanded);
            MethodOutcome {
                room: agg_sol.room,
                door: agg_sol.door,
                objective: agg_sol.objective,
                energy_value: energy,
                capacity_value: capacity,
                seconds: 0.0,
            }
        }
        Prepared::Decomposed(cfg) => {
            let (result, trace) = admm_solve(instance, cfg).map_err(|e| e.to_string())?;
            if !trace.converged {
                let last = trace.iterations.last().expect("at least one iteration");
                return Err(format!(
                    "no consensus after {} iterations (primal {:.1e}, dual {:.1e})",
                    last.iter, last.primal_residual, last.dual_residual
                ));
            }
            let (energy, capacity) = energy_capacity_split_unchecked(instance, &result);
            MethodOutcome {
                room: result.room,
                door: result.door,
                objective: result.objective,
                energy_value: energy,
                capacity_value: capacity,
                seconds: 0.0,
            }
        }
    };
    Ok(MethodOutcome { seconds: started.elapsed().as_secs_f64(), ..outcome })
}

/// Optimal room under the prepared method with the room cost overridden.
fn sweep_room(
    instance: &SystemInstance,
    prepared: &Prepared,
    room_cost: f64,
) -> Result<f64, String> {
    let mut priced = instance.clone();
    priced.storage.room_cost = room_cost;
    match prepared {
        Prepared::Direct => solve_core(&priced).map(|r| r.room).map_err(|e| e.to_string()),
        Prepared::Aggregated(agg) => {
            solve_aggregated(&priced, agg).map(|r| r.room).map_err(|e| e.to_string())
        }
        Prepared::Decomposed(cfg) => {
            let (result, trace) = admm_solve(&priced, cfg).map_err(|e| e.to_string())?;
            if !trace.converged {
                return Err(format!(
                    "no consensus within {} iterations at room cost {room_cost}",
                    cfg.max_iters
                ));
            }
            Ok(result.room)
        }
    }
}

fn sweep_curve(
    instance: &SystemInstance,
    spec: &MethodSpec,
    points: &[f64],
) -> Result<Vec<SweepPoint>, String> {
    let prepared = prepare(instance, spec)?;
    points
        .iter()
        .map(|&room_cost| {
            sweep_room(instance, &prepared, room_cost)
                .map(|optimal_room| SweepPoint { room_cost, optimal_room })
        })
        .collect()
}

/// Run every method on the scenario instance; rows run concurrently and
/// failures are captured per row. A sweep, when present, produces one curve
/// per method over the given room-cost points.
pub fn run_comparison(scenario: &Scenario) -> Result<ComparisonReport, ScenarioError> {
    scenario.validate()?;
    let instance = scenario.materialize()?;

    let rows: Vec<MethodRow> = scenario
        .methods
        .par_iter()
        .map(|spec| MethodRow { label: spec.label(), outcome: run_method(&instance, spec) })
        .collect();
    let baseline = scenario
        .methods
        .iter()
        .zip(&rows)
        .position(|(spec, row)| matches!(spec, MethodSpec::Full) && row.outcome.is_ok());

    let sweep = match &scenario.sweep {
        Some(points) => scenario
            .methods
            .par_iter()
            .map(|spec| SweepCurve {
                label: spec.label(),
                points: sweep_curve(&instance, spec, points),
            })
            .collect(),
        None => Vec::new(),
    };

    Ok(ComparisonReport { rows, baseline, sweep })
}
