//! Command-line front end: solve instances, build aggregations, run method
//! comparisons, pick extreme days, price storage, and drive the ADMM
//! decomposition. Exits nonzero on infeasibility, numerical failure, or an
//! ADMM run that hits its iteration budget without consensus.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use gridplan::admm::{admm_solve, AdmmConfig, BlockScheme};
use gridplan::agg::{
    adjacent_clusters, aggregate_identity, check_lossless, compress_lossless, expand_solution,
    representative_days, solve_aggregated, system_states, Aggregation, DayLinkage, DaySelection,
};
use gridplan::extreme::{cumulative_days, select_extreme_days, RegionSeries};
use gridplan::kkt::audit_kkt;
use gridplan::report::{comparison_csv, comparison_table, sweep_csv, sweep_table};
use gridplan::scenario::{load_instance, load_scenario, run_comparison, save_instance};
use gridplan::synth::{generate_region_series, generate_synthetic, SyntheticProfile};
use gridplan::value::marginal_values;
use gridplan::{solve_core, SystemInstance};

#[derive(Parser)]
#[command(
    name = "gridplan",
    about = "Capacity-planning LP with storage: temporal aggregation, valuation, decomposition",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance at full hourly resolution.
    Solve {
        /// Instance JSON file.
        instance: PathBuf,
        /// Write the full solution (plan and prices) as JSON.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Build a temporal aggregation, solve it, and audit the expansion.
    Aggregate {
        instance: PathBuf,
        #[arg(long, value_enum)]
        method: AggMethod,
        /// Cluster count (rep-days: days; system-states/adjacent: states).
        #[arg(short, long)]
        k: Option<usize>,
        #[arg(long, value_enum, default_value = "kmeans-medoid")]
        selection: SelectionArg,
        #[arg(long, value_enum, default_value = "isolated")]
        linkage: LinkageArg,
        /// Data tolerance for `lossless` compression.
        #[arg(long, default_value_t = 0.0)]
        tol: f64,
        /// Write the expanded hourly solution as JSON.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run a scenario file: every method on the same instance, one table.
    Compare {
        scenario: PathBuf,
        /// Write the comparison table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Write sweep curves as long-form CSV.
        #[arg(long)]
        sweep_csv: Option<PathBuf>,
    },
    /// Select extreme days covering the normalized cumulative-day corners.
    ExtremeDays {
        /// JSON file holding a list of per-region load/wind/solar series.
        regions: PathBuf,
        #[arg(long)]
        radius: f64,
        /// Write vertex assignments as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Solve and report the dual-based storage valuation.
    Valuation {
        instance: PathBuf,
        /// Write the valuation report as JSON.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Solve by consensus decomposition instead of one monolithic LP.
    Admm {
        instance: PathBuf,
        #[arg(long, value_enum, default_value = "day")]
        blocks: BlocksArg,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, default_value_t = 5000)]
        max_iters: usize,
        /// Residual tolerance (applied to both primal and dual).
        #[arg(long, default_value_t = 1e-4)]
        eps: f64,
        /// Write the iteration trace as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Generate a synthetic instance (and optionally its raw region series).
    Synth {
        #[arg(long, value_enum)]
        profile: ProfileArg,
        #[arg(long)]
        hours: usize,
        #[arg(long, default_value_t = 1)]
        regions: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the instance JSON here.
        #[arg(long)]
        output: PathBuf,
        /// Also write the per-region series (extreme-days input) here.
        #[arg(long)]
        regions_output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AggMethod {
    Identity,
    Lossless,
    RepDays,
    SystemStates,
    Adjacent,
}

#[derive(Clone, Copy, ValueEnum)]
enum SelectionArg {
    KmeansMedoid,
    PeakMedian,
}

#[derive(Clone, Copy, ValueEnum)]
enum LinkageArg {
    Isolated,
    Chained,
}

#[derive(Clone, Copy, ValueEnum)]
enum BlocksArg {
    Single,
    Hour,
    Day,
    Week,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Peaky,
    Seasonal,
    AlternatingDays,
    Iid,
}

fn main() -> ExitCode {
    // die quietly when the read side of a pipe goes away (`gridplan … | head`)
    // instead of panicking on the failed print
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Solve { instance, output } => {
            let inst = load_instance(&instance)?;
            let result = solve_core(&inst)?;
            print_plan(&inst, result.objective, &result.z, result.door, result.room);
            if let Some(path) = output {
                write_json(&path, &result)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Aggregate { instance, method, k, selection, linkage, tol, output } => {
            let inst = load_instance(&instance)?;
            let agg = build_aggregation(&inst, method, k, selection, linkage, tol)?;
            let report = check_lossless(&inst, &agg, tol)?;
            let agg_sol = solve_aggregated(&inst, &agg)?;
            let expanded = expand_solution(&inst, &agg, &agg_sol)?;
            let audit = audit_kkt(&inst, &expanded, 1e-6)?;

            println!(
                "{} states for {} hours ({:.1}x compression)",
                agg.n_states(),
                inst.n_hours(),
                inst.n_hours() as f64 / agg.n_states() as f64
            );
            println!("lossless: {}", if report.is_lossless() { "yes" } else { "no" });
            println!("aggregated objective: {:.6}", agg_sol.objective);
            println!("expanded plan cost:   {:.6}", expanded.objective);
            println!(
                "hourly KKT audit:     {}",
                if audit.is_clean() {
                    "clean".to_string()
                } else {
                    format!(
                        "{} violations (worst {:.2e})",
                        audit.violations.len(),
                        audit.max_residual
                    )
                }
            );
            if let Some(path) = output {
                write_json(&path, &expanded)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare { scenario, csv, sweep_csv: sweep_path } => {
            let sc = load_scenario(&scenario)?;
            let report = run_comparison(&sc)?;
            print!("{}", comparison_table(&report));
            let sweep = sweep_table(&report);
            if !sweep.is_empty() {
                println!("\nmarginal-value sweep (optimal room by room cost):");
                print!("{sweep}");
            }
            if let Some(path) = csv {
                fs::write(&path, comparison_csv(&report))
                    .with_context(|| format!("cannot write {}", path.display()))?;
            }
            if let Some(path) = sweep_path {
                fs::write(&path, sweep_csv(&report))
                    .with_context(|| format!("cannot write {}", path.display()))?;
            }
            let any_failed = report.rows.iter().any(|r| r.outcome.is_err())
                || report.sweep.iter().any(|c| c.points.is_err());
            Ok(if any_failed { ExitCode::FAILURE } else { ExitCode::SUCCESS })
        }
        Command::ExtremeDays { regions, radius, csv } => {
            let text = fs::read_to_string(&regions)
                .with_context(|| format!("cannot read {}", regions.display()))?;
            let series: Vec<RegionSeries> = serde_json::from_str(&text)
                .with_context(|| format!("cannot parse {}", regions.display()))?;
            let dayset = cumulative_days(&series)?;
            let cover = select_extreme_days(&dayset, radius)?;

            println!(
                "{} vertices over {} regions, radius {radius}: {} days chosen",
                cover.assignments.len(),
                dayset.n_regions(),
                cover.chosen_days.len()
            );
            println!("days: {:?}", cover.chosen_days);
            let uncovered: Vec<_> = cover.uncovered().collect();
            if !uncovered.is_empty() {
                println!("{} vertices lie outside the radius of every day:", uncovered.len());
                for a in &uncovered {
                    println!(
                        "  {} corner {:?}: nearest day {} at distance {:.3}",
                        a.vertex.region, a.vertex.corner, a.day, a.distance
                    );
                }
            }
            if let Some(path) = csv {
                let mut out = String::from("region,corner,day,distance,covered\n");
                for a in &cover.assignments {
                    let c = a.vertex.corner;
                    out.push_str(&format!(
                        "{},{}{}{},{},{:.6},{}\n",
                        a.vertex.region,
                        u8::from(c[0]),
                        u8::from(c[1]),
                        u8::from(c[2]),
                        a.day,
                        a.distance,
                        a.covered
                    ));
                }
                fs::write(&path, out)
                    .with_context(|| format!("cannot write {}", path.display()))?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Valuation { instance, output } => {
            let inst = load_instance(&instance)?;
            let result = solve_core(&inst)?;
            let report = marginal_values(&inst, &result)?;
            print_plan(&inst, result.objective, &result.z, result.door, result.room);
            println!(
                "room rent sum:    {:.6}  (room cost {:.6})",
                report.room_rent_sum, inst.storage.room_cost
            );
            println!(
                "door rent sum:    {:.6}  (door cost {:.6})",
                report.door_rent_sum, inst.storage.door_cost
            );
            println!("energy value:     {:.6}", report.energy_value);
            println!("capacity value:   {:.6}", report.capacity_value);
            println!("storage cycles:   {}", report.cycles.len());
            for c in &report.cycles {
                println!("  hours {:>4}..{:<4} value {:.6}", c.start, c.end, c.value);
            }
            if report.no_zero_soc {
                println!("note: SOC never empties; the whole horizon is one cycle");
            }
            if !report.anchored_hours.is_empty() {
                println!(
                    "note: {} hour(s) priced without dispatched generators (anchored)",
                    report.anchored_hours.len()
                );
            }
            if let Some(path) = output {
                write_json(&path, &report)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Admm { instance, blocks, beta, max_iters, eps, trace } => {
            let inst = load_instance(&instance)?;
            let cfg = AdmmConfig {
                beta,
                max_iters,
                eps_primal: eps,
                eps_dual: eps,
                partition: match blocks {
                    BlocksArg::Single => BlockScheme::Single,
                    BlocksArg::Hour => BlockScheme::PerHour,
                    BlocksArg::Day => BlockScheme::PerDay,
                    BlocksArg::Week => BlockScheme::PerWeek,
                },
            };
            let (result, run_trace) = admm_solve(&inst, &cfg)?;
            let last = run_trace.iterations.last().expect("at least one iteration");
            println!(
                "{} after {} iterations: primal {:.2e}, dual {:.2e}",
                if run_trace.converged { "converged" } else { "NO CONSENSUS" },
                last.iter,
                last.primal_residual,
                last.dual_residual
            );
            print_plan(&inst, result.objective, &result.z, result.door, result.room);
            if let Some(path) = trace {
                fs::write(&path, run_trace.to_csv())
                    .with_context(|| format!("cannot write {}", path.display()))?;
            }
            Ok(if run_trace.converged { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Synth { profile, hours, regions, seed, output, regions_output } => {
            let profile = match profile {
                ProfileArg::Peaky => SyntheticProfile::Peaky,
                ProfileArg::Seasonal => SyntheticProfile::Seasonal,
                ProfileArg::AlternatingDays => SyntheticProfile::AlternatingDays,
                ProfileArg::Iid => SyntheticProfile::Iid,
            };
            let inst = generate_synthetic(profile, hours, regions, seed)?;
            save_instance(&output, &inst)?;
            println!(
                "wrote {}: {} hours, {} generators",
                output.display(),
                inst.n_hours(),
                inst.n_generators()
            );
            if let Some(path) = regions_output {
                let series = generate_region_series(profile, hours, regions, seed)?;
                write_json(&path, &series)?;
                println!("wrote {}: {} region series", path.display(), series.len());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn build_aggregation(
    inst: &SystemInstance,
    method: AggMethod,
    k: Option<usize>,
    selection: SelectionArg,
    linkage: LinkageArg,
    tol: f64,
) -> Result<Aggregation> {
    let need_k = || k.context("this method needs --k");
    let agg = match method {
        AggMethod::Identity => aggregate_identity(inst)?,
        AggMethod::Lossless => compress_lossless(inst, tol)?,
        AggMethod::RepDays => {
            let selection = match selection {
                SelectionArg::KmeansMedoid => DaySelection::KmeansMedoid,
                SelectionArg::PeakMedian => DaySelection::PeakMedian,
            };
            let linkage = match linkage {
                LinkageArg::Isolated => DayLinkage::Isolated,
                LinkageArg::Chained => DayLinkage::Chained,
            };
            representative_days(inst, need_k()?, selection, linkage)?
        }
        AggMethod::SystemStates => system_states(inst, need_k()?)?,
        AggMethod::Adjacent => adjacent_clusters(inst, need_k()?)?,
    };
    Ok(agg)
}

fn print_plan(inst: &SystemInstance, objective: f64, z: &[f64], door: f64, room: f64) {
    println!("objective: {objective:.6}");
    let width = inst.generators.iter().map(|g| g.name.len()).max().unwrap_or(5).max(5);
    for (gen, &cap) in inst.generators.iter().zip(z) {
        println!("  {:<width$}  {cap:>12.6}", gen.name);
    }
    println!("  {:<width$}  {door:>12.6}", "door");
    println!("  {:<width$}  {room:>12.6}", "room");
}

fn write_json<T: serde::Serialize>(path: &PathBuf, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).context("serialization failed")?;
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}
