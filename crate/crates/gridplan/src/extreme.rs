//! Extreme-day selection: how many representative days does a dataset force?
//!
//! Aggregating a year into representative days undervalues whatever the
//! chosen days miss, and the days that matter most are the extremes — the
//! highest-load/lowest-renewables combinations that size firm capacity and
//! storage. This module compresses an annual multi-region dataset into
//! per-day cumulative coordinates ([`cumulative_days`]) and then asks: how
//! many days must be kept so that every extreme corner of every region's
//! (load, wind, solar) cube has a kept day nearby ([`select_extreme_days`])?
//! The answer is a *lower bound* on a defensible representative-day count —
//! it ignores the interior of the distribution entirely.
//!
//! Day selection is a set-cover problem (one day may sit near several
//! corners, especially across regions); exact minimum cover is NP-hard, so a
//! deterministic greedy cover is used and documented as an approximation.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Hourly load and renewable availability for one region.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegionSeries {
    pub name: String,
    pub load: Vec<f64>,
    pub wind: Vec<f64>,
    pub solar: Vec<f64>,
}

pub const FEATURES_PER_REGION: usize = 3;
const HOURS_PER_DAY: usize = 24;

#[derive(Debug, Error)]
pub enum ExtremeError {
    #[error("horizon of {0} hours is not divisible into whole days")]
    IndivisibleHorizon(usize),
    #[error("region '{0}': series lengths disagree ({1} vs {2})")]
    LengthMismatch(String, usize, usize),
    #[error("no regions supplied")]
    NoRegions,
    #[error("cover radius must be positive, got {0}")]
    BadRadius(f64),
}

/// Days compressed to per-day feature sums, min–max normalized per feature.
///
/// Row = day, column = feature; features are region-major
/// `[load, wind, solar]` triples, so column `3r + k` is region `r`'s
/// feature `k`. Every entry lies in `[0, 1]`; a feature with no variation
/// across days maps to the neutral 0.5.
#[derive(Debug, Clone, Serialize)]
pub struct CumulativeDayset {
    pub days: Array2<f64>,
    pub regions: Vec<String>,
}

impl CumulativeDayset {
    pub fn n_days(&self) -> usize {
        self.days.nrows()
    }

    pub fn n_regions(&self) -> usize {
        self.regions.len()
    }

    fn day_coords(&self, day: usize, region: usize) -> [f64; FEATURES_PER_REGION] {
        let base = region * FEATURES_PER_REGION;
        [self.days[(day, base)], self.days[(day, base + 1)], self.days[(day, base + 2)]]
    }
}

/// One corner of a region's normalized (load, wind, solar) cube.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Vertex {
    pub region: usize,
    /// High (`true`) or low end per feature, ordered load, wind, solar.
    pub corner: [bool; FEATURES_PER_REGION],
}

impl Vertex {
    fn coords(&self) -> [f64; FEATURES_PER_REGION] {
        self.corner.map(|hi| if hi { 1.0 } else { 0.0 })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VertexAssignment {
    pub vertex: Vertex,
    /// Chosen day standing in for this corner (the nearest day when the
    /// corner is uncoverable).
    pub day: usize,
    pub distance: f64,
    /// Whether the assigned day actually lies within the requested radius.
    pub covered: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct VertexCover {
    pub radius: f64,
    /// Ascending day indices.
    pub chosen_days: Vec<usize>,
    /// One record per vertex, region-major, corners in binary order.
    pub assignments: Vec<VertexAssignment>,
}

impl VertexCover {
    pub fn uncovered(&self) -> impl Iterator<Item = &VertexAssignment> {
        self.assignments.iter().filter(|a| !a.covered)
    }
}

/// Compress hourly multi-region data into normalized per-day sums.
pub fn cumulative_days(regions: &[RegionSeries]) -> Result<CumulativeDayset, ExtremeError> {
    if regions.is_empty() {
        return Err(ExtremeError::NoRegions);
    }
    let n = regions[0].load.len();
    if n == 0 || n % HOURS_PER_DAY != 0 {
        return Err(ExtremeError::IndivisibleHorizon(n));
    }
    for r in regions {
        for series in [&r.load, &r.wind, &r.solar] {
            if series.len() != n {
                return Err(ExtremeError::LengthMismatch(r.name.clone(), n, series.len()));
            }
        }
    }

    let d_count = n / HOURS_PER_DAY;
    let mut days = Array2::zeros((d_count, regions.len() * FEATURES_PER_REGION));
    for (ri, region) in regions.iter().enumerate() {
        for (fi, series) in [&region.load, &region.wind, &region.solar].into_iter().enumerate() {
            let col = ri * FEATURES_PER_REGION + fi;
            for d in 0..d_count {
                days[(d, col)] =
                    series[d * HOURS_PER_DAY..(d + 1) * HOURS_PER_DAY].iter().sum::<f64>();
            }
            let lo = (0..d_count).map(|d| days[(d, col)]).fold(f64::INFINITY, f64::min);
            let hi = (0..d_count).map(|d| days[(d, col)]).fold(f64::NEG_INFINITY, f64::max);
            for d in 0..d_count {
                days[(d, col)] = if hi > lo { (days[(d, col)] - lo) / (hi - lo) } else { 0.5 };
            }
        }
    }

    Ok(CumulativeDayset { days, regions: regions.iter().map(|r| r.name.clone()).collect() })
}

fn distance(cds: &CumulativeDayset, day: usize, vertex: &Vertex) -> f64 {
    let p = cds.day_coords(day, vertex.region);
    let v = vertex.coords();
    p.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Pick a minimal-ish set of days so every extreme corner of every region has
/// a chosen day within `radius` (normalized feature units).
///
/// Greedy cover: repeatedly choose the day meeting the most still-unmet
/// corners (lowest index on ties). Corners whose *nearest* day is already
/// outside the radius cannot be covered by any choice; they are assigned
/// their nearest day, flagged, and that day is kept so the corner is at least
/// represented.
pub fn select_extreme_days(
    cds: &CumulativeDayset,
    radius: f64,
) -> Result<VertexCover, ExtremeError> {
    if radius.is_nan() || radius <= 0.0 {
        return Err(ExtremeError::BadRadius(radius));
    }
    let d_count = cds.n_days();

    let vertices: Vec<Vertex> = (0..cds.n_regions())
        .flat_map(|region| {
            (0..1usize << FEATURES_PER_REGION).map(move |bits| Vertex {
                region,
                corner: [bits & 1 != 0, bits & 2 != 0, bits & 4 != 0],
            })
        })
        .collect();

    // nearest day per vertex (lowest index on ties), and who can cover what
    let nearest: Vec<(usize, f64)> = vertices
        .iter()
        .map(|v| {
            (0..d_count)
                .map(|d| (d, distance(cds, d, v)))
                .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
                .expect("dayset has at least one day")
        })
        .collect();

    let mut chosen: Vec<usize> = Vec::new();
    let mut assignment: Vec<Option<(usize, f64, bool)>> = vec![None; vertices.len()];

    // uncoverable corners first: their nearest day is kept unconditionally
    for (vi, &(day, dist)) in nearest.iter().enumerate() {
        if dist > radius {
            assignment[vi] = Some((day, dist, false));
            if !chosen.contains(&day) {
                chosen.push(day);
            }
        }
    }
    // days forced in above may incidentally cover ordinary corners
    let settle = |chosen: &[usize], assignment: &mut Vec<Option<(usize, f64, bool)>>| {
        for (vi, v) in vertices.iter().enumerate() {
            if assignment[vi].is_none() {
                if let Some((day, dist)) = chosen
                    .iter()
                    .map(|&d| (d, distance(cds, d, v)))
                    .filter(|&(_, dist)| dist <= radius)
                    .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
                {
                    assignment[vi] = Some((day, dist, true));
                }
            }
        }
    };
    settle(&chosen, &mut assignment);

    // greedy cover over the rest
    while assignment.iter().any(Option::is_none) {
        let best = (0..d_count)
            .map(|d| {
                let met = vertices
                    .iter()
                    .enumerate()
                    .filter(|&(vi, v)| assignment[vi].is_none() && distance(cds, d, v) <= radius)
                    .count();
                (d, met)
            })
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
            .expect("dayset has at least one day");
        debug_assert!(best.1 > 0, "unmet corner with in-radius days must be satisfiable");
        chosen.push(best.0);
        settle(&chosen, &mut assignment);
    }

    chosen.sort_unstable();
    chosen.dedup();
    let assignments = vertices
        .into_iter()
        .zip(assignment)
        .map(|(vertex, a)| {
            let (day, distance, covered) = a.expect("every vertex assigned");
            VertexAssignment { vertex, day, distance, covered }
        })
        .collect();

    Ok(VertexCover { radius, chosen_days: chosen, assignments })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn region(name: &str, load: Vec<f64>, wind: Vec<f64>, solar: Vec<f64>) -> RegionSeries {
        RegionSeries { name: name.into(), load, wind, solar }
    }

    #[test]
    fn two_day_sums_normalize_to_unit_endpoints() {
        let r =
            region("only", [vec![1.0; 24], vec![2.0; 24]].concat(), vec![0.3; 48], vec![0.0; 48]);
        let cds = cumulative_days(&[r]).unwrap();
        assert_eq!(cds.n_days(), 2);
        assert_abs_diff_eq!(cds.days[(0, 0)], 0.0);
        assert_abs_diff_eq!(cds.days[(1, 0)], 1.0);
        // constant wind and solar land on the neutral midpoint
        assert_abs_diff_eq!(cds.days[(0, 1)], 0.5);
        assert_abs_diff_eq!(cds.days[(1, 2)], 0.5);
    }

    #[test]
    fn dayset_shape_is_days_by_three_features_per_region() {
        let mk = |i: usize| {
            region(
                &format!("r{i}"),
                (0..48).map(|h| (h + i) as f64).collect(),
                vec![0.5; 48],
                vec![0.1; 48],
            )
        };
        let cds = cumulative_days(&[mk(0), mk(1), mk(2)]).unwrap();
        assert_eq!(cds.days.dim(), (2, 9));
    }

    #[test]
    fn partial_days_are_rejected() {
        let r = region("bad", vec![1.0; 30], vec![0.0; 30], vec![0.0; 30]);
        assert!(matches!(cumulative_days(&[r]), Err(ExtremeError::IndivisibleHorizon(30))));
    }

    #[test]
    fn mismatched_series_lengths_are_rejected() {
        let r = region("bad", vec![1.0; 48], vec![0.0; 24], vec![0.0; 48]);
        assert!(matches!(cumulative_days(&[r]), Err(ExtremeError::LengthMismatch(..))));
    }

    /// Eight days, each pinned to a distinct corner of the unit cube.
    fn corner_dayset() -> CumulativeDayset {
        let mut load = Vec::new();
        let mut wind = Vec::new();
        let mut solar = Vec::new();
        for bits in 0..8usize {
            load.extend(vec![if bits & 1 != 0 { 2.0 } else { 1.0 }; 24]);
            wind.extend(vec![if bits & 2 != 0 { 0.9 } else { 0.1 }; 24]);
            solar.extend(vec![if bits & 4 != 0 { 0.8 } else { 0.0 }; 24]);
        }
        cumulative_days(&[region("r", load, wind, solar)]).unwrap()
    }

    #[test]
    fn disjoint_corners_need_all_eight_days() {
        let cover = select_extreme_days(&corner_dayset(), 0.05).unwrap();
        assert_eq!(cover.chosen_days, (0..8).collect::<Vec<_>>());
        assert!(cover.assignments.iter().all(|a| a.covered));
        for a in &cover.assignments {
            assert_abs_diff_eq!(a.distance, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn generous_radius_collapses_the_cover() {
        // radius 2 exceeds the cube diagonal: any single day covers all corners
        let cover = select_extreme_days(&corner_dayset(), 2.0).unwrap();
        assert_eq!(cover.chosen_days.len(), 1);
        assert!(cover.assignments.iter().all(|a| a.covered));
    }

    #[test]
    fn chosen_count_is_monotone_in_radius() {
        let cds = corner_dayset();
        let counts: Vec<usize> = [0.05, 0.9, 1.1, 2.0]
            .iter()
            .map(|&r| select_extreme_days(&cds, r).unwrap().chosen_days.len())
            .collect();
        for pair in counts.windows(2) {
            assert!(pair[1] <= pair[0], "{counts:?}");
        }
    }

    #[test]
    fn identical_days_keep_one_day_and_flag_unreachable_corners() {
        let r = region("flat", vec![1.0; 72], vec![0.4; 72], vec![0.2; 72]);
        let cds = cumulative_days(&[r]).unwrap();
        // every day sits at (0.5, 0.5, 0.5): no corner is within 0.2
        let cover = select_extreme_days(&cds, 0.2).unwrap();
        assert_eq!(cover.chosen_days, vec![0]);
        assert_eq!(cover.uncovered().count(), 8);
        for a in &cover.assignments {
            assert_eq!(a.day, 0, "uncoverable corners get the nearest day");
            assert_abs_diff_eq!(a.distance, 0.75_f64.sqrt(), epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_radius_is_rejected() {
        let cds = corner_dayset();
        assert!(matches!(select_extreme_days(&cds, 0.0), Err(ExtremeError::BadRadius(_))));
    }
}
