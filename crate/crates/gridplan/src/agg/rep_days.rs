//! Representative-day aggregation.
//!
//! Days are clustered (or picked per season), each chosen day contributes 24
//! hour-states carrying *that day's* raw data, and every day in a cluster
//! adds weight to its representative's states. Within a day the states chain
//! hour by hour; what happens at midnight is the [`DayLinkage`] choice:
//! isolated days close onto themselves (each representative day is its own
//! 24-hour cycle), chained days hand over to the next representative in
//! chronological order of representatives, the last wrapping to the first.
//!
//! With as many clusters as distinct days and zero intra-cluster variance,
//! chained linkage reproduces the hourly model exactly when the day order is
//! compatible with the chain — that is the lossless sanity anchor for this
//! method. Fewer clusters are deliberately lossy: member days are priced with
//! the representative's profile.

use serde::{Deserialize, Serialize};

use super::cluster::{kmeans, medoid, normalize_columns};
use super::{AggError, Aggregation, StateProfiles, TransitionMatrix};
use crate::model::SystemInstance;

pub const HOURS_PER_DAY: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DaySelection {
    /// k-means on day feature vectors, representative = cluster medoid.
    KmeansMedoid,
    /// Split the year into k/2 contiguous seasons; pick each season's
    /// peak-demand day and median-demand day (k must be even). Duplicate
    /// picks (peak = median in a quiet season) are collapsed, so the result
    /// can have fewer than k day-clusters.
    PeakMedian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DayLinkage {
    Isolated,
    Chained,
}

pub fn representative_days(
    instance: &SystemInstance,
    k: usize,
    selection: DaySelection,
    linkage: DayLinkage,
) -> Result<Aggregation, AggError> {
    instance.validate()?;
    if !instance.grid.cyclic {
        return Err(AggError::OpenGrid);
    }
    let n = instance.n_hours();
    if n % HOURS_PER_DAY != 0 {
        return Err(AggError::Clustering(format!(
            "horizon of {n} hours is not a whole number of days"
        )));
    }
    let days = n / HOURS_PER_DAY;
    if k == 0 || k > days {
        return Err(AggError::Clustering(format!("k = {k} outside 1..={days} days")));
    }

    // day feature vectors: demand and availabilities, normalized per series
    let mut features: Vec<Vec<f64>> = (0..days)
        .map(|d| {
            let range = d * HOURS_PER_DAY..(d + 1) * HOURS_PER_DAY;
            let mut v: Vec<f64> = instance.demand[range.clone()].to_vec();
            for gen in &instance.generators {
                v.extend_from_slice(&gen.availability[range.clone()]);
            }
            v
        })
        .collect();
    normalize_columns(&mut features);

    // representative day per cluster + cluster assignment per day
    let (reps, day_cluster) = match selection {
        DaySelection::KmeansMedoid => {
            let assign = kmeans(&features, k)?;
            let mut members = vec![Vec::new(); k];
            for (d, &c) in assign.iter().enumerate() {
                members[c].push(d);
            }
            let reps: Vec<usize> = members.iter().map(|m| medoid(&features, m)).collect();
            (reps, assign)
        }
        DaySelection::PeakMedian => pick_peak_median(instance, &features, k, days)?,
    };

    // order clusters by representative day so "chained" follows the calendar
    let mut order: Vec<usize> = (0..reps.len()).collect();
    order.sort_by_key(|&c| reps[c]);
    let rank_of = {
        let mut rank = vec![0usize; reps.len()];
        for (pos, &c) in order.iter().enumerate() {
            rank[c] = pos;
        }
        rank
    };
    let reps_ordered: Vec<usize> = order.iter().map(|&c| reps[c]).collect();
    let kc = reps_ordered.len();

    let state_of = |cluster_rank: usize, hod: usize| cluster_rank * HOURS_PER_DAY + hod;
    let n_states = kc * HOURS_PER_DAY;

    let gamma: Vec<usize> = (0..n)
        .map(|h| state_of(rank_of[day_cluster[h / HOURS_PER_DAY]], h % HOURS_PER_DAY))
        .collect();

    let mut w = vec![0.0; n_states];
    for &s in &gamma {
        w[s] += 1.0;
    }

    let mut p = TransitionMatrix::zeros(n_states);
    for c in 0..kc {
        for hod in 0..HOURS_PER_DAY - 1 {
            p.add(state_of(c, hod), state_of(c, hod + 1), 1.0);
        }
        let next_cluster = match linkage {
            DayLinkage::Isolated => c,
            DayLinkage::Chained => (c + 1) % kc,
        };
        p.add(state_of(c, HOURS_PER_DAY - 1), state_of(next_cluster, 0), 1.0);
    }

    let demand = (0..n_states)
        .map(|s| {
            instance.demand[reps_ordered[s / HOURS_PER_DAY] * HOURS_PER_DAY + s % HOURS_PER_DAY]
        })
        .collect();
    let availability = instance
        .generators
        .iter()
        .map(|gen| {
            (0..n_states)
                .map(|s| {
                    gen.availability
                        [reps_ordered[s / HOURS_PER_DAY] * HOURS_PER_DAY + s % HOURS_PER_DAY]
                })
                .collect()
        })
        .collect();

    let agg = Aggregation {
        gamma,
        w,
        q: vec![1.0; n_states],
        p,
        profiles: StateProfiles { demand, availability },
    };
    agg.validate(instance)?;
    Ok(agg)
}

/// Season blocks → (peak day, median day) per season → clusters by nearest
/// chosen day in feature space.
fn pick_peak_median(
    instance: &SystemInstance,
    features: &[Vec<f64>],
    k: usize,
    days: usize,
) -> Result<(Vec<usize>, Vec<usize>), AggError> {
    if k % 2 != 0 {
        return Err(AggError::Clustering(format!(
            "peak/median selection needs an even k (got {k}): two days per season"
        )));
    }
    let seasons = k / 2;
    if seasons > days {
        return Err(AggError::Clustering(format!("{seasons} seasons need at least as many days")));
    }

    let daily_total = |d: usize| -> f64 {
        instance.demand[d * HOURS_PER_DAY..(d + 1) * HOURS_PER_DAY].iter().sum()
    };

    let mut chosen: Vec<usize> = Vec::new();
    for s in 0..seasons {
        let lo = s * days / seasons;
        let hi = (s + 1) * days / seasons;
        let block: Vec<usize> = (lo..hi).collect();
        let peak = *block
            .iter()
            .max_by(|&&a, &&b| daily_total(a).total_cmp(&daily_total(b)).then(b.cmp(&a)))
            .unwrap();
        let mut by_total = block.clone();
        by_total.sort_by(|&a, &b| daily_total(a).total_cmp(&daily_total(b)).then(a.cmp(&b)));
        let median = by_total[(by_total.len() - 1) / 2];
        for d in [peak, median] {
            if !chosen.contains(&d) {
                chosen.push(d);
            }
        }
    }
    chosen.sort_unstable();

    let dist_sq =
        |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum() };
    let day_cluster: Vec<usize> = (0..days)
        .map(|d| {
            (0..chosen.len())
                .min_by(|&a, &b| {
                    dist_sq(&features[d], &features[chosen[a]])
                        .total_cmp(&dist_sq(&features[d], &features[chosen[b]]))
                })
                .unwrap()
        })
        .collect();
    Ok((chosen, day_cluster))
}
