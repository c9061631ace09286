//! Adjacent clustering: chop the horizon into `k` contiguous segments by
//! greedily merging the cheapest neighboring pair (Ward criterion on the
//! normalized hourly features) until `k` segments remain. Chronology is fully
//! preserved — the successor matrix is just the cyclic segment chain and
//! `w = q =` segment length — so the only information lost is *within*
//! segments. With `k = n` this is exactly the identity aggregation.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::cluster::normalize_columns;
use super::{mean_of, AggError, Aggregation, StateProfiles, TransitionMatrix};
use crate::model::SystemInstance;

/// Ward cost of merging neighboring segments: the increase in total
/// within-segment squared error.
fn merge_cost(len_a: f64, mean_a: &[f64], len_b: f64, mean_b: &[f64]) -> f64 {
    let d2: f64 = mean_a.iter().zip(mean_b).map(|(x, y)| (x - y) * (x - y)).sum();
    len_a * len_b / (len_a + len_b) * d2
}

pub fn adjacent_clusters(instance: &SystemInstance, k: usize) -> Result<Aggregation, AggError> {
    instance.validate()?;
    if !instance.grid.cyclic {
        return Err(AggError::OpenGrid);
    }
    let n = instance.n_hours();
    if k == 0 || k > n {
        return Err(AggError::Clustering(format!("k = {k} outside 1..={n}")));
    }

    let m = instance.n_generators();
    let mut features: Vec<Vec<f64>> = (0..n)
        .map(|h| {
            let mut v = Vec::with_capacity(1 + m);
            v.push(instance.demand[h]);
            for gen in &instance.generators {
                v.push(gen.availability[h]);
            }
            v
        })
        .collect();
    normalize_columns(&mut features);

    // segment state: linked list over live segments, mean-per-feature
    let mut len: Vec<f64> = vec![1.0; n];
    let mut mean: Vec<Vec<f64>> = features.clone();
    let mut next: Vec<Option<usize>> = (0..n).map(|i| (i + 1 < n).then_some(i + 1)).collect();
    let mut prev: Vec<Option<usize>> = (0..n).map(|i| (i > 0).then(|| i - 1)).collect();
    let mut alive = vec![true; n];
    let mut version = vec![0u32; n];

    // lazy-invalidation min-heap keyed by (cost, left index); entries carry
    // the versions they were computed for
    #[derive(PartialEq)]
    struct Cand {
        cost: f64,
        left: usize,
        vl: u32,
        vr: u32,
    }
    impl Eq for Cand {}
    impl Ord for Cand {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            self.cost.total_cmp(&other.cost).then(self.left.cmp(&other.left))
        }
    }
    impl PartialOrd for Cand {
        fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(other))
        }
    }

    let mut heap: BinaryHeap<Reverse<Cand>> = BinaryHeap::new();
    let push = |heap: &mut BinaryHeap<Reverse<Cand>>,
                left: usize,
                right: usize,
                len: &[f64],
                mean: &[Vec<f64>],
                version: &[u32]| {
        let cost = merge_cost(len[left], &mean[left], len[right], &mean[right]);
        heap.push(Reverse(Cand { cost, left, vl: version[left], vr: version[right] }));
    };
    for i in 0..n.saturating_sub(1) {
        push(&mut heap, i, i + 1, &len, &mean, &version);
    }

    let mut segments = n;
    while segments > k {
        let Some(Reverse(c)) = heap.pop() else {
            return Err(AggError::Clustering("ran out of mergeable pairs".into()));
        };
        let left = c.left;
        if !alive[left] || version[left] != c.vl {
            continue;
        }
        let Some(right) = next[left] else { continue };
        if version[right] != c.vr {
            continue;
        }

        // merge right into left
        let total = len[left] + len[right];
        for d in 0..mean[left].len() {
            mean[left][d] = (len[left] * mean[left][d] + len[right] * mean[right][d]) / total;
        }
        len[left] = total;
        alive[right] = false;
        next[left] = next[right];
        if let Some(r2) = next[right] {
            prev[r2] = Some(left);
        }
        version[left] += 1;
        segments -= 1;

        if let Some(r2) = next[left] {
            push(&mut heap, left, r2, &len, &mean, &version);
        }
        if let Some(l2) = prev[left] {
            push(&mut heap, l2, left, &len, &mean, &version);
        }
    }

    // read segments off in chronological order
    let mut gamma = vec![0usize; n];
    let mut w = Vec::with_capacity(k);
    let mut seg_start = Vec::with_capacity(k);
    let mut state = 0usize;
    let mut h = 0usize;
    while h < n {
        debug_assert!(alive[h]);
        let l = len[h] as usize;
        gamma[h..h + l].fill(state);
        w.push(l as f64);
        seg_start.push(h);
        state += 1;
        h += l;
    }
    debug_assert_eq!(state, k);

    let demand = seg_start
        .iter()
        .zip(&w)
        .map(|(&st, &l)| mean_of((st..st + l as usize).map(|h| instance.demand[h])))
        .collect();
    let availability = instance
        .generators
        .iter()
        .map(|gen| {
            seg_start
                .iter()
                .zip(&w)
                .map(|(&st, &l)| mean_of((st..st + l as usize).map(|h| gen.availability[h])))
                .collect()
        })
        .collect();

    let agg = Aggregation {
        gamma,
        w: w.clone(),
        q: w,
        p: TransitionMatrix::shifted_identity(k),
        profiles: StateProfiles { demand, availability },
    };
    agg.validate(instance)?;
    Ok(agg)
}
