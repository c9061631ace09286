//! Deterministic clustering helpers shared by the aggregation strategies.
//!
//! Everything here is seed-free: k-means uses farthest-point initialization
//! from item 0 and breaks all ties toward the lowest index, so a given
//! instance always produces the same aggregation.

use super::AggError;

/// Min–max normalize each feature column to [0, 1] in place; constant columns
/// become 0.5 (equidistant from both extremes rather than privileging one).
pub(super) fn normalize_columns(items: &mut [Vec<f64>]) {
    if items.is_empty() {
        return;
    }
    let dims = items[0].len();
    for d in 0..dims {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for item in items.iter() {
            lo = lo.min(item[d]);
            hi = hi.max(item[d]);
        }
        let range = hi - lo;
        for item in items.iter_mut() {
            item[d] = if range > 0.0 { (item[d] - lo) / range } else { 0.5 };
        }
    }
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd k-means with farthest-point seeding. Returns the assignment of each
/// item to a cluster in 0..k, every cluster nonempty.
pub(super) fn kmeans(items: &[Vec<f64>], k: usize) -> Result<Vec<usize>, AggError> {
    let n = items.len();
    if k == 0 || k > n {
        return Err(AggError::Clustering(format!("k = {k} outside 1..={n}")));
    }
    if k == n {
        return Ok((0..n).collect());
    }

    // farthest-point seeding from item 0
    let mut centroids: Vec<Vec<f64>> = vec![items[0].clone()];
    let mut min_d: Vec<f64> = items.iter().map(|it| dist_sq(it, &centroids[0])).collect();
    while centroids.len() < k {
        let far = (0..n).max_by(|&a, &b| min_d[a].total_cmp(&min_d[b])).unwrap();
        centroids.push(items[far].clone());
        for i in 0..n {
            min_d[i] = min_d[i].min(dist_sq(&items[i], centroids.last().unwrap()));
        }
    }

    let mut assign = vec![0usize; n];
    const MAX_ROUNDS: usize = 100;
    for _ in 0..MAX_ROUNDS {
        let mut changed = false;
        for (i, item) in items.iter().enumerate() {
            let best = (0..k)
                .min_by(|&a, &b| {
                    dist_sq(item, &centroids[a]).total_cmp(&dist_sq(item, &centroids[b]))
                })
                .unwrap();
            if assign[i] != best {
                assign[i] = best;
                changed = true;
            }
        }
        // recompute centroids; re-seed any emptied cluster with the item
        // farthest from its current centroid
        let dims = items[0].len();
        let mut sums = vec![vec![0.0; dims]; k];
        let mut counts = vec![0usize; k];
        for (i, item) in items.iter().enumerate() {
            counts[assign[i]] += 1;
            for d in 0..dims {
                sums[assign[i]][d] += item[d];
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for d in 0..dims {
                    centroids[c][d] = sums[c][d] / counts[c] as f64;
                }
            } else {
                let far = (0..n)
                    .max_by(|&a, &b| {
                        dist_sq(&items[a], &centroids[assign[a]])
                            .total_cmp(&dist_sq(&items[b], &centroids[assign[b]]))
                    })
                    .unwrap();
                centroids[c] = items[far].clone();
                assign[far] = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    // guarantee nonempty clusters even if the loop hit MAX_ROUNDS mid-shuffle
    let mut seen = vec![false; k];
    for &a in &assign {
        seen[a] = true;
    }
    if seen.iter().any(|&s| !s) {
        return Err(AggError::Clustering("k-means left an empty cluster".into()));
    }
    Ok(assign)
}

/// Member minimizing the sum of squared distances to the other members
/// (lowest index on ties).
pub(super) fn medoid(items: &[Vec<f64>], members: &[usize]) -> usize {
    *members
        .iter()
        .min_by(|&&a, &&b| {
            let cost =
                |m: usize| -> f64 { members.iter().map(|&o| dist_sq(&items[m], &items[o])).sum() };
            cost(a).total_cmp(&cost(b)).then(a.cmp(&b))
        })
        .expect("medoid of empty member set")
}
