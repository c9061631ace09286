//! When is an aggregation exact?
//!
//! [`check_lossless`] tests the three sufficient conditions under which the
//! aggregated model provably reproduces the hourly optimum:
//!
//! 1. **Uniform members** — all hours of a state agree (within `tol`) on
//!    demand and every availability series, and the state profile carries
//!    those values;
//! 2. **Deterministic transitions** — `P` is a 0/1 matrix with exactly one
//!    successor per state *and* one predecessor per state (a permutation), so
//!    the state sequence is a single deterministic cycle;
//! 3. **Uniform visits** — every maximal run of a state in the hour sequence
//!    has exactly length `q_s`.
//!
//! Conditions 2 and 3 are structural and are checked to numerical exactness
//! ([`crate::tol::ROW_SUM`]); `tol` applies to the data comparisons of
//! condition 1.
//!
//! [`compress_lossless`] builds the coarsest aggregation satisfying all three
//! by construction: merge equal-profile runs into tokens, then refine token
//! classes (same profile window, same length, same successor class, never two
//! adjacent occurrences) to a fixpoint. On data with no repeating structure it
//! degenerates to the identity aggregation, which is always a valid output.

use super::{cyclic_runs, AggError, Aggregation, StateProfiles, TransitionMatrix};
use crate::model::SystemInstance;
use crate::tol;

#[derive(Debug, Clone)]
pub struct LosslessCondition {
    pub pass: bool,
    pub max_violation: f64,
    /// Where the worst violation sits, when there is one.
    pub detail: Option<String>,
}

impl LosslessCondition {
    fn clean() -> Self {
        LosslessCondition { pass: true, max_violation: 0.0, detail: None }
    }

    fn observe(&mut self, violation: f64, limit: f64, detail: impl Fn() -> String) {
        if violation > self.max_violation {
            self.max_violation = violation;
            if violation > limit {
                self.detail = Some(detail());
            }
        }
        if violation > limit {
            self.pass = false;
        }
    }
}

#[derive(Debug, Clone)]
pub struct LosslessReport {
    pub tolerance: f64,
    /// Condition 1: within-state data uniformity (and profile fidelity).
    pub uniform_members: LosslessCondition,
    /// Condition 2: P is a permutation (one successor and one predecessor).
    pub deterministic_transitions: LosslessCondition,
    /// Condition 3: all runs of a state share its length q_s.
    pub uniform_visits: LosslessCondition,
}

impl LosslessReport {
    pub fn is_lossless(&self) -> bool {
        self.uniform_members.pass && self.deterministic_transitions.pass && self.uniform_visits.pass
    }
}

/// One series to test for within-state uniformity: name, hourly accessor,
/// and the profile value the aggregation recorded for the state.
type SeriesCheck<'a> = (&'a str, Box<dyn Fn(usize) -> f64 + 'a>, f64);

pub fn check_lossless(
    instance: &SystemInstance,
    agg: &Aggregation,
    tol_data: f64,
) -> Result<LosslessReport, AggError> {
    agg.validate(instance)?;
    let s_count = agg.n_states();
    let members = agg.members();

    // condition 1: spread of member data and distance of the profile from it
    let mut cond1 = LosslessCondition::clean();
    for s in 0..s_count {
        let mut series: Vec<SeriesCheck> =
            vec![("demand", Box::new(|h| instance.demand[h]), agg.profiles.demand[s])];
        for (g, gen) in instance.generators.iter().enumerate() {
            series.push((
                &gen.name,
                Box::new(move |h| gen.availability[h]),
                agg.profiles.availability[g][s],
            ));
        }
        for (name, value_at, profile) in series {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &h in &members[s] {
                lo = lo.min(value_at(h));
                hi = hi.max(value_at(h));
            }
            cond1.observe(hi - lo, tol_data, || {
                format!("state {s}: member spread of '{name}' is {:.3e}", hi - lo)
            });
            let dev = (profile - lo).abs().max((profile - hi).abs());
            cond1.observe(dev, tol_data, || {
                format!("state {s}: profile of '{name}' sits {dev:.3e} from member data")
            });
        }
    }

    // condition 2: permutation structure of P
    let mut cond2 = LosslessCondition::clean();
    let mut incoming = vec![0usize; s_count];
    for s in 0..s_count {
        let row = agg.p.row(s);
        match agg.p.sole_successor(s) {
            Some(j) => incoming[j] += 1,
            None => {
                let spread: f64 =
                    1.0 - row.iter().map(|&(_, p)| p).fold(0.0_f64, f64::max).min(1.0);
                cond2.observe(spread.max(tol::ROW_SUM * 2.0), tol::ROW_SUM, || {
                    format!("state {s}: row of P has {} entries, not a single 1", row.len())
                });
            }
        }
    }
    for (j, &cnt) in incoming.iter().enumerate() {
        if cnt > 1 {
            cond2.observe(cnt as f64 - 1.0, tol::ROW_SUM, || {
                format!("state {j}: {cnt} predecessor states (needs exactly 1)")
            });
        }
    }

    // condition 3: every run of s has length q_s
    let mut cond3 = LosslessCondition::clean();
    for (s, start, len) in cyclic_runs(&agg.gamma) {
        cond3.observe((len as f64 - agg.q[s]).abs(), tol::ROW_SUM, || {
            format!("state {s}: run at hour {start} has length {len}, q = {}", agg.q[s])
        });
    }

    Ok(LosslessReport {
        tolerance: tol_data,
        uniform_members: cond1,
        deterministic_transitions: cond2,
        uniform_visits: cond3,
    })
}

/// Hourly feature vector used for compression equality: demand, availability,
/// and variable cost (cost uniformity is not part of the formal conditions,
/// but merging cost-heterogeneous hours would change the objective, so the
/// compressor refuses to).
fn hour_profile(instance: &SystemInstance, h: usize) -> Vec<f64> {
    let mut v = Vec::with_capacity(1 + 2 * instance.n_generators());
    v.push(instance.demand[h]);
    for gen in &instance.generators {
        v.push(gen.availability[h]);
        v.push(gen.var_cost[h]);
    }
    v
}

/// The coarsest aggregation of `instance` that passes [`check_lossless`] at
/// `tol_data`, built by run-length merging plus successor-class refinement.
/// Data without exploitable structure comes back as the identity aggregation.
pub fn compress_lossless(
    instance: &SystemInstance,
    tol_data: f64,
) -> Result<Aggregation, AggError> {
    instance.validate()?;
    if !instance.grid.cyclic {
        return Err(AggError::OpenGrid);
    }
    if tol_data < 0.0 {
        return Err(AggError::Invalid("negative tolerance".into()));
    }
    let n = instance.n_hours();
    let profiles: Vec<Vec<f64>> = (0..n).map(|h| hour_profile(instance, h)).collect();
    let within = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol_data);

    // --- pass 1: cyclic run-length merge into tokens ---
    // a token = (start hour, length); all hours in it within tol of the first
    let mut tokens: Vec<(usize, usize)> = Vec::new();
    {
        // rotate to a profile boundary so the wrap run is contiguous
        let start0 =
            (0..n).find(|&h| !within(&profiles[h], &profiles[(h + n - 1) % n])).unwrap_or(0);
        let mut h = 0usize;
        while h < n {
            let anchor = (start0 + h) % n;
            let mut len = 1usize;
            while h + len < n && within(&profiles[(start0 + h + len) % n], &profiles[anchor]) {
                len += 1;
            }
            tokens.push((anchor, len));
            h += len;
        }
    }
    let t_count = tokens.len();

    // --- pass 2: refine token classes to a fixpoint ---
    // initial key: (profile window, length); profile windows are built
    // greedily over tokens sorted by profile, keeping spread <= tol
    let mut class: Vec<usize> = vec![0; t_count];
    {
        let mut order: Vec<usize> = (0..t_count).collect();
        order.sort_by(|&a, &b| {
            let pa = &profiles[tokens[a].0];
            let pb = &profiles[tokens[b].0];
            pa.iter()
                .zip(pb)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(tokens[a].1.cmp(&tokens[b].1))
                .then(a.cmp(&b))
        });
        let mut next_class = 0usize;
        let mut window: Option<(Vec<f64>, Vec<f64>, usize)> = None; // (lo, hi, len)
        for &t in &order {
            let p = &profiles[tokens[t].0];
            let fits = window.as_ref().is_some_and(|(lo, hi, len)| {
                *len == tokens[t].1
                    && lo.iter().zip(hi).zip(p).all(|((l, h), v)| v.max(*h) - v.min(*l) <= tol_data)
            });
            if fits {
                let (lo, hi, _) = window.as_mut().unwrap();
                for (d, v) in p.iter().enumerate() {
                    lo[d] = lo[d].min(*v);
                    hi[d] = hi[d].max(*v);
                }
            } else {
                if window.is_some() {
                    next_class += 1;
                }
                window = Some((p.clone(), p.clone(), tokens[t].1));
            }
            class[t] = next_class;
        }
    }

    // refine: same class ⟹ same successor class; and adjacent tokens must
    // never share a class (they would fuse into one over-long run)
    loop {
        let renumber = |keys: &[(usize, usize)]| -> (Vec<usize>, usize) {
            let mut map = std::collections::HashMap::new();
            let mut out = Vec::with_capacity(keys.len());
            for k in keys {
                let next_id = map.len();
                out.push(*map.entry(*k).or_insert(next_id));
            }
            (out, map.len())
        };
        let keys: Vec<(usize, usize)> =
            (0..t_count).map(|t| (class[t], class[(t + 1) % t_count])).collect();
        let (mut new_class, mut count) = renumber(&keys);
        for t in 0..t_count {
            let succ = (t + 1) % t_count;
            if succ != t && new_class[succ] == new_class[t] {
                new_class[t] = count; // force-split; next round re-canonicalizes
                count += 1;
            }
        }
        let stable = new_class
            .iter()
            .zip(&class)
            .all(|(a, b)| new_class.iter().zip(&class).all(|(c, d)| (a == c) == (b == d)));
        class = new_class;
        if stable {
            break;
        }
    }

    // --- assemble ---
    // states ordered by first token occurrence
    let mut state_of_class: Vec<Option<usize>> = vec![None; t_count];
    let mut first_token_of_state: Vec<usize> = Vec::new();
    for t in 0..t_count {
        if state_of_class[class[t]].is_none() {
            state_of_class[class[t]] = Some(first_token_of_state.len());
            first_token_of_state.push(t);
        }
    }
    let s_count = first_token_of_state.len();
    let state: Vec<usize> = (0..t_count).map(|t| state_of_class[class[t]].unwrap()).collect();

    let mut gamma = vec![usize::MAX; n];
    let mut w = vec![0.0; s_count];
    for (t, &(start, len)) in tokens.iter().enumerate() {
        for i in 0..len {
            gamma[(start + i) % n] = state[t];
        }
        w[state[t]] += len as f64;
    }
    let q: Vec<f64> = first_token_of_state.iter().map(|&t| tokens[t].1 as f64).collect();

    let mut p = TransitionMatrix::zeros(s_count);
    for t in 0..t_count {
        let (from, to) = (state[t], state[(t + 1) % t_count]);
        if p.entry(from, to) == 0.0 {
            p.add(from, to, 1.0);
        }
    }

    // profiles from the first member hour: a real data point, exact at tol 0
    let demand = first_token_of_state.iter().map(|&t| instance.demand[tokens[t].0]).collect();
    let availability = instance
        .generators
        .iter()
        .map(|gen| first_token_of_state.iter().map(|&t| gen.availability[tokens[t].0]).collect())
        .collect();

    let agg = Aggregation { gamma, w, q, p, profiles: StateProfiles { demand, availability } };
    agg.validate(instance)?;

    // the construction above should always satisfy the conditions; if a
    // pathological input defeats it, fall back to the always-valid identity
    let report = check_lossless(instance, &agg, tol_data)?;
    if report.is_lossless() {
        Ok(agg)
    } else {
        super::aggregate_identity(instance)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agg::aggregate_identity;
    use crate::model::{GeneratorSpec, StorageSpec, SystemInstance, TimeGrid};

    fn inst_from_demand(demand: Vec<f64>) -> SystemInstance {
        let n = demand.len();
        SystemInstance {
            grid: TimeGrid::cyclic(n),
            demand,
            generators: vec![GeneratorSpec::flat("g", 1.0, 2.0, vec![1.0; n])],
            storage: StorageSpec { door_cost: 0.2, room_cost: 0.1 },
        }
    }

    #[test]
    fn identity_is_always_lossless_at_zero_tolerance() {
        let inst = inst_from_demand(vec![1.0, 4.0, 2.0, 7.0]);
        let agg = aggregate_identity(&inst).unwrap();
        let report = check_lossless(&inst, &agg, 0.0).unwrap();
        assert!(report.is_lossless(), "{report:?}");
    }

    #[test]
    fn member_spread_fails_condition_one_only() {
        // state 0 holds demands 1.0 and 1.5: spread 0.5 passes tol 0.6 only
        let inst = inst_from_demand(vec![1.0, 2.0, 1.5, 2.0]);
        let agg = Aggregation {
            gamma: vec![0, 1, 0, 1],
            w: vec![2.0, 2.0],
            q: vec![1.0, 1.0],
            p: TransitionMatrix::shifted_identity(2),
            profiles: StateProfiles { demand: vec![1.25, 2.0], availability: vec![vec![1.0, 1.0]] },
        };
        let loose = check_lossless(&inst, &agg, 0.6).unwrap();
        assert!(loose.is_lossless(), "{loose:?}");
        let tight = check_lossless(&inst, &agg, 0.1).unwrap();
        assert!(!tight.uniform_members.pass);
        assert!(tight.deterministic_transitions.pass);
        assert!(tight.uniform_visits.pass);
        assert!(tight.uniform_members.max_violation > 0.0);
    }

    #[test]
    fn stochastic_rows_fail_condition_two() {
        let inst = inst_from_demand(vec![1.0, 1.0, 2.0, 1.0]);
        let mut p = TransitionMatrix::zeros(2);
        p.add(0, 0, 0.5);
        p.add(0, 1, 0.5);
        p.add(1, 0, 1.0);
        let agg = Aggregation {
            gamma: vec![0, 0, 1, 0],
            w: vec![3.0, 1.0],
            q: vec![1.5, 1.0],
            p,
            profiles: StateProfiles { demand: vec![1.0, 2.0], availability: vec![vec![1.0, 1.0]] },
        };
        let report = check_lossless(&inst, &agg, 0.0).unwrap();
        assert!(!report.deterministic_transitions.pass);
        assert!(!report.uniform_visits.pass, "runs of 0 have lengths 1 and 2, q=1.5");
    }

    #[test]
    fn double_predecessor_fails_condition_two() {
        // P rows are each a single 1 but two states feed state 0
        let inst = inst_from_demand(vec![1.0, 2.0, 3.0]);
        let mut p = TransitionMatrix::zeros(3);
        p.add(0, 1, 1.0);
        p.add(1, 0, 1.0);
        p.add(2, 0, 1.0);
        let agg = Aggregation {
            gamma: vec![0, 1, 2],
            w: vec![1.0; 3],
            q: vec![1.0; 3],
            p,
            profiles: StateProfiles {
                demand: vec![1.0, 2.0, 3.0],
                availability: vec![vec![1.0; 3]],
            },
        };
        let report = check_lossless(&inst, &agg, 0.0).unwrap();
        assert!(!report.deterministic_transitions.pass);
    }

    #[test]
    fn compress_collapses_repeating_pattern() {
        // ABAB…: two states, alternating, still exact at tol 0
        let inst = inst_from_demand(vec![1.0, 5.0, 1.0, 5.0, 1.0, 5.0]);
        let agg = compress_lossless(&inst, 0.0).unwrap();
        assert_eq!(agg.n_states(), 2);
        assert_eq!(agg.w, vec![3.0, 3.0]);
        assert!(check_lossless(&inst, &agg, 0.0).unwrap().is_lossless());
    }

    #[test]
    fn compress_keeps_structure_it_cannot_merge() {
        // all-distinct hours: identity is the only exact aggregation
        let inst = inst_from_demand(vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        let agg = compress_lossless(&inst, 0.0).unwrap();
        assert_eq!(agg.n_states(), 5);
        assert!(check_lossless(&inst, &agg, 0.0).unwrap().is_lossless());
    }

    #[test]
    fn compress_merges_runs_into_long_states() {
        // plateaus → run tokens with q > 1
        let inst = inst_from_demand(vec![2.0, 2.0, 2.0, 6.0, 6.0, 2.0, 2.0, 2.0, 6.0, 6.0]);
        let agg = compress_lossless(&inst, 0.0).unwrap();
        assert_eq!(agg.n_states(), 2, "{agg:?}");
        assert_eq!(agg.q, vec![3.0, 2.0]);
        assert_eq!(agg.w, vec![6.0, 4.0]);
        assert!(check_lossless(&inst, &agg, 0.0).unwrap().is_lossless());
    }

    #[test]
    fn compress_splits_equal_profiles_with_different_futures() {
        // pattern A B A C (cyclic): the two A-hours look identical but are
        // followed by different states, so they must become distinct states
        let inst = inst_from_demand(vec![1.0, 5.0, 1.0, 9.0]);
        let agg = compress_lossless(&inst, 0.0).unwrap();
        assert_eq!(agg.n_states(), 4);
        assert!(check_lossless(&inst, &agg, 0.0).unwrap().is_lossless());
    }

    #[test]
    fn compress_constant_series_is_single_self_loop_state() {
        let inst = inst_from_demand(vec![4.0; 6]);
        let agg = compress_lossless(&inst, 0.0).unwrap();
        assert_eq!(agg.n_states(), 1);
        assert_eq!(agg.q, vec![6.0]);
        assert_eq!(agg.p.sole_successor(0), Some(0));
        assert!(check_lossless(&inst, &agg, 0.0).unwrap().is_lossless());
    }

    #[test]
    fn compress_respects_tolerance_window() {
        // within tol 0.2 the two levels are indistinguishable; at 0 they split
        let inst = inst_from_demand(vec![1.0, 1.1, 1.0, 1.1]);
        let coarse = compress_lossless(&inst, 0.2).unwrap();
        assert_eq!(coarse.n_states(), 1);
        assert!(check_lossless(&inst, &coarse, 0.2).unwrap().is_lossless());
        let fine = compress_lossless(&inst, 0.0).unwrap();
        assert_eq!(fine.n_states(), 2);
    }

    #[test]
    fn compress_distinguishes_hours_by_variable_cost() {
        // identical demand/availability but hour-varying cost: conservative
        // compressor refuses to merge across cost differences
        let mut inst = inst_from_demand(vec![3.0; 4]);
        inst.generators[0].var_cost = vec![1.0, 2.0, 1.0, 2.0];
        let agg = compress_lossless(&inst, 0.0).unwrap();
        assert_eq!(agg.n_states(), 2);
    }
}
