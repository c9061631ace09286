//! System-state aggregation: cluster *hours* (not days) by their
//! demand/availability feature vector, then describe the temporal structure
//! statistically — an empirical transition matrix between consecutive hours'
//! states and a mean run length per state. Unlike representative days this
//! keeps no calendar structure at all, which is exactly what makes it cheap
//! and also what lets inter-temporal constraints blur: the chronology is only
//! preserved in distribution.

use super::cluster::{kmeans, normalize_columns};
use super::{cyclic_runs, mean_of, AggError, Aggregation, StateProfiles, TransitionMatrix};
use crate::model::SystemInstance;

pub fn system_states(instance: &SystemInstance, k: usize) -> Result<Aggregation, AggError> {
    instance.validate()?;
    if !instance.grid.cyclic {
        return Err(AggError::OpenGrid);
    }
    let n = instance.n_hours();
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

    let raw_assign = kmeans(&features, k)?;

    // relabel states in order of first appearance so output is stable and
    // readable (state 0 occurs first)
    let mut relabel = vec![usize::MAX; k];
    let mut next = 0usize;
    let mut gamma = Vec::with_capacity(n);
    for &c in &raw_assign {
        if relabel[c] == usize::MAX {
            relabel[c] = next;
            next += 1;
        }
        gamma.push(relabel[c]);
    }
    let s_count = next; // == k (kmeans guarantees nonempty clusters)

    let mut w = vec![0.0; s_count];
    for &s in &gamma {
        w[s] += 1.0;
    }

    // empirical successor frequencies, wrapping the horizon
    let mut p = TransitionMatrix::zeros(s_count);
    for h in 0..n {
        p.add(gamma[h], gamma[(h + 1) % n], 1.0);
    }
    p.normalize_rows();

    // q = mean visit length = member hours / number of maximal runs
    let mut run_count = vec![0usize; s_count];
    for (s, _, _) in cyclic_runs(&gamma) {
        run_count[s] += 1;
    }
    let q: Vec<f64> = (0..s_count).map(|s| w[s] / run_count[s] as f64).collect();

    // profiles are raw member means
    let members = {
        let mut mm = vec![Vec::new(); s_count];
        for (h, &s) in gamma.iter().enumerate() {
            mm[s].push(h);
        }
        mm
    };
    let demand =
        members.iter().map(|hours| mean_of(hours.iter().map(|&h| instance.demand[h]))).collect();
    let availability = instance
        .generators
        .iter()
        .map(|gen| {
            members
                .iter()
                .map(|hours| mean_of(hours.iter().map(|&h| gen.availability[h])))
                .collect()
        })
        .collect();

    let agg = Aggregation { gamma, w, q, p, profiles: StateProfiles { demand, availability } };
    agg.validate(instance)?;
    Ok(agg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{GeneratorSpec, StorageSpec, TimeGrid};

    fn two_level_instance() -> SystemInstance {
        // 12 hours alternating blocks of low/high demand, flat availability
        let demand = vec![2.0, 2.0, 2.0, 8.0, 8.0, 8.0, 2.0, 2.0, 2.0, 8.0, 8.0, 8.0];
        SystemInstance {
            grid: TimeGrid::cyclic(12),
            demand,
            generators: vec![GeneratorSpec::flat("g", 1.0, 2.0, vec![1.0; 12])],
            storage: StorageSpec { door_cost: 0.2, room_cost: 0.1 },
        }
    }

    #[test]
    fn two_levels_give_two_states_with_mean_run_length_three() {
        let inst = two_level_instance();
        let agg = system_states(&inst, 2).unwrap();
        agg.validate(&inst).unwrap();
        assert_eq!(agg.n_states(), 2);
        assert_eq!(agg.gamma[0], 0, "first hour defines state 0");
        assert_eq!(agg.w, vec![6.0, 6.0]);
        assert_eq!(agg.q, vec![3.0, 3.0]);
        // each block of 3: two self-transitions + one switch → P = [2/3, 1/3]
        assert!((agg.p.entry(0, 0) - 2.0 / 3.0).abs() < 1e-12);
        assert!((agg.p.entry(0, 1) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(agg.profiles.demand, vec![2.0, 8.0]);
    }

    #[test]
    fn k_equal_n_recovers_hour_resolution() {
        let inst = two_level_instance();
        let agg = system_states(&inst, 12).unwrap();
        assert_eq!(agg.n_states(), 12);
        assert!(agg.w.iter().all(|&w| w == 1.0));
    }

    #[test]
    fn open_grid_is_rejected() {
        let mut inst = two_level_instance();
        inst.grid = TimeGrid::open(12);
        assert!(matches!(system_states(&inst, 2), Err(AggError::OpenGrid)));
    }

    #[test]
    fn excessive_k_is_rejected() {
        let inst = two_level_instance();
        assert!(matches!(system_states(&inst, 13), Err(AggError::Clustering(_))));
    }
}
