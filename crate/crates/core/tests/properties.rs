mod common;

use common::{exp_caps, grid_max_min, permutations, simplex_grid};
use dfrelay_core::allocator::{allocate, RejectReason};
use dfrelay_core::montecarlo::db_to_linear;
use dfrelay_core::rate_model::{build_capacity_matrix, build_rate_matrix, full_mask, RelaySubset, SnrConfig};
use dfrelay_core::scenario::{
    draw_channel_powers, fading_params, grid_topology, linear_topology, random_topology, renumber, NumberingScheme,
    Topology, TrialRng,
};
use dfrelay_core::selector::{brute_force_select, recursive_select};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn simplex_grid_covers_every_composition() {
    let mut count = 0;
    simplex_grid(3, 10, |t| {
        assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        count += 1;
    });
    assert_eq!(count, 66);
}

/// Where the equalizing allocation of the full pair goes non-positive, no
/// non-negative allocation of that pair beats the best strict subset.
#[test]
fn rejected_pair_is_dominated_by_strict_subsets() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let both = RelaySubset::new(vec![1, 2], 2).unwrap();
    let mut checked = 0;
    for _ in 0..400 {
        let caps = exp_caps(&mut rng, 2);
        let full = allocate(&build_rate_matrix(&caps, &both).unwrap());
        if !matches!(full.reject_reason, RejectReason::NonpositiveTime(_)) {
            continue;
        }
        let strict_best = [vec![], vec![1], vec![2]]
            .into_iter()
            .map(|s| allocate(&build_rate_matrix(&caps, &RelaySubset::new(s, 2).unwrap()).unwrap()))
            .filter(|a| a.feasible)
            .map(|a| a.rate)
            .fold(0.0, f64::max);
        let grid = grid_max_min(&caps, &both, 400);
        assert!(grid <= strict_best * (1.0 + 1e-9) + 1e-12, "grid {grid} > strict {strict_best}");
        checked += 1;
    }
    assert!(checked > 20, "only {checked} rejected pairs");
}

#[test]
fn rejected_subset_pool_best_is_strict_subset() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut checked = 0;
    for n in 2..=4 {
        for _ in 0..200 {
            let caps = exp_caps(&mut rng, n);
            for bits in 1..1u64 << n {
                let s = RelaySubset::from_bits(bits, n);
                let a = allocate(&build_rate_matrix(&caps, &s).unwrap());
                if !matches!(a.reject_reason, RejectReason::NonpositiveTime(_)) {
                    continue;
                }
                let pool = caps.restricted(s.indices()).unwrap();
                let best = brute_force_select(&pool).unwrap();
                assert!(best.best.subset.len() < s.len());
                let strict_max = (0..(1u64 << s.len()) - 1)
                    .map(|b| RelaySubset::from_bits(b, s.len()))
                    .map(|sub| allocate(&build_rate_matrix(&pool, &sub).unwrap()))
                    .filter(|a| a.feasible)
                    .map(|a| a.rate)
                    .fold(f64::NEG_INFINITY, f64::max);
                assert_eq!(best.best.rate, strict_max);
                checked += 1;
            }
        }
    }
    assert!(checked > 100);
}

fn draw_caps(topology: &Topology, seed: u64, trial: u64, snr_db: f64) -> dfrelay_core::rate_model::LinkCapacityMatrix {
    let powers = draw_channel_powers(&fading_params(topology).unwrap(), &TrialRng::new(seed, trial));
    let snr = SnrConfig::new(db_to_linear(snr_db)).unwrap();
    build_capacity_matrix(&powers, &full_mask(powers.size()), snr).unwrap()
}

#[test]
fn heuristic_numberings_never_beat_the_best_permutation() {
    let topologies = [
        linear_topology(3),
        grid_topology(2).unwrap(),
        random_topology(4, 5).unwrap(),
        random_topology(3, 6).unwrap(),
    ];
    for topology in &topologies {
        let n = topology.n_relays();
        let perms = permutations(n);
        for trial in 0..30 {
            let caps = draw_caps(topology, 21, trial, 10.0);
            let oracle = perms
                .iter()
                .map(|p| recursive_select(&caps.renumbered(p).unwrap()).unwrap().best.rate)
                .fold(f64::NEG_INFINITY, f64::max);
            for scheme in NumberingScheme::ALL {
                if !scheme.supports(topology) {
                    continue;
                }
                let mut aux = TrialRng::new(21, trial).auxiliary();
                let order = renumber(scheme, topology, &caps, &mut aux).unwrap();
                let rate = recursive_select(&caps.renumbered(&order).unwrap()).unwrap().best.rate;
                assert!(rate <= oracle * (1.0 + 1e-12), "{} beat the oracle", scheme.name());
            }
        }
    }
}

#[test]
fn relabeling_relays_leaves_the_direct_link_alone() {
    let topology = random_topology(4, 8).unwrap();
    let caps = draw_caps(&topology, 3, 0, 5.0);
    for p in permutations(4) {
        let renumbered = caps.renumbered(&p).unwrap();
        assert_eq!(renumbered.direct(), caps.direct());
        assert!(recursive_select(&renumbered).unwrap().best.rate >= caps.direct() * (1.0 - 1e-12));
    }
}
