mod common;

use brats_core::ensemble::{average_probs, two_level_ensemble};
use brats_core::volume::{Region, RegionProbSet};
use common::*;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

fn configurations(
    rng: &mut StdRng,
    shape: [usize; 3],
    counts: &[usize],
) -> Vec<Vec<RegionProbSet>> {
    counts
        .iter()
        .map(|&k| (0..k).map(|_| random_probs(rng, shape)).collect())
        .collect()
}

#[test]
fn permutation_invariant_at_both_levels() {
    let mut rng = StdRng::seed_from_u64(51);
    for _ in 0..20 {
        let shape = random_shape(&mut rng, 6);
        let counts: Vec<usize> = (0..rng.gen_range(1..5))
            .map(|_| rng.gen_range(1..6))
            .collect();
        let mut configs = configurations(&mut rng, shape, &counts);
        let base = two_level_ensemble(&configs).unwrap();
        configs.shuffle(&mut rng);
        for c in configs.iter_mut() {
            c.shuffle(&mut rng);
        }
        assert_eq!(two_level_ensemble(&configs).unwrap(), base);
    }
}

#[test]
fn output_is_bounded_by_members() {
    let mut rng = StdRng::seed_from_u64(52);
    let shape = [4, 3, 5];
    let configs = configurations(&mut rng, shape, &[1, 3, 7]);
    let out = two_level_ensemble(&configs).unwrap();
    let all: Vec<&RegionProbSet> = configs.iter().flatten().collect();
    for r in Region::ALL {
        for (i, &v) in out.get(r).as_slice().iter().enumerate() {
            let vals = all.iter().map(|m| m.get(r).as_slice()[i]);
            let lo = vals.clone().fold(f64::INFINITY, f64::min);
            let hi = vals.fold(f64::NEG_INFINITY, f64::max);
            assert!(lo <= v && v <= hi);
        }
    }
}

#[test]
fn equal_counts_equal_pooled_mean() {
    let mut rng = StdRng::seed_from_u64(53);
    for _ in 0..10 {
        let k = rng.gen_range(1..5);
        let c = rng.gen_range(1..5);
        let configs = configurations(&mut rng, [3, 4, 2], &vec![k; c]);
        let two = two_level_ensemble(&configs).unwrap();
        let pooled = average_probs(&configs.concat()).unwrap();
        for r in Region::ALL {
            for (a, b) in two.get(r).as_slice().iter().zip(pooled.get(r).as_slice()) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}
