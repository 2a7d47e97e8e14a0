use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;
use tsdshap_core::analysis::{generate_noisy_benchmark, BenchmarkConfig};
use tsdshap_core::baselines::{knn_shapley_values, knn_utility, loo_values};
use tsdshap_core::classifier::{make_dev_accuracy_value_fn, ClassifierConfig};
use tsdshap_core::shapley::exact_shapley;
use tsdshap_core::{Dataset, EmbeddingMatrix, LabelVector, ValueFunction};

fn random_instance(n: usize, dim: usize, classes: u32, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Coarse grid coordinates so distance ties actually occur.
    let mut coord = |count: usize| -> Vec<f32> {
        (0..count * dim)
            .map(|_| rng.random_range(0..4) as f32)
            .collect()
    };
    let train = coord(n);
    let dev = coord(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
    let labels: Vec<u32> = (0..n).map(|_| rng.random_range(0..classes)).collect();
    let dev_label = rng.random_range(0..classes);
    let k = classes as usize;
    Dataset::new(
        EmbeddingMatrix::new(n, dim, train).unwrap(),
        LabelVector::with_num_classes(labels, k).unwrap(),
        EmbeddingMatrix::new(1, dim, dev).unwrap(),
        LabelVector::with_num_classes(vec![dev_label], k).unwrap(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn knn_recursion_equals_brute_force(seed in any::<u64>(), n in 1usize..=8, k in 1usize..=6, dim in 1usize..3) {
        let ds = random_instance(n, dim, 2, seed);
        let closed = knn_shapley_values(&ds, k).unwrap();
        let utility = |s: &[usize]| knn_utility(s, &ds, k, 0);
        let brute = exact_shapley(&utility, n).unwrap();
        for (a, b) in closed.values.iter().zip(&brute.values) {
            prop_assert!((a - b).abs() < 1e-9, "closed {:?} brute {:?}", closed.values, brute.values);
        }
    }
}

#[test]
fn knn_base_case_when_everything_matches() {
    let ds = random_instance(6, 2, 1, 3);
    let v = knn_shapley_values(&ds, 3).unwrap();
    // With every label matching, the farthest point gets 1/N.
    let farthest = v.values.iter().copied().fold(f64::INFINITY, f64::min);
    assert!((farthest - 1.0 / 6.0).abs() < 1e-12);
}

#[test]
fn knn_scales_without_enumeration() {
    let ds = generate_noisy_benchmark(&BenchmarkConfig::new(4000, 0.1, 1))
        .unwrap()
        .dataset;
    let start = Instant::now();
    let v = knn_shapley_values(&ds, 5).unwrap();
    assert_eq!(v.values.len(), 4000);
    assert!(start.elapsed().as_secs() < 30);
}

#[test]
fn loo_matches_direct_recomputation() {
    let ds = generate_noisy_benchmark(&BenchmarkConfig {
        n_train: 6,
        n_dev: 30,
        dim: 3,
        flip_fraction: 0.2,
        separation: 2.0,
        seed: 5,
    })
    .unwrap()
    .dataset;
    let loo = loo_values(&ds, ClassifierConfig::default()).unwrap();
    let v = make_dev_accuracy_value_fn(&ds, ClassifierConfig::default()).unwrap();
    let full = v.evaluate(&[0, 1, 2, 3, 4, 5]);
    for i in 0..6 {
        let rest: Vec<usize> = (0..6).filter(|&j| j != i).collect();
        assert!((loo.values[i] - (full - v.evaluate(&rest))).abs() < 1e-12);
    }
    assert_eq!(loo, loo_values(&ds, ClassifierConfig::default()).unwrap());
}
