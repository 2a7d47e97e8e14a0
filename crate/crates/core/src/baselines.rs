//! Leave-one-out, KNN-Shapley and random valuation baselines.

use rand::Rng;
use rayon::prelude::*;
use serde_json::json;

use crate::classifier::{make_dev_accuracy_value_fn, ClassifierConfig};
use crate::data::{Dataset, Method, ValuationResult, ValueFunction};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

/// Dev points per block in the KNN reduction; blocks are summed in order.
const KNN_BLOCK: usize = 64;

pub const DEFAULT_KNN_K: usize = 5;

/// `v(D) − v(D \ {i})` under the dev-accuracy value function.
pub fn loo_values(dataset: &Dataset, classifier: ClassifierConfig) -> Result<ValuationResult> {
    let n = dataset.num_train();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "leave-one-out needs at least 2 training instances, got {n}"
        )));
    }
    let value_fn = make_dev_accuracy_value_fn(dataset, classifier)?;
    loo_with(
        &value_fn,
        n,
        json!({ "reg_c": classifier.reg_c, "epochs": classifier.epochs }),
    )
}

/// Leave-one-out under an arbitrary value function.
pub fn loo_with<V>(value_fn: &V, n: usize, echo: serde_json::Value) -> Result<ValuationResult>
where
    V: ValueFunction + ?Sized,
{
    let all: Vec<usize> = (0..n).collect();
    let full = value_fn.evaluate(&all);
    let values = (0..n)
        .into_par_iter()
        .map(|i| {
            let rest: Vec<usize> = all.iter().copied().filter(|&j| j != i).collect();
            full - value_fn.evaluate(&rest)
        })
        .collect();
    ValuationResult::new(values, Method::Loo, echo, 0)
}

fn squared_distance(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum()
}

/// Training indices sorted by distance to dev point `dev_index`, lower index on ties.
fn neighbours(dataset: &Dataset, candidates: &[usize], dev_index: usize) -> Vec<usize> {
    let query = dataset.dev_features.row(dev_index);
    let mut keyed: Vec<(f64, usize)> = candidates
        .iter()
        .map(|&i| (squared_distance(dataset.train_features.row(i), query), i))
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    keyed.into_iter().map(|(_, i)| i).collect()
}

/// Fraction of the `K` nearest members of `subset` whose label matches the
/// dev point's, with `K` as the denominator even when `|subset| < K`.
pub fn knn_utility(subset: &[usize], dataset: &Dataset, k: usize, dev_index: usize) -> f64 {
    if subset.is_empty() || k == 0 {
        return 0.0;
    }
    let target = dataset.dev_labels.as_slice()[dev_index];
    let train_labels = dataset.train_labels.as_slice();
    let hits = neighbours(dataset, subset, dev_index)
        .into_iter()
        .take(k)
        .filter(|&i| train_labels[i] == target)
        .count();
    hits as f64 / k as f64
}

/// Exact KNN-Shapley values for a single dev point, in O(n log n).
///
/// With training points sorted nearest-first as `a_1..a_N` and
/// `m_j = 1[y(a_j) = y_dev]`:
/// `s(a_N) = m_N / max(K, N)` and
/// `s(a_j) = s(a_{j+1}) + (m_j − m_{j+1}) / K · min(K, j) / j`.
pub fn knn_shapley_for_dev_point(dataset: &Dataset, k: usize, dev_index: usize) -> Vec<f64> {
    let n = dataset.num_train();
    let mut values = vec![0.0; n];
    if n == 0 {
        return values;
    }
    let all: Vec<usize> = (0..n).collect();
    let sorted = neighbours(dataset, &all, dev_index);
    let target = dataset.dev_labels.as_slice()[dev_index];
    let train_labels = dataset.train_labels.as_slice();
    let hit = |i: usize| if train_labels[i] == target { 1.0 } else { 0.0 };

    let kf = k as f64;
    let mut s = hit(sorted[n - 1]) / k.max(n) as f64;
    values[sorted[n - 1]] = s;
    for j in (1..n).rev() {
        // `j` is the 1-based rank of sorted[j - 1].
        let (here, next) = (sorted[j - 1], sorted[j]);
        s += (hit(here) - hit(next)) / kf * k.min(j) as f64 / j as f64;
        values[here] = s;
    }
    values
}

/// KNN-Shapley values averaged over all dev points.
pub fn knn_shapley_values(dataset: &Dataset, k: usize) -> Result<ValuationResult> {
    let n = dataset.num_train();
    let n_dev = dataset.num_dev();
    if k == 0 {
        return Err(Error::InvalidArgument("K must be >= 1".into()));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    if n_dev == 0 {
        return Err(Error::InvalidArgument(
            "KNN-Shapley needs a non-empty dev set".into(),
        ));
    }
    let blocks: Vec<Vec<f64>> = (0..n_dev)
        .step_by(KNN_BLOCK)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|start| {
            let mut acc = vec![0.0; n];
            for d in start..(start + KNN_BLOCK).min(n_dev) {
                for (a, v) in acc.iter_mut().zip(knn_shapley_for_dev_point(dataset, k, d)) {
                    *a += v;
                }
            }
            acc
        })
        .collect();
    let mut totals = vec![0.0; n];
    for block in blocks {
        for (t, b) in totals.iter_mut().zip(block) {
            *t += b;
        }
    }
    let values = totals.into_iter().map(|t| t / n_dev as f64).collect();
    ValuationResult::new(values, Method::Knn, json!({ "k": k }), 0)
}

/// I.i.d. uniform values in `[0, 1)`; ranking by them removes a uniformly random subset.
pub fn random_values(n: usize, seed: u64) -> ValuationResult {
    let mut rng = stream_rng(seed, Stream::RandomValues);
    let values = (0..n).map(|_| rng.random::<f64>()).collect();
    ValuationResult {
        values,
        method: Method::Random,
        config_echo: json!({ "n": n }),
        seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{EmbeddingMatrix, LabelVector};

    fn line_dataset(train: &[f32], labels: &[u32], dev: &[f32], dev_labels: &[u32]) -> Dataset {
        let col = |v: &[f32]| EmbeddingMatrix::new(v.len(), 1, v.to_vec()).unwrap();
        Dataset::new(
            col(train),
            LabelVector::new(labels.to_vec()),
            col(dev),
            LabelVector::new(dev_labels.to_vec()),
        )
        .unwrap()
    }

    #[test]
    fn utility_conventions() {
        let ds = line_dataset(
            &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0],
            &[1, 1, 1, 1, 1, 0],
            &[0.0],
            &[1],
        );
        assert_eq!(knn_utility(&[2], &ds, 5, 0), 0.2);
        assert_eq!(knn_utility(&[], &ds, 5, 0), 0.0);
        assert_eq!(knn_utility(&[0, 1, 2, 3, 4, 5], &ds, 5, 0), 1.0);
        assert_eq!(knn_utility(&[0, 1, 2, 3, 4, 5], &ds, 6, 0), 5.0 / 6.0);
    }

    #[test]
    fn distance_ties_prefer_lower_index() {
        let ds = line_dataset(&[1.0, -1.0], &[0, 1], &[0.0], &[1]);
        assert_eq!(knn_utility(&[0, 1], &ds, 1, 0), 0.0);
        assert_eq!(knn_utility(&[1, 0], &ds, 1, 0), 0.0);
    }

    #[test]
    fn all_matching_labels_give_uniform_values() {
        let ds = line_dataset(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[1; 7], &[0.0], &[1]);
        let v = knn_shapley_for_dev_point(&ds, 3, 0);
        // All seven points are interchangeable for a match count, and v(D) = 1.
        for x in &v {
            assert!((x - 1.0 / 7.0).abs() < 1e-12, "{v:?}");
        }
    }

    #[test]
    fn two_dev_points_average() {
        let ds = line_dataset(&[0.0, 1.0, 2.0, 3.0], &[0, 1, 0, 1], &[0.2, 2.9], &[0, 1]);
        let both = knn_shapley_values(&ds, 2).unwrap();
        let a = knn_shapley_for_dev_point(&ds, 2, 0);
        let b = knn_shapley_for_dev_point(&ds, 2, 1);
        for i in 0..4 {
            assert!((both.values[i] - (a[i] + b[i]) / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn knn_rejects_empty_dev() {
        let ds = line_dataset(&[0.0, 1.0], &[0, 1], &[], &[]);
        assert!(knn_shapley_values(&ds, 5).is_err());
        assert!(knn_shapley_values(&line_dataset(&[0.0], &[0], &[0.0], &[0]), 0).is_err());
    }

    #[test]
    fn loo_of_constant_game_is_zero() {
        let v = |_: &[usize]| 0.42;
        let r = loo_with(&v, 5, serde_json::Value::Null).unwrap();
        assert!(r.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn loo_needs_two_instances() {
        let ds = line_dataset(&[0.0], &[0], &[0.0], &[0]);
        assert!(loo_values(&ds, ClassifierConfig::default()).is_err());
    }

    #[test]
    fn loo_duplicates_are_worthless() {
        // Every point appears twice and the dev points sit inside the clusters,
        // so dropping one copy keeps dev accuracy at 1.
        let ds = line_dataset(
            &[-3.0, -3.0, -2.0, -2.0, 2.0, 2.0, 3.0, 3.0],
            &[0, 0, 0, 0, 1, 1, 1, 1],
            &[-2.5, -2.0, 2.0, 2.5],
            &[0, 0, 1, 1],
        );
        let r = loo_values(&ds, ClassifierConfig::default()).unwrap();
        assert!(r.values.iter().all(|&x| x == 0.0), "{:?}", r.values);
    }

    #[test]
    fn random_values_are_seeded() {
        assert_eq!(random_values(5, 3), random_values(5, 3));
        assert_ne!(random_values(5, 3).values, random_values(5, 4).values);
    }
}
