//! Low-value removal curves and the kept training subset.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::classifier::{make_dev_accuracy_value_fn, ClassifierConfig};
use crate::data::{Dataset, ValuationResult, ValueFunction};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

/// Dev accuracy of the proxy after removing the `k` lowest-value instances,
/// for `k = 0, step, 2·step, … < n`.
#[derive(Debug, Clone, PartialEq)]
pub struct RemovalCurve {
    pub removed_counts: Vec<usize>,
    pub dev_accuracies: Vec<f64>,
    pub step: usize,
    /// Training indices sorted by ascending value, lower index first on ties.
    pub order: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub optimal_removed: usize,
    /// Ascending.
    pub kept_indices: Vec<usize>,
    pub best_dev_accuracy: f64,
}

/// `max(1, n / 100)`.
pub fn default_step(n: usize) -> usize {
    (n / 100).max(1)
}

/// Indices sorted by ascending value; equal values keep index order.
pub fn removal_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    order
}

pub fn removal_curve(
    values: &ValuationResult,
    dataset: &Dataset,
    step: usize,
    classifier: ClassifierConfig,
) -> Result<RemovalCurve> {
    let n = dataset.num_train();
    if n == 0 {
        return Err(Error::InvalidArgument(
            "cannot build a removal curve for an empty training set".into(),
        ));
    }
    if step == 0 {
        return Err(Error::InvalidArgument("removal step must be >= 1".into()));
    }
    if values.len() != n {
        return Err(Error::Dimension(format!(
            "{} values for {n} training instances",
            values.len()
        )));
    }
    let value_fn = make_dev_accuracy_value_fn(dataset, classifier)?;
    let order = removal_order(&values.values);
    let removed_counts: Vec<usize> = (0..n).step_by(step).collect();
    let dev_accuracies = removed_counts
        .par_iter()
        .map(|&k| value_fn.evaluate(&order[k..]))
        .collect();
    Ok(RemovalCurve {
        removed_counts,
        dev_accuracies,
        step,
        order,
    })
}

/// Removed count with the highest dev accuracy; the smallest count wins ties.
pub fn optimal_removal_index(curve: &RemovalCurve) -> usize {
    let mut best = 0;
    for (i, &acc) in curve.dev_accuracies.iter().enumerate() {
        if acc > curve.dev_accuracies[best] {
            best = i;
        }
    }
    curve.removed_counts[best]
}

/// Keeps everything except the first `removed` entries of `curve.order`.
pub fn kept_after_removal(curve: &RemovalCurve, removed: usize) -> Vec<usize> {
    let mut kept = curve.order[removed..].to_vec();
    kept.sort_unstable();
    kept
}

pub fn select_subset(
    values: &ValuationResult,
    dataset: &Dataset,
    step: usize,
    classifier: ClassifierConfig,
) -> Result<(SelectionResult, RemovalCurve)> {
    let curve = removal_curve(values, dataset, step, classifier)?;
    let optimal_removed = optimal_removal_index(&curve);
    let point = curve
        .removed_counts
        .iter()
        .position(|&k| k == optimal_removed)
        .expect("optimum is a curve point");
    let selection = SelectionResult {
        optimal_removed,
        kept_indices: kept_after_removal(&curve, optimal_removed),
        best_dev_accuracy: curve.dev_accuracies[point],
    };
    Ok((selection, curve))
}

/// Removes `k_remove` uniformly random instances; returns the kept indices, ascending.
pub fn random_removal(n: usize, k_remove: usize, seed: u64) -> Result<Vec<usize>> {
    if k_remove >= n {
        return Err(Error::InvalidArgument(format!(
            "cannot remove {k_remove} of {n} instances"
        )));
    }
    let mut rng = stream_rng(seed, Stream::RandomRemoval);
    let mut pool: Vec<usize> = (0..n).collect();
    let (_, kept) = pool.partial_shuffle(&mut rng, k_remove);
    let mut kept = kept.to_vec();
    kept.sort_unstable();
    Ok(kept)
}

/// `removed_count,dev_accuracy` with six decimals.
pub fn curve_to_csv(curve: &RemovalCurve) -> String {
    let mut out = String::from("removed_count,dev_accuracy\n");
    for (k, acc) in curve.removed_counts.iter().zip(&curve.dev_accuracies) {
        writeln!(out, "{k},{acc:.6}").unwrap();
    }
    out
}

pub fn write_curve_csv(curve: &RemovalCurve, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &curve_to_csv(curve))
}

pub fn write_indices(indices: &[usize], path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::with_capacity(indices.len() * 6);
    for i in indices {
        writeln!(out, "{i}").unwrap();
    }
    write_text(path.as_ref(), &out)
}

pub fn read_indices(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            line.trim().parse().map_err(|_| Error::TextFormat {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("{line:?} is not an index"),
            })
        })
        .collect()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{EmbeddingMatrix, LabelVector, Method};

    fn curve(accs: &[f64], step: usize) -> RemovalCurve {
        RemovalCurve {
            removed_counts: (0..accs.len()).map(|i| i * step).collect(),
            dev_accuracies: accs.to_vec(),
            step,
            order: (0..accs.len() * step + 1).collect(),
        }
    }

    #[test]
    fn optimum_is_argmax_with_earliest_tie() {
        assert_eq!(optimal_removal_index(&curve(&[0.8, 0.9, 0.85], 10)), 10);
        assert_eq!(optimal_removal_index(&curve(&[0.7, 0.7, 0.7], 10)), 0);
        assert_eq!(optimal_removal_index(&curve(&[0.9, 0.8, 0.7], 10)), 0);
    }

    #[test]
    fn constant_values_remove_in_index_order() {
        assert_eq!(removal_order(&[0.5; 5]), vec![0, 1, 2, 3, 4]);
        assert_eq!(removal_order(&[0.3, -1.0, 0.3, 2.0]), vec![1, 0, 2, 3]);
    }

    #[test]
    fn kept_excludes_lowest() {
        let c = RemovalCurve {
            removed_counts: vec![0, 3],
            dev_accuracies: vec![0.5, 0.6],
            step: 3,
            order: vec![5, 2, 7, 0, 1, 3, 4, 6],
        };
        assert_eq!(kept_after_removal(&c, 3), vec![0, 1, 3, 4, 6]);
        assert_eq!(kept_after_removal(&c, 0), (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn random_removal_properties() {
        assert_eq!(random_removal(5, 0, 1).unwrap(), vec![0, 1, 2, 3, 4]);
        let a = random_removal(10, 4, 42).unwrap();
        assert_eq!(a, random_removal(10, 4, 42).unwrap());
        assert_eq!(a.len(), 6);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert!(a.iter().all(|&i| i < 10));
        assert!(random_removal(3, 3, 0).is_err());
    }

    #[test]
    fn csv_layout() {
        let c = curve(&[0.5, 2.0 / 3.0], 2);
        assert_eq!(
            curve_to_csv(&c),
            "removed_count,dev_accuracy\n0,0.500000\n2,0.666667\n"
        );
    }

    #[test]
    fn step_of_n_gives_single_point() {
        let x = EmbeddingMatrix::from_rows(&[[-1.0f32], [-0.5], [0.5], [1.0]]).unwrap();
        let y = LabelVector::new(vec![0, 0, 1, 1]);
        let ds = Dataset::new(x.clone(), y.clone(), x, y).unwrap();
        let values =
            ValuationResult::new(vec![0.0; 4], Method::Random, serde_json::Value::Null, 0).unwrap();
        let c = removal_curve(&values, &ds, 4, ClassifierConfig::default()).unwrap();
        assert_eq!(c.removed_counts, vec![0]);
        let full = make_dev_accuracy_value_fn(&ds, ClassifierConfig::default())
            .unwrap()
            .evaluate(&[0, 1, 2, 3]);
        assert_eq!(c.dev_accuracies, vec![full]);
        assert!(removal_curve(&values, &ds, 0, ClassifierConfig::default()).is_err());
    }

    #[test]
    fn index_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("kept.txt");
        write_indices(&[0, 4, 17], &path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "0\n4\n17\n");
        assert_eq!(read_indices(&path).unwrap(), vec![0, 4, 17]);
    }
}
