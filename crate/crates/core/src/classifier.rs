//! One-vs-rest linear SVM used as the cheap proxy model.
//!
//! Each binary problem minimises `λ/2·‖w‖² + mean(hinge(y·(w·x + b)))` with
//! `λ = reg_c` by deterministic stochastic subgradient descent: instances are
//! visited in ascending index order for a fixed number of epochs with step
//! size `1/(λ·t)`, where `t` counts updates from 1. The bias is not
//! regularised. Identical inputs give bit-identical weights.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, EmbeddingMatrix, LabelVector, ValueFunction};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub reg_c: f64,
    pub epochs: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            reg_c: 1.0,
            epochs: 100,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.reg_c.is_finite() && self.reg_c > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "reg_c must be a positive finite number, got {}",
                self.reg_c
            )));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    dim: usize,
    num_classes: usize,
    /// `num_classes × dim`, row-major. Rows of unseen classes stay zero.
    weights: Vec<f64>,
    bias: Vec<f64>,
    classes_seen: Vec<u32>,
}

impl LinearModel {
    fn constant(dim: usize, num_classes: usize, class: u32) -> Self {
        let num_classes = num_classes.max(class as usize + 1);
        Self {
            dim,
            num_classes,
            weights: vec![0.0; num_classes * dim],
            bias: vec![0.0; num_classes],
            classes_seen: vec![class],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Classes present in the training data, ascending.
    pub fn classes_seen(&self) -> &[u32] {
        &self.classes_seen
    }

    pub fn weights(&self, class: u32) -> &[f64] {
        let c = class as usize;
        &self.weights[c * self.dim..(c + 1) * self.dim]
    }

    pub fn bias(&self, class: u32) -> f64 {
        self.bias[class as usize]
    }

    /// The single class every input maps to, if fewer than two classes were seen.
    pub fn constant_class(&self) -> Option<u32> {
        match self.classes_seen.as_slice() {
            [only] => Some(*only),
            _ => None,
        }
    }

    pub fn score(&self, class: u32, row: &[f32]) -> f64 {
        dot(self.weights(class), row) + self.bias(class)
    }

    /// Argmax over seen classes; exact ties go to the lowest class id.
    pub fn predict_row(&self, row: &[f32]) -> u32 {
        if let Some(c) = self.constant_class() {
            return c;
        }
        let mut best = self.classes_seen[0];
        let mut best_score = self.score(best, row);
        for &c in &self.classes_seen[1..] {
            let s = self.score(c, row);
            if s > best_score {
                best = c;
                best_score = s;
            }
        }
        best
    }
}

pub fn train_linear(
    features: &EmbeddingMatrix,
    labels: &LabelVector,
    config: &ClassifierConfig,
) -> Result<LinearModel> {
    if features.rows() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} feature rows but {} labels",
            features.rows(),
            labels.len()
        )));
    }
    let all: Vec<usize> = (0..features.rows()).collect();
    train_on_indices(features, labels, &all, config)
}

/// Trains on the rows named by `indices`, visited in the given order.
pub fn train_on_indices(
    features: &EmbeddingMatrix,
    labels: &LabelVector,
    indices: &[usize],
    config: &ClassifierConfig,
) -> Result<LinearModel> {
    config.validate()?;
    let dim = features.cols();
    let num_classes = labels.num_classes().max(1);
    let y = labels.as_slice();

    let mut seen: Vec<u32> = indices.iter().map(|&i| y[i]).collect();
    seen.sort_unstable();
    seen.dedup();
    match seen.as_slice() {
        [] => return Ok(LinearModel::constant(dim, num_classes, 0)),
        [only] => return Ok(LinearModel::constant(dim, num_classes, *only)),
        _ => {}
    }

    let mut weights = vec![0.0; num_classes * dim];
    let mut bias = vec![0.0; num_classes];
    if let [neg, pos] = seen.as_slice() {
        // The update rule is odd under (w, b, y) -> (-w, -b, -y), so the
        // negative class's machine is exactly the negation of the positive one.
        let (w, b) = train_binary(features, indices, |i| y[i] == *pos, config);
        for (k, wk) in w.iter().enumerate() {
            weights[*pos as usize * dim + k] = *wk;
            weights[*neg as usize * dim + k] = -*wk;
        }
        bias[*pos as usize] = b;
        bias[*neg as usize] = -b;
    } else {
        for &c in &seen {
            let (w, b) = train_binary(features, indices, |i| y[i] == c, config);
            weights[c as usize * dim..(c as usize + 1) * dim].copy_from_slice(&w);
            bias[c as usize] = b;
        }
    }

    Ok(LinearModel {
        dim,
        num_classes,
        weights,
        bias,
        classes_seen: seen,
    })
}

fn train_binary(
    features: &EmbeddingMatrix,
    indices: &[usize],
    is_positive: impl Fn(usize) -> bool,
    config: &ClassifierConfig,
) -> (Vec<f64>, f64) {
    let lambda = config.reg_c;
    let mut w = vec![0.0; features.cols()];
    let mut b = 0.0;
    let mut t = 0u64;
    for _ in 0..config.epochs {
        for &i in indices {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let x = features.row(i);
            let target = if is_positive(i) { 1.0 } else { -1.0 };
            let margin = target * (dot(&w, x) + b);
            let shrink = 1.0 - eta * lambda;
            for wk in w.iter_mut() {
                *wk *= shrink;
            }
            if margin < 1.0 {
                let step = eta * target;
                for (wk, &xk) in w.iter_mut().zip(x) {
                    *wk += step * xk as f64;
                }
                b += step;
            }
        }
    }
    (w, b)
}

fn dot(w: &[f64], x: &[f32]) -> f64 {
    w.iter().zip(x).map(|(a, &b)| a * b as f64).sum()
}

pub fn predict(model: &LinearModel, features: &EmbeddingMatrix) -> Result<LabelVector> {
    if features.cols() != model.dim {
        return Err(Error::Dimension(format!(
            "model expects {} features, got {}",
            model.dim,
            features.cols()
        )));
    }
    let preds = features.iter_rows().map(|r| model.predict_row(r)).collect();
    LabelVector::with_num_classes(preds, model.num_classes)
}

/// Fraction of positions where `predictions` matches `gold`.
pub fn accuracy(predictions: &LabelVector, gold: &LabelVector) -> Result<f64> {
    if predictions.len() != gold.len() {
        return Err(Error::Dimension(format!(
            "{} predictions vs {} gold labels",
            predictions.len(),
            gold.len()
        )));
    }
    if gold.is_empty() {
        return Err(Error::InvalidArgument(
            "accuracy of an empty label vector".into(),
        ));
    }
    let hits = predictions
        .as_slice()
        .iter()
        .zip(gold.as_slice())
        .filter(|(a, b)| a == b)
        .count();
    Ok(hits as f64 / gold.len() as f64)
}

/// Dev-set accuracy of the proxy classifier trained on a subset of the
/// training split.
#[derive(Debug, Clone)]
pub struct DevAccuracy<'a> {
    dataset: &'a Dataset,
    config: ClassifierConfig,
}

pub fn make_dev_accuracy_value_fn(
    dataset: &Dataset,
    config: ClassifierConfig,
) -> Result<DevAccuracy<'_>> {
    config.validate()?;
    let report = crate::data::validate_dataset(dataset);
    if !report.is_empty() {
        return Err(Error::InvalidDataset(report));
    }
    if dataset.num_dev() == 0 {
        return Err(Error::InvalidArgument("dev split is empty".into()));
    }
    Ok(DevAccuracy { dataset, config })
}

impl DevAccuracy<'_> {
    pub fn dataset(&self) -> &Dataset {
        self.dataset
    }

    pub fn config(&self) -> &ClassifierConfig {
        &self.config
    }

    /// Trains on `subset` after sorting it, so the result depends only on the set.
    pub fn train(&self, subset: &[usize]) -> LinearModel {
        let mut sorted = subset.to_vec();
        sorted.sort_unstable();
        train_on_indices(
            &self.dataset.train_features,
            &self.dataset.train_labels,
            &sorted,
            &self.config,
        )
        .expect("configuration validated at construction")
    }

    pub fn score_model(&self, model: &LinearModel) -> f64 {
        let gold = self.dataset.dev_labels.as_slice();
        let hits = self
            .dataset
            .dev_features
            .iter_rows()
            .zip(gold)
            .filter(|(row, &y)| model.predict_row(row) == y)
            .count();
        hits as f64 / gold.len() as f64
    }
}

impl ValueFunction for DevAccuracy<'_> {
    fn evaluate(&self, subset: &[usize]) -> f64 {
        self.score_model(&self.train(subset))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two tight clusters around (-1,-1) and (1,1), 20 points each, with a
    /// deterministic jitter of at most 0.3 per coordinate.
    pub(crate) fn clusters() -> (EmbeddingMatrix, LabelVector) {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..40 {
            let (cx, class) = if i % 2 == 0 { (-1.0, 0) } else { (1.0, 1) };
            let jx = ((i * 7 % 11) as f32 / 10.0 - 0.5) * 0.6;
            let jy = ((i * 5 % 13) as f32 / 12.0 - 0.5) * 0.6;
            rows.push([cx + jx, cx + jy]);
            labels.push(class);
        }
        (
            EmbeddingMatrix::from_rows(&rows).unwrap(),
            LabelVector::new(labels),
        )
    }

    #[test]
    fn separable_clusters_are_fit_exactly() {
        let (x, y) = clusters();
        let model = train_linear(&x, &y, &ClassifierConfig::default()).unwrap();
        let pred = predict(&model, &x).unwrap();
        assert_eq!(accuracy(&pred, &y).unwrap(), 1.0);
    }

    #[test]
    fn training_is_bit_reproducible() {
        let (x, y) = clusters();
        let a = train_linear(&x, &y, &ClassifierConfig::default()).unwrap();
        let b = train_linear(&x, &y, &ClassifierConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn two_class_shortcut_matches_explicit_one_vs_rest() {
        let (x, y) = clusters();
        let config = ClassifierConfig::default();
        let idx: Vec<usize> = (0..x.rows()).collect();
        let model = train_linear(&x, &y, &config).unwrap();
        let (w0, b0) = train_binary(&x, &idx, |i| y.as_slice()[i] == 0, &config);
        assert_eq!(model.weights(0), w0.as_slice());
        assert_eq!(model.bias(0), b0);
    }

    #[test]
    fn degenerate_training_sets_give_constant_predictors() {
        let x = EmbeddingMatrix::from_rows(&[[0.0, 1.0], [2.0, 3.0]]).unwrap();
        let y = LabelVector::new(vec![1, 1]);
        let model = train_linear(&x, &y, &ClassifierConfig::default()).unwrap();
        assert_eq!(model.constant_class(), Some(1));
        assert_eq!(predict(&model, &x).unwrap().as_slice(), &[1, 1]);

        let empty = EmbeddingMatrix::new(0, 2, vec![]).unwrap();
        let model = train_linear(
            &empty,
            &LabelVector::new(vec![]),
            &ClassifierConfig::default(),
        )
        .unwrap();
        assert_eq!(model.constant_class(), Some(0));
        assert_eq!(predict(&model, &x).unwrap().as_slice(), &[0, 0]);
    }

    #[test]
    fn ties_go_to_lowest_class() {
        let model = LinearModel {
            dim: 1,
            num_classes: 2,
            weights: vec![1.0, 1.0],
            bias: vec![0.0, 0.0],
            classes_seen: vec![0, 1],
        };
        assert_eq!(model.predict_row(&[3.0]), 0);
    }

    #[test]
    fn three_classes() {
        let rows: Vec<[f32; 2]> = (0..30)
            .map(|i| {
                let jitter = (i / 3) as f32 * 0.02;
                match i % 3 {
                    0 => [5.0 + jitter, 0.0],
                    1 => [0.0, 5.0 + jitter],
                    _ => [-5.0 - jitter, -5.0],
                }
            })
            .collect();
        let x = EmbeddingMatrix::from_rows(&rows).unwrap();
        let y = LabelVector::new((0..30).map(|i| i % 3).collect());
        let model = train_linear(&x, &y, &ClassifierConfig::default()).unwrap();
        assert_eq!(model.classes_seen(), &[0, 1, 2]);
        assert_eq!(accuracy(&predict(&model, &x).unwrap(), &y).unwrap(), 1.0);
    }

    #[test]
    fn predict_rejects_wrong_width() {
        let (x, y) = clusters();
        let model = train_linear(&x, &y, &ClassifierConfig::default()).unwrap();
        let wide = EmbeddingMatrix::from_rows(&[[0.0, 0.0, 0.0]]).unwrap();
        assert!(predict(&model, &wide).is_err());
    }

    #[test]
    fn accuracy_counts_matches() {
        let a = |v: &[u32]| LabelVector::new(v.to_vec());
        assert_eq!(accuracy(&a(&[0, 1, 1]), &a(&[0, 1, 1])).unwrap(), 1.0);
        assert_eq!(accuracy(&a(&[0, 1, 0]), &a(&[1, 0, 1])).unwrap(), 0.0);
        assert_eq!(
            accuracy(&a(&[0, 1, 1, 0]), &a(&[0, 1, 0, 0])).unwrap(),
            0.75
        );
        assert!(accuracy(&a(&[0]), &a(&[0, 1])).is_err());
        assert!(accuracy(&a(&[]), &a(&[])).is_err());
    }

    #[test]
    fn invalid_config_is_rejected() {
        let (x, y) = clusters();
        let bad = ClassifierConfig {
            reg_c: 0.0,
            epochs: 10,
        };
        assert!(train_linear(&x, &y, &bad).is_err());
    }

    fn dataset_with_dev(dev_labels: Vec<u32>) -> Dataset {
        let (x, y) = clusters();
        let dev = x.select_rows(&(0..dev_labels.len()).collect::<Vec<_>>());
        Dataset::new(x, y, dev, LabelVector::new(dev_labels)).unwrap()
    }

    #[test]
    fn value_function_on_full_and_empty_sets() {
        let (x, y) = clusters();
        let ds = Dataset::new(x.clone(), y.clone(), x, y).unwrap();
        let v = make_dev_accuracy_value_fn(&ds, ClassifierConfig::default()).unwrap();
        let all: Vec<usize> = (0..40).collect();
        assert_eq!(v.evaluate(&all), 1.0);

        let zeros = dataset_with_dev(vec![0; 6]);
        let v = make_dev_accuracy_value_fn(&zeros, ClassifierConfig::default()).unwrap();
        assert_eq!(v.evaluate(&[]), 1.0);

        let ones = dataset_with_dev(vec![1; 6]);
        let v = make_dev_accuracy_value_fn(&ones, ClassifierConfig::default()).unwrap();
        assert_eq!(v.evaluate(&[]), 0.0);
    }

    #[test]
    fn value_function_ignores_index_order() {
        let (x, y) = clusters();
        let ds = Dataset::new(x.clone(), y.clone(), x, y).unwrap();
        let v = make_dev_accuracy_value_fn(&ds, ClassifierConfig::default()).unwrap();
        let a = v.evaluate(&[3, 0, 9, 4]);
        let b = v.evaluate(&[0, 3, 4, 9]);
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
