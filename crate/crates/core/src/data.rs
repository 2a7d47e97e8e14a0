//! Shared domain types.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major `rows × cols` feature matrix stored as `f32`, the precision of the
/// on-disk formats.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl EmbeddingMatrix {
    /// Builds a matrix, rejecting shape errors and non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        let matrix = Self::from_raw(rows, cols, data)?;
        if let Some((r, c)) = matrix.first_non_finite() {
            return Err(Error::InvalidArgument(format!(
                "non-finite entry at ({r},{c})"
            )));
        }
        Ok(matrix)
    }

    /// Builds a matrix checking only the shape. Entries may be non-finite;
    /// [`validate_dataset`] reports them.
    pub fn from_raw(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if cols == 0 {
            return Err(Error::Dimension(
                "matrix must have at least one column".into(),
            ));
        }
        let expected = rows.checked_mul(cols).ok_or_else(|| {
            Error::Dimension(format!("{rows} x {cols} overflows the address space"))
        })?;
        if data.len() != expected {
            return Err(Error::Dimension(format!(
                "{rows} x {cols} matrix needs {expected} entries, got {}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::Dimension(format!(
                    "row {i} has {} columns, expected {cols}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.data.chunks_exact(self.cols)
    }

    /// Copies the selected rows, in the given order, into a new matrix.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    /// Stacks `other` below `self`.
    pub fn vstack(&self, other: &Self) -> Result<Self> {
        if self.cols != other.cols {
            return Err(Error::Dimension(format!(
                "cannot stack {} columns onto {}",
                other.cols, self.cols
            )));
        }
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Ok(Self {
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        })
    }

    fn first_non_finite(&self) -> Option<(usize, usize)> {
        self.data
            .iter()
            .position(|v| !v.is_finite())
            .map(|p| (p / self.cols, p % self.cols))
    }
}

/// Dense class ids `0..num_classes`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector {
    labels: Vec<u32>,
    num_classes: usize,
}

impl LabelVector {
    /// Infers `num_classes` as `max + 1` (0 for an empty vector).
    pub fn new(labels: Vec<u32>) -> Self {
        let num_classes = labels.iter().max().map_or(0, |&m| m as usize + 1);
        Self {
            labels,
            num_classes,
        }
    }

    pub fn with_num_classes(labels: Vec<u32>, num_classes: usize) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= num_classes) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} is out of range for {num_classes} classes"
            )));
        }
        Ok(Self {
            labels,
            num_classes,
        })
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
        }
    }
}

/// Training universe plus the development split that the value function scores on.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train_features: EmbeddingMatrix,
    pub train_labels: LabelVector,
    pub dev_features: EmbeddingMatrix,
    pub dev_labels: LabelVector,
}

impl Dataset {
    /// Assembles a dataset, unifying `num_classes` across splits and rejecting
    /// anything [`validate_dataset`] complains about.
    pub fn new(
        train_features: EmbeddingMatrix,
        train_labels: LabelVector,
        dev_features: EmbeddingMatrix,
        dev_labels: LabelVector,
    ) -> Result<Self> {
        let k = train_labels.num_classes.max(dev_labels.num_classes);
        let dataset = Self {
            train_features,
            train_labels: LabelVector::with_num_classes(train_labels.labels, k)?,
            dev_features,
            dev_labels: LabelVector::with_num_classes(dev_labels.labels, k)?,
        };
        let report = validate_dataset(&dataset);
        if report.is_empty() {
            Ok(dataset)
        } else {
            Err(Error::InvalidDataset(report))
        }
    }

    pub fn num_train(&self) -> usize {
        self.train_features.rows()
    }

    pub fn num_dev(&self) -> usize {
        self.dev_features.rows()
    }

    pub fn num_classes(&self) -> usize {
        self.train_labels.num_classes()
    }

    /// Returns a copy with both feature matrices replaced.
    pub fn with_features(&self, train: EmbeddingMatrix, dev: EmbeddingMatrix) -> Result<Self> {
        Self::new(
            train,
            self.train_labels.clone(),
            dev,
            self.dev_labels.clone(),
        )
    }
}

/// Lists every invariant violation in `dataset`; an empty list means valid.
pub fn validate_dataset(dataset: &Dataset) -> Vec<String> {
    let mut report = Vec::new();
    let splits = [
        ("train", &dataset.train_features, &dataset.train_labels),
        ("dev", &dataset.dev_features, &dataset.dev_labels),
    ];
    for (name, features, labels) in splits {
        if features.rows() != labels.len() {
            report.push(format!(
                "{name}: row/label count mismatch ({} rows, {} labels)",
                features.rows(),
                labels.len()
            ));
        }
        if features.data.len() != features.rows * features.cols {
            report.push(format!("{name}: data length does not match shape"));
        }
        if let Some((r, c)) = features.first_non_finite() {
            report.push(format!("{name}: non-finite entry at ({r},{c})"));
        }
        if let Some(&bad) = labels
            .as_slice()
            .iter()
            .find(|&&l| l as usize >= labels.num_classes())
        {
            report.push(format!(
                "{name}: label {bad} out of range for {} classes",
                labels.num_classes()
            ));
        }
    }
    if dataset.train_features.cols() != dataset.dev_features.cols() {
        report.push(format!(
            "train/dev feature dimension mismatch ({} vs {})",
            dataset.train_features.cols(),
            dataset.dev_features.cols()
        ));
    }
    if dataset.train_labels.num_classes() != dataset.dev_labels.num_classes() {
        report.push(format!(
            "train/dev num_classes mismatch ({} vs {})",
            dataset.train_labels.num_classes(),
            dataset.dev_labels.num_classes()
        ));
    }
    report
}

/// How per-chain contribution sums are turned into means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Divide by the iteration count `T`, counting iterations where the
    /// instance was not sampled as zero contributions.
    #[default]
    Iterations,
    /// Divide by the number of iterations that actually sampled the instance.
    Inclusions,
}

/// Parameters of the sampling-chain estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingConfig {
    /// Upper bound `s` on the sampled subset size; sizes are drawn from `[ceil(s/2), s]`.
    pub subset_size: usize,
    /// Iterations per chain.
    pub iterations: usize,
    pub chains: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub normalization: Normalization,
}

impl SamplingConfig {
    pub const DEFAULT_ITERATIONS: usize = 50;

    pub fn new(subset_size: usize, iterations: usize, chains: usize, master_seed: u64) -> Self {
        Self {
            subset_size,
            iterations,
            chains,
            master_seed,
            normalization: Normalization::Iterations,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.subset_size == 0 || self.subset_size > n {
            return Err(Error::InvalidArgument(format!(
                "subset size {} must lie in [1, {n}]",
                self.subset_size
            )));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidArgument("iterations must be >= 1".into()));
        }
        if self.chains == 0 {
            return Err(Error::InvalidArgument("chains must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    TsDshapley,
    Exact,
    Loo,
    Knn,
    Random,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::TsDshapley => "ts_dshapley",
            Method::Exact => "exact",
            Method::Loo => "loo",
            Method::Knn => "knn",
            Method::Random => "random",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per-training-instance values produced by any valuation method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValuationResult {
    pub values: Vec<f64>,
    pub method: Method,
    /// Resolved parameters of the producing run.
    pub config_echo: serde_json::Value,
    pub seed: u64,
}

impl ValuationResult {
    pub fn new(
        values: Vec<f64>,
        method: Method,
        config_echo: serde_json::Value,
        seed: u64,
    ) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "value for instance {i} is not finite"
            )));
        }
        Ok(Self {
            values,
            method,
            config_echo,
            seed,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Utility of a coalition of training instances.
///
/// `subset` holds distinct training indices in arbitrary order and must be
/// treated as a set. Implementations must be deterministic, total (including
/// the empty set) and callable from several threads at once.
pub trait ValueFunction: Send + Sync {
    fn evaluate(&self, subset: &[usize]) -> f64;
}

impl<F> ValueFunction for F
where
    F: Fn(&[usize]) -> f64 + Send + Sync,
{
    fn evaluate(&self, subset: &[usize]) -> f64 {
        self(subset)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Dataset {
        let train =
            EmbeddingMatrix::from_rows(&[[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]]).unwrap();
        let dev = EmbeddingMatrix::from_rows(&[[0.5, 0.5]]).unwrap();
        Dataset::new(
            train,
            LabelVector::new(vec![0, 0, 1, 1]),
            dev,
            LabelVector::new(vec![1]),
        )
        .unwrap()
    }

    #[test]
    fn well_formed_dataset_has_empty_report() {
        assert!(validate_dataset(&tiny()).is_empty());
    }

    #[test]
    fn row_label_mismatch_is_reported() {
        let mut ds = tiny();
        ds.train_features =
            EmbeddingMatrix::from_rows(&[[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]]).unwrap();
        ds.train_labels = LabelVector::new(vec![0, 1]);
        let report = validate_dataset(&ds);
        assert!(
            report
                .iter()
                .any(|m| m.contains("row/label count mismatch")),
            "{report:?}"
        );
    }

    #[test]
    fn nan_entry_is_reported_with_position() {
        let mut ds = tiny();
        ds.train_features =
            EmbeddingMatrix::from_raw(4, 2, vec![0.0, 0.0, 0.0, 1.0, 1.0, f32::NAN, 1.0, 1.0])
                .unwrap();
        let report = validate_dataset(&ds);
        assert!(
            report
                .iter()
                .any(|m| m.contains("non-finite entry at (2,1)")),
            "{report:?}"
        );
        assert!(Dataset::new(
            ds.train_features.clone(),
            ds.train_labels.clone(),
            ds.dev_features.clone(),
            ds.dev_labels.clone()
        )
        .is_err());
    }

    #[test]
    fn num_classes_inferred_from_max_label() {
        assert_eq!(LabelVector::new(vec![0, 2, 1]).num_classes(), 3);
        assert_eq!(LabelVector::new(vec![]).num_classes(), 0);
    }

    #[test]
    fn dataset_unifies_class_count_across_splits() {
        let ds = tiny();
        // dev only contains class 1, train contains 0 and 1
        assert_eq!(ds.dev_labels.num_classes(), 2);
    }

    #[test]
    fn sampling_config_bounds() {
        assert!(SamplingConfig::new(3, 1, 1, 0).validate(3).is_ok());
        assert!(SamplingConfig::new(4, 1, 1, 0).validate(3).is_err());
        assert!(SamplingConfig::new(0, 1, 1, 0).validate(3).is_err());
        assert!(SamplingConfig::new(2, 0, 1, 0).validate(3).is_err());
        assert!(SamplingConfig::new(2, 1, 0, 0).validate(3).is_err());
    }

    #[test]
    fn valuation_result_rejects_non_finite() {
        let echo = serde_json::Value::Null;
        assert!(ValuationResult::new(vec![0.0, f64::INFINITY], Method::Loo, echo, 0).is_err());
    }

    #[test]
    fn method_serializes_snake_case() {
        assert_eq!(
            serde_json::to_string(&Method::TsDshapley).unwrap(),
            "\"ts_dshapley\""
        );
    }
}
