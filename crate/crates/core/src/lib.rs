//! Shapley-based training data valuation on a cheap linear proxy classifier.
//!
//! The pipeline is: load (optionally PCA-reduced) representations, value each
//! training instance with multi-chain Monte Carlo sampling over subsets, then
//! remove low-value instances while the proxy's dev accuracy improves.
//!
//! Module map:
//! - [`data`]: shared types and the [`ValueFunction`] contract.
//! - [`ingest`]: matrix/label file formats and PCA.
//! - [`classifier`]: the one-vs-rest linear SVM behind the dev-accuracy value function.
//! - [`shapley`]: exact brute-force Shapley values and the sampling-chain estimator.
//! - [`selection`]: removal curves and the kept subset.
//! - [`baselines`]: leave-one-out and KNN-Shapley.
//! - [`analysis`]: correlation tables for parameter sweeps and the noisy-label benchmark.

pub mod analysis;
pub mod baselines;
pub mod classifier;
pub mod data;
mod error;
pub mod ingest;
pub mod rng;
pub mod selection;
pub mod shapley;

pub use classifier::{ClassifierConfig, DevAccuracy, LinearModel};
pub use data::{
    validate_dataset, Dataset, EmbeddingMatrix, LabelVector, Method, SamplingConfig,
    ValuationResult, ValueFunction,
};
pub use error::{Error, Result};
