//! Sweep correlation tables and a synthetic noisy-label benchmark.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, EmbeddingMatrix, LabelVector};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

/// Sample Pearson correlation. Errors when either series is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!(
            "series lengths differ ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::UndefinedCorrelation(
            "need at least two points".into(),
        ));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("constant series".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && x[idx[end]] == x[idx[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Spearman rank correlation (Pearson on average ranks).
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    pearson(&average_ranks(x), &average_ranks(y))
}

/// One downstream evaluation in a sampling-parameter sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub subset_size_pct: f64,
    pub chains: usize,
    pub performance: f64,
    pub trial: usize,
}

pub const SWEEP_HEADER: &str = "subset_size_pct,chains,performance,trial";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Chains,
    SubsetSize,
}

/// Correlation between the varied parameter and trial-mean performance at one
/// level of the other parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationRow {
    pub level: f64,
    /// `None` when undefined (fewer than two distinct settings or constant performance).
    pub correlation: Option<f64>,
    pub settings: usize,
}

pub fn sweep_correlations(records: &[SweepRecord], vary: SweepAxis) -> Vec<CorrelationRow> {
    let split = |r: &SweepRecord| match vary {
        SweepAxis::Chains => (r.subset_size_pct, r.chains as f64),
        SweepAxis::SubsetSize => (r.chains as f64, r.subset_size_pct),
    };
    let mut levels: Vec<f64> = records.iter().map(|r| split(r).0).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();

    levels
        .into_iter()
        .map(|level| {
            // (setting, sum, count), settings ascending.
            let mut groups: Vec<(f64, f64, usize)> = Vec::new();
            for r in records {
                let (l, setting) = split(r);
                if l != level {
                    continue;
                }
                match groups.iter_mut().find(|g| g.0 == setting) {
                    Some(g) => {
                        g.1 += r.performance;
                        g.2 += 1;
                    }
                    None => groups.push((setting, r.performance, 1)),
                }
            }
            groups.sort_by(|a, b| a.0.total_cmp(&b.0));
            let xs: Vec<f64> = groups.iter().map(|g| g.0).collect();
            let ys: Vec<f64> = groups.iter().map(|g| g.1 / g.2 as f64).collect();
            CorrelationRow {
                level,
                correlation: pearson(&xs, &ys).ok(),
                settings: groups.len(),
            }
        })
        .collect()
}

fn format_level(level: f64) -> String {
    if level.fract() == 0.0 {
        format!("{level:.0}")
    } else {
        format!("{level}")
    }
}

fn format_correlation(c: Option<f64>) -> String {
    c.map_or_else(|| "n/a".to_string(), |c| format!("{c:.3}"))
}

fn axis_names(vary: SweepAxis) -> (&'static str, &'static str) {
    match vary {
        SweepAxis::Chains => ("subset_size_pct", "number of chains"),
        SweepAxis::SubsetSize => ("chains", "subset size"),
    }
}

/// Two columns, `<level>,correlation`; undefined cells are `n/a`.
pub fn correlations_to_csv(rows: &[CorrelationRow], vary: SweepAxis) -> String {
    let (level_name, _) = axis_names(vary);
    let mut out = format!("{level_name},correlation\n");
    for row in rows {
        writeln!(
            out,
            "{},{}",
            format_level(row.level),
            format_correlation(row.correlation)
        )
        .unwrap();
    }
    out
}

/// One header row of levels and one row of correlations, three decimals.
pub fn correlations_to_text(rows: &[CorrelationRow], vary: SweepAxis, label: &str) -> String {
    let (_, varied) = axis_names(vary);
    let fixed = match vary {
        SweepAxis::Chains => "Subset size (%)",
        SweepAxis::SubsetSize => "Number of sampling chains",
    };
    let levels: Vec<String> = rows.iter().map(|r| format_level(r.level)).collect();
    let cells: Vec<String> = rows
        .iter()
        .map(|r| format_correlation(r.correlation))
        .collect();
    let width = levels
        .iter()
        .chain(&cells)
        .map(String::len)
        .max()
        .unwrap_or(0);
    let label_width = label.len().max(fixed.len());

    let mut out = format!("Correlation between {varied} and performance\n");
    let _ = write!(out, "{fixed:<label_width$}");
    for l in &levels {
        let _ = write!(out, "  {l:>width$}");
    }
    out.push('\n');
    let _ = write!(out, "{label:<label_width$}");
    for c in &cells {
        let _ = write!(out, "  {c:>width$}");
    }
    out.push('\n');
    out
}

pub fn read_sweep_records(path: impl AsRef<Path>) -> Result<Vec<SweepRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let fail = |line: usize, message: String| Error::TextFormat {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == SWEEP_HEADER => {}
        _ => return Err(fail(1, format!("expected header {SWEEP_HEADER:?}"))),
    }
    let mut records = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let [pct, chains, perf, trial] = fields.as_slice() else {
            return Err(fail(
                line_no,
                format!("expected 4 fields, got {}", fields.len()),
            ));
        };
        let bad = |what: &str| fail(line_no, format!("cannot parse {what}"));
        let record = SweepRecord {
            subset_size_pct: pct.parse().map_err(|_| bad("subset_size_pct"))?,
            chains: chains.parse().map_err(|_| bad("chains"))?,
            performance: perf.parse().map_err(|_| bad("performance"))?,
            trial: trial.parse().map_err(|_| bad("trial"))?,
        };
        if !(0.0..=1.0).contains(&record.performance) {
            return Err(fail(line_no, "performance must lie in [0, 1]".into()));
        }
        records.push(record);
    }
    Ok(records)
}

pub fn write_sweep_records(records: &[SweepRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = format!("{SWEEP_HEADER}\n");
    for r in records {
        writeln!(
            out,
            "{},{},{},{}",
            r.subset_size_pct, r.chains, r.performance, r.trial
        )
        .unwrap();
    }
    fs::write(path, out).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Two unit-variance Gaussian classes with some training labels flipped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub n_train: usize,
    pub n_dev: usize,
    pub dim: usize,
    pub flip_fraction: f64,
    /// Distance between the class means, in standard deviations.
    pub separation: f64,
    pub seed: u64,
}

impl BenchmarkConfig {
    /// `d = 32`, separation 3σ, and an 80/20 train/dev split.
    pub fn new(n_train: usize, flip_fraction: f64, seed: u64) -> Self {
        Self {
            n_train,
            n_dev: n_train / 4,
            dim: 32,
            flip_fraction,
            separation: 3.0,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NoisyBenchmark {
    pub dataset: Dataset,
    /// Training indices whose label was flipped, ascending.
    pub flipped: Vec<usize>,
}

/// Class means sit at `±separation/2` along the all-ones diagonal. Labels are
/// fair coin flips; `floor(flip_fraction · n_train)` distinct training labels
/// are then inverted. The dev split stays clean.
pub fn generate_noisy_benchmark(config: &BenchmarkConfig) -> Result<NoisyBenchmark> {
    if !(0.0..0.5).contains(&config.flip_fraction) {
        return Err(Error::InvalidArgument(format!(
            "flip fraction {} must lie in [0, 0.5)",
            config.flip_fraction
        )));
    }
    if config.dim == 0 {
        return Err(Error::InvalidArgument("dimension must be >= 1".into()));
    }
    if !(config.separation.is_finite() && config.separation >= 0.0) {
        return Err(Error::InvalidArgument(
            "separation must be finite and >= 0".into(),
        ));
    }
    let mut rng = stream_rng(config.seed, Stream::Benchmark);
    let offset = config.separation / 2.0 / (config.dim as f64).sqrt();

    let mut sample = |count: usize| {
        let mut data = Vec::with_capacity(count * config.dim);
        let mut labels = Vec::with_capacity(count);
        for _ in 0..count {
            let label: u32 = rng.random_range(0..2);
            let sign = if label == 1 { 1.0 } else { -1.0 };
            for _ in 0..config.dim {
                let z: f64 = rng.sample(StandardNormal);
                data.push((sign * offset + z) as f32);
            }
            labels.push(label);
        }
        (data, labels)
    };
    let (train_data, mut train_labels) = sample(config.n_train);
    let (dev_data, dev_labels) = sample(config.n_dev);

    let n_flip = (config.flip_fraction * config.n_train as f64).floor() as usize;
    let mut pool: Vec<usize> = (0..config.n_train).collect();
    let (chosen, _) = pool.partial_shuffle(&mut rng, n_flip);
    let mut flipped = chosen.to_vec();
    flipped.sort_unstable();
    for &i in &flipped {
        train_labels[i] = 1 - train_labels[i];
    }

    let dataset = Dataset::new(
        EmbeddingMatrix::new(config.n_train, config.dim, train_data)?,
        LabelVector::with_num_classes(train_labels, 2)?,
        EmbeddingMatrix::new(config.n_dev, config.dim, dev_data)?,
        LabelVector::with_num_classes(dev_labels, 2)?,
    )?;
    Ok(NoisyBenchmark { dataset, flipped })
}
