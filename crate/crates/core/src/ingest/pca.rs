use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::data::EmbeddingMatrix;
use crate::error::{Error, Result};

/// Rows per block when accumulating the covariance. Blocks are reduced in
/// order, so the result does not depend on the thread count.
const COV_BLOCK_ROWS: usize = 4096;

/// Principal axes of a set of rows.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `k × d`, row-major, orthonormal rows.
    pub components: Vec<f64>,
    /// Sample-covariance eigenvalue for each component, non-increasing.
    pub explained_variance: Vec<f64>,
}

impl PcaModel {
    pub fn num_components(&self) -> usize {
        self.explained_variance.len()
    }

    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let d = self.input_dim();
        &self.components[c * d..(c + 1) * d]
    }

    /// `components · (row − mean)` in full precision.
    pub fn project_row(&self, row: &[f32]) -> Vec<f64> {
        let centered: Vec<f64> = row
            .iter()
            .zip(&self.mean)
            .map(|(&x, &m)| x as f64 - m)
            .collect();
        (0..self.num_components())
            .map(|c| {
                self.component(c)
                    .iter()
                    .zip(&centered)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// Maps projected coordinates back to the input space.
    pub fn reconstruct(&self, projected: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (c, &z) in projected.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.component(c)) {
                *o += z * a;
            }
        }
        out
    }
}

/// Fits `min(k, cols, rows − 1)` principal components.
///
/// Components are the leading eigenvectors of the sample covariance (divisor
/// `rows − 1`), ordered by descending eigenvalue with ties kept in
/// eigensolver order. Each component's largest-magnitude entry is made
/// positive, the lowest index winning ties.
pub fn fit_pca(matrix: &EmbeddingMatrix, k: usize) -> Result<PcaModel> {
    let (n, d) = (matrix.rows(), matrix.cols());
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "PCA needs at least 2 rows, got {n}"
        )));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("PCA needs k >= 1".into()));
    }
    let k = k.min(d).min(n - 1);

    let sums = block_reduce(matrix, vec![0.0; d], |acc, row| {
        for (a, &x) in acc.iter_mut().zip(row) {
            *a += x as f64;
        }
    });
    let mean: Vec<f64> = sums.iter().map(|s| s / n as f64).collect();

    // Upper triangle of the scatter matrix.
    let scatter = block_reduce(matrix, vec![0.0; d * d], |acc, row| {
        let centered: Vec<f64> = row.iter().zip(&mean).map(|(&x, m)| x as f64 - m).collect();
        for i in 0..d {
            let ci = centered[i];
            let acc_row = &mut acc[i * d..(i + 1) * d];
            for j in i..d {
                acc_row[j] += ci * centered[j];
            }
        }
    });
    let cov = DMatrix::from_fn(d, d, |i, j| {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        scatter[a * d + b] / (n - 1) as f64
    });

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut components = Vec::with_capacity(k * d);
    let mut explained_variance = Vec::with_capacity(k);
    for &idx in order.iter().take(k) {
        let mut v: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut pivot = 0;
        for (i, x) in v.iter().enumerate() {
            if x.abs() > v[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for x in &mut v {
            *x *= sign / norm;
        }
        components.extend_from_slice(&v);
        explained_variance.push(eig.eigenvalues[idx].max(0.0));
    }

    Ok(PcaModel {
        mean,
        components,
        explained_variance,
    })
}

/// Projects every row of `matrix` onto the model's components.
pub fn apply_pca(model: &PcaModel, matrix: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
    if matrix.cols() != model.input_dim() {
        return Err(Error::Dimension(format!(
            "PCA model expects {} columns, matrix has {}",
            model.input_dim(),
            matrix.cols()
        )));
    }
    let k = model.num_components();
    let data: Vec<f32> = matrix
        .iter_rows()
        .collect::<Vec<_>>()
        .par_iter()
        .flat_map_iter(|row| model.project_row(row).into_iter().map(|z| z as f32))
        .collect();
    EmbeddingMatrix::new(matrix.rows(), k, data)
}

fn block_reduce<F>(matrix: &EmbeddingMatrix, zero: Vec<f64>, fold: F) -> Vec<f64>
where
    F: Fn(&mut [f64], &[f32]) + Sync,
{
    let cols = matrix.cols();
    let partials: Vec<Vec<f64>> = matrix
        .as_slice()
        .par_chunks(COV_BLOCK_ROWS * cols)
        .map(|block| {
            let mut acc = zero.clone();
            for row in block.chunks_exact(cols) {
                fold(&mut acc, row);
            }
            acc
        })
        .collect();
    partials.into_iter().fold(zero, |mut total, part| {
        for (t, p) in total.iter_mut().zip(part) {
            *t += p;
        }
        total
    })
}
