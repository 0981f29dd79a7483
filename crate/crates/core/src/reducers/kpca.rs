//! Kernel PCA on the double-centered Gram matrix.
//!
//! Kernels use `γ = 1/d`, `coef0 = 1` and degree 3. The top eigenpairs of
//! the centered Gram matrix come from [`lanczos_largest`]; pairs with
//! eigenvalue `≤ 1e-10` are dropped, never propagated.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{check_k, FittedReducer, Kernel, Model, ReducerError, ReducerSpec};
use crate::corpus::EmbeddingMatrix;
use crate::linalg::{lanczos_largest, LanczosOptions};

pub const EIGENVALUE_FLOOR: f64 = 1e-10;
const DEGREE: i32 = 3;
const COEF0: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    pub kernel: Kernel,
    pub gamma: f64,
}

impl KernelParams {
    pub fn new(kernel: Kernel, d: usize) -> Self {
        Self {
            kernel,
            gamma: 1.0 / d as f64,
        }
    }

    pub fn eval(&self, x: &[f32], y: &[f32]) -> f64 {
        let dot = || -> f64 {
            x.iter()
                .zip(y)
                .map(|(a, b)| f64::from(*a) * f64::from(*b))
                .sum()
        };
        match self.kernel {
            Kernel::Poly => (self.gamma * dot() + COEF0).powi(DEGREE),
            Kernel::Sigmoid => (self.gamma * dot() + COEF0).tanh(),
            Kernel::Rbf => {
                let sq: f64 = x
                    .iter()
                    .zip(y)
                    .map(|(a, b)| (f64::from(*a) - f64::from(*b)).powi(2))
                    .sum();
                (-self.gamma * sq).exp()
            }
            Kernel::Cosine => {
                let nx: f64 = x.iter().map(|a| f64::from(*a).powi(2)).sum::<f64>().sqrt();
                let ny: f64 = y.iter().map(|a| f64::from(*a).powi(2)).sum::<f64>().sqrt();
                if nx == 0.0 || ny == 0.0 {
                    0.0
                } else {
                    dot() / (nx * ny)
                }
            }
        }
    }
}

/// `K_ij = k(x_i, x_j)` over the rows of `m`.
pub fn gram_matrix(m: &EmbeddingMatrix, params: &KernelParams) -> DMatrix<f64> {
    let n = m.n_rows();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = m.row(i);
            (0..n).map(|j| params.eval(xi, m.row(j))).collect()
        })
        .collect();
    DMatrix::from_fn(n, n, |i, j| rows[i][j])
}

/// Returns `(K − 1K − K1 + 1K1, row means of K, grand mean of K)`.
pub fn center_gram(k: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, f64) {
    let n = k.nrows();
    let nf = n as f64;
    let row_means: Vec<f64> = k.row_iter().map(|r| r.sum() / nf).collect();
    let total = row_means.iter().sum::<f64>() / nf;
    let centered = DMatrix::from_fn(n, n, |i, j| k[(i, j)] - row_means[i] - row_means[j] + total);
    (centered, row_means, total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KpcaModel {
    pub params: KernelParams,
    /// Training rows (`n × d`, row-major), needed to evaluate kernels at transform time.
    pub train: Vec<f32>,
    pub dim: usize,
    /// Strictly positive, non-increasing.
    pub eigenvalues: Vec<f64>,
    /// Unit eigenvectors of the centered Gram matrix, one per eigenvalue.
    pub eigenvectors: Vec<Vec<f64>>,
    pub gram_row_means: Vec<f64>,
    pub gram_mean: f64,
}

impl KpcaModel {
    fn n_train(&self) -> usize {
        self.gram_row_means.len()
    }

    /// Projection of one row: `Σ_j α_ij k̃(x_j, x) / √λ_i`.
    fn project(&self, x: &[f32], kx: &mut [f64], out: &mut Vec<f64>) {
        let n = self.n_train();
        for (j, slot) in kx.iter_mut().enumerate() {
            *slot = self
                .params
                .eval(&self.train[j * self.dim..(j + 1) * self.dim], x);
        }
        let mean_kx = kx.iter().sum::<f64>() / n as f64;
        for (j, slot) in kx.iter_mut().enumerate() {
            *slot = *slot - self.gram_row_means[j] - mean_kx + self.gram_mean;
        }
        for (lambda, alpha) in self.eigenvalues.iter().zip(&self.eigenvectors) {
            let s: f64 = alpha.iter().zip(kx.iter()).map(|(a, k)| a * k).sum();
            out.push(s / lambda.sqrt());
        }
    }

    pub(crate) fn transform(&self, m: &EmbeddingMatrix) -> Vec<f64> {
        let k = self.eigenvalues.len();
        let rows: Vec<Vec<f64>> = (0..m.n_rows())
            .into_par_iter()
            .map(|i| {
                let mut kx = vec![0.0; self.n_train()];
                let mut out = Vec::with_capacity(k);
                self.project(m.row(i), &mut kx, &mut out);
                out
            })
            .collect();
        rows.concat()
    }
}

/// Fits kernel PCA on already-scaled rows.
pub fn fit_kpca(
    m: &EmbeddingMatrix,
    k: usize,
    kernel: Kernel,
    seed: u64,
) -> Result<FittedReducer, ReducerError> {
    let d = m.dim();
    check_k(k, d)?;
    let n = m.n_rows();
    if n < k + 1 {
        return Err(ReducerError::NotEnoughRows {
            rows: n,
            needed: k + 1,
        });
    }
    let params = KernelParams::new(kernel, d);
    let gram = gram_matrix(m, &params);
    let (centered, row_means, total) = center_gram(&gram);
    drop(gram);
    let op = |x: &[f64], y: &mut [f64]| {
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            *yi = centered.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
        });
    };
    let eig = lanczos_largest(
        n,
        k,
        op,
        &[],
        LanczosOptions {
            seed,
            ..LanczosOptions::default()
        },
    )?;
    let (eigenvalues, eigenvectors): (Vec<f64>, Vec<Vec<f64>>) = eig
        .values
        .into_iter()
        .zip(eig.vectors)
        .filter(|(v, _)| *v > EIGENVALUE_FLOOR)
        .unzip();
    if eigenvalues.is_empty() {
        return Err(ReducerError::NoPositiveEigenvalues);
    }
    if eigenvalues.len() < k {
        log::warn!(
            "kernel PCA ({kernel}): kept {} of {k} eigenpairs above {EIGENVALUE_FLOOR:e}",
            eigenvalues.len()
        );
    }
    Ok(FittedReducer::from_model(
        ReducerSpec::kpca(k, kernel).with_seed(seed),
        d,
        Model::Kpca(KpcaModel {
            params,
            train: m.values().to_vec(),
            dim: d,
            eigenvalues,
            eigenvectors,
            gram_row_means: row_means,
            gram_mean: total,
        }),
    ))
}
