//! FastICA with the logcosh contrast and symmetric decorrelation.
//!
//! Data are centered and whitened onto the top-`k` eigenvectors of the
//! (population) covariance, so the whitened rows have identity covariance.
//! The unmixing matrix is the fixed point of
//! `W ← decorrelate(E[g(Wz) zᵀ] − diag(E[g'(Wz)]) W)` with `g = tanh`.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{check_k, FittedReducer, Model, ReducerError, ReducerSpec};
use crate::corpus::EmbeddingMatrix;
use crate::linalg::symmetric_eigen_desc;

#[derive(Debug, Clone, PartialEq)]
pub struct IcaModel {
    pub mean: Vec<f64>,
    /// `k × d`: maps centered rows to whitened coordinates.
    pub whitening: DMatrix<f64>,
    /// `k × k`, orthogonal.
    pub unmixing: DMatrix<f64>,
    /// `unmixing · whitening` (`k × d`).
    pub components: DMatrix<f64>,
    pub converged: bool,
    pub n_iter: usize,
}

impl IcaModel {
    pub(crate) fn transform(&self, m: &EmbeddingMatrix) -> Vec<f64> {
        let k = self.components.nrows();
        let mut out = Vec::with_capacity(m.n_rows() * k);
        let mut centered = vec![0.0; m.dim()];
        for row in m.rows() {
            for ((c, &x), mu) in centered.iter_mut().zip(row).zip(&self.mean) {
                *c = f64::from(x) - mu;
            }
            for i in 0..k {
                out.push(
                    self.components
                        .row(i)
                        .iter()
                        .zip(&centered)
                        .map(|(a, b)| a * b)
                        .sum(),
                );
            }
        }
        out
    }
}

/// `W ← (W Wᵀ)^{-1/2} W`.
fn symmetric_decorrelation(w: &DMatrix<f64>) -> DMatrix<f64> {
    let k = w.nrows();
    let eig = symmetric_eigen_desc(w * w.transpose());
    let mut inv_sqrt = DMatrix::zeros(k, k);
    for (val, vec) in eig.values.iter().zip(&eig.vectors) {
        let s = 1.0 / val.max(f64::MIN_POSITIVE).sqrt();
        for a in 0..k {
            for b in 0..k {
                inv_sqrt[(a, b)] += s * vec[a] * vec[b];
            }
        }
    }
    inv_sqrt * w
}

/// Fits FastICA on raw (unscaled) rows. Non-convergence within `max_iter`
/// is logged and recorded in [`IcaModel::converged`], not an error.
pub fn fit_ica(
    m: &EmbeddingMatrix,
    k: usize,
    max_iter: usize,
    tol: f64,
    seed: u64,
) -> Result<FittedReducer, ReducerError> {
    let d = m.dim();
    check_k(k, d)?;
    let n = m.n_rows();
    if n <= k {
        return Err(ReducerError::NotEnoughRows {
            rows: n,
            needed: k + 1,
        });
    }
    let nf = n as f64;
    let mut x = m.to_dmatrix();
    let mean: Vec<f64> = x.column_iter().map(|c| c.sum() / nf).collect();
    for mut row in x.row_iter_mut() {
        for (v, mu) in row.iter_mut().zip(&mean) {
            *v -= mu;
        }
    }
    let cov = x.transpose() * &x / nf;
    let eig = symmetric_eigen_desc(cov);
    let top = eig.values[0].max(f64::MIN_POSITIVE);
    if eig.values[k - 1] <= 1e-12 * top {
        return Err(ReducerError::RankDeficient { k });
    }
    let mut whitening = DMatrix::zeros(k, d);
    for i in 0..k {
        let s = 1.0 / eig.values[i].sqrt();
        for j in 0..d {
            whitening[(i, j)] = s * eig.vectors[i][j];
        }
    }
    // n × k whitened rows
    let z = &x * whitening.transpose();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = DMatrix::from_fn(k, k, |_, _| StandardNormal.sample(&mut rng));
    let mut w = symmetric_decorrelation(&init);
    let mut converged = false;
    let mut n_iter = 0;
    for it in 0..max_iter {
        n_iter = it + 1;
        let wz = &z * w.transpose(); // n × k
        let mut g = wz.clone();
        let mut g_prime_mean = vec![0.0; k];
        for j in 0..k {
            for i in 0..n {
                let t = wz[(i, j)].tanh();
                g[(i, j)] = t;
                g_prime_mean[j] += 1.0 - t * t;
            }
            g_prime_mean[j] /= nf;
        }
        let mut w1 = g.transpose() * &z / nf;
        for a in 0..k {
            for b in 0..k {
                w1[(a, b)] -= g_prime_mean[a] * w[(a, b)];
            }
        }
        let w1 = symmetric_decorrelation(&w1);
        let lim = (&w1 * w.transpose())
            .diagonal()
            .iter()
            .map(|v| (v.abs() - 1.0).abs())
            .fold(0.0, f64::max);
        w = w1;
        if lim < tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("FastICA did not converge in {max_iter} iterations (k = {k})");
    }
    let components = &w * &whitening;
    let mut spec = ReducerSpec::ica(k).with_seed(seed);
    spec.max_iter = max_iter;
    spec.tol = tol;
    Ok(FittedReducer::from_model(
        spec,
        d,
        Model::Ica(IcaModel {
            mean,
            whitening,
            unmixing: w,
            components,
            converged,
            n_iter,
        }),
    ))
}
