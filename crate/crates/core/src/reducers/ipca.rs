//! Incremental PCA.
//!
//! Each batch is centered on its own mean and stacked under the previous
//! components (scaled by their singular values) plus one mean-correction
//! row; the top-`k` right singular vectors of that stack become the new
//! components. Only one batch and `k × d` state are held at a time.

use nalgebra::{DMatrix, SVD};

use super::{check_k, FittedReducer, Model, ReducerError, ReducerSpec};
use crate::corpus::EmbeddingMatrix;
use crate::linalg::fix_sign;

pub fn default_batch_size(k: usize) -> usize {
    (5 * k).max(1024)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IpcaModel {
    pub mean: Vec<f64>,
    /// `k × d`, orthonormal rows.
    pub components: DMatrix<f64>,
    /// Non-increasing.
    pub singular_values: Vec<f64>,
    /// Per-column population variance of everything seen.
    pub variance: Vec<f64>,
    pub samples_seen: usize,
}

impl IpcaModel {
    /// `S² / (n − 1)` per component.
    pub fn explained_variance(&self) -> Vec<f64> {
        let denom = (self.samples_seen.max(2) - 1) as f64;
        self.singular_values.iter().map(|s| s * s / denom).collect()
    }

    pub fn explained_variance_ratio(&self) -> Vec<f64> {
        let total: f64 = self.variance.iter().sum::<f64>() * self.samples_seen as f64;
        self.singular_values
            .iter()
            .map(|s| if total > 0.0 { s * s / total } else { 0.0 })
            .collect()
    }

    pub(crate) fn transform(&self, m: &EmbeddingMatrix) -> Vec<f64> {
        let k = self.components.nrows();
        let mut out = Vec::with_capacity(m.n_rows() * k);
        let mut centered = vec![0.0; m.dim()];
        for row in m.rows() {
            for ((c, &x), mu) in centered.iter_mut().zip(row).zip(&self.mean) {
                *c = f64::from(x) - mu;
            }
            for i in 0..k {
                let comp = self.components.row(i);
                out.push(comp.iter().zip(&centered).map(|(a, b)| a * b).sum());
            }
        }
        out
    }
}

/// Streaming fitter; feed batches with [`partial_fit`](Self::partial_fit).
#[derive(Debug, Clone)]
pub struct IncrementalPca {
    k: usize,
    d: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
    components: DMatrix<f64>,
    singular_values: Vec<f64>,
    n_seen: usize,
}

impl IncrementalPca {
    pub fn new(k: usize, d: usize) -> Result<Self, ReducerError> {
        check_k(k, d)?;
        Ok(Self {
            k,
            d,
            mean: vec![0.0; d],
            m2: vec![0.0; d],
            components: DMatrix::zeros(0, d),
            singular_values: Vec::new(),
            n_seen: 0,
        })
    }

    pub fn samples_seen(&self) -> usize {
        self.n_seen
    }

    /// Updates the running mean, variance and components with `batch`
    /// (rows = samples). The first batch must have at least `k` rows.
    pub fn partial_fit(&mut self, batch: &DMatrix<f64>) -> Result<(), ReducerError> {
        let (nb, d) = batch.shape();
        if d != self.d {
            return Err(ReducerError::DimMismatch {
                expected: self.d,
                got: d,
            });
        }
        if nb == 0 {
            return Ok(());
        }
        if self.n_seen == 0 && nb < self.k {
            return Err(ReducerError::NotEnoughRows {
                rows: nb,
                needed: self.k,
            });
        }
        let n_prev = self.n_seen as f64;
        let nbf = nb as f64;
        let n_total = n_prev + nbf;

        let batch_mean: Vec<f64> = batch.column_iter().map(|c| c.sum() / nbf).collect();
        let batch_m2: Vec<f64> = batch
            .column_iter()
            .zip(&batch_mean)
            .map(|(c, mu)| c.iter().map(|x| (x - mu).powi(2)).sum())
            .collect();

        let extra = if self.n_seen == 0 {
            0
        } else {
            self.components.nrows() + 1
        };
        let mut stack = DMatrix::zeros(extra + nb, d);
        if self.n_seen > 0 {
            for i in 0..self.components.nrows() {
                let s = self.singular_values[i];
                for j in 0..d {
                    stack[(i, j)] = s * self.components[(i, j)];
                }
            }
            let corr = (n_prev * nbf / n_total).sqrt();
            let r = self.components.nrows();
            for j in 0..d {
                stack[(r, j)] = corr * (self.mean[j] - batch_mean[j]);
            }
        }
        for i in 0..nb {
            for j in 0..d {
                stack[(extra + i, j)] = batch[(i, j)] - batch_mean[j];
            }
        }

        for j in 0..d {
            let delta = batch_mean[j] - self.mean[j];
            self.m2[j] += batch_m2[j] + delta * delta * n_prev * nbf / n_total;
            self.mean[j] = (self.mean[j] * n_prev + batch_mean[j] * nbf) / n_total;
        }
        self.n_seen += nb;

        let svd = SVD::new(stack, false, true);
        let v_t = svd.v_t.expect("requested V^T");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let keep = self.k.min(order.len());
        let mut components = DMatrix::zeros(keep, d);
        let mut singular = Vec::with_capacity(keep);
        for (row, &idx) in order.iter().take(keep).enumerate() {
            let mut v: Vec<f64> = v_t.row(idx).iter().copied().collect();
            fix_sign(&mut v);
            for j in 0..d {
                components[(row, j)] = v[j];
            }
            singular.push(svd.singular_values[idx]);
        }
        self.components = components;
        self.singular_values = singular;
        Ok(())
    }

    pub fn finish(self) -> Result<IpcaModel, ReducerError> {
        if self.n_seen < self.k || self.components.nrows() < self.k {
            return Err(ReducerError::NotEnoughRows {
                rows: self.n_seen,
                needed: self.k,
            });
        }
        let n = self.n_seen as f64;
        Ok(IpcaModel {
            mean: self.mean,
            components: self.components,
            singular_values: self.singular_values,
            variance: self.m2.into_iter().map(|v| v / n).collect(),
            samples_seen: self.n_seen,
        })
    }
}

/// Splits `n` rows into consecutive batches of `batch` rows; a short tail
/// smaller than `min_tail` is merged into the previous batch.
pub(crate) fn batch_bounds(n: usize, batch: usize, min_tail: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < n {
        let end = (start + batch).min(n);
        out.push((start, end));
        start = end;
    }
    if out.len() > 1 {
        let (s, e) = *out.last().unwrap();
        if e - s < min_tail {
            out.pop();
            out.last_mut().unwrap().1 = e;
        }
    }
    out
}

/// Fits incremental PCA over consecutive row batches of `m` (already scaled).
pub fn fit_ipca(
    m: &EmbeddingMatrix,
    k: usize,
    batch_size: Option<usize>,
) -> Result<FittedReducer, ReducerError> {
    let d = m.dim();
    check_k(k, d)?;
    let batch = batch_size.unwrap_or_else(|| default_batch_size(k));
    if batch < k {
        return Err(ReducerError::BatchTooSmall { batch, k });
    }
    if m.n_rows() < k {
        return Err(ReducerError::NotEnoughRows {
            rows: m.n_rows(),
            needed: k,
        });
    }
    let mut ipca = IncrementalPca::new(k, d)?;
    for (start, end) in batch_bounds(m.n_rows(), batch, k) {
        let rows = DMatrix::from_row_iterator(
            end - start,
            d,
            m.values()[start * d..end * d].iter().map(|&v| f64::from(v)),
        );
        ipca.partial_fit(&rows)?;
    }
    let mut spec = ReducerSpec::ipca(k);
    spec.batch_size = batch_size;
    Ok(FittedReducer::from_model(
        spec,
        d,
        Model::Ipca(ipca.finish()?),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::symmetric_eigen_desc;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn matrix(n: usize, d: usize, values: Vec<f32>) -> EmbeddingMatrix {
        EmbeddingMatrix::new((0..n).map(|i| i.to_string()).collect(), d, values).unwrap()
    }

    fn model(r: &FittedReducer) -> &IpcaModel {
        match &r.model {
            Model::Ipca(m) => m,
            _ => unreachable!(),
        }
    }

    fn random(n: usize, d: usize, seed: u64) -> EmbeddingMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..n * d)
            .map(|i| {
                let x: f64 = StandardNormal.sample(&mut rng);
                (x * (1.0 + (i % d) as f64 * 0.3)) as f32
            })
            .collect();
        matrix(n, d, values)
    }

    #[test]
    fn isotropic_square_splits_variance_evenly() {
        let m = matrix(4, 2, vec![1.0, 1.0, -1.0, -1.0, 1.0, -1.0, -1.0, 1.0]);
        let r = fit_ipca(&m, 1, Some(4)).unwrap();
        let ratio = model(&r).explained_variance_ratio()[0];
        assert!((ratio - 0.5).abs() < 1e-12, "{ratio}");
    }

    #[test]
    fn rank_one_reconstructs_exactly() {
        let dir = [0.6f32, -0.8, 0.0];
        let mut values = Vec::new();
        for t in [-2.0f32, -0.5, 1.0, 3.0, 4.5] {
            values.extend(dir.iter().map(|d| d * t));
        }
        let m = matrix(5, 3, values);
        let r = fit_ipca(&m, 1, Some(2)).unwrap();
        let p = model(&r);
        let scores = p.transform(&m);
        for (i, row) in m.rows().enumerate() {
            for j in 0..3 {
                let rec = p.mean[j] + scores[i] * p.components[(0, j)];
                assert!((rec - f64::from(row[j])).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn single_batch_matches_covariance_eigenvectors() {
        let m = random(120, 8, 5);
        let r = fit_ipca(&m, 4, Some(1000)).unwrap();
        let p = model(&r);
        let x = m.to_dmatrix();
        let mean = crate::linalg::column_means(&x);
        let mut c = x.clone();
        for mut row in c.row_iter_mut() {
            row -= mean.transpose();
        }
        let cov = c.transpose() * &c / 120.0;
        let eig = symmetric_eigen_desc(cov);
        for i in 0..4 {
            let dot: f64 = p
                .components
                .row(i)
                .iter()
                .zip(&eig.vectors[i])
                .map(|(a, b)| a * b)
                .sum();
            assert!(dot.abs() > 1.0 - 1e-6, "component {i}: {dot}");
        }
    }

    #[test]
    fn components_orthonormal_and_sorted_after_many_batches() {
        let m = random(300, 10, 7);
        let r = fit_ipca(&m, 5, Some(40)).unwrap();
        let p = model(&r);
        let gram = &p.components * p.components.transpose();
        for i in 0..5 {
            for j in 0..5 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - want).abs() < 1e-6);
            }
        }
        assert!(p.singular_values.windows(2).all(|w| w[0] >= w[1]));
        assert_eq!(p.samples_seen, 300);
    }

    #[test]
    fn errors() {
        let m = random(10, 4, 1);
        assert!(matches!(
            fit_ipca(&m, 5, None),
            Err(ReducerError::KTooLarge { k: 5, d: 4 })
        ));
        assert!(matches!(
            fit_ipca(&m, 3, Some(2)),
            Err(ReducerError::BatchTooSmall { .. })
        ));
        let small = random(2, 4, 1);
        assert!(matches!(
            fit_ipca(&small, 3, Some(8)),
            Err(ReducerError::NotEnoughRows { .. })
        ));
    }

    #[test]
    fn tail_batches_are_merged() {
        assert_eq!(batch_bounds(10, 4, 3), vec![(0, 4), (4, 10)]);
        assert_eq!(batch_bounds(10, 4, 2), vec![(0, 4), (4, 8), (8, 10)]);
        assert_eq!(batch_bounds(3, 8, 2), vec![(0, 3)]);
        assert_eq!(default_batch_size(10), 1024);
        assert_eq!(default_batch_size(300), 1500);
    }
}
