//! Dense helpers and a Lanczos partial eigensolver for symmetric operators.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("requested {k} eigenpairs of a {n}-dimensional operator")]
    TooManyPairs { k: usize, n: usize },
    #[error("Lanczos did not converge: residual {residual:e} after {steps} steps")]
    NoConvergence { residual: f64, steps: usize },
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Flips `v` so that its largest-magnitude entry is positive.
pub fn fix_sign(v: &mut [f64]) {
    let mut best = 0.0f64;
    let mut sign = 1.0;
    for &x in v.iter() {
        if x.abs() > best {
            best = x.abs();
            sign = x.signum();
        }
    }
    if sign < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Eigenpairs sorted by descending eigenvalue. `vectors[i]` pairs with `values[i]`.
#[derive(Debug, Clone)]
pub struct Eigenpairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

/// Full eigendecomposition of a dense symmetric matrix, descending order.
pub fn symmetric_eigen_desc(m: DMatrix<f64>) -> Eigenpairs {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    Eigenpairs {
        values: order.iter().map(|&i| eig.eigenvalues[i]).collect(),
        vectors: order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
            .collect(),
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LanczosOptions {
    /// Residual bound relative to the largest Ritz value magnitude.
    pub tol: f64,
    /// Cap on the Krylov dimension; defaults to the operator size.
    pub max_dim: Option<usize>,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_dim: None,
            seed: 0,
        }
    }
}

/// Orthogonalizes `w` against every vector in `sets` (two passes).
fn orthogonalize(w: &mut [f64], sets: &[&[Vec<f64>]]) {
    for _ in 0..2 {
        for set in sets {
            for q in set.iter() {
                let c = dot(q, w);
                axpy(-c, q, w);
            }
        }
    }
}

fn random_unit(n: usize, rng: &mut ChaCha8Rng, against: &[&[Vec<f64>]]) -> Option<Vec<f64>> {
    for _ in 0..8 {
        let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        orthogonalize(&mut v, against);
        let nv = norm(&v);
        if nv > 1e-8 {
            v.iter_mut().for_each(|x| *x /= nv);
            return Some(v);
        }
    }
    None
}

/// One Lanczos run with full reorthogonalization; returns up to `k` Ritz
/// pairs of the operator restricted to the complement of `deflate`.
fn lanczos_run<F>(
    n: usize,
    k: usize,
    op: &F,
    deflate: &[Vec<f64>],
    opts: &LanczosOptions,
    rng: &mut ChaCha8Rng,
) -> Result<Eigenpairs, LinalgError>
where
    F: Fn(&[f64], &mut [f64]),
{
    let available = n.saturating_sub(deflate.len());
    let max_dim = opts.max_dim.unwrap_or(available).min(available).max(k);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(max_dim);
    let mut alpha: Vec<f64> = Vec::with_capacity(max_dim);
    let mut beta: Vec<f64> = Vec::with_capacity(max_dim);
    let Some(q0) = random_unit(n, rng, &[deflate]) else {
        return Ok(Eigenpairs {
            values: vec![],
            vectors: vec![],
        });
    };
    basis.push(q0);
    let mut w = vec![0.0; n];
    let check_every = (k / 4).max(4);
    let mut last_residual = f64::INFINITY;
    loop {
        let j = basis.len() - 1;
        op(&basis[j], &mut w);
        let a = dot(&basis[j], &w);
        alpha.push(a);
        orthogonalize(&mut w, &[deflate, &basis]);
        let b = norm(&w);
        let m = basis.len();
        let exhausted = m >= max_dim;
        let breakdown = b <= 1e-12 * a.abs().max(1.0);
        if m >= k && (exhausted || breakdown || (m - k) % check_every == 0) {
            let (ritz, residual) = ritz_pairs(&alpha, &beta, b, k);
            last_residual = residual;
            let scale = ritz
                .values
                .first()
                .map_or(1.0, |v| v.abs())
                .max(f64::MIN_POSITIVE);
            let converged = residual <= opts.tol * scale;
            let complete = breakdown || (exhausted && max_dim == available);
            if converged || complete {
                return Ok(ritz_vectors(ritz, &basis, n));
            }
        }
        if exhausted {
            return Err(LinalgError::NoConvergence {
                residual: last_residual,
                steps: m,
            });
        }
        if breakdown {
            // Invariant subspace found before k pairs: continue from a fresh direction.
            beta.push(0.0);
            match random_unit(n, rng, &[deflate, &basis]) {
                Some(q) => basis.push(q),
                None => {
                    return Err(LinalgError::NoConvergence {
                        residual: last_residual,
                        steps: m,
                    })
                }
            }
        } else {
            beta.push(b);
            basis.push(w.iter().map(|x| x / b).collect());
        }
    }
}

fn ritz_vectors(ritz: Eigenpairs, basis: &[Vec<f64>], n: usize) -> Eigenpairs {
    let vectors = ritz
        .vectors
        .iter()
        .map(|s| {
            let mut v = vec![0.0; n];
            for (coef, q) in s.iter().zip(basis) {
                axpy(*coef, q, &mut v);
            }
            let nv = norm(&v);
            v.iter_mut().for_each(|x| *x /= nv);
            fix_sign(&mut v);
            v
        })
        .collect();
    Eigenpairs {
        values: ritz.values,
        vectors,
    }
}

/// Top-`k` eigenpairs of the tridiagonal `(alpha, beta)` and the max
/// residual bound `|b_m · s_{m,i}|` over them.
fn ritz_pairs(alpha: &[f64], beta: &[f64], b_last: f64, k: usize) -> (Eigenpairs, f64) {
    let m = alpha.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let mut eig = symmetric_eigen_desc(t);
    eig.values.truncate(k);
    eig.vectors.truncate(k);
    let residual = eig
        .vectors
        .iter()
        .map(|s| (b_last * s[m - 1]).abs())
        .fold(0.0, f64::max);
    (eig, residual)
}

/// Largest-algebraic `k` eigenpairs of the symmetric operator `op` on `R^n`,
/// restricted to the orthogonal complement of `deflate` (orthonormal).
///
/// Runs Lanczos with full reorthogonalization, then restarts from fresh
/// directions orthogonal to the converged vectors until no restart yields
/// a larger eigenvalue, which picks up repeated eigenvalues a single Krylov
/// sequence cannot see. Eigenvector signs follow [`fix_sign`].
pub fn lanczos_largest<F>(
    n: usize,
    k: usize,
    op: F,
    deflate: &[Vec<f64>],
    opts: LanczosOptions,
) -> Result<Eigenpairs, LinalgError>
where
    F: Fn(&[f64], &mut [f64]),
{
    let available = n.saturating_sub(deflate.len());
    if k > available {
        return Err(LinalgError::TooManyPairs { k, n: available });
    }
    if k == 0 {
        return Ok(Eigenpairs {
            values: vec![],
            vectors: vec![],
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut found = lanczos_run(n, k, &op, deflate, &opts, &mut rng)?;
    for _ in 0..k {
        if found.vectors.len() < k || found.vectors.len() + deflate.len() >= n {
            break;
        }
        let mut against: Vec<Vec<f64>> = deflate.to_vec();
        against.extend(found.vectors.iter().cloned());
        let want = k.min(n - against.len());
        let extra = lanczos_run(n, want, &op, &against, &opts, &mut rng)?;
        let kth = found.values[k - 1];
        let scale = found.values[0].abs().max(f64::MIN_POSITIVE);
        let entering: Vec<usize> = (0..extra.values.len())
            .filter(|&i| extra.values[i] > kth + opts.tol.sqrt() * scale * 1e-3)
            .collect();
        if entering.is_empty() {
            break;
        }
        let mut all: Vec<(f64, Vec<f64>)> = found
            .values
            .into_iter()
            .zip(found.vectors)
            .chain(
                entering
                    .into_iter()
                    .map(|i| (extra.values[i], extra.vectors[i].clone())),
            )
            .collect();
        all.sort_by(|a, b| b.0.total_cmp(&a.0));
        all.truncate(k);
        found = Eigenpairs {
            values: all.iter().map(|p| p.0).collect(),
            vectors: all.into_iter().map(|p| p.1).collect(),
        };
    }
    Ok(found)
}

/// Dense symmetric matrix-vector product `y = m x`.
pub fn dense_op(m: &DMatrix<f64>) -> impl Fn(&[f64], &mut [f64]) + '_ {
    move |x, y| {
        let xv = DVector::from_column_slice(x);
        let r = m * xv;
        y.copy_from_slice(r.as_slice());
    }
}

/// Column means of a row-major dense matrix.
pub fn column_means(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.nrows() as f64;
    DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.sum() / n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_symmetric(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        &a + a.transpose()
    }

    #[test]
    fn matches_dense_on_random_symmetric() {
        let m = random_symmetric(60, 1);
        let dense = symmetric_eigen_desc(m.clone());
        let got = lanczos_largest(60, 6, dense_op(&m), &[], LanczosOptions::default()).unwrap();
        for i in 0..6 {
            let rel = (got.values[i] - dense.values[i]).abs() / dense.values[i].abs();
            assert!(
                rel < 1e-10,
                "pair {i}: {} vs {}",
                got.values[i],
                dense.values[i]
            );
            let c = dot(&got.vectors[i], &dense.vectors[i]).abs();
            assert!(c > 1.0 - 1e-8);
        }
    }

    #[test]
    fn repeated_eigenvalue_found_twice() {
        let mut d = DMatrix::zeros(30, 30);
        for i in 0..30 {
            d[(i, i)] = (i as f64) * 0.1;
        }
        d[(0, 0)] = 5.0;
        d[(1, 1)] = 5.0;
        d[(2, 2)] = 4.0;
        let got = lanczos_largest(30, 3, dense_op(&d), &[], LanczosOptions::default()).unwrap();
        assert!((got.values[0] - 5.0).abs() < 1e-10);
        assert!((got.values[1] - 5.0).abs() < 1e-10);
        assert!((got.values[2] - 4.0).abs() < 1e-10);
    }

    #[test]
    fn deflation_skips_known_vectors() {
        let m = random_symmetric(25, 4);
        let dense = symmetric_eigen_desc(m.clone());
        let got = lanczos_largest(
            25,
            2,
            dense_op(&m),
            &dense.vectors[..1],
            LanczosOptions::default(),
        )
        .unwrap();
        assert!((got.values[0] - dense.values[1]).abs() < 1e-9);
        assert!((got.values[1] - dense.values[2]).abs() < 1e-9);
    }

    #[test]
    fn too_many_pairs() {
        let m = random_symmetric(4, 0);
        assert!(matches!(
            lanczos_largest(4, 5, dense_op(&m), &[], LanczosOptions::default()),
            Err(LinalgError::TooManyPairs { .. })
        ));
    }

    #[test]
    fn sign_convention() {
        let mut v = vec![0.1, -0.9, 0.3];
        fix_sign(&mut v);
        assert_eq!(v, vec![-0.1, 0.9, -0.3]);
    }
}
