//! UMAP-style manifold embedding.
//!
//! Fitting builds an exact cosine kNN graph, calibrates each point's
//! `ρ_i` (nearest-neighbor distance) and `σ_i` (bisection on
//! `Σ_j exp(−max(0, d_ij − ρ_i)/σ_i) = log₂ n_neighbors`), takes the fuzzy
//! union `w + wᵀ − w∘wᵀ`, initializes from the normalized graph Laplacian
//! and then runs negative-sampling SGD on the fuzzy-set cross-entropy with
//! the low-dimensional similarity `1 / (1 + a·d^{2b})`.
//!
//! New points are placed at the membership-weighted mean of their training
//! neighbors and refined against the frozen training embedding.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{check_k, FittedReducer, Model, ReducerError, ReducerSpec};
use crate::corpus::EmbeddingMatrix;
use crate::linalg::{dot, lanczos_largest, norm, LanczosOptions};

const SMOOTH_K_TOLERANCE: f64 = 1e-5;
const SMOOTH_K_ITERATIONS: usize = 64;
const MIN_K_DIST_SCALE: f64 = 1e-3;
const SPREAD: f64 = 1.0;
const LEARNING_RATE: f64 = 1.0;
const NEGATIVE_SAMPLE_RATE: usize = 5;
const REPULSION_STRENGTH: f64 = 1.0;
pub const TRANSFORM_EPOCHS: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct UmapModel {
    pub k: usize,
    pub dim: usize,
    pub n_neighbors: usize,
    /// Training rows (`n × dim`), in the fitted (min-max) scale.
    pub train: Vec<f32>,
    pub rhos: Vec<f64>,
    pub sigmas: Vec<f64>,
    /// Training embedding (`n × k`, row-major).
    pub embedding: Vec<f64>,
    pub a: f64,
    pub b: f64,
    /// Mean kNN distance over the training set (σ floor for isolated rows).
    pub mean_knn_distance: f64,
    pub seed: u64,
    pub spectral_init: bool,
}

fn row(values: &[f32], dim: usize, i: usize) -> &[f32] {
    &values[i * dim..(i + 1) * dim]
}

fn sq_norm(x: &[f32]) -> f64 {
    x.iter().map(|v| f64::from(*v).powi(2)).sum()
}

fn cosine_distance(x: &[f32], y: &[f32], nx: f64, ny: f64) -> f64 {
    if nx == 0.0 && ny == 0.0 {
        return 0.0;
    }
    if nx == 0.0 || ny == 0.0 {
        return 1.0;
    }
    let d: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| f64::from(*a) * f64::from(*b))
        .sum();
    (1.0 - d / (nx * ny)).max(0.0)
}

/// Exact `k` nearest training rows of `query` under cosine distance,
/// ascending by `(distance, index)`. `skip` excludes one training index.
fn knn_row(
    train: &[f32],
    norms: &[f64],
    dim: usize,
    query: &[f32],
    k: usize,
    skip: Option<usize>,
) -> Vec<(usize, f64)> {
    let nq = sq_norm(query).sqrt();
    let mut all: Vec<(usize, f64)> = (0..norms.len())
        .filter(|&j| Some(j) != skip)
        .map(|j| (j, cosine_distance(query, row(train, dim, j), nq, norms[j])))
        .collect();
    let cmp = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
    if all.len() > k {
        all.select_nth_unstable_by(k - 1, cmp);
        all.truncate(k);
    }
    all.sort_by(cmp);
    all
}

/// `(ρ, σ)` for one point's ascending neighbor distances.
pub fn smooth_knn_dist(dists: &[f64], mean_all: f64) -> (f64, f64) {
    let target = (dists.len() as f64).log2();
    let rho = dists.iter().copied().find(|&d| d > 0.0).unwrap_or(0.0);
    let (mut lo, mut hi, mut mid) = (0.0, f64::INFINITY, 1.0);
    for _ in 0..SMOOTH_K_ITERATIONS {
        let psum: f64 = dists
            .iter()
            .map(|&d| {
                let t = d - rho;
                if t > 0.0 {
                    (-t / mid).exp()
                } else {
                    1.0
                }
            })
            .sum();
        if (psum - target).abs() < SMOOTH_K_TOLERANCE {
            break;
        }
        if psum > target {
            hi = mid;
            mid = (lo + hi) / 2.0;
        } else {
            lo = mid;
            if hi == f64::INFINITY {
                mid *= 2.0;
            } else {
                mid = (lo + hi) / 2.0;
            }
        }
    }
    let floor = if rho > 0.0 {
        MIN_K_DIST_SCALE * dists.iter().sum::<f64>() / dists.len() as f64
    } else {
        MIN_K_DIST_SCALE * mean_all
    };
    (rho, mid.max(floor))
}

fn membership(d: f64, rho: f64, sigma: f64) -> f64 {
    if d - rho <= 0.0 || sigma == 0.0 {
        1.0
    } else {
        (-(d - rho) / sigma).exp()
    }
}

/// Least-squares fit of `1/(1 + a·x^{2b})` to the piecewise target that is 1
/// below `min_dist` and `exp(−(x − min_dist)/spread)` above, on 300 points
/// of `[0, 3·spread]` (Levenberg–Marquardt from `a = b = 1`).
pub fn fit_ab(spread: f64, min_dist: f64) -> (f64, f64) {
    let xs: Vec<f64> = (0..300).map(|i| 3.0 * spread * i as f64 / 299.0).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| {
            if x < min_dist {
                1.0
            } else {
                (-(x - min_dist) / spread).exp()
            }
        })
        .collect();
    let cost = |a: f64, b: f64| -> f64 {
        xs.iter()
            .zip(&ys)
            .map(|(&x, &y)| (1.0 / (1.0 + a * x.powf(2.0 * b)) - y).powi(2))
            .sum()
    };
    let (mut a, mut b) = (1.0, 1.0);
    let mut lambda = 1e-3;
    let mut c = cost(a, b);
    for _ in 0..1000 {
        let (mut jtj, mut jtr) = ([[0.0; 2]; 2], [0.0; 2]);
        for (&x, &y) in xs.iter().zip(&ys) {
            let p = if x > 0.0 { x.powf(2.0 * b) } else { 0.0 };
            let f = 1.0 / (1.0 + a * p);
            let da = -p * f * f;
            let db = if x > 0.0 {
                -a * p * 2.0 * x.ln() * f * f
            } else {
                0.0
            };
            let r = f - y;
            jtj[0][0] += da * da;
            jtj[0][1] += da * db;
            jtj[1][1] += db * db;
            jtr[0] += da * r;
            jtr[1] += db * r;
        }
        jtj[1][0] = jtj[0][1];
        let mut improved = false;
        for _ in 0..20 {
            let m00 = jtj[0][0] * (1.0 + lambda);
            let m11 = jtj[1][1] * (1.0 + lambda);
            let det = m00 * m11 - jtj[0][1] * jtj[1][0];
            if det == 0.0 {
                lambda *= 10.0;
                continue;
            }
            let da = -(m11 * jtr[0] - jtj[0][1] * jtr[1]) / det;
            let db = -(m00 * jtr[1] - jtj[1][0] * jtr[0]) / det;
            let (na, nb) = (a + da, b + db);
            if na > 0.0 && nb > 0.0 {
                let nc = cost(na, nb);
                if nc < c {
                    let rel = (c - nc) / c.max(f64::MIN_POSITIVE);
                    a = na;
                    b = nb;
                    c = nc;
                    lambda = (lambda / 10.0).max(1e-12);
                    improved = rel > 1e-15;
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (a, b)
}

/// Symmetric fuzzy graph in sorted edge-list form.
#[derive(Debug, Clone)]
pub struct FuzzyGraph {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
}

fn fuzzy_union(n: usize, directed: &[Vec<(usize, f64)>]) -> FuzzyGraph {
    let mut w: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (i, neigh) in directed.iter().enumerate() {
        for &(j, v) in neigh {
            if i != j {
                w.insert((i, j), v);
            }
        }
    }
    let mut sym: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (&(i, j), &v) in &w {
        let t = w.get(&(j, i)).copied().unwrap_or(0.0);
        let u = v + t - v * t;
        sym.insert((i, j), u);
        sym.insert((j, i), u);
    }
    FuzzyGraph {
        n,
        edges: sym
            .into_iter()
            .filter(|(_, v)| *v > 0.0)
            .map(|((i, j), v)| (i, j, v))
            .collect(),
    }
}

fn components(g: &FuzzyGraph) -> (usize, Vec<usize>) {
    let mut parent: Vec<usize> = (0..g.n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for &(i, j, _) in &g.edges {
        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut label = vec![usize::MAX; g.n];
    let mut roots = BTreeMap::new();
    for i in 0..g.n {
        let r = find(&mut parent, i);
        let next = roots.len();
        label[i] = *roots.entry(r).or_insert(next);
    }
    (roots.len(), label)
}

/// Leading non-trivial eigenvectors of `D^{-1/2} W D^{-1/2}` as `n × k`
/// coordinates. Each connected component contributes an eigenvalue-1
/// vector; those orthogonal to the global stationary vector come first.
fn spectral_layout(g: &FuzzyGraph, k: usize, seed: u64) -> Option<Vec<Vec<f64>>> {
    let n = g.n;
    let mut deg = vec![0.0; n];
    for &(i, _, w) in &g.edges {
        deg[i] += w;
    }
    if deg.iter().any(|&d| d <= 0.0) {
        return None;
    }
    let inv_sqrt: Vec<f64> = deg.iter().map(|d| 1.0 / d.sqrt()).collect();
    let (ncomp, label) = components(g);
    let mut comp_vecs: Vec<Vec<f64>> = (0..ncomp)
        .map(|c| {
            (0..n)
                .map(|i| if label[i] == c { deg[i].sqrt() } else { 0.0 })
                .collect()
        })
        .collect();
    for v in &mut comp_vecs {
        let nv = norm(v);
        v.iter_mut().for_each(|x| *x /= nv);
    }
    let mut cols: Vec<Vec<f64>> = Vec::new();
    if ncomp > 1 {
        let mut global: Vec<f64> = deg.iter().map(|d| d.sqrt()).collect();
        let ng = norm(&global);
        global.iter_mut().for_each(|x| *x /= ng);
        let mut basis = vec![global];
        for v in &comp_vecs {
            if cols.len() == k {
                break;
            }
            let mut u = v.clone();
            for q in &basis {
                let c = dot(q, &u);
                u.iter_mut().zip(q).for_each(|(x, qi)| *x -= c * qi);
            }
            let nu = norm(&u);
            if nu > 1e-8 {
                u.iter_mut().for_each(|x| *x /= nu);
                basis.push(u.clone());
                cols.push(u);
            }
        }
    }
    let remaining = k - cols.len();
    if remaining > 0 {
        if n < ncomp + remaining {
            return None;
        }
        let op = |x: &[f64], y: &mut [f64]| {
            y.iter_mut().for_each(|v| *v = 0.0);
            for &(i, j, w) in &g.edges {
                y[i] += inv_sqrt[i] * w * inv_sqrt[j] * x[j];
            }
        };
        let opts = LanczosOptions {
            tol: 1e-6,
            max_dim: Some((n - ncomp).min(remaining * 8 + 64)),
            seed,
        };
        match lanczos_largest(n, remaining, op, &comp_vecs, opts) {
            Ok(eig) => cols.extend(eig.vectors),
            Err(e) => {
                log::warn!("spectral initialization failed ({e}); using random init");
                return None;
            }
        }
    }
    Some(cols)
}

fn clip(x: f64) -> f64 {
    x.clamp(-4.0, 4.0)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn epochs_per_sample(weights: &[f64], n_epochs: usize) -> Vec<f64> {
    let max = weights.iter().copied().fold(0.0, f64::max);
    weights
        .iter()
        .map(|&w| {
            if w > 0.0 && w >= max / n_epochs as f64 {
                max / w
            } else {
                -1.0
            }
        })
        .collect()
}

struct Sgd {
    a: f64,
    b: f64,
    k: usize,
}

impl Sgd {
    fn attract(
        &self,
        current: &mut [f64],
        other: &[f64],
        alpha: f64,
        other_delta: Option<&mut [f64]>,
    ) {
        let d2 = sq_dist(current, other);
        let coeff = if d2 > 0.0 {
            -2.0 * self.a * self.b * d2.powf(self.b - 1.0) / (self.a * d2.powf(self.b) + 1.0)
        } else {
            0.0
        };
        let mut delta = other_delta;
        for d in 0..self.k {
            let g = clip(coeff * (current[d] - other[d])) * alpha;
            current[d] += g;
            if let Some(od) = delta.as_deref_mut() {
                od[d] -= g;
            }
        }
    }

    fn repel(&self, current: &mut [f64], other: &[f64], alpha: f64) {
        let d2 = sq_dist(current, other);
        let coeff = if d2 > 0.0 {
            2.0 * REPULSION_STRENGTH * self.b / ((0.001 + d2) * (self.a * d2.powf(self.b) + 1.0))
        } else {
            0.0
        };
        for d in 0..self.k {
            let g = if coeff > 0.0 {
                clip(coeff * (current[d] - other[d]))
            } else {
                4.0
            };
            current[d] += g * alpha;
        }
    }
}

fn optimize_layout(
    g: &FuzzyGraph,
    emb: &mut [f64],
    k: usize,
    a: f64,
    b: f64,
    n_epochs: usize,
    rng: &mut ChaCha8Rng,
) {
    let n = g.n;
    let weights: Vec<f64> = g.edges.iter().map(|e| e.2).collect();
    let eps = epochs_per_sample(&weights, n_epochs);
    let eps_neg: Vec<f64> = eps
        .iter()
        .map(|e| e / NEGATIVE_SAMPLE_RATE as f64)
        .collect();
    let mut next = eps.clone();
    let mut next_neg = eps_neg.clone();
    let sgd = Sgd { a, b, k };
    let mut cur = vec![0.0; k];
    let mut oth = vec![0.0; k];
    for epoch in 0..n_epochs {
        let alpha = LEARNING_RATE * (1.0 - epoch as f64 / n_epochs as f64);
        let e = epoch as f64;
        for (idx, &(i, j, _)) in g.edges.iter().enumerate() {
            if eps[idx] <= 0.0 || next[idx] > e {
                continue;
            }
            cur.copy_from_slice(&emb[i * k..(i + 1) * k]);
            oth.copy_from_slice(&emb[j * k..(j + 1) * k]);
            let mut moved = oth.clone();
            sgd.attract(&mut cur, &oth, alpha, Some(&mut moved));
            emb[j * k..(j + 1) * k].copy_from_slice(&moved);
            next[idx] += eps[idx];
            let n_neg = ((e - next_neg[idx]) / eps_neg[idx]).floor().max(0.0) as usize;
            for _ in 0..n_neg {
                let s = rng.random_range(0..n);
                if s == i {
                    continue;
                }
                oth.copy_from_slice(&emb[s * k..(s + 1) * k]);
                sgd.repel(&mut cur, &oth, alpha);
            }
            emb[i * k..(i + 1) * k].copy_from_slice(&cur);
            next_neg[idx] += n_neg as f64 * eps_neg[idx];
        }
    }
}

fn rescale_columns(emb: &mut [f64], n: usize, k: usize) {
    for c in 0..k {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..n {
            lo = lo.min(emb[i * k + c]);
            hi = hi.max(emb[i * k + c]);
        }
        let span = hi - lo;
        for i in 0..n {
            emb[i * k + c] = if span > 0.0 {
                10.0 * (emb[i * k + c] - lo) / span
            } else {
                0.0
            };
        }
    }
}

fn row_seed(seed: u64, x: &[f32]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed;
    for v in x {
        for byte in v.to_bits().to_le_bytes() {
            h ^= u64::from(byte);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

impl UmapModel {
    fn n_train(&self) -> usize {
        self.rhos.len()
    }

    fn train_norms(&self) -> Vec<f64> {
        self.train
            .chunks_exact(self.dim)
            .map(|r| sq_norm(r).sqrt())
            .collect()
    }

    fn place(&self, x: &[f32], norms: &[f64]) -> Vec<f64> {
        let k = self.k;
        let neigh = knn_row(&self.train, norms, self.dim, x, self.n_neighbors, None);
        let dists: Vec<f64> = neigh.iter().map(|p| p.1).collect();
        let (rho, sigma) = smooth_knn_dist(&dists, self.mean_knn_distance);
        let weights: Vec<f64> = dists.iter().map(|&d| membership(d, rho, sigma)).collect();
        let total: f64 = weights.iter().sum();
        let mut cur = vec![0.0; k];
        for (&(j, _), &w) in neigh.iter().zip(&weights) {
            for d in 0..k {
                cur[d] += w / total * self.embedding[j * k + d];
            }
        }
        let eps = epochs_per_sample(&weights, TRANSFORM_EPOCHS);
        let eps_neg: Vec<f64> = eps
            .iter()
            .map(|e| e / NEGATIVE_SAMPLE_RATE as f64)
            .collect();
        let mut next = eps.clone();
        let mut next_neg = eps_neg.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(row_seed(self.seed, x));
        let sgd = Sgd {
            a: self.a,
            b: self.b,
            k,
        };
        let n = self.n_train();
        for epoch in 0..TRANSFORM_EPOCHS {
            let alpha = LEARNING_RATE / 4.0 * (1.0 - epoch as f64 / TRANSFORM_EPOCHS as f64);
            let e = epoch as f64;
            for (idx, &(j, _)) in neigh.iter().enumerate() {
                if eps[idx] <= 0.0 || next[idx] > e {
                    continue;
                }
                sgd.attract(&mut cur, &self.embedding[j * k..(j + 1) * k], alpha, None);
                next[idx] += eps[idx];
                let n_neg = ((e - next_neg[idx]) / eps_neg[idx]).floor().max(0.0) as usize;
                for _ in 0..n_neg {
                    let s = rng.random_range(0..n);
                    sgd.repel(&mut cur, &self.embedding[s * k..(s + 1) * k], alpha);
                }
                next_neg[idx] += n_neg as f64 * eps_neg[idx];
            }
        }
        cur
    }

    pub(crate) fn transform(&self, m: &EmbeddingMatrix) -> Vec<f64> {
        let norms = self.train_norms();
        let rows: Vec<Vec<f64>> = (0..m.n_rows())
            .into_par_iter()
            .map(|i| self.place(m.row(i), &norms))
            .collect();
        rows.concat()
    }
}

/// Fits the embedding on already-scaled rows using `spec.k`,
/// `spec.n_neighbors`, `spec.min_dist`, `spec.n_epochs` and `spec.seed`.
pub fn fit_umap(m: &EmbeddingMatrix, spec: &ReducerSpec) -> Result<FittedReducer, ReducerError> {
    let (n, dim, k, nn) = (m.n_rows(), m.dim(), spec.k, spec.n_neighbors);
    check_k(k, dim)?;
    if nn < 2 {
        return Err(ReducerError::InvalidParameter(format!(
            "n_neighbors must be at least 2, got {nn}"
        )));
    }
    if n <= nn {
        return Err(ReducerError::NeighborCountTooLarge {
            n_neighbors: nn,
            rows: n,
        });
    }
    if n < k + 2 {
        return Err(ReducerError::NotEnoughRows {
            rows: n,
            needed: k + 2,
        });
    }
    let train = m.values().to_vec();
    let norms: Vec<f64> = m.rows().map(|r| sq_norm(r).sqrt()).collect();
    let knn: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| knn_row(&train, &norms, dim, m.row(i), nn, Some(i)))
        .collect();
    let mean_all = knn.iter().flatten().map(|p| p.1).sum::<f64>() / (n * nn) as f64;
    let mut rhos = Vec::with_capacity(n);
    let mut sigmas = Vec::with_capacity(n);
    let directed: Vec<Vec<(usize, f64)>> = knn
        .iter()
        .map(|neigh| {
            let dists: Vec<f64> = neigh.iter().map(|p| p.1).collect();
            let (rho, sigma) = smooth_knn_dist(&dists, mean_all);
            rhos.push(rho);
            sigmas.push(sigma);
            neigh
                .iter()
                .map(|&(j, d)| (j, membership(d, rho, sigma)))
                .collect()
        })
        .collect();
    let graph = fuzzy_union(n, &directed);
    let (a, b) = fit_ab(SPREAD, spec.min_dist);

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let spectral = spectral_layout(&graph, k, spec.seed);
    let spectral_init = spectral.is_some();
    let mut emb = vec![0.0; n * k];
    match spectral {
        Some(cols) => {
            let max = cols
                .iter()
                .flatten()
                .fold(0.0f64, |m, v| m.max(v.abs()))
                .max(f64::MIN_POSITIVE);
            let expansion = 10.0 / max;
            for i in 0..n {
                for (c, col) in cols.iter().enumerate() {
                    let noise: f64 = StandardNormal.sample(&mut rng);
                    emb[i * k + c] = col[i] * expansion + 1e-4 * noise;
                }
            }
        }
        None => {
            for v in emb.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v = 10.0 * z;
            }
        }
    }
    rescale_columns(&mut emb, n, k);
    optimize_layout(&graph, &mut emb, k, a, b, spec.n_epochs, &mut rng);

    Ok(FittedReducer::from_model(
        spec.clone(),
        dim,
        Model::Umap(UmapModel {
            k,
            dim,
            n_neighbors: nn,
            train,
            rhos,
            sigmas,
            embedding: emb,
            a,
            b,
            mean_knn_distance: mean_all,
            seed: spec.seed,
            spectral_init,
        }),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_parameters_match_reference_least_squares() {
        // reference values from an independent nonlinear least-squares fit
        let (a, b) = fit_ab(1.0, 1.0);
        assert!((a - 0.114_975_68).abs() < 1e-4, "a = {a}");
        assert!((b - 1.929_237_14).abs() < 1e-4, "b = {b}");
        let (a, b) = fit_ab(1.0, 0.1);
        assert!((a - 1.576_943_46).abs() < 1e-4, "a = {a}");
        assert!((b - 0.895_060_88).abs() < 1e-4, "b = {b}");
    }

    #[test]
    fn sigma_calibration_hits_target() {
        let dists = [0.1, 0.2, 0.25, 0.4, 0.5, 0.9, 1.0, 1.1];
        let (rho, sigma) = smooth_knn_dist(&dists, 0.5);
        assert_eq!(rho, 0.1);
        let psum: f64 = dists.iter().map(|&d| membership(d, rho, sigma)).sum();
        assert!((psum - 8f64.log2()).abs() < 1e-4, "{psum}");
    }

    #[test]
    fn union_is_symmetric_probabilistic_or() {
        let directed = vec![vec![(1, 0.5)], vec![(0, 0.5), (2, 1.0)], vec![]];
        let g = fuzzy_union(3, &directed);
        let get = |i, j| g.edges.iter().find(|e| e.0 == i && e.1 == j).map(|e| e.2);
        assert_eq!(get(0, 1), Some(0.75));
        assert_eq!(get(1, 0), Some(0.75));
        assert_eq!(get(1, 2), Some(1.0));
        assert_eq!(get(2, 1), Some(1.0));
        assert_eq!(components(&g).0, 1);
    }

    #[test]
    fn cosine_distance_conventions() {
        assert_eq!(cosine_distance(&[0.0], &[0.0], 0.0, 0.0), 0.0);
        assert_eq!(cosine_distance(&[1.0], &[0.0], 1.0, 0.0), 1.0);
        assert!(cosine_distance(&[1.0, 0.0], &[-1.0, 0.0], 1.0, 1.0) - 2.0 < 1e-12);
    }

    #[test]
    fn rejects_bad_neighbor_counts() {
        let m = EmbeddingMatrix::new(
            (0..5).map(|i| i.to_string()).collect(),
            2,
            (0..10).map(|v| v as f32).collect(),
        )
        .unwrap();
        assert!(matches!(
            fit_umap(&m, &ReducerSpec::umap(2, 5)),
            Err(ReducerError::NeighborCountTooLarge { .. })
        ));
        assert!(matches!(
            fit_umap(&m, &ReducerSpec::umap(2, 1)),
            Err(ReducerError::InvalidParameter(_))
        ));
    }
}
