//! Synthetic multilingual STS corpora with a known low-dimensional latent.
//!
//! Every source pair has latent vectors `(z_a, z_b) ∈ ℝʳ` with a controlled
//! correlation; its gold score is `2.5·(1 + cos(z_a, z_b))`. Each pseudo
//! language "translates" a sentence as `B (z + jitter·δ) + noise·ε`, where
//! `B` is `d × r` with orthonormal columns (the first `r` columns of a
//! random rotation). PCA with `k ≥ r` should therefore lose nothing.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::PipelineError;
use crate::corpus::{Benchmark, EmbeddingMatrix, ScoredPair, StsTask};

#[derive(Debug, Clone)]
pub struct SyntheticOptions {
    pub languages: usize,
    pub train_pairs: usize,
    pub test_pairs: usize,
    pub dim: usize,
    pub latent_dim: usize,
    pub noise: f64,
    pub jitter: f64,
    pub seed: u64,
}

impl Default for SyntheticOptions {
    fn default() -> Self {
        Self {
            languages: 16,
            train_pairs: 300,
            test_pairs: 100,
            dim: 64,
            latent_dim: 20,
            noise: 0.01,
            jitter: 0.05,
            seed: 7,
        }
    }
}

pub struct SyntheticCorpus {
    pub train: Benchmark,
    pub test: Benchmark,
    /// `d × r` orthonormal basis of the latent subspace.
    pub basis: DMatrix<f64>,
}

pub fn language_name(l: usize) -> String {
    format!("l{l:02}")
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn random_basis(d: usize, r: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| gaussian(rng));
    let q = g.qr().q();
    q.columns(0, r).into_owned()
}

fn split(
    opts: &SyntheticOptions,
    basis: &DMatrix<f64>,
    pairs: usize,
    tag: &str,
    rng: &mut ChaCha8Rng,
) -> Result<Benchmark, PipelineError> {
    let (d, r) = (opts.dim, opts.latent_dim);
    // shared source latents
    let mut latents = Vec::with_capacity(pairs);
    let mut gold = Vec::with_capacity(pairs);
    for _ in 0..pairs {
        let za: Vec<f64> = (0..r).map(|_| gaussian(rng)).collect();
        let rho: f64 = rng.random_range(-0.3..1.0);
        let zb: Vec<f64> = za
            .iter()
            .map(|a| rho * a + (1.0 - rho * rho).sqrt() * gaussian(rng))
            .collect();
        let dot: f64 = za.iter().zip(&zb).map(|(a, b)| a * b).sum();
        let na = za.iter().map(|a| a * a).sum::<f64>().sqrt();
        let nb = zb.iter().map(|b| b * b).sum::<f64>().sqrt();
        gold.push((2.5 * (1.0 + dot / (na * nb))).clamp(0.0, 5.0));
        latents.push((za, zb));
    }
    let mut tasks = Vec::new();
    let mut matrices = BTreeMap::new();
    let mut sides = BTreeMap::new();
    for l in 0..opts.languages {
        let lang = language_name(l);
        let mut ids = Vec::with_capacity(2 * pairs);
        let mut values = Vec::with_capacity(2 * pairs * d);
        let mut task_pairs = Vec::with_capacity(pairs);
        for (i, (za, zb)) in latents.iter().enumerate() {
            for (side, z) in [("a", za), ("b", zb)] {
                let zj: Vec<f64> = z.iter().map(|v| v + opts.jitter * gaussian(rng)).collect();
                for row in 0..d {
                    let s: f64 = (0..r).map(|c| basis[(row, c)] * zj[c]).sum();
                    values.push((s + opts.noise * gaussian(rng)) as f32);
                }
                ids.push(format!("{tag}{i}{side}"));
            }
            task_pairs.push(ScoredPair {
                gold: gold[i],
                left: format!("{tag}{i}a"),
                right: format!("{tag}{i}b"),
            });
        }
        let m = EmbeddingMatrix::new(ids, d, values)?
            .with_meta(BTreeMap::from([("language".into(), lang.clone().into())]));
        matrices.insert(lang.clone(), Arc::new(m));
        sides.insert(lang.clone(), (lang.clone(), lang.clone()));
        tasks.push(StsTask::new(lang, task_pairs)?);
    }
    Ok(Benchmark::new(tasks, matrices, sides)?)
}

/// Builds a train and a test benchmark over the same basis and languages.
pub fn latent_corpus(opts: &SyntheticOptions) -> Result<SyntheticCorpus, PipelineError> {
    if opts.latent_dim == 0 || opts.latent_dim > opts.dim || opts.languages == 0 {
        return Err(PipelineError::InvalidConfig(format!(
            "need 1 ≤ latent_dim ≤ dim and ≥ 1 language, got r={} d={} L={}",
            opts.latent_dim, opts.dim, opts.languages
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let basis = random_basis(opts.dim, opts.latent_dim, &mut rng);
    let train = split(opts, &basis, opts.train_pairs, "tr", &mut rng)?;
    let test = split(opts, &basis, opts.test_pairs, "te", &mut rng)?;
    Ok(SyntheticCorpus { train, test, basis })
}
