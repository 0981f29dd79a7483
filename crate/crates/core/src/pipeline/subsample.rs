//! Language-balanced subsampling of training pairs.
//!
//! Each task of the training benchmark is one language; pair `i` of every
//! task is a translation of the same source pair, so pair *indices* are
//! shared across languages. Selection runs in two passes, each over a fresh
//! seeded shuffle of the indices:
//!
//! 1. coverage: every index is dealt to one random open language that has
//!    it, so each index appears at least once when capacity allows;
//! 2. fill: repeated rounds deal each index to a random open language that
//!    does not hold it yet, until every language holds `cap` pairs.
//!
//! A language closes as soon as it reaches the cap.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::PipelineError;
use crate::corpus::{Benchmark, EmbeddingMatrix};

/// Selected pair indices per language (task id), ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subsample {
    pub per_language: BTreeMap<String, Vec<usize>>,
}

impl Subsample {
    /// `(task_id, pair index)` for every selected pair.
    pub fn pairs(&self) -> Vec<(String, usize)> {
        self.per_language
            .iter()
            .flat_map(|(l, idx)| idx.iter().map(move |&i| (l.clone(), i)))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.per_language.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Both sentences of every selected pair, stacked row-wise
    /// (left then right per pair). Row ids become `task:index:side`.
    pub fn rows(&self, b: &Benchmark) -> Result<EmbeddingMatrix, PipelineError> {
        let dim = b
            .dim()
            .ok_or_else(|| PipelineError::InvalidConfig("empty benchmark".into()))?;
        let position: BTreeMap<&str, usize> = b
            .tasks()
            .iter()
            .enumerate()
            .map(|(i, t)| (t.task_id.as_str(), i))
            .collect();
        let mut ids = Vec::with_capacity(2 * self.len());
        let mut values = Vec::with_capacity(2 * self.len() * dim);
        for (lang, idx) in &self.per_language {
            let t = *position.get(lang.as_str()).ok_or_else(|| {
                PipelineError::InvalidConfig(format!("unknown language {lang:?}"))
            })?;
            let rows = b.task_rows(t);
            let (lm, rm) = b.side_matrices(t);
            for &i in idx {
                ids.push(format!("{lang}:{i}:l"));
                values.extend_from_slice(lm.row(rows.left[i]));
                ids.push(format!("{lang}:{i}:r"));
                values.extend_from_slice(rm.row(rows.right[i]));
            }
        }
        Ok(EmbeddingMatrix::new(ids, dim, values)?)
    }
}

/// Draws exactly `cap` pairs per language; see the module docs.
pub fn stratified_subsample(
    b: &Benchmark,
    cap: usize,
    seed: u64,
) -> Result<Subsample, PipelineError> {
    let langs: Vec<(String, usize)> = b.counts();
    if langs.is_empty() {
        return Err(PipelineError::InvalidConfig(
            "no languages to sample".into(),
        ));
    }
    let nl = langs.len();
    if let Some((l, n)) = langs.iter().find(|(_, n)| *n < cap) {
        return Err(PipelineError::CapInfeasible {
            cap,
            detail: format!("language {l:?} has only {n} pairs"),
        });
    }
    let distinct = langs.iter().map(|(_, n)| *n).max().unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut held: Vec<Vec<bool>> = langs.iter().map(|(_, n)| vec![false; *n]).collect();
    let mut count = vec![0usize; nl];
    let mut order: Vec<usize> = (0..distinct).collect();
    let mut candidates = Vec::with_capacity(nl);

    let mut deal =
        |order: &[usize], rng: &mut ChaCha8Rng, count: &mut [usize], held: &mut [Vec<bool>]| {
            let mut progress = 0;
            for &i in order {
                candidates.clear();
                candidates.extend(
                    (0..nl).filter(|&l| count[l] < cap && i < held[l].len() && !held[l][i]),
                );
                if candidates.is_empty() {
                    continue;
                }
                let l = candidates[rng.random_range(0..candidates.len())];
                held[l][i] = true;
                count[l] += 1;
                progress += 1;
            }
            progress
        };

    if cap > 0 {
        order.shuffle(&mut rng);
        deal(&order, &mut rng, &mut count, &mut held);
        while count.iter().any(|&c| c < cap) {
            order.shuffle(&mut rng);
            if deal(&order, &mut rng, &mut count, &mut held) == 0 {
                return Err(PipelineError::CapInfeasible {
                    cap,
                    detail: "no open language can take another pair".into(),
                });
            }
        }
    }
    Ok(Subsample {
        per_language: langs
            .iter()
            .zip(&held)
            .map(|((l, _), h)| (l.clone(), (0..h.len()).filter(|&i| h[i]).collect()))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::synthetic::{latent_corpus, SyntheticOptions};
    use std::collections::BTreeSet;

    fn corpus(languages: usize, pairs: usize) -> Benchmark {
        latent_corpus(&SyntheticOptions {
            languages,
            train_pairs: pairs,
            test_pairs: 2,
            dim: 4,
            latent_dim: 2,
            ..SyntheticOptions::default()
        })
        .unwrap()
        .train
    }

    #[test]
    fn small_case_exhaustive_seeds() {
        let b = corpus(4, 10);
        for seed in 0..100 {
            let s = stratified_subsample(&b, 5, seed).unwrap();
            assert!(s.per_language.values().all(|v| v.len() == 5));
            let union: BTreeSet<usize> = s.per_language.values().flatten().copied().collect();
            assert_eq!(union.len(), 10, "seed {seed}");
        }
    }

    #[test]
    fn single_language_identity() {
        let b = corpus(1, 12);
        let s = stratified_subsample(&b, 12, 3).unwrap();
        assert_eq!(s.pairs().len(), 12);
        assert_eq!(
            s.per_language.values().next().unwrap(),
            &(0..12).collect::<Vec<_>>()
        );
    }

    #[test]
    fn deterministic_and_infeasible() {
        let b = corpus(3, 8);
        assert_eq!(
            stratified_subsample(&b, 4, 9).unwrap(),
            stratified_subsample(&b, 4, 9).unwrap()
        );
        assert!(matches!(
            stratified_subsample(&b, 9, 0),
            Err(PipelineError::CapInfeasible { .. })
        ));
        let rows = stratified_subsample(&b, 4, 9).unwrap().rows(&b).unwrap();
        assert_eq!(rows.n_rows(), 3 * 4 * 2);
    }
}
