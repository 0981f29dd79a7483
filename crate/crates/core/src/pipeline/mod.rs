//! End-to-end runs: baseline evaluation, reduction sweeps, subsampling and
//! visualization export.

mod subsample;
mod sweep;
pub mod synthetic;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::{Benchmark, CorpusError, EmbeddingMatrix};
use crate::reducers::{FittedReducer, ReducerError};
use crate::stats::{evaluate_rows, EvalReport, StatsError};

pub use subsample::{stratified_subsample, Subsample};
pub use sweep::{
    fit_rows, run_sweep, FitRows, Provenance, SweepCell, SweepConfig, SweepTable,
    DEFAULT_FIT_BUDGET,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("per-language cap {cap} infeasible: {detail}")]
    CapInfeasible { cap: usize, detail: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("visualization needs k = 2 or 3, got {0}")]
    WrongK(usize),
    #[error("train and test dimensions differ ({train} vs {test})")]
    DimMismatch { train: usize, test: usize },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Reducer(#[from] ReducerError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Scores every task of `b`, in parallel, and aggregates in task-id order.
pub fn evaluate_benchmark(
    b: &Benchmark,
    technique: &str,
    d: usize,
) -> Result<EvalReport, PipelineError> {
    let k = b
        .dim()
        .ok_or_else(|| PipelineError::InvalidConfig("empty benchmark".into()))?;
    let scores: Vec<Result<(String, f64), StatsError>> = (0..b.tasks().len())
        .into_par_iter()
        .map(|i| {
            let task = &b.tasks()[i];
            let rows = b.task_rows(i);
            let (l, r) = b.side_matrices(i);
            evaluate_rows(l, r, &rows.left, &rows.right, &rows.gold, task)
                .map(|s| (task.task_id.clone(), s))
        })
        .collect();
    let per_task = scores.into_iter().collect::<Result<BTreeMap<_, _>, _>>()?;
    Ok(EvalReport::new(technique, k, d, per_task)?)
}

/// Unreduced scores (`technique = "none"`, `k = d`).
pub fn run_baseline(test: &Benchmark) -> Result<EvalReport, PipelineError> {
    let d = test
        .dim()
        .ok_or_else(|| PipelineError::InvalidConfig("empty benchmark".into()))?;
    evaluate_benchmark(test, "none", d)
}

/// Applies `r` to every matrix of `b`, keeping tasks and sides.
pub fn reduce_benchmark(r: &FittedReducer, b: &Benchmark) -> Result<Benchmark, PipelineError> {
    let mut out = BTreeMap::new();
    for (name, m) in b.matrices() {
        out.insert(name.clone(), Arc::new(r.transform(m)?));
    }
    Ok(b.with_matrices(out)?)
}

/// Reduces `test` with `r` and scores it, exactly as one sweep cell does.
pub fn evaluate_reduced(r: &FittedReducer, test: &Benchmark) -> Result<EvalReport, PipelineError> {
    let d = test
        .dim()
        .ok_or_else(|| PipelineError::InvalidConfig("empty benchmark".into()))?;
    let reduced = reduce_benchmark(r, test)?;
    evaluate_benchmark(&reduced, &r.spec.label(), d)
}

fn clean_label(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

/// `id \t x \t y [\t z] \t label` per row, no header. `labels` is either
/// empty (blank labels) or one per row.
pub fn export_visualization(
    r: &FittedReducer,
    m: &EmbeddingMatrix,
    labels: &[String],
) -> Result<String, PipelineError> {
    let k = r.output_dim();
    if !(2..=3).contains(&k) {
        return Err(PipelineError::WrongK(k));
    }
    if !labels.is_empty() && labels.len() != m.n_rows() {
        return Err(PipelineError::InvalidConfig(format!(
            "{} labels for {} rows",
            labels.len(),
            m.n_rows()
        )));
    }
    let y = r.transform(m)?;
    let mut out = String::new();
    for (i, id) in y.ids().iter().enumerate() {
        out.push_str(&clean_label(id));
        for v in y.row(i) {
            let _ = write!(out, "\t{v}");
        }
        let label = labels.get(i).map(|s| clean_label(s)).unwrap_or_default();
        let _ = writeln!(out, "\t{label}");
    }
    Ok(out)
}

/// Gold-score bins `[0,1)`, …, `[4,5]` as labels for each row of `b`'s
/// matrix `name`, tagged with the matrix name; rows not in any pair get the
/// bare name.
pub fn gold_bin_labels(b: &Benchmark, name: &str) -> Vec<String> {
    let Some(m) = b.matrix(name) else {
        return Vec::new();
    };
    let mut labels = vec![name.to_string(); m.n_rows()];
    for (i, task) in b.tasks().iter().enumerate() {
        let Some((l, r)) = b.sides(&task.task_id) else {
            continue;
        };
        let rows = b.task_rows(i);
        for (p, &g) in rows.gold.iter().enumerate() {
            let bin = (g.floor() as usize).min(4);
            let tag = format!("{name}:{bin}-{}", bin + 1);
            if l == name {
                labels[rows.left[p]] = tag.clone();
            }
            if r == name {
                labels[rows.right[p]] = tag;
            }
        }
    }
    labels
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ScoredPair, StsTask};
    use crate::reducers::ReducerSpec;
    use crate::stats::fisher_average_clamped;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use synthetic::{latent_corpus, SyntheticOptions};

    fn small() -> synthetic::SyntheticCorpus {
        latent_corpus(&SyntheticOptions {
            languages: 3,
            train_pairs: 60,
            test_pairs: 40,
            dim: 8,
            latent_dim: 3,
            ..SyntheticOptions::default()
        })
        .unwrap()
    }

    #[test]
    fn baseline_aggregate_is_fisher_of_tasks() {
        let c = latent_corpus(&SyntheticOptions {
            languages: 31,
            train_pairs: 2,
            test_pairs: 20,
            dim: 6,
            latent_dim: 3,
            ..SyntheticOptions::default()
        })
        .unwrap();
        let r = run_baseline(&c.test).unwrap();
        assert_eq!(r.per_task.len(), 31);
        assert_eq!(
            (r.technique.as_str(), r.k, r.reduction_pct),
            ("none", 6, 0.0)
        );
        let rs: Vec<f64> = r.per_task.values().copied().collect();
        assert_eq!(r.aggregate, fisher_average_clamped(&rs).unwrap());
    }

    #[test]
    fn perfect_task_clamps() {
        let m = Arc::new(
            EmbeddingMatrix::new(
                vec!["a".into(), "b".into(), "c".into()],
                2,
                vec![1.0, 0.0, 1.0, 1.0, 0.0, 1.0],
            )
            .unwrap(),
        );
        let pairs = vec![
            ScoredPair {
                gold: 5.0,
                left: "a".into(),
                right: "a".into(),
            },
            ScoredPair {
                gold: 2.0,
                left: "a".into(),
                right: "b".into(),
            },
            ScoredPair {
                gold: 0.0,
                left: "a".into(),
                right: "c".into(),
            },
        ];
        let b = Benchmark::new(
            vec![StsTask::new("x", pairs).unwrap()],
            BTreeMap::from([("x".into(), m)]),
            BTreeMap::from([("x".into(), ("x".into(), "x".into()))]),
        )
        .unwrap();
        let r = run_baseline(&b).unwrap();
        assert_eq!(r.per_task["x"], 1.0);
        assert!(r.aggregate.avg_r < 1.0 && r.aggregate.avg_r > 1.0 - 1e-11);
    }

    #[test]
    fn shuffled_gold_is_near_zero() {
        let c = latent_corpus(&SyntheticOptions {
            languages: 1,
            train_pairs: 2,
            test_pairs: 1000,
            dim: 8,
            latent_dim: 4,
            ..SyntheticOptions::default()
        })
        .unwrap();
        let task = &c.test.tasks()[0];
        let mut gold = task.gold();
        gold.shuffle(&mut ChaCha8Rng::seed_from_u64(1));
        let pairs = task
            .pairs
            .iter()
            .zip(gold)
            .map(|(p, g)| ScoredPair {
                gold: g,
                ..p.clone()
            })
            .collect();
        let shuffled = Benchmark::new(
            vec![StsTask::new(task.task_id.clone(), pairs).unwrap()],
            c.test.matrices().clone(),
            BTreeMap::from([(
                task.task_id.clone(),
                (task.task_id.clone(), task.task_id.clone()),
            )]),
        )
        .unwrap();
        assert!(run_baseline(&shuffled).unwrap().aggregate.avg_r.abs() < 0.1);
    }

    #[test]
    fn visualization_shapes() {
        let c = small();
        let train = fit_rows(&c.train, crate::reducers::Technique::Ipca, None, 0).unwrap();
        let m = c.test.matrix("l00").unwrap();
        let sub = m.select_rows(&(0..10).collect::<Vec<_>>()).unwrap();
        for k in [2, 3] {
            let r = FittedReducer::fit(&ReducerSpec::ipca(k), &train).unwrap();
            let tsv = export_visualization(&r, &sub, &[]).unwrap();
            assert_eq!(tsv.lines().count(), 10);
            assert!(tsv.lines().all(|l| l.split('\t').count() == k + 2));
        }
        let r = FittedReducer::fit(&ReducerSpec::ipca(4), &train).unwrap();
        assert!(matches!(
            export_visualization(&r, &sub, &[]),
            Err(PipelineError::WrongK(4))
        ));
        let labels = gold_bin_labels(&c.test, "l00");
        assert_eq!(labels.len(), m.n_rows());
        assert!(labels.iter().all(|l| l.starts_with("l00:")));
    }
}
