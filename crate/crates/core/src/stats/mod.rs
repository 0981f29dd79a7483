//! Similarity scoring and the statistics reported over it.

mod tdist;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{EmbeddingMatrix, StsTask};

pub use tdist::{ln_gamma, reg_inc_beta, two_tailed_p};

/// Largest `|r|` fed into the Fisher transform by the pipeline.
pub const FISHER_CLAMP: f64 = 1.0 - 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("zero vector{}", .id.as_ref().map(|i| format!(" for id {i:?}")).unwrap_or_default())]
    ZeroVector { id: Option<String> },
    #[error("vectors of different length ({left} vs {right})")]
    DimMismatch { left: usize, right: usize },
    #[error("inputs of different length ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least 2 observations, got {0}")]
    TooFewObservations(usize),
    #[error("input is constant; rank correlation undefined")]
    DegenerateConstantInput,
    #[error("non-finite input value")]
    NonFinite,
    #[error("correlation {0} at ±1 has infinite Fisher z; clamp to ±(1 − 1e-12) first")]
    CorrelationAtUnity(f64),
    #[error("empty input")]
    EmptyInput,
    #[error("all paired differences are zero")]
    AllZeroDifferences,
    #[error("k = {k} outside 1..={d}")]
    KExceedsD { k: usize, d: usize },
    #[error("baseline must be positive, got {0}")]
    NonPositiveBaseline(f64),
    #[error("no grid point reaches {floor}% of the baseline")]
    NoThresholdMet { floor: u32 },
    #[error("task {task}: pair {line} id {id:?} not found")]
    UnresolvedId {
        task: String,
        line: usize,
        id: String,
    },
}

/// Mean of Fisher-z values and its back-transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateScore {
    pub fisher_z_mean: f64,
    pub avg_r: f64,
}

/// Per-task scores of one (technique, k) configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Technique label (`none` for the unreduced baseline).
    pub technique: String,
    pub k: usize,
    /// Input dimension before reduction.
    pub d: usize,
    pub per_task: BTreeMap<String, f64>,
    pub aggregate: AggregateScore,
    pub reduction_pct: f64,
}

/// Best retention threshold reached by one technique, and where.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetentionRow {
    pub technique: String,
    /// Percent of the baseline, a multiple of 5.
    pub threshold_retained: u32,
    pub dims: usize,
    pub reduction_pct: f64,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub df: usize,
    pub mean_diff: f64,
}

pub fn cosine_similarity(u: &[f32], v: &[f32]) -> Result<f64, StatsError> {
    if u.len() != v.len() {
        return Err(StatsError::DimMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    let (mut uv, mut uu, mut vv) = (0.0, 0.0, 0.0);
    for (&a, &b) in u.iter().zip(v) {
        let (a, b) = (f64::from(a), f64::from(b));
        uv += a * b;
        uu += a * a;
        vv += b * b;
    }
    if uu == 0.0 || vv == 0.0 {
        return Err(StatsError::ZeroVector { id: None });
    }
    Ok((uv / (uu * vv).sqrt()).clamp(-1.0, 1.0))
}

/// 1-based ranks with ties given their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = r;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (a, b) = (a - mx, b - my);
        sxy += a * b;
        sxx += a * a;
        syy += b * b;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::DegenerateConstantInput);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's `r_s`: Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(StatsError::TooFewObservations(x.len()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

pub fn fisher_average(rs: &[f64]) -> Result<AggregateScore, StatsError> {
    if rs.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let mut sum = 0.0;
    for &r in rs {
        if !r.is_finite() {
            return Err(StatsError::NonFinite);
        }
        if r.abs() >= 1.0 {
            return Err(StatsError::CorrelationAtUnity(r));
        }
        sum += r.atanh();
    }
    let fisher_z_mean = sum / rs.len() as f64;
    Ok(AggregateScore {
        fisher_z_mean,
        avg_r: fisher_z_mean.tanh(),
    })
}

/// [`fisher_average`] after clamping each `r` into `±FISHER_CLAMP`.
pub fn fisher_average_clamped(rs: &[f64]) -> Result<AggregateScore, StatsError> {
    let clamped: Vec<f64> = rs
        .iter()
        .map(|r| r.clamp(-FISHER_CLAMP, FISHER_CLAMP))
        .collect();
    fisher_average(&clamped)
}

/// Cosine per pair, then Spearman against the gold scores.
pub fn evaluate_task(
    left: &EmbeddingMatrix,
    right: &EmbeddingMatrix,
    task: &StsTask,
) -> Result<f64, StatsError> {
    if left.dim() != right.dim() {
        return Err(StatsError::DimMismatch {
            left: left.dim(),
            right: right.dim(),
        });
    }
    let lookup = |m: &EmbeddingMatrix, line: usize, id: &str| {
        m.row_of(id).ok_or_else(|| StatsError::UnresolvedId {
            task: task.task_id.clone(),
            line,
            id: id.to_string(),
        })
    };
    let mut l = Vec::with_capacity(task.pairs.len());
    let mut r = Vec::with_capacity(task.pairs.len());
    for (i, p) in task.pairs.iter().enumerate() {
        l.push(lookup(left, i + 1, &p.left)?);
        r.push(lookup(right, i + 1, &p.right)?);
    }
    let gold = task.gold();
    evaluate_rows(left, right, &l, &r, &gold, task)
}

/// Like [`evaluate_task`] with pair rows already resolved.
pub fn evaluate_rows(
    left: &EmbeddingMatrix,
    right: &EmbeddingMatrix,
    left_rows: &[usize],
    right_rows: &[usize],
    gold: &[f64],
    task: &StsTask,
) -> Result<f64, StatsError> {
    let mut predicted = Vec::with_capacity(gold.len());
    for (i, (&a, &b)) in left_rows.iter().zip(right_rows).enumerate() {
        let c = cosine_similarity(left.row(a), right.row(b)).map_err(|e| match e {
            StatsError::ZeroVector { .. } => {
                let p = &task.pairs[i];
                let id = if left.row(a).iter().all(|v| *v == 0.0) {
                    &p.left
                } else {
                    &p.right
                };
                StatsError::ZeroVector {
                    id: Some(id.clone()),
                }
            }
            e => e,
        })?;
        predicted.push(c);
    }
    spearman(&predicted, gold)
}

pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let n = a.len();
    if n < 2 {
        return Err(StatsError::TooFewObservations(n));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if d.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    if d.iter().all(|&v| v == 0.0) {
        return Err(StatsError::AllZeroDifferences);
    }
    let nf = n as f64;
    let mean = d.iter().sum::<f64>() / nf;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let t = if var == 0.0 {
        mean.signum() * f64::INFINITY
    } else {
        mean / (var.sqrt() / nf.sqrt())
    };
    let df = n - 1;
    Ok(TTest {
        t,
        p: two_tailed_p(t, df as f64),
        df,
        mean_diff: mean,
    })
}

/// `100·(1 − k/d)`, unrounded.
pub fn reduction_percentage(d: usize, k: usize) -> Result<f64, StatsError> {
    if k == 0 || k > d {
        return Err(StatsError::KExceedsD { k, d });
    }
    Ok(100.0 * (1.0 - k as f64 / d as f64))
}

/// Default lowest threshold tried by [`retention_analysis`], in percent.
pub const DEFAULT_RETENTION_FLOOR: u32 = 5;

/// Scans `θ = 100, 95, …, floor` and returns the first `θ` reached by some
/// grid point, with the smallest such `k`. Grid points missing from `curve`
/// are skipped.
pub fn retention_analysis(
    technique: &str,
    d: usize,
    baseline: f64,
    curve: &BTreeMap<usize, f64>,
    grid: &[usize],
    floor: u32,
) -> Result<RetentionRow, StatsError> {
    if !(baseline > 0.0) {
        return Err(StatsError::NonPositiveBaseline(baseline));
    }
    let mut ks: Vec<usize> = grid
        .iter()
        .copied()
        .filter(|k| curve.contains_key(k))
        .collect();
    if ks.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    ks.sort_unstable();
    ks.dedup();
    let mut theta = 100;
    while theta >= floor.max(1) {
        let bound = f64::from(theta) / 100.0 * baseline;
        if let Some(&k) = ks.iter().find(|k| curve[k] >= bound) {
            return Ok(RetentionRow {
                technique: technique.to_string(),
                threshold_retained: theta,
                dims: k,
                reduction_pct: reduction_percentage(d, k)?,
                score: curve[&k],
            });
        }
        if theta < 5 {
            break;
        }
        theta -= 5;
    }
    Err(StatsError::NoThresholdMet { floor })
}

/// Arithmetic mean and population standard deviation.
pub fn aggregate_mean_std(values: &[f64]) -> Result<(f64, f64), StatsError> {
    if values.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}

impl EvalReport {
    /// Builds a report, aggregating `per_task` in task-id order.
    pub fn new(
        technique: impl Into<String>,
        k: usize,
        d: usize,
        per_task: BTreeMap<String, f64>,
    ) -> Result<Self, StatsError> {
        let rs: Vec<f64> = per_task.values().copied().collect();
        Ok(Self {
            technique: technique.into(),
            k,
            d,
            aggregate: fisher_average_clamped(&rs)?,
            reduction_pct: reduction_percentage(d, k)?,
            per_task,
        })
    }

    /// `task_id \t r_s` per line, no header.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (task, r) in &self.per_task {
            let _ = writeln!(out, "{task}\t{r}");
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent O(n²) average rank: 1 + #{less} + (#{equal} − 1)/2.
    fn brute_ranks(x: &[f64]) -> Vec<f64> {
        x.iter()
            .map(|&v| {
                let less = x.iter().filter(|&&w| w < v).count() as f64;
                let eq = x.iter().filter(|&&w| w == v).count() as f64;
                1.0 + less + (eq - 1.0) / 2.0
            })
            .collect()
    }

    fn brute_spearman(x: &[f64], y: &[f64]) -> f64 {
        let (rx, ry) = (brute_ranks(x), brute_ranks(y));
        let n = x.len() as f64;
        let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
        let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
        let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
        let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
        cov / (vx * vy).sqrt()
    }

    #[test]
    fn cosine_basics() {
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[-1.0, 0.0]).unwrap(), -1.0);
        assert_eq!(cosine_similarity(&[0.3, 0.4], &[0.3, 0.4]).unwrap(), 1.0);
        assert!(matches!(
            cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]),
            Err(StatsError::ZeroVector { .. })
        ));
        assert!(matches!(
            cosine_similarity(&[1.0], &[1.0, 0.0]),
            Err(StatsError::DimMismatch { .. })
        ));
    }

    #[test]
    fn spearman_examples() {
        assert_eq!(
            spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap(),
            1.0
        );
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
        let (x, y) = ([1.0, 2.0, 2.0, 3.0], [1.0, 3.0, 2.0, 4.0]);
        assert!((spearman(&x, &y).unwrap() - brute_spearman(&x, &y)).abs() < 1e-12);
        assert_eq!(
            spearman(&[1.0, 1.0], &[1.0, 2.0]),
            Err(StatsError::DegenerateConstantInput)
        );
        assert!(matches!(
            spearman(&[1.0], &[1.0, 2.0]),
            Err(StatsError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn fisher_examples() {
        assert!((fisher_average(&[0.7, 0.7, 0.7]).unwrap().avg_r - 0.7).abs() < 1e-15);
        assert_eq!(fisher_average(&[0.0]).unwrap().avg_r, 0.0);
        let want = ((0.5f64.atanh() + 0.9f64.atanh()) / 2.0).tanh();
        assert!((fisher_average(&[0.5, 0.9]).unwrap().avg_r - want).abs() < 1e-15);
        assert!((want - 0.766_077_3).abs() < 1e-7);
        assert!(matches!(
            fisher_average(&[1.0]),
            Err(StatsError::CorrelationAtUnity(_))
        ));
        let a = fisher_average_clamped(&[1.0]).unwrap();
        assert!(a.avg_r < 1.0 && a.avg_r > 1.0 - 1e-11);
    }

    #[test]
    fn t_test_error_paths() {
        assert_eq!(
            paired_t_test(&[1.0, 2.0], &[1.0, 2.0]),
            Err(StatsError::AllZeroDifferences)
        );
        assert!(matches!(
            paired_t_test(&[1.0], &[1.0, 2.0]),
            Err(StatsError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn reduction_examples() {
        assert_eq!(reduction_percentage(768, 209).unwrap().round(), 73.0);
        assert_eq!(reduction_percentage(1024, 63).unwrap().round(), 94.0);
        assert_eq!(reduction_percentage(5, 5).unwrap(), 0.0);
        assert!(reduction_percentage(5, 6).is_err());
        assert!(reduction_percentage(5, 0).is_err());
    }

    #[test]
    fn retention_examples() {
        let curve = BTreeMap::from([(10, 0.30), (89, 0.4779), (200, 0.45)]);
        let row = retention_analysis("ica", 768, 0.4342, &curve, &[10, 89, 200], 5).unwrap();
        assert_eq!((row.threshold_retained, row.dims), (100, 89));
        let curve = BTreeMap::from([(10, 0.5026), (20, 0.48)]);
        let row = retention_analysis("umap", 768, 0.7096, &curve, &[10, 20], 5).unwrap();
        assert_eq!((row.threshold_retained, row.dims), (70, 10));
        let flat = BTreeMap::from([(4, 0.5), (8, 0.5), (16, 0.5)]);
        let row = retention_analysis("x", 16, 0.5, &flat, &[16, 8, 4], 5).unwrap();
        assert_eq!((row.threshold_retained, row.dims), (100, 4));
        let low = BTreeMap::from([(4, 0.001)]);
        assert_eq!(
            retention_analysis("x", 16, 0.5, &low, &[4], 5),
            Err(StatsError::NoThresholdMet { floor: 5 })
        );
    }

    #[test]
    fn report_round_trip() {
        let r = EvalReport::new(
            "ipca",
            20,
            64,
            BTreeMap::from([("en-en".into(), 0.5), ("de-de".into(), 0.25)]),
        )
        .unwrap();
        assert_eq!(EvalReport::from_json(&r.to_json()).unwrap(), r);
        assert_eq!(r.to_tsv(), "de-de\t0.25\nen-en\t0.5\n");
    }

    fn vec_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..30).prop_flat_map(|n| {
            (
                prop::collection::vec(-5i32..5, n)
                    .prop_map(|v| v.into_iter().map(f64::from).collect()),
                prop::collection::vec(-100.0f64..100.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn spearman_matches_brute_force((x, y) in vec_pair()) {
            match spearman(&x, &y) {
                Ok(r) => {
                    prop_assert!((r - brute_spearman(&x, &y)).abs() < 1e-12);
                    prop_assert_eq!(r, spearman(&y, &x).unwrap());
                    let ex: Vec<f64> = x.iter().map(|v| v.exp()).collect();
                    prop_assert!((spearman(&ex, &y).unwrap() - r).abs() < 1e-12);
                }
                Err(e) => prop_assert_eq!(e, StatsError::DegenerateConstantInput),
            }
        }

        #[test]
        fn t_test_antisymmetric(a in prop::collection::vec(-1.0f64..1.0, 2..10), shift in 0.01f64..0.5) {
            let b: Vec<f64> = a.iter().enumerate().map(|(i, v)| v + shift * (1.0 + i as f64)).collect();
            let ab = paired_t_test(&a, &b).unwrap();
            let ba = paired_t_test(&b, &a).unwrap();
            prop_assert_eq!(ab.t, -ba.t);
            prop_assert_eq!(ab.p, ba.p);
            prop_assert!((0.0..=1.0).contains(&ab.p));
        }

        #[test]
        fn retention_is_minimal(curve in prop::collection::btree_map(1usize..64, 0.01f64..1.0, 1..12), baseline in 0.1f64..1.0) {
            let grid: Vec<usize> = curve.keys().copied().collect();
            if let Ok(row) = retention_analysis("x", 64, baseline, &curve, &grid, 5) {
                let bound = f64::from(row.threshold_retained) / 100.0 * baseline;
                prop_assert!(row.score >= bound);
                prop_assert!(grid.iter().filter(|&&k| k < row.dims).all(|k| curve[k] < bound));
                if row.threshold_retained < 100 {
                    let higher = f64::from(row.threshold_retained + 5) / 100.0 * baseline;
                    prop_assert!(curve.values().all(|&v| v < higher));
                }
            }
        }
    }
}
