//! Column scalers applied before each reduction technique.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusError, EmbeddingMatrix};
use crate::reducers::Technique;

#[derive(Debug, Error)]
pub enum ScalerError {
    #[error("cannot fit a scaler on an empty matrix")]
    EmptyInput,
    #[error("scaler fitted on {fitted} columns applied to {got}")]
    DimMismatch { fitted: usize, got: usize },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalerKind {
    Standard,
    MinMax,
    Identity,
}

/// Per-column statistics of a fitted scaler.
///
/// `Standard` stores `(mean, stddev)` with the population (1/N) convention;
/// `MinMax` stores `(min, max)`. Columns whose spread is zero map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FittedScaler {
    Standard { mean: Vec<f64>, std: Vec<f64> },
    MinMax { min: Vec<f64>, max: Vec<f64> },
    Identity { dim: usize },
}

/// Scaler each technique consumes.
pub fn scaler_for(technique: Technique) -> ScalerKind {
    match technique {
        Technique::Ipca | Technique::Kpca => ScalerKind::Standard,
        Technique::Ica => ScalerKind::Identity,
        Technique::VarThresh | Technique::Umap => ScalerKind::MinMax,
    }
}

pub fn fit_scaler(kind: ScalerKind, m: &EmbeddingMatrix) -> Result<FittedScaler, ScalerError> {
    if m.is_empty() {
        return Err(ScalerError::EmptyInput);
    }
    let d = m.dim();
    let n = m.n_rows() as f64;
    Ok(match kind {
        ScalerKind::Identity => FittedScaler::Identity { dim: d },
        ScalerKind::Standard => {
            let mut mean = vec![0.0; d];
            for row in m.rows() {
                for (acc, &v) in mean.iter_mut().zip(row) {
                    *acc += f64::from(v);
                }
            }
            mean.iter_mut().for_each(|v| *v /= n);
            let mut var = vec![0.0; d];
            for row in m.rows() {
                for ((acc, &v), mu) in var.iter_mut().zip(row).zip(&mean) {
                    let c = f64::from(v) - mu;
                    *acc += c * c;
                }
            }
            let std = var.into_iter().map(|v| (v / n).sqrt()).collect();
            FittedScaler::Standard { mean, std }
        }
        ScalerKind::MinMax => {
            let mut min = vec![f64::INFINITY; d];
            let mut max = vec![f64::NEG_INFINITY; d];
            for row in m.rows() {
                for (j, &v) in row.iter().enumerate() {
                    let v = f64::from(v);
                    min[j] = min[j].min(v);
                    max[j] = max[j].max(v);
                }
            }
            FittedScaler::MinMax { min, max }
        }
    })
}

impl FittedScaler {
    pub fn kind(&self) -> ScalerKind {
        match self {
            FittedScaler::Standard { .. } => ScalerKind::Standard,
            FittedScaler::MinMax { .. } => ScalerKind::MinMax,
            FittedScaler::Identity { .. } => ScalerKind::Identity,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            FittedScaler::Standard { mean, .. } => mean.len(),
            FittedScaler::MinMax { min, .. } => min.len(),
            FittedScaler::Identity { dim } => *dim,
        }
    }

    /// Scales one value of column `j`.
    #[inline]
    pub fn scale(&self, j: usize, v: f64) -> f64 {
        match self {
            FittedScaler::Standard { mean, std } => {
                if std[j] > 0.0 {
                    (v - mean[j]) / std[j]
                } else {
                    0.0
                }
            }
            FittedScaler::MinMax { min, max } => {
                let span = max[j] - min[j];
                if span > 0.0 {
                    (v - min[j]) / span
                } else {
                    0.0
                }
            }
            FittedScaler::Identity { .. } => v,
        }
    }

    /// Maps a scaled value back. Constant columns return their fitted level.
    pub fn unscale(&self, j: usize, v: f64) -> f64 {
        match self {
            FittedScaler::Standard { mean, std } => v * std[j] + mean[j],
            FittedScaler::MinMax { min, max } => v * (max[j] - min[j]) + min[j],
            FittedScaler::Identity { .. } => v,
        }
    }

    /// Scales every row of `m`; row ids and metadata carry over.
    pub fn apply(&self, m: &EmbeddingMatrix) -> Result<EmbeddingMatrix, ScalerError> {
        self.map_values(m, |j, v| self.scale(j, v))
    }

    pub fn invert(&self, m: &EmbeddingMatrix) -> Result<EmbeddingMatrix, ScalerError> {
        self.map_values(m, |j, v| self.unscale(j, v))
    }

    fn map_values(
        &self,
        m: &EmbeddingMatrix,
        f: impl Fn(usize, f64) -> f64,
    ) -> Result<EmbeddingMatrix, ScalerError> {
        if m.dim() != self.dim() {
            return Err(ScalerError::DimMismatch {
                fitted: self.dim(),
                got: m.dim(),
            });
        }
        if matches!(self, FittedScaler::Identity { .. }) {
            return Ok(m.clone());
        }
        let d = m.dim();
        let values = m
            .values()
            .iter()
            .enumerate()
            .map(|(i, &v)| f(i % d, f64::from(v)) as f32)
            .collect();
        Ok(EmbeddingMatrix::new(m.ids().to_vec(), d, values)?.with_meta(m.meta().clone()))
    }
}

pub fn apply_scaler(s: &FittedScaler, m: &EmbeddingMatrix) -> Result<EmbeddingMatrix, ScalerError> {
    s.apply(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn col(values: &[f32]) -> EmbeddingMatrix {
        EmbeddingMatrix::new(
            (0..values.len()).map(|i| i.to_string()).collect(),
            1,
            values.to_vec(),
        )
        .unwrap()
    }

    fn random(n: usize, d: usize, seed: u64) -> EmbeddingMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..n * d)
            .map(|i| rng.random_range(-3.0f32..5.0) * (1 + i % d) as f32)
            .collect();
        EmbeddingMatrix::new((0..n).map(|i| i.to_string()).collect(), d, values).unwrap()
    }

    #[test]
    fn standard_two_points() {
        let FittedScaler::Standard { mean, std } =
            fit_scaler(ScalerKind::Standard, &col(&[1.0, 3.0])).unwrap()
        else {
            panic!()
        };
        assert_eq!((mean[0], std[0]), (2.0, 1.0));
    }

    #[test]
    fn minmax_three_points() {
        let m = col(&[2.0, 4.0, 6.0]);
        let s = fit_scaler(ScalerKind::MinMax, &m).unwrap();
        assert_eq!(
            s,
            FittedScaler::MinMax {
                min: vec![2.0],
                max: vec![6.0]
            }
        );
        assert_eq!(s.apply(&m).unwrap().values(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn constant_column_maps_to_zero() {
        let m = col(&[7.0, 7.0, 7.0]);
        for kind in [ScalerKind::Standard, ScalerKind::MinMax] {
            let s = fit_scaler(kind, &m).unwrap();
            assert_eq!(s.apply(&m).unwrap().values(), &[0.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn empty_and_mismatch_errors() {
        let empty = EmbeddingMatrix::new(vec![], 2, vec![]).unwrap();
        assert!(matches!(
            fit_scaler(ScalerKind::Standard, &empty),
            Err(ScalerError::EmptyInput)
        ));
        let s = fit_scaler(ScalerKind::MinMax, &col(&[1.0, 2.0])).unwrap();
        assert!(matches!(
            s.apply(&random(2, 3, 0)),
            Err(ScalerError::DimMismatch { fitted: 1, got: 3 })
        ));
    }

    #[test]
    fn technique_bindings() {
        assert_eq!(scaler_for(Technique::Ipca), ScalerKind::Standard);
        assert_eq!(scaler_for(Technique::Kpca), ScalerKind::Standard);
        assert_eq!(scaler_for(Technique::Ica), ScalerKind::Identity);
        assert_eq!(scaler_for(Technique::VarThresh), ScalerKind::MinMax);
        assert_eq!(scaler_for(Technique::Umap), ScalerKind::MinMax);
    }

    #[test]
    fn standardized_moments() {
        let m = random(100, 6, 3);
        let s = fit_scaler(ScalerKind::Standard, &m).unwrap();
        let t = s.apply(&m).unwrap().to_dmatrix();
        for j in 0..6 {
            let c = t.column(j);
            let mean = c.mean();
            let std = (c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 100.0).sqrt();
            assert!(mean.abs() < 1e-6, "mean {mean}");
            assert!((std - 1.0).abs() < 1e-6, "std {std}");
        }
    }

    #[test]
    fn inverse_recovers_input() {
        let m = random(40, 5, 9);
        for kind in [ScalerKind::Standard, ScalerKind::MinMax] {
            let s = fit_scaler(kind, &m).unwrap();
            let back = s.invert(&s.apply(&m).unwrap()).unwrap();
            for (a, b) in back.values().iter().zip(m.values()) {
                assert!(
                    (a - b).abs() <= 1e-6 * b.abs().max(1.0) * 10.0,
                    "{a} vs {b}"
                );
            }
        }
    }

    proptest! {
        #[test]
        fn minmax_fit_data_in_unit_box_and_rows_independent(seed in 0u64..500, n in 2usize..30) {
            let m = random(n, 4, seed);
            let s = fit_scaler(ScalerKind::MinMax, &m).unwrap();
            prop_assert_eq!(&s, &fit_scaler(ScalerKind::MinMax, &m).unwrap());
            let t = s.apply(&m).unwrap();
            prop_assert!(t.values().iter().all(|v| (0.0..=1.0).contains(v)));
            let k = n / 2;
            let a = m.select_rows(&(0..k).collect::<Vec<_>>()).unwrap();
            let b = m.select_rows(&(k..n).collect::<Vec<_>>()).unwrap();
            let joined = EmbeddingMatrix::concat(&[&s.apply(&a).unwrap(), &s.apply(&b).unwrap()]).unwrap();
            prop_assert_eq!(joined, t);
        }
    }
}
