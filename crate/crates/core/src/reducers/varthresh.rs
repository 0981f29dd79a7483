//! Variance-threshold feature selection.

use super::{FittedReducer, Model, ReducerError, ReducerSpec, VarSelector};
use crate::corpus::EmbeddingMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct VarThreshModel {
    /// Population variance per input column.
    pub variances: Vec<f64>,
    pub threshold: f64,
    /// `{j : variances[j] > threshold}`, ascending.
    pub selected: Vec<usize>,
}

impl VarThreshModel {
    pub(crate) fn transform(&self, m: &EmbeddingMatrix) -> Vec<f64> {
        let mut out = Vec::with_capacity(m.n_rows() * self.selected.len());
        for row in m.rows() {
            out.extend(self.selected.iter().map(|&j| f64::from(row[j])));
        }
        out
    }
}

pub fn column_variances(m: &EmbeddingMatrix) -> Vec<f64> {
    let n = m.n_rows() as f64;
    let d = m.dim();
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
            *acc += (f64::from(v) - mu).powi(2);
        }
    }
    var.into_iter().map(|v| v / n).collect()
}

/// `[min, decile 1, …, decile 9, max]` of `variances`, deciles by linear
/// interpolation between order statistics.
pub fn candidate_thresholds(variances: &[f64]) -> [f64; 11] {
    let mut sorted = variances.to_vec();
    sorted.sort_by(f64::total_cmp);
    let last = sorted.len() - 1;
    let mut out = [0.0; 11];
    for (q, slot) in out.iter_mut().enumerate() {
        let pos = q as f64 / 10.0 * last as f64;
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(last);
        let frac = pos - lo as f64;
        *slot = sorted[lo] + frac * (sorted[hi] - sorted[lo]);
    }
    out[0] = sorted[0];
    out[10] = sorted[last];
    out
}

/// Keeps columns whose variance is strictly above the selected threshold.
pub fn fit_varthresh(
    m: &EmbeddingMatrix,
    selector: VarSelector,
) -> Result<FittedReducer, ReducerError> {
    if m.n_rows() < 2 {
        return Err(ReducerError::NotEnoughRows {
            rows: m.n_rows(),
            needed: 2,
        });
    }
    let variances = column_variances(m);
    let threshold = candidate_thresholds(&variances)[selector.index()];
    let selected: Vec<usize> = (0..variances.len())
        .filter(|&j| variances[j] > threshold)
        .collect();
    if selected.is_empty() {
        return Err(ReducerError::AllColumnsRemoved { threshold });
    }
    let mut spec = ReducerSpec::varthresh(selector);
    spec.k = selected.len();
    Ok(FittedReducer::from_model(
        spec,
        m.dim(),
        Model::VarThresh(VarThreshModel {
            variances,
            threshold,
            selected,
        }),
    ))
}
