//! Unsupervised dimensionality reduction behind one fit / transform / archive
//! contract.
//!
//! [`FittedReducer::fit`] fits the scaler bound to the technique
//! ([`crate::preprocess::scaler_for`]) and then the technique itself;
//! [`FittedReducer::transform`] replays both. The `fit_*` functions in the
//! submodules work on already-scaled data and return reducers with an
//! identity scaler.

mod archive;
pub mod ica;
pub mod ipca;
pub mod kpca;
pub mod umap;
pub mod varthresh;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusError, EmbeddingMatrix};
use crate::linalg::LinalgError;
use crate::preprocess::{fit_scaler, scaler_for, FittedScaler, ScalerError};

pub use archive::{load_reducer, save_reducer, RDX1_MAGIC, RDX1_VERSION};
pub use ica::{fit_ica, IcaModel};
pub use ipca::{fit_ipca, IncrementalPca, IpcaModel};
pub use kpca::{fit_kpca, KpcaModel};
pub use umap::{fit_umap, UmapModel};
pub use varthresh::{candidate_thresholds, fit_varthresh, VarThreshModel};

#[derive(Debug, Error)]
pub enum ReducerError {
    #[error("k = {k} exceeds the input dimension {d}")]
    KTooLarge { k: usize, d: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("batch size {batch} is smaller than k = {k}")]
    BatchTooSmall { batch: usize, k: usize },
    #[error("{rows} rows is not enough (need at least {needed})")]
    NotEnoughRows { rows: usize, needed: usize },
    #[error("n_neighbors = {n_neighbors} needs more than {rows} rows")]
    NeighborCountTooLarge { n_neighbors: usize, rows: usize },
    #[error("reducer fitted on {expected} columns applied to {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("variance threshold {threshold} removes every column")]
    AllColumnsRemoved { threshold: f64 },
    #[error("covariance is rank deficient in the top-{k} subspace")]
    RankDeficient { k: usize },
    #[error("no positive eigenvalues above the floor")]
    NoPositiveEigenvalues,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("missing parameter {0} for this technique")]
    MissingParameter(&'static str),
    #[error("eigensolver failed: {0}")]
    SolverNoConvergence(#[from] LinalgError),
    #[error("archive version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u8, expected: u8 },
    #[error("corrupt reducer archive: {0}")]
    CorruptArchive(String),
    #[error(transparent)]
    Scaler(#[from] ScalerError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Technique {
    Ipca,
    Ica,
    Kpca,
    VarThresh,
    Umap,
}

impl Technique {
    pub const ALL: [Technique; 5] = [
        Technique::Ipca,
        Technique::Ica,
        Technique::Kpca,
        Technique::VarThresh,
        Technique::Umap,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Technique::Ipca => "ipca",
            Technique::Ica => "ica",
            Technique::Kpca => "kpca",
            Technique::VarThresh => "varthresh",
            Technique::Umap => "umap",
        }
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            Technique::Ipca => 1,
            Technique::Ica => 2,
            Technique::Kpca => 3,
            Technique::VarThresh => 4,
            Technique::Umap => 5,
        }
    }
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Technique {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Technique::ALL
            .into_iter()
            .find(|t| t.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown technique {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    Poly,
    Rbf,
    Sigmoid,
    Cosine,
}

impl Kernel {
    pub const ALL: [Kernel; 4] = [Kernel::Poly, Kernel::Rbf, Kernel::Sigmoid, Kernel::Cosine];

    pub fn as_str(self) -> &'static str {
        match self {
            Kernel::Poly => "poly",
            Kernel::Rbf => "rbf",
            Kernel::Sigmoid => "sigmoid",
            Kernel::Cosine => "cosine",
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Kernel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "poly" | "polynomial" => Ok(Kernel::Poly),
            "rbf" => Ok(Kernel::Rbf),
            "sigmoid" => Ok(Kernel::Sigmoid),
            "cosine" => Ok(Kernel::Cosine),
            _ => Err(format!("unknown kernel {s:?}")),
        }
    }
}

/// Which of the eleven candidate variance thresholds to use: the minimum,
/// one of the nine deciles, or the maximum of the column variances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct VarSelector(u8);

impl VarSelector {
    pub const MIN: VarSelector = VarSelector(0);
    pub const MAX: VarSelector = VarSelector(10);

    pub fn decile(d: u8) -> Option<Self> {
        (1..=9).contains(&d).then_some(VarSelector(d))
    }

    /// Position in the candidate list (0 = min, 1..=9 deciles, 10 = max).
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn all() -> impl Iterator<Item = VarSelector> {
        (0..=10).map(VarSelector)
    }
}

impl fmt::Display for VarSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            0 => f.write_str("min"),
            10 => f.write_str("max"),
            d => write!(f, "decile{d}"),
        }
    }
}

impl FromStr for VarSelector {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "min" => Ok(Self::MIN),
            "max" => Ok(Self::MAX),
            _ => s
                .strip_prefix("decile")
                .and_then(|d| d.parse().ok())
                .and_then(Self::decile)
                .ok_or_else(|| format!("unknown variance selector {s:?} (min, decile1..9, max)")),
        }
    }
}

impl TryFrom<String> for VarSelector {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<VarSelector> for String {
    fn from(v: VarSelector) -> String {
        v.to_string()
    }
}

/// Everything needed to fit one reducer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducerSpec {
    pub technique: Technique,
    /// Target dimensions; ignored by the variance threshold.
    #[serde(default)]
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<Kernel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selector: Option<VarSelector>,
    #[serde(default = "defaults::n_neighbors")]
    pub n_neighbors: usize,
    #[serde(default = "defaults::min_dist")]
    pub min_dist: f64,
    #[serde(default = "defaults::n_epochs")]
    pub n_epochs: usize,
    #[serde(default)]
    pub seed: u64,
    /// IPCA batch size; `None` means `max(5k, 1024)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(default = "defaults::max_iter")]
    pub max_iter: usize,
    #[serde(default = "defaults::tol")]
    pub tol: f64,
}

pub(crate) mod defaults {
    pub fn n_neighbors() -> usize {
        15
    }
    pub fn min_dist() -> f64 {
        1.0
    }
    pub fn n_epochs() -> usize {
        200
    }
    pub fn max_iter() -> usize {
        320
    }
    pub fn tol() -> f64 {
        5e-4
    }
}

/// `n_neighbors` values swept for UMAP.
pub const UMAP_NEIGHBOR_GRID: [usize; 5] = [5, 10, 50, 100, 125];

impl ReducerSpec {
    fn base(technique: Technique, k: usize) -> Self {
        Self {
            technique,
            k,
            kernel: None,
            selector: None,
            n_neighbors: defaults::n_neighbors(),
            min_dist: defaults::min_dist(),
            n_epochs: defaults::n_epochs(),
            seed: 0,
            batch_size: None,
            max_iter: defaults::max_iter(),
            tol: defaults::tol(),
        }
    }

    pub fn ipca(k: usize) -> Self {
        Self::base(Technique::Ipca, k)
    }

    pub fn ica(k: usize) -> Self {
        Self::base(Technique::Ica, k)
    }

    pub fn kpca(k: usize, kernel: Kernel) -> Self {
        Self {
            kernel: Some(kernel),
            ..Self::base(Technique::Kpca, k)
        }
    }

    pub fn varthresh(selector: VarSelector) -> Self {
        Self {
            selector: Some(selector),
            ..Self::base(Technique::VarThresh, 0)
        }
    }

    pub fn umap(k: usize, n_neighbors: usize) -> Self {
        Self {
            n_neighbors,
            ..Self::base(Technique::Umap, k)
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    /// Short label, e.g. `ipca`, `kpca-sigmoid`, `umap-n10`, `varthresh-decile5`.
    pub fn label(&self) -> String {
        match self.technique {
            Technique::Kpca => format!("kpca-{}", self.kernel.map_or("?", |k| k.as_str())),
            Technique::Umap => format!("umap-n{}", self.n_neighbors),
            Technique::VarThresh => match self.selector {
                Some(s) => format!("varthresh-{s}"),
                None => "varthresh".into(),
            },
            t => t.as_str().into(),
        }
    }

    /// Checks parameter presence and ranges against the input dimension.
    pub fn validate(&self, d: usize) -> Result<(), ReducerError> {
        match self.technique {
            Technique::VarThresh => {
                if self.selector.is_none() {
                    return Err(ReducerError::MissingParameter("selector"));
                }
                return Ok(());
            }
            Technique::Kpca if self.kernel.is_none() => {
                return Err(ReducerError::MissingParameter("kernel"))
            }
            _ => {}
        }
        if self.k == 0 {
            return Err(ReducerError::ZeroK);
        }
        if self.k > d {
            return Err(ReducerError::KTooLarge { k: self.k, d });
        }
        if self.technique == Technique::Ipca {
            let batch = self
                .batch_size
                .unwrap_or_else(|| ipca::default_batch_size(self.k));
            if batch < self.k {
                return Err(ReducerError::BatchTooSmall { batch, k: self.k });
            }
        }
        Ok(())
    }
}

/// Technique-specific fitted parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Ipca(IpcaModel),
    Ica(IcaModel),
    Kpca(KpcaModel),
    VarThresh(VarThreshModel),
    Umap(UmapModel),
}

/// A fitted scaler + reduction pair.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedReducer {
    pub spec: ReducerSpec,
    pub scaler: FittedScaler,
    pub model: Model,
}

impl FittedReducer {
    /// Fits `scaler_for(technique)` on `m`, then the technique on the scaled rows.
    pub fn fit(spec: &ReducerSpec, m: &EmbeddingMatrix) -> Result<Self, ReducerError> {
        spec.validate(m.dim())?;
        let scaler = fit_scaler(scaler_for(spec.technique), m)?;
        let scaled = scaler.apply(m)?;
        let mut r = Self::fit_scaled(spec, &scaled)?;
        r.scaler = scaler;
        Ok(r)
    }

    /// Fits the technique on already-scaled rows; the scaler is identity.
    pub fn fit_scaled(spec: &ReducerSpec, m: &EmbeddingMatrix) -> Result<Self, ReducerError> {
        match spec.technique {
            Technique::Ipca => fit_ipca(m, spec.k, spec.batch_size),
            Technique::Ica => fit_ica(m, spec.k, spec.max_iter, spec.tol, spec.seed),
            Technique::Kpca => fit_kpca(
                m,
                spec.k,
                spec.kernel
                    .ok_or(ReducerError::MissingParameter("kernel"))?,
                spec.seed,
            ),
            Technique::VarThresh => fit_varthresh(
                m,
                spec.selector
                    .ok_or(ReducerError::MissingParameter("selector"))?,
            ),
            Technique::Umap => fit_umap(m, spec),
        }
        .map(|mut r| {
            r.spec = spec.clone();
            r
        })
    }

    pub(crate) fn from_model(spec: ReducerSpec, dim: usize, model: Model) -> Self {
        Self {
            spec,
            scaler: FittedScaler::Identity { dim },
            model,
        }
    }

    pub fn technique(&self) -> Technique {
        self.spec.technique
    }

    /// Columns expected on input.
    pub fn input_dim(&self) -> usize {
        self.scaler.dim()
    }

    /// Columns produced on output (emergent for the variance threshold, and
    /// possibly below `k` for kernel PCA once non-positive eigenpairs drop).
    pub fn output_dim(&self) -> usize {
        match &self.model {
            Model::Ipca(m) => m.components.nrows(),
            Model::Ica(m) => m.components.nrows(),
            Model::Kpca(m) => m.eigenvalues.len(),
            Model::VarThresh(m) => m.selected.len(),
            Model::Umap(m) => m.k,
        }
    }

    /// Scales `m` with the stored scaler and applies the reduction.
    pub fn transform(&self, m: &EmbeddingMatrix) -> Result<EmbeddingMatrix, ReducerError> {
        if m.dim() != self.input_dim() {
            return Err(ReducerError::DimMismatch {
                expected: self.input_dim(),
                got: m.dim(),
            });
        }
        let scaled = self.scaler.apply(m)?;
        self.transform_scaled(&scaled)
    }

    /// Applies the reduction to rows already in the fitted scale.
    pub fn transform_scaled(&self, m: &EmbeddingMatrix) -> Result<EmbeddingMatrix, ReducerError> {
        if m.dim() != self.input_dim() {
            return Err(ReducerError::DimMismatch {
                expected: self.input_dim(),
                got: m.dim(),
            });
        }
        let values: Vec<f64> = match &self.model {
            Model::Ipca(model) => model.transform(m),
            Model::Ica(model) => model.transform(m),
            Model::Kpca(model) => model.transform(m),
            Model::VarThresh(model) => model.transform(m),
            Model::Umap(model) => model.transform(m),
        };
        Ok(
            EmbeddingMatrix::from_f64(m.ids().to_vec(), self.output_dim(), &values)?
                .with_meta(m.meta().clone()),
        )
    }
}

pub fn transform(r: &FittedReducer, m: &EmbeddingMatrix) -> Result<EmbeddingMatrix, ReducerError> {
    r.transform(m)
}

pub(crate) fn check_k(k: usize, d: usize) -> Result<(), ReducerError> {
    if k == 0 {
        return Err(ReducerError::ZeroK);
    }
    if k > d {
        return Err(ReducerError::KTooLarge { k, d });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selector_strings() {
        assert_eq!(VarSelector::MIN.to_string(), "min");
        assert_eq!("decile5".parse::<VarSelector>().unwrap().index(), 5);
        assert!("decile0".parse::<VarSelector>().is_err());
        assert_eq!(VarSelector::all().count(), 11);
    }

    #[test]
    fn validate_flags() {
        assert!(matches!(
            ReducerSpec::ica(2000).validate(768),
            Err(ReducerError::KTooLarge { k: 2000, d: 768 })
        ));
        let mut s = ReducerSpec::kpca(4, Kernel::Rbf);
        s.kernel = None;
        assert!(matches!(
            s.validate(8),
            Err(ReducerError::MissingParameter("kernel"))
        ));
        let mut s = ReducerSpec::ipca(8);
        s.batch_size = Some(4);
        assert!(matches!(
            s.validate(16),
            Err(ReducerError::BatchTooSmall { .. })
        ));
    }

    #[test]
    fn labels() {
        assert_eq!(
            ReducerSpec::kpca(3, Kernel::Sigmoid).label(),
            "kpca-sigmoid"
        );
        assert_eq!(ReducerSpec::umap(2, 10).label(), "umap-n10");
        assert_eq!(
            ReducerSpec::varthresh(VarSelector::MAX).label(),
            "varthresh-max"
        );
    }

    #[test]
    fn spec_json_defaults() {
        let s: ReducerSpec = serde_json::from_str(r#"{"technique":"ica","k":3}"#).unwrap();
        assert_eq!(s.max_iter, 320);
        assert_eq!(s.tol, 5e-4);
        assert_eq!(s.seed, 0);
        assert_eq!(s.min_dist, 1.0);
    }
}
