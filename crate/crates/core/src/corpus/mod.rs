//! Embedding matrices, STS tasks and benchmark directories.
//!
//! Two on-disk formats live here:
//!
//! - `EMB1`: a 16-byte little-endian header followed by `rows × dim` `f32`
//!   values, row-major, with an optional `<name>.meta.json` sidecar carrying
//!   the row ids and free-form metadata.
//! - task TSV: `gold_score \t left_id \t right_id`, no header, one file per
//!   task, the file stem being the task id.

mod benchmark;
mod emb;

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use serde_json::Value;
use thiserror::Error;

pub use benchmark::{load_benchmark, save_benchmark, Benchmark, ScoredPair, StsTask, TaskRows};
pub use emb::{load_embeddings, save_embeddings, sidecar_path, EMB1_HEADER_LEN, EMB1_MAGIC};

/// The `EMB1` bytes [`save_embeddings`] writes for `m` (sidecar excluded).
pub fn encode_emb1(m: &EmbeddingMatrix) -> Vec<u8> {
    emb::encode(m)
}

/// The `.meta.json` sidecar bytes [`save_embeddings`] writes for `m`.
pub fn encode_sidecar(m: &EmbeddingMatrix) -> Vec<u8> {
    emb::encode_sidecar(m)
}

/// Parses `EMB1` bytes into `(rows, dim, values)`.
pub fn decode_emb1(bytes: &[u8]) -> Result<(usize, usize, Vec<f32>), CorpusError> {
    emb::decode(bytes)
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic bytes: expected \"EMB1\"")]
    BadMagic,
    #[error("unsupported {field} byte {value:#04x}")]
    UnsupportedFormat { field: &'static str, value: u8 },
    #[error("truncated payload: header promises {expected} bytes, found {found}")]
    TruncatedPayload { expected: u64, found: u64 },
    #[error("non-finite value at row {row}, column {col}")]
    NonFiniteValue { row: usize, col: usize },
    #[error("duplicate row id {0:?}")]
    DuplicateId(String),
    #[error("dimension must be at least 1")]
    ZeroDim,
    #[error("shape mismatch: {ids} ids, {values} values, dim {dim}")]
    ShapeMismatch {
        ids: usize,
        values: usize,
        dim: usize,
    },
    #[error("bad metadata sidecar {path}: {reason}")]
    BadSidecar { path: PathBuf, reason: String },
    #[error("missing side for task {task:?}: {detail}")]
    MissingSide { task: String, detail: String },
    #[error("task {task}: line {line} references unknown id {id:?}")]
    UnresolvedId {
        task: String,
        line: usize,
        id: String,
    },
    #[error("task {task}: line {line} has gold score {score} outside [0, 5]")]
    ScoreOutOfRange {
        task: String,
        line: usize,
        score: f64,
    },
    #[error("task {task}: line {line} is malformed: {reason}")]
    MalformedLine {
        task: String,
        line: usize,
        reason: String,
    },
}

/// Dense row-major `f32` matrix of sentence vectors with unique row ids.
#[derive(Debug, Clone)]
pub struct EmbeddingMatrix {
    ids: Vec<String>,
    dim: usize,
    values: Vec<f32>,
    meta: BTreeMap<String, Value>,
    index: OnceLock<HashMap<String, usize>>,
}

impl PartialEq for EmbeddingMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.ids == other.ids
            && self.meta == other.meta
            && self.values.len() == other.values.len()
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl EmbeddingMatrix {
    pub fn new(ids: Vec<String>, dim: usize, values: Vec<f32>) -> Result<Self, CorpusError> {
        if dim == 0 {
            return Err(CorpusError::ZeroDim);
        }
        if values.len() != ids.len() * dim {
            return Err(CorpusError::ShapeMismatch {
                ids: ids.len(),
                values: values.len(),
                dim,
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(CorpusError::NonFiniteValue {
                row: pos / dim,
                col: pos % dim,
            });
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(CorpusError::DuplicateId(id.clone()));
            }
        }
        let cell = OnceLock::new();
        let _ = cell.set(index);
        Ok(Self {
            ids,
            dim,
            values,
            meta: BTreeMap::new(),
            index: cell,
        })
    }

    /// Builds a matrix from `f64` rows, narrowing to `f32`.
    pub fn from_f64(ids: Vec<String>, dim: usize, values: &[f64]) -> Result<Self, CorpusError> {
        Self::new(ids, dim, values.iter().map(|&v| v as f32).collect())
    }

    /// Builds a matrix from a dense `f64` matrix (rows = sentences).
    pub fn from_dmatrix(ids: Vec<String>, m: &DMatrix<f64>) -> Result<Self, CorpusError> {
        let (rows, cols) = m.shape();
        let mut values = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                values.push(m[(r, c)] as f32);
            }
        }
        Self::new(ids, cols, values)
    }

    pub fn with_meta(mut self, meta: BTreeMap<String, Value>) -> Self {
        self.meta = meta;
        self.meta.remove("ids");
        self
    }

    pub fn set_meta(&mut self, key: impl Into<String>, value: Value) {
        let key = key.into();
        if key != "ids" {
            self.meta.insert(key, value);
        }
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_rows(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn meta(&self) -> &BTreeMap<String, Value> {
        &self.meta
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.values.chunks_exact(self.dim)
    }

    /// Row position of `id`, if present.
    pub fn row_of(&self, id: &str) -> Option<usize> {
        self.index
            .get_or_init(|| {
                self.ids
                    .iter()
                    .enumerate()
                    .map(|(i, id)| (id.clone(), i))
                    .collect()
            })
            .get(id)
            .copied()
    }

    /// Copies the selected rows (in the given order) into a new matrix.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self, CorpusError> {
        let mut ids = Vec::with_capacity(rows.len());
        let mut values = Vec::with_capacity(rows.len() * self.dim);
        for &r in rows {
            ids.push(self.ids[r].clone());
            values.extend_from_slice(self.row(r));
        }
        Ok(Self::new(ids, self.dim, values)?.with_meta(self.meta.clone()))
    }

    /// Row-wise concatenation. Ids must stay unique across the parts.
    pub fn concat(parts: &[&EmbeddingMatrix]) -> Result<Self, CorpusError> {
        let dim = parts.first().map(|p| p.dim).ok_or(CorpusError::ZeroDim)?;
        let mut ids = Vec::new();
        let mut values = Vec::new();
        for p in parts {
            if p.dim != dim {
                return Err(CorpusError::ShapeMismatch {
                    ids: p.n_rows(),
                    values: p.values.len(),
                    dim,
                });
            }
            ids.extend(p.ids.iter().cloned());
            values.extend_from_slice(&p.values);
        }
        Self::new(ids, dim, values)
    }

    /// Widens to a dense `f64` matrix (rows = sentences).
    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_iterator(
            self.n_rows(),
            self.dim,
            self.values.iter().map(|&v| f64::from(v)),
        )
    }
}
