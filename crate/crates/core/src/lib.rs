//! Dimensionality reduction and semantic-textual-similarity evaluation for
//! pre-computed sentence embeddings.
//!
//! The crate is organized bottom-up:
//!
//! - [`corpus`]: the `EMB1` embedding file format, task TSVs and benchmark loading.
//! - [`preprocess`]: standard / min-max scalers and the technique → scaler binding.
//! - [`linalg`]: dense helpers and a Lanczos partial eigensolver.
//! - [`reducers`]: incremental PCA, FastICA, kernel PCA, variance threshold and UMAP,
//!   all behind one fit / transform / archive contract.
//! - [`stats`]: cosine similarity, Spearman, Fisher-z averaging, paired t-test,
//!   reduction bookkeeping and retention analysis.
//! - [`pipeline`]: stratified subsampling, baselines, sweeps, visualization export.
//! - [`cli`]: the `embedkit` command-line surface.
//!
//! See `examples/` in this crate for one runnable program per capability.

pub mod cli;
pub mod corpus;
pub mod linalg;
pub mod pipeline;
pub mod preprocess;
pub mod reducers;
pub mod stats;

pub use corpus::{Benchmark, EmbeddingMatrix, StsTask};
pub use preprocess::{FittedScaler, ScalerKind};
pub use reducers::{FittedReducer, Kernel, ReducerSpec, Technique};
pub use stats::{AggregateScore, EvalReport};
