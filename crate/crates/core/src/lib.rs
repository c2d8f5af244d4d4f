//! Binary and multiclass support vector machines whose training is phrased
//! as QUBO problems and delegated to pluggable samplers (simulated
//! annealing by default, an exact enumerator for oracle work, or a remote
//! job-based service), combined with a cover-tree locality framework that
//! covers large training sets with many small local models.
//!
//! The pieces compose bottom-up:
//!
//! - [`data`]: datasets, CSV ingestion, standardization, stratified folds,
//!   synthetic blobs
//! - [`kernel`]: Gaussian kernel and the median-distance width heuristic
//! - [`qubo`]: problem matrices, spin-model conversion, the two SVM
//!   encodings
//! - [`sampler`]: the sampler contract and its three backends
//! - [`qbsvm`] / [`qmsvm`]: decoding, averaging, bias selection, decision
//!   functions
//! - [`neighbors`]: cover tree and brute-force exact k-NN
//! - [`falk`]: center cover, local training, association, routing,
//!   grid-search model selection
//! - [`eval`]: metrics and the cross-validation driver

pub mod data;
pub mod error;
pub mod eval;
pub mod falk;
pub mod kernel;
pub mod matrix;
pub mod neighbors;
pub mod qbsvm;
pub mod qmsvm;
pub mod qubo;
pub mod sampler;
pub(crate) mod seeding;

pub use error::{Error, Result};
