//! Open-vocabulary segmentation on a small scale: a dense image
//! encoder whose per-pixel embeddings are correlated with frozen label
//! embeddings, a label-equivariant regularization head, training, and
//! evaluation tooling.
//!
//! Every label set is chosen at inference time; swapping, adding or
//! reordering labels needs no retraining.

pub mod data;
pub mod embeddings;
mod error;
pub mod eval;
pub mod kv;
pub mod model;
pub mod tensor_ops;
pub mod training;
pub mod util;

pub use error::{Error, Result};
