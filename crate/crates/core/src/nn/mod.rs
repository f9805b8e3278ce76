//! Small convolutional inference engine.
//!
//! Models are loaded once from a `.vnn` file (see [`format`]) and are
//! immutable afterwards; [`Model::forward`] allocates only per-call scratch
//! tensors, so one model can be shared across threads.

pub mod format;
mod forward;
mod layer;
mod model;
pub mod zoo;

pub use format::{blob_float_count, decode_model, encode_model, load_model, save_model};
pub use forward::{apply, run_layers, softmax};
pub use layer::*;
pub use model::*;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("BadMagic: not a VNN1 model file")]
    BadMagic,
    #[error("SchemaError: {0}")]
    Schema(String),
    #[error("ShapeError: {0}")]
    Shape(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
