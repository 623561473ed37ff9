use thiserror::Error;

use crate::data::DataError;
use crate::tensor::TensorError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("{layer}: {msg}")]
    Layer { layer: &'static str, msg: String },
    #[error("stale or mismatched cache in {layer}: {msg}")]
    Cache { layer: &'static str, msg: String },
    #[error("batch normalization in train mode needs at least 2 samples, got {0}")]
    BatchTooSmall(usize),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{kind} id {id} out of range (limit {limit})")]
    IdOutOfRange { kind: &'static str, id: usize, limit: usize },
    #[error("negative sample {item} equals a target of the same window")]
    NegativeIsTarget { item: u32 },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("optimizer: {0}")]
    Optimizer(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn layer_err(layer: &'static str, msg: impl Into<String>) -> Error {
    Error::Layer { layer, msg: msg.into() }
}

pub(crate) fn cache_err(layer: &'static str, msg: impl Into<String>) -> Error {
    Error::Cache { layer, msg: msg.into() }
}
