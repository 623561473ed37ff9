//! CosRec: sequential recommendation by 2D convolution over pairwise item
//! encodings.
//!
//! The crate is framework-free. [`tensor`] supplies a dense tensor type,
//! [`nn`] the layers with hand-derived gradients, [`model`] assembles them
//! into the recommender, [`data`] turns interaction logs into training
//! windows, [`optim`] holds Adam, and [`metrics`] computes the ranking
//! metrics. [`train`](mod@train) ties these into an epoch loop and [`checkpoint`]
//! persists trained models.

pub mod baselines;
pub mod checkpoint;
pub mod data;
mod error;
pub mod export;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod optim;
pub mod tensor;
pub mod train;

#[cfg(test)]
pub(crate) mod testutil;

pub use baselines::{PopRec, Scorer};
pub use checkpoint::Checkpoint;
pub use data::{Dataset, NegativeSampler, RawInteraction, TrainWindow};
pub use error::{Error, Result};
pub use metrics::{evaluate, MetricsReport, RankedList};
pub use model::{CosRecConfig, CosRecModel, ScoreVector, Variant};
pub use nn::Mode;
pub use optim::{Adam, AdamConfig};
pub use tensor::{Scalar, Tensor};
pub use train::{train, DatasetKind, EpochRecord, RunConfig};
