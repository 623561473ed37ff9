//! Layers with forward passes and hand-derived backward passes.
//!
//! Every `forward` that participates in training returns a cache alongside
//! its output. The matching `backward` takes that cache by value, so each
//! cache feeds exactly one backward call.

mod activation;
mod batchnorm;
mod conv;
mod dense;
mod dropout;

pub use activation::{relu, relu_backward, sigmoid, sigmoid_backward, sigmoid_scalar, ReluCache, SigmoidCache};
pub use batchnorm::{BatchNorm, BatchNormCache, BatchNormGrads};
pub use conv::{Conv2d, Conv2dCache, Conv2dGrads};
pub use dense::{Dense, DenseCache, DenseGrads, GatherCache};
pub use dropout::{Dropout, DropoutCache};

/// Whether a forward pass is part of training or inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    Train,
    #[default]
    Eval,
}
