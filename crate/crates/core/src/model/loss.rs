use crate::error::{layer_err, Result};
use crate::nn::sigmoid_scalar;
use crate::tensor::{Scalar, Tensor};

/// `ln(1 + e^x)` without overflow.
pub fn softplus<S: Scalar>(x: S) -> S {
    x.max(S::zero()) + (-x.abs()).exp().ln_1p()
}

/// Binary cross-entropy over `[B, positives + negatives]` logits where the
/// first `positives` columns of each row are targets and the rest sampled
/// negatives.
///
/// Returns the loss summed over every column and divided by `B`, and its
/// gradient with respect to the logits.
pub fn bce_with_negatives<S: Scalar>(logits: &Tensor<S>, positives: usize) -> Result<(S, Tensor<S>)> {
    if logits.rank() != 2 || logits.dim(1) < positives {
        return Err(layer_err("bce", format!("logits {:?} with {positives} positives", logits.shape())));
    }
    let (batch, width) = (logits.dim(0), logits.dim(1));
    let inv_b = S::one() / S::from_usize_lossy(batch.max(1));
    let mut total = S::zero();
    let mut grad = Vec::with_capacity(logits.len());
    for row in logits.data().chunks_exact(width.max(1)).take(batch) {
        for (j, &y) in row.iter().enumerate() {
            if j < positives {
                // -ln σ(y) = softplus(-y)
                total += softplus(-y);
                grad.push((sigmoid_scalar(y) - S::one()) * inv_b);
            } else {
                // -ln(1 - σ(y)) = softplus(y)
                total += softplus(y);
                grad.push(sigmoid_scalar(y) * inv_b);
            }
        }
    }
    Ok((total * inv_b, Tensor::new([batch, width], grad)?))
}
