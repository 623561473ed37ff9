use rand::Rng;

use super::Mode;
use crate::error::{cache_err, Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Inverted dropout: surviving activations are divided by the keep
/// probability, so eval mode is the identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dropout {
    keep: f64,
}

#[derive(Debug)]
pub struct DropoutCache<S> {
    /// Per-element multiplier (0 or 1/keep); `None` when nothing was dropped.
    mask: Option<Vec<S>>,
    shape: Vec<usize>,
}

impl Dropout {
    /// `rate` is the drop probability, in `[0, 1)`.
    pub fn new(rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
        }
        Ok(Self { keep: 1.0 - rate })
    }

    pub fn keep_probability(&self) -> f64 {
        self.keep
    }

    pub fn forward<S: Scalar, R: Rng + ?Sized>(
        &self,
        x: &Tensor<S>,
        mode: Mode,
        rng: &mut R,
    ) -> (Tensor<S>, DropoutCache<S>) {
        if mode == Mode::Eval || self.keep >= 1.0 {
            return (x.clone(), DropoutCache { mask: None, shape: x.shape().to_vec() });
        }
        let scale = S::lit(1.0 / self.keep);
        let mask: Vec<S> =
            (0..x.len()).map(|_| if rng.random::<f64>() < self.keep { scale } else { S::zero() }).collect();
        Self::apply_mask(x, mask)
    }

    /// Applies a fixed multiplier mask (entries 0 or `1/keep`).
    pub fn apply_mask<S: Scalar>(x: &Tensor<S>, mask: Vec<S>) -> (Tensor<S>, DropoutCache<S>) {
        assert_eq!(mask.len(), x.len(), "dropout mask length");
        let data = x.data().iter().zip(&mask).map(|(&v, &m)| v * m).collect();
        (
            Tensor::new(x.shape().to_vec(), data).expect("same shape"),
            DropoutCache { mask: Some(mask), shape: x.shape().to_vec() },
        )
    }

    pub fn backward<S: Scalar>(cache: DropoutCache<S>, grad_y: &Tensor<S>) -> Result<Tensor<S>> {
        if grad_y.shape() != cache.shape.as_slice() {
            return Err(cache_err("dropout", format!("grad {:?} vs input {:?}", grad_y.shape(), cache.shape)));
        }
        Ok(match cache.mask {
            None => grad_y.clone(),
            Some(mask) => {
                let data = grad_y.data().iter().zip(&mask).map(|(&g, &m)| g * m).collect();
                Tensor::new(cache.shape, data)?
            }
        })
    }
}
