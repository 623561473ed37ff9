use crate::error::{cache_err, Result};
use crate::tensor::{Scalar, Tensor};

#[derive(Debug)]
pub struct ReluCache {
    active: Vec<bool>,
    shape: Vec<usize>,
}

#[derive(Debug)]
pub struct SigmoidCache<S> {
    y: Tensor<S>,
}

pub fn relu<S: Scalar>(x: &Tensor<S>) -> (Tensor<S>, ReluCache) {
    let active = x.data().iter().map(|&v| v > S::zero()).collect();
    let y = x.map(|v| if v > S::zero() { v } else { S::zero() });
    (y, ReluCache { active, shape: x.shape().to_vec() })
}

pub fn relu_backward<S: Scalar>(cache: ReluCache, grad_y: &Tensor<S>) -> Result<Tensor<S>> {
    if grad_y.shape() != cache.shape.as_slice() {
        return Err(cache_err("relu", format!("grad {:?} vs input {:?}", grad_y.shape(), cache.shape)));
    }
    let data = grad_y.data().iter().zip(&cache.active).map(|(&g, &a)| if a { g } else { S::zero() }).collect();
    Ok(Tensor::new(cache.shape, data)?)
}

/// Logistic function, evaluated without overflow for large `|x|`.
pub fn sigmoid_scalar<S: Scalar>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}

pub fn sigmoid<S: Scalar>(x: &Tensor<S>) -> (Tensor<S>, SigmoidCache<S>) {
    let y = x.map(sigmoid_scalar);
    (y.clone(), SigmoidCache { y })
}

pub fn sigmoid_backward<S: Scalar>(cache: SigmoidCache<S>, grad_y: &Tensor<S>) -> Result<Tensor<S>> {
    if grad_y.shape() != cache.y.shape() {
        return Err(cache_err("sigmoid", format!("grad {:?} vs output {:?}", grad_y.shape(), cache.y.shape())));
    }
    let data = grad_y.data().iter().zip(cache.y.data()).map(|(&g, &y)| g * y * (S::one() - y)).collect();
    Ok(Tensor::new(cache.y.shape().to_vec(), data)?)
}
