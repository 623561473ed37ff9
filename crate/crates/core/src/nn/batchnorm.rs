use super::Mode;
use crate::error::{cache_err, layer_err, Error, Result};
use crate::tensor::{Scalar, Tensor};

pub const DEFAULT_EPSILON: f64 = 1e-5;
pub const DEFAULT_MOMENTUM: f64 = 0.1;

/// Per-channel batch normalization over a `[B, C, ...]` tensor.
///
/// Statistics are taken over the batch axis and every axis after the channel
/// axis. Running statistics follow an exponential moving average with the
/// unbiased batch variance.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm<S = f32> {
    pub scale: Tensor<S>,
    pub shift: Tensor<S>,
    pub running_mean: Tensor<S>,
    pub running_var: Tensor<S>,
    pub epsilon: S,
    pub momentum: S,
}

#[derive(Debug)]
pub struct BatchNormCache<S> {
    x_hat: Vec<S>,
    inv_std: Vec<S>,
    shape: Vec<usize>,
    mode: Mode,
}

#[derive(Debug, Clone)]
pub struct BatchNormGrads<S> {
    pub scale: Tensor<S>,
    pub shift: Tensor<S>,
}

impl<S: Scalar> BatchNorm<S> {
    pub fn new(channels: usize) -> Self {
        Self {
            scale: Tensor::full([channels], S::one()),
            shift: Tensor::zeros([channels]),
            running_mean: Tensor::zeros([channels]),
            running_var: Tensor::full([channels], S::one()),
            epsilon: S::lit(DEFAULT_EPSILON),
            momentum: S::lit(DEFAULT_MOMENTUM),
        }
    }

    pub fn channels(&self) -> usize {
        self.scale.len()
    }

    /// Train mode normalizes with batch statistics and updates the running
    /// statistics; eval mode reads the running statistics only.
    pub fn forward(&mut self, x: &Tensor<S>, mode: Mode) -> Result<(Tensor<S>, BatchNormCache<S>)> {
        let (b, c, inner) = self.dims(x)?;
        match mode {
            Mode::Eval => self.normalize_eval(x, b, c, inner),
            Mode::Train => {
                if b < 2 {
                    return Err(Error::BatchTooSmall(b));
                }
                let n = b * inner;
                let nf = S::from_usize_lossy(n);
                let xd = x.data();
                let mut mean = vec![S::zero(); c];
                let mut var = vec![S::zero(); c];
                for ci in 0..c {
                    let mut s = S::zero();
                    for bi in 0..b {
                        s += xd[(bi * c + ci) * inner..][..inner].iter().copied().sum::<S>();
                    }
                    let m = s / nf;
                    let mut sq = S::zero();
                    for bi in 0..b {
                        for &v in &xd[(bi * c + ci) * inner..][..inner] {
                            sq += (v - m) * (v - m);
                        }
                    }
                    mean[ci] = m;
                    var[ci] = sq / nf;
                }
                let inv_std: Vec<S> = var.iter().map(|&v| (v + self.epsilon).sqrt().recip()).collect();

                let mut x_hat = vec![S::zero(); xd.len()];
                let mut y = vec![S::zero(); xd.len()];
                for (i, (&v, (h, out))) in xd.iter().zip(x_hat.iter_mut().zip(y.iter_mut())).enumerate() {
                    let ci = (i / inner) % c;
                    *h = (v - mean[ci]) * inv_std[ci];
                    *out = self.scale.data()[ci] * *h + self.shift.data()[ci];
                }

                let m = self.momentum;
                let unbias = nf / S::from_usize_lossy(n - 1);
                for ci in 0..c {
                    let rm = &mut self.running_mean.data_mut()[ci];
                    *rm = (S::one() - m) * *rm + m * mean[ci];
                    let rv = &mut self.running_var.data_mut()[ci];
                    *rv = (S::one() - m) * *rv + m * var[ci] * unbias;
                }

                let cache = BatchNormCache { x_hat, inv_std, shape: x.shape().to_vec(), mode };
                Ok((Tensor::new(x.shape().to_vec(), y)?, cache))
            }
        }
    }

    /// Eval-mode forward without touching running statistics.
    pub fn infer(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        let (b, c, inner) = self.dims(x)?;
        Ok(self.normalize_eval(x, b, c, inner)?.0)
    }

    pub fn backward(&self, cache: BatchNormCache<S>, grad_y: &Tensor<S>) -> Result<(Tensor<S>, BatchNormGrads<S>)> {
        if grad_y.shape() != cache.shape.as_slice() {
            return Err(cache_err(
                "batchnorm",
                format!("grad shape {:?} but forward saw {:?}", grad_y.shape(), cache.shape),
            ));
        }
        let c = self.channels();
        if cache.inv_std.len() != c {
            return Err(cache_err("batchnorm", "cache belongs to a different layer"));
        }
        let b = cache.shape[0];
        let inner: usize = cache.shape[2..].iter().product();
        let gy = grad_y.data();
        let scale = self.scale.data();

        let mut g_scale = vec![S::zero(); c];
        let mut g_shift = vec![S::zero(); c];
        for (i, (&g, &h)) in gy.iter().zip(&cache.x_hat).enumerate() {
            let ci = (i / inner) % c;
            g_scale[ci] += g * h;
            g_shift[ci] += g;
        }

        let gx: Vec<S> = match cache.mode {
            Mode::Eval => gy
                .iter()
                .enumerate()
                .map(|(i, &g)| {
                    let ci = (i / inner) % c;
                    g * scale[ci] * cache.inv_std[ci]
                })
                .collect(),
            Mode::Train => {
                // dx = inv_std / n * (n * dxh - sum(dxh) - x_hat * sum(dxh * x_hat)),
                // where dxh = dy * scale; both sums reduce to g_shift and g_scale.
                let nf = S::from_usize_lossy(b * inner);
                gy.iter()
                    .zip(&cache.x_hat)
                    .enumerate()
                    .map(|(i, (&g, &h))| {
                        let ci = (i / inner) % c;
                        let k = scale[ci] * cache.inv_std[ci] / nf;
                        k * (nf * g - g_shift[ci] - h * g_scale[ci])
                    })
                    .collect()
            }
        };

        Ok((
            Tensor::new(cache.shape, gx)?,
            BatchNormGrads { scale: Tensor::new([c], g_scale)?, shift: Tensor::new([c], g_shift)? },
        ))
    }

    fn normalize_eval(
        &self,
        x: &Tensor<S>,
        _b: usize,
        c: usize,
        inner: usize,
    ) -> Result<(Tensor<S>, BatchNormCache<S>)> {
        let inv_std: Vec<S> = self.running_var.data().iter().map(|&v| (v + self.epsilon).sqrt().recip()).collect();
        let mean = self.running_mean.data();
        let mut x_hat = Vec::with_capacity(x.len());
        let mut y = Vec::with_capacity(x.len());
        for (i, &v) in x.data().iter().enumerate() {
            let ci = (i / inner) % c;
            let h = (v - mean[ci]) * inv_std[ci];
            x_hat.push(h);
            y.push(self.scale.data()[ci] * h + self.shift.data()[ci]);
        }
        let cache = BatchNormCache { x_hat, inv_std, shape: x.shape().to_vec(), mode: Mode::Eval };
        Ok((Tensor::new(x.shape().to_vec(), y)?, cache))
    }

    fn dims(&self, x: &Tensor<S>) -> Result<(usize, usize, usize)> {
        let s = x.shape();
        if s.len() < 2 || s[1] != self.channels() {
            return Err(layer_err(
                "batchnorm",
                format!("input {s:?} does not have {} channels on axis 1", self.channels()),
            ));
        }
        Ok((s[0], s[1], s[2..].iter().product()))
    }
}
