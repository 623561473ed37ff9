use crate::error::{cache_err, layer_err, Result};
use crate::tensor::{gemm, Scalar, Tensor};

/// Stride-1, unpadded 2D cross-correlation.
///
/// Implemented as patch gathering followed by a single matrix product over
/// the whole batch: each output position becomes one row of `in_ch * k * k`
/// input values.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d<S = f32> {
    /// `[out_ch, in_ch, k, k]`
    pub weight: Tensor<S>,
    /// `[out_ch]`; absent when a batch normalization follows.
    pub bias: Option<Tensor<S>>,
}

#[derive(Debug)]
pub struct Conv2dCache<S> {
    cols: Vec<S>,
    input_shape: [usize; 4],
    output_shape: [usize; 4],
}

#[derive(Debug, Clone)]
pub struct Conv2dGrads<S> {
    pub weight: Tensor<S>,
    pub bias: Option<Tensor<S>>,
}

impl<S: Scalar> Conv2d<S> {
    pub fn new(in_ch: usize, out_ch: usize, kernel: usize, with_bias: bool) -> Result<Self> {
        if in_ch == 0 || out_ch == 0 || kernel == 0 {
            return Err(layer_err("conv2d", "channels and kernel must be positive"));
        }
        Ok(Self {
            weight: Tensor::zeros([out_ch, in_ch, kernel, kernel]),
            bias: with_bias.then(|| Tensor::zeros([out_ch])),
        })
    }

    pub fn from_parts(weight: Tensor<S>, bias: Option<Tensor<S>>) -> Result<Self> {
        let s = weight.shape();
        if s.len() != 4 || s[2] != s[3] || s.contains(&0) {
            return Err(layer_err("conv2d", format!("bad weight shape {s:?}")));
        }
        if let Some(b) = &bias {
            if b.shape() != [s[0]] {
                return Err(layer_err("conv2d", format!("bias shape {:?} for {} outputs", b.shape(), s[0])));
            }
        }
        Ok(Self { weight, bias })
    }

    pub fn out_channels(&self) -> usize {
        self.weight.dim(0)
    }

    pub fn in_channels(&self) -> usize {
        self.weight.dim(1)
    }

    pub fn kernel(&self) -> usize {
        self.weight.dim(2)
    }

    pub fn forward(&self, x: &Tensor<S>) -> Result<(Tensor<S>, Conv2dCache<S>)> {
        let [b, c, h, w] = self.check_input(x)?;
        let k = self.kernel();
        let (ho, wo) = (h - k + 1, w - k + 1);
        let out_ch = self.out_channels();
        let patch = c * k * k;
        let positions = b * ho * wo;

        let mut cols = vec![S::zero(); positions * patch];
        let xd = x.data();
        for bi in 0..b {
            for oh in 0..ho {
                for ow in 0..wo {
                    let row = &mut cols[((bi * ho + oh) * wo + ow) * patch..][..patch];
                    let mut p = 0;
                    for ci in 0..c {
                        let plane = &xd[(bi * c + ci) * h * w..];
                        for ki in 0..k {
                            let src = &plane[(oh + ki) * w + ow..][..k];
                            row[p..p + k].copy_from_slice(src);
                            p += k;
                        }
                    }
                }
            }
        }

        // [positions, out_ch] = cols [positions, patch] x weight^T
        let mut prod = vec![S::zero(); positions * out_ch];
        gemm(false, true, positions, out_ch, patch, S::one(), &cols, self.weight.data(), S::zero(), &mut prod);

        let spatial = ho * wo;
        let mut y = vec![S::zero(); b * out_ch * spatial];
        for bi in 0..b {
            for o in 0..out_ch {
                let bias = self.bias.as_ref().map_or(S::zero(), |t| t.data()[o]);
                let dst = &mut y[(bi * out_ch + o) * spatial..][..spatial];
                for (s, v) in dst.iter_mut().enumerate() {
                    *v = prod[(bi * spatial + s) * out_ch + o] + bias;
                }
            }
        }
        let output_shape = [b, out_ch, ho, wo];
        let cache = Conv2dCache { cols, input_shape: [b, c, h, w], output_shape };
        Ok((Tensor::new(output_shape, y)?, cache))
    }

    pub fn infer(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        Ok(self.forward(x)?.0)
    }

    /// Returns the input gradient and the parameter gradients.
    pub fn backward(&self, cache: Conv2dCache<S>, grad_y: &Tensor<S>) -> Result<(Tensor<S>, Conv2dGrads<S>)> {
        if grad_y.shape() != cache.output_shape {
            return Err(cache_err(
                "conv2d",
                format!("grad shape {:?} but forward produced {:?}", grad_y.shape(), cache.output_shape),
            ));
        }
        let [b, c, h, w] = cache.input_shape;
        let k = self.kernel();
        let out_ch = self.out_channels();
        if cache.output_shape[1] != out_ch || c != self.in_channels() {
            return Err(cache_err("conv2d", "cache belongs to a different layer"));
        }
        let [_, _, ho, wo] = cache.output_shape;
        let spatial = ho * wo;
        let patch = c * k * k;
        let positions = b * spatial;

        let gy = grad_y.data();
        let mut gprod = vec![S::zero(); positions * out_ch];
        for bi in 0..b {
            for o in 0..out_ch {
                let src = &gy[(bi * out_ch + o) * spatial..][..spatial];
                for (s, &g) in src.iter().enumerate() {
                    gprod[(bi * spatial + s) * out_ch + o] = g;
                }
            }
        }

        let mut gw = vec![S::zero(); out_ch * patch];
        gemm(true, false, out_ch, patch, positions, S::one(), &gprod, &cache.cols, S::zero(), &mut gw);

        let gb = self.bias.as_ref().map(|_| {
            let mut acc = vec![S::zero(); out_ch];
            for bi in 0..b {
                for (o, a) in acc.iter_mut().enumerate() {
                    *a += gy[(bi * out_ch + o) * spatial..][..spatial].iter().copied().sum::<S>();
                }
            }
            Tensor::new([out_ch], acc).expect("bias grad shape")
        });

        let mut gcols = cache.cols;
        gemm(false, false, positions, patch, out_ch, S::one(), &gprod, self.weight.data(), S::zero(), &mut gcols);

        let mut gx = vec![S::zero(); b * c * h * w];
        for bi in 0..b {
            for oh in 0..ho {
                for ow in 0..wo {
                    let row = &gcols[((bi * ho + oh) * wo + ow) * patch..][..patch];
                    let mut p = 0;
                    for ci in 0..c {
                        let base = (bi * c + ci) * h * w;
                        for ki in 0..k {
                            let dst = &mut gx[base + (oh + ki) * w + ow..][..k];
                            for (d, &g) in dst.iter_mut().zip(&row[p..p + k]) {
                                *d += g;
                            }
                            p += k;
                        }
                    }
                }
            }
        }

        Ok((
            Tensor::new([b, c, h, w], gx)?,
            Conv2dGrads { weight: Tensor::new(self.weight.shape().to_vec(), gw)?, bias: gb },
        ))
    }

    fn check_input(&self, x: &Tensor<S>) -> Result<[usize; 4]> {
        let s = x.shape();
        if s.len() != 4 {
            return Err(layer_err("conv2d", format!("expected [B, C, H, W] input, got {s:?}")));
        }
        let k = self.kernel();
        if s[1] != self.in_channels() {
            return Err(layer_err(
                "conv2d",
                format!("input has {} channels, layer expects {}", s[1], self.in_channels()),
            ));
        }
        if s[2] < k || s[3] < k {
            return Err(layer_err("conv2d", format!("spatial extent {}x{} smaller than kernel {k}", s[2], s[3])));
        }
        Ok([s[0], s[1], s[2], s[3]])
    }
}
