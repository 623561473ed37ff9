use crate::error::{cache_err, layer_err, Result};
use crate::tensor::{gemm, Scalar, Tensor};

/// Fully connected layer, `y = x W^T + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<S = f32> {
    /// `[out, in]`
    pub weight: Tensor<S>,
    /// `[out]`
    pub bias: Tensor<S>,
}

#[derive(Debug)]
pub struct DenseCache<S> {
    x: Tensor<S>,
}

/// Cache for [`Dense::forward_gather`].
#[derive(Debug)]
pub struct GatherCache<S> {
    x: Tensor<S>,
    rows: Vec<usize>,
    per_sample: usize,
}

#[derive(Debug, Clone)]
pub struct DenseGrads<S> {
    pub weight: Tensor<S>,
    pub bias: Tensor<S>,
}

impl<S: Scalar> Dense<S> {
    pub fn new(inputs: usize, outputs: usize) -> Result<Self> {
        if inputs == 0 || outputs == 0 {
            return Err(layer_err("dense", "extents must be positive"));
        }
        Ok(Self { weight: Tensor::zeros([outputs, inputs]), bias: Tensor::zeros([outputs]) })
    }

    pub fn inputs(&self) -> usize {
        self.weight.dim(1)
    }

    pub fn outputs(&self) -> usize {
        self.weight.dim(0)
    }

    pub fn forward(&self, x: &Tensor<S>) -> Result<(Tensor<S>, DenseCache<S>)> {
        let y = self.infer(x)?;
        Ok((y, DenseCache { x: x.clone() }))
    }

    pub fn infer(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        let batch = self.check_input(x)?;
        let (inp, out) = (self.inputs(), self.outputs());
        let mut y = Vec::with_capacity(batch * out);
        for _ in 0..batch {
            y.extend_from_slice(self.bias.data());
        }
        gemm(false, true, batch, out, inp, S::one(), x.data(), self.weight.data(), S::one(), &mut y);
        Ok(Tensor::new([batch, out], y)?)
    }

    pub fn backward(&self, cache: DenseCache<S>, grad_y: &Tensor<S>) -> Result<(Tensor<S>, DenseGrads<S>)> {
        let batch = cache.x.dim(0);
        let (inp, out) = (self.inputs(), self.outputs());
        if grad_y.shape() != [batch, out] || cache.x.dim(1) != inp {
            return Err(cache_err(
                "dense",
                format!("grad shape {:?} for batch {batch} and {out} outputs", grad_y.shape()),
            ));
        }
        let mut gx = vec![S::zero(); batch * inp];
        gemm(false, false, batch, inp, out, S::one(), grad_y.data(), self.weight.data(), S::zero(), &mut gx);
        let mut gw = vec![S::zero(); out * inp];
        gemm(true, false, out, inp, batch, S::one(), grad_y.data(), cache.x.data(), S::zero(), &mut gw);
        let mut gb = vec![S::zero(); out];
        for row in grad_y.data().chunks_exact(out) {
            for (a, &g) in gb.iter_mut().zip(row) {
                *a += g;
            }
        }
        Ok((
            Tensor::new([batch, inp], gx)?,
            DenseGrads { weight: Tensor::new([out, inp], gw)?, bias: Tensor::new([out], gb)? },
        ))
    }

    /// Evaluates only selected output units: `rows` lists `per_sample` output
    /// indices for every sample, and the result is `[B, per_sample]`.
    pub fn forward_gather(
        &self,
        x: &Tensor<S>,
        rows: &[usize],
        per_sample: usize,
    ) -> Result<(Tensor<S>, GatherCache<S>)> {
        let batch = self.check_input(x)?;
        if rows.len() != batch * per_sample {
            return Err(layer_err("dense", format!("{} gather rows for batch {batch} x {per_sample}", rows.len())));
        }
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.outputs()) {
            return Err(layer_err("dense", format!("gather row {bad} >= {}", self.outputs())));
        }
        let inp = self.inputs();
        let w = self.weight.data();
        let mut y = Vec::with_capacity(rows.len());
        for (b, sample_rows) in rows.chunks_exact(per_sample.max(1)).enumerate().take(batch) {
            let xb = &x.data()[b * inp..][..inp];
            for &r in sample_rows {
                let wr = &w[r * inp..][..inp];
                let dot: S = wr.iter().zip(xb).map(|(&a, &b)| a * b).sum();
                y.push(dot + self.bias.data()[r]);
            }
        }
        let cache = GatherCache { x: x.clone(), rows: rows.to_vec(), per_sample };
        Ok((Tensor::new([batch, per_sample], y)?, cache))
    }

    /// Backward of [`forward_gather`](Self::forward_gather). Parameter
    /// gradients are full-sized, with contributions scattered into the
    /// gathered rows (repeated rows accumulate).
    pub fn backward_gather(&self, cache: GatherCache<S>, grad_y: &Tensor<S>) -> Result<(Tensor<S>, DenseGrads<S>)> {
        let batch = cache.x.dim(0);
        if grad_y.shape() != [batch, cache.per_sample] {
            return Err(cache_err(
                "dense",
                format!("grad shape {:?} for gathered [{batch}, {}]", grad_y.shape(), cache.per_sample),
            ));
        }
        let (inp, out) = (self.inputs(), self.outputs());
        let w = self.weight.data();
        let mut gx = vec![S::zero(); batch * inp];
        let mut gw = vec![S::zero(); out * inp];
        let mut gb = vec![S::zero(); out];
        for (i, (&r, &g)) in cache.rows.iter().zip(grad_y.data()).enumerate() {
            let b = i / cache.per_sample;
            let xb = &cache.x.data()[b * inp..][..inp];
            let gxb = &mut gx[b * inp..][..inp];
            let wr = &w[r * inp..][..inp];
            for (d, &wv) in gxb.iter_mut().zip(wr) {
                *d += g * wv;
            }
            for (d, &xv) in gw[r * inp..][..inp].iter_mut().zip(xb) {
                *d += g * xv;
            }
            gb[r] += g;
        }
        Ok((
            Tensor::new([batch, inp], gx)?,
            DenseGrads { weight: Tensor::new([out, inp], gw)?, bias: Tensor::new([out], gb)? },
        ))
    }

    fn check_input(&self, x: &Tensor<S>) -> Result<usize> {
        let s = x.shape();
        if s.len() != 2 || s[1] != self.inputs() {
            return Err(layer_err("dense", format!("expected [B, {}] input, got {s:?}", self.inputs())));
        }
        Ok(s[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{assert_grad_close, numeric_grad};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
        Tensor::from_fn(shape.to_vec(), |_| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn zero_weights_give_bias() {
        let mut d = Dense::<f64>::new(3, 2).unwrap();
        d.bias = Tensor::new([2], vec![0.5, -1.0]).unwrap();
        let y = d.infer(&Tensor::full([4, 3], 7.0)).unwrap();
        for row in y.data().chunks(2) {
            assert_eq!(row, &[0.5, -1.0]);
        }
    }

    #[test]
    fn identity_weights_pass_through() {
        let mut d = Dense::<f64>::new(3, 3).unwrap();
        d.weight = Tensor::eye(3);
        let x = Tensor::new([2, 3], vec![1.0, 2.0, 3.0, -4.0, 5.0, -6.0]).unwrap();
        assert_eq!(d.infer(&x).unwrap(), x);
    }

    #[test]
    fn rejects_wrong_width() {
        let d = Dense::<f32>::new(3, 2).unwrap();
        assert!(d.infer(&Tensor::zeros([1, 4])).is_err());
        assert!(d.forward_gather(&Tensor::zeros([1, 3]), &[2], 1).is_err());
    }

    #[test]
    fn gather_agrees_with_full_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = Dense { weight: random(&mut rng, &[6, 4]), bias: random(&mut rng, &[6]) };
        let x = random(&mut rng, &[2, 4]);
        let full = d.infer(&x).unwrap();
        let rows = [5, 0, 0, 3, 1, 4];
        let (g, _) = d.forward_gather(&x, &rows, 3).unwrap();
        for (i, &r) in rows.iter().enumerate() {
            let b = i / 3;
            assert!((g.data()[i] - full.data()[b * 6 + r]).abs() < 1e-12);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = Dense { weight: random(&mut rng, &[3, 4]), bias: random(&mut rng, &[3]) };
        let x = random(&mut rng, &[2, 4]);
        let (y, cache) = d.forward(&x).unwrap();
        let probe = random(&mut rng, y.shape());
        let (gx, g) = d.backward(cache, &probe).unwrap();
        let f = |v: &[f64]| d.infer(&Tensor::new([2, 4], v.to_vec()).unwrap()).unwrap().dot(&probe).unwrap();
        assert_grad_close(gx.data(), &numeric_grad(f, x.data()), "dense grad_x");
        let f = |v: &[f64]| {
            let l = Dense { weight: Tensor::new([3, 4], v.to_vec()).unwrap(), bias: d.bias.clone() };
            l.infer(&x).unwrap().dot(&probe).unwrap()
        };
        assert_grad_close(g.weight.data(), &numeric_grad(f, d.weight.data()), "dense grad_w");
        let f = |v: &[f64]| {
            let l = Dense { weight: d.weight.clone(), bias: Tensor::new([3], v.to_vec()).unwrap() };
            l.infer(&x).unwrap().dot(&probe).unwrap()
        };
        assert_grad_close(g.bias.data(), &numeric_grad(f, d.bias.data()), "dense grad_b");
    }

    #[test]
    fn gather_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d = Dense { weight: random(&mut rng, &[5, 3]), bias: random(&mut rng, &[5]) };
        let x = random(&mut rng, &[2, 3]);
        let rows = [1, 1, 4, 0];
        let (y, cache) = d.forward_gather(&x, &rows, 2).unwrap();
        let probe = random(&mut rng, y.shape());
        let (gx, g) = d.backward_gather(cache, &probe).unwrap();
        let f = |v: &[f64]| {
            let x = Tensor::new([2, 3], v.to_vec()).unwrap();
            d.forward_gather(&x, &rows, 2).unwrap().0.dot(&probe).unwrap()
        };
        assert_grad_close(gx.data(), &numeric_grad(f, x.data()), "gather grad_x");
        let f = |v: &[f64]| {
            let l = Dense { weight: Tensor::new([5, 3], v.to_vec()).unwrap(), bias: d.bias.clone() };
            l.forward_gather(&x, &rows, 2).unwrap().0.dot(&probe).unwrap()
        };
        assert_grad_close(g.weight.data(), &numeric_grad(f, d.weight.data()), "gather grad_w");
    }
}
