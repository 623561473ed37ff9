//! Dense row-major tensors.
//!
//! Data is stored flat with the last index varying fastest. Layer inputs and
//! outputs use the channel-major `(batch, channel, height, width)` layout, so a
//! pairwise-encoded window of `L` items with `d`-dimensional embeddings is a
//! `[batch, 2d, L, L]` tensor.

mod linalg;
mod scalar;

pub use linalg::gemm;
pub use scalar::Scalar;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TensorError {
    #[error("{op}: incompatible shapes {lhs:?} and {rhs:?}")]
    ShapeMismatch { op: &'static str, lhs: Vec<usize>, rhs: Vec<usize> },
    #[error("shape {shape:?} needs {} elements, got {len}", shape.iter().product::<usize>())]
    DataLength { shape: Vec<usize>, len: usize },
    #[error("axis {axis} out of range for rank {rank}")]
    InvalidAxis { axis: usize, rank: usize },
    #[error("cannot reduce over zero-extent axis {axis}")]
    EmptyReduction { axis: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementwiseOp {
    Add,
    Sub,
    Mul,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReduceOp {
    Sum,
    Mean,
    Max,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<S = f32> {
    shape: Vec<usize>,
    data: Vec<S>,
}

impl<S: Scalar> Tensor<S> {
    pub fn new(shape: impl Into<Vec<usize>>, data: Vec<S>) -> Result<Self, TensorError> {
        let shape = shape.into();
        if shape.iter().product::<usize>() != data.len() {
            return Err(TensorError::DataLength { shape, len: data.len() });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: impl Into<Vec<usize>>) -> Self {
        Self::full(shape, S::zero())
    }

    pub fn full(shape: impl Into<Vec<usize>>, value: S) -> Self {
        let shape = shape.into();
        let len = shape.iter().product();
        Self { shape, data: vec![value; len] }
    }

    pub fn from_fn(shape: impl Into<Vec<usize>>, mut f: impl FnMut(usize) -> S) -> Self {
        let shape = shape.into();
        let len: usize = shape.iter().product();
        Self { shape, data: (0..len).map(&mut f).collect() }
    }

    pub fn scalar(value: S) -> Self {
        Self { shape: Vec::new(), data: vec![value] }
    }

    /// `n x n` identity matrix.
    pub fn eye(n: usize) -> Self {
        Self::from_fn([n, n], |i| if i / n == i % n { S::one() } else { S::zero() })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn dim(&self, axis: usize) -> usize {
        self.shape[axis]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<S> {
        self.data
    }

    pub fn reshape(self, shape: impl Into<Vec<usize>>) -> Result<Self, TensorError> {
        let shape = shape.into();
        if shape.iter().product::<usize>() != self.data.len() {
            return Err(TensorError::ShapeMismatch { op: "reshape", lhs: self.shape, rhs: shape });
        }
        Ok(Self { shape, data: self.data })
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Self {
        Self { shape: self.shape.clone(), data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn scale(&self, factor: S) -> Self {
        self.map(|v| v * factor)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn sum(&self) -> S {
        self.data.iter().copied().sum()
    }

    pub fn dot(&self, other: &Self) -> Result<S, TensorError> {
        self.check_same("dot", other)?;
        Ok(self.data.iter().zip(&other.data).map(|(&a, &b)| a * b).sum())
    }

    pub fn cast<T: Scalar>(&self) -> Tensor<T> {
        Tensor { shape: self.shape.clone(), data: self.data.iter().map(|&v| T::lit(v.as_f64())).collect() }
    }

    /// In-place `self += alpha * other`.
    pub fn axpy(&mut self, alpha: S, other: &Self) -> Result<(), TensorError> {
        self.check_same("axpy", other)?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self, TensorError> {
        if self.rank() != 2 || rhs.rank() != 2 || self.shape[1] != rhs.shape[0] {
            return Err(TensorError::ShapeMismatch { op: "matmul", lhs: self.shape.clone(), rhs: rhs.shape.clone() });
        }
        let (m, k, n) = (self.shape[0], self.shape[1], rhs.shape[1]);
        let mut out = Self::zeros([m, n]);
        gemm(false, false, m, n, k, S::one(), &self.data, &rhs.data, S::zero(), &mut out.data);
        Ok(out)
    }

    /// Pointwise `op(self, rhs)`.
    ///
    /// `rhs` either has the same shape, or is a vector with one entry per
    /// channel (axis 1) that is broadcast over every other axis.
    pub fn elementwise(&self, op: ElementwiseOp, rhs: &Self) -> Result<Self, TensorError> {
        let f = |a: S, b: S| match op {
            ElementwiseOp::Add => a + b,
            ElementwiseOp::Sub => a - b,
            ElementwiseOp::Mul => a * b,
        };
        if self.shape == rhs.shape {
            let data = self.data.iter().zip(&rhs.data).map(|(&a, &b)| f(a, b)).collect();
            return Ok(Self { shape: self.shape.clone(), data });
        }
        if self.rank() >= 2 && rhs.rank() == 1 && rhs.shape[0] == self.shape[1] {
            let channels = self.shape[1];
            let inner: usize = self.shape[2..].iter().product();
            let data = self.data.iter().enumerate().map(|(i, &a)| f(a, rhs.data[(i / inner) % channels])).collect();
            return Ok(Self { shape: self.shape.clone(), data });
        }
        Err(TensorError::ShapeMismatch { op: "elementwise", lhs: self.shape.clone(), rhs: rhs.shape.clone() })
    }

    pub fn add(&self, rhs: &Self) -> Result<Self, TensorError> {
        self.elementwise(ElementwiseOp::Add, rhs)
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self, TensorError> {
        self.elementwise(ElementwiseOp::Sub, rhs)
    }

    pub fn mul(&self, rhs: &Self) -> Result<Self, TensorError> {
        self.elementwise(ElementwiseOp::Mul, rhs)
    }

    /// Reduces over `axes` (duplicates ignored); the reduced axes are dropped
    /// from the output shape. Reducing every axis yields a rank-0 tensor.
    pub fn reduce(&self, op: ReduceOp, axes: &[usize]) -> Result<Self, TensorError> {
        let rank = self.rank();
        let mut reduced = vec![false; rank];
        for &axis in axes {
            if axis >= rank {
                return Err(TensorError::InvalidAxis { axis, rank });
            }
            if self.shape[axis] == 0 {
                return Err(TensorError::EmptyReduction { axis });
            }
            reduced[axis] = true;
        }
        let out_shape: Vec<usize> = (0..rank).filter(|&a| !reduced[a]).map(|a| self.shape[a]).collect();
        let out_len: usize = out_shape.iter().product();
        let count: usize = (0..rank).filter(|&a| reduced[a]).map(|a| self.shape[a]).product();

        // Row-major strides of the output, indexed by input axis (0 for reduced axes).
        let mut out_strides = vec![0usize; rank];
        let mut stride = 1;
        for a in (0..rank).rev() {
            if !reduced[a] {
                out_strides[a] = stride;
                stride *= self.shape[a];
            }
        }

        let init = match op {
            ReduceOp::Max => S::neg_infinity(),
            _ => S::zero(),
        };
        let mut out = vec![init; out_len];
        let mut index = vec![0usize; rank];
        for &v in &self.data {
            let pos: usize = index.iter().zip(&out_strides).map(|(i, s)| i * s).sum();
            match op {
                ReduceOp::Max => {
                    if v > out[pos] {
                        out[pos] = v;
                    }
                }
                _ => out[pos] += v,
            }
            for a in (0..rank).rev() {
                index[a] += 1;
                if index[a] < self.shape[a] {
                    break;
                }
                index[a] = 0;
            }
        }
        if op == ReduceOp::Mean {
            let n = S::from_usize_lossy(count);
            for v in &mut out {
                *v /= n;
            }
        }
        Ok(Self { shape: out_shape, data: out })
    }

    fn check_same(&self, op: &'static str, other: &Self) -> Result<(), TensorError> {
        if self.shape != other.shape {
            return Err(TensorError::ShapeMismatch { op, lhs: self.shape.clone(), rhs: other.shape.clone() });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor<f64> {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn matmul_examples() {
        let b = t(&[3, 2], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(Tensor::eye(3).matmul(&b).unwrap(), b);

        let a = t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]);
        let col = t(&[2, 1], &[0.0, 1.0]);
        assert_eq!(a.matmul(&col).unwrap(), t(&[2, 1], &[2.0, 4.0]));

        let z = Tensor::<f64>::zeros([2, 3]);
        assert_eq!(z.matmul(&b).unwrap(), Tensor::zeros([2, 2]));
    }

    #[test]
    fn matmul_rejects_inner_mismatch() {
        let a = Tensor::<f32>::zeros([2, 3]);
        let err = a.matmul(&Tensor::zeros([2, 3])).unwrap_err();
        assert!(matches!(err, TensorError::ShapeMismatch { op: "matmul", .. }));
        assert!(err.to_string().contains("[2, 3]"));
    }

    #[test]
    fn elementwise_examples() {
        let a = t(&[2], &[1.0, 2.0]);
        assert_eq!(a.add(&Tensor::zeros([2])).unwrap(), a);
        assert_eq!(a.mul(&Tensor::full([2], 1.0)).unwrap(), a);
        assert_eq!(a.add(&t(&[2], &[3.0, 4.0])).unwrap(), t(&[2], &[4.0, 6.0]));
        assert!(a.add(&Tensor::zeros([3])).is_err());
    }

    #[test]
    fn channel_broadcast() {
        // [batch=1, channel=2, 2x1]
        let x = t(&[1, 2, 2, 1], &[1.0, 2.0, 3.0, 4.0]);
        let b = t(&[2], &[10.0, 100.0]);
        assert_eq!(x.add(&b).unwrap().data(), &[11.0, 12.0, 103.0, 104.0]);
        assert!(x.add(&t(&[3], &[0.0; 3])).is_err());
    }

    #[test]
    fn reduce_examples() {
        let m = t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.reduce(ReduceOp::Sum, &[0, 1]).unwrap().data(), &[10.0]);
        assert_eq!(t(&[2], &[2.0, 4.0]).reduce(ReduceOp::Mean, &[0]).unwrap().data(), &[3.0]);
        let m = t(&[2, 2], &[1.0, 5.0, 3.0, 4.0]);
        let r = m.reduce(ReduceOp::Max, &[1]).unwrap();
        assert_eq!(r.shape(), &[2]);
        assert_eq!(r.data(), &[5.0, 4.0]);
        let r = m.reduce(ReduceOp::Sum, &[0]).unwrap();
        assert_eq!(r.data(), &[4.0, 9.0]);
    }

    #[test]
    fn reduce_errors() {
        let m = Tensor::<f64>::zeros([2, 0]);
        assert_eq!(m.reduce(ReduceOp::Sum, &[1]).unwrap_err(), TensorError::EmptyReduction { axis: 1 });
        assert!(matches!(m.reduce(ReduceOp::Sum, &[2]).unwrap_err(), TensorError::InvalidAxis { axis: 2, rank: 2 }));
    }

    #[test]
    fn new_checks_length() {
        assert!(Tensor::<f32>::new([2, 2], vec![0.0; 3]).is_err());
    }

    fn small_matrix(rows: usize, cols: usize) -> impl Strategy<Value = Tensor<f64>> {
        proptest::collection::vec(-2.0f64..2.0, rows * cols).prop_map(move |d| Tensor::new([rows, cols], d).unwrap())
    }

    proptest! {
        #[test]
        fn matmul_is_associative(
            a in small_matrix(3, 4),
            b in small_matrix(4, 2),
            c in small_matrix(2, 5),
        ) {
            let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
            let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
            for (x, y) in left.data().iter().zip(right.data()) {
                prop_assert!((x - y).abs() <= 1e-10 * (1.0 + x.abs().max(y.abs())));
            }
        }

        #[test]
        fn matmul_is_associative_f32(
            a in small_matrix(3, 4),
            b in small_matrix(4, 2),
            c in small_matrix(2, 5),
        ) {
            let (a, b, c) = (a.cast::<f32>(), b.cast::<f32>(), c.cast::<f32>());
            let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
            let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
            for (x, y) in left.data().iter().zip(right.data()) {
                prop_assert!((x - y).abs() <= 1e-5 * (1.0 + x.abs().max(y.abs())));
            }
        }

        #[test]
        fn broadcast_add_then_sum_distributes(
            x in proptest::collection::vec(-5.0f64..5.0, 2 * 3 * 4),
            b in proptest::collection::vec(-5.0f64..5.0, 3),
        ) {
            let x = Tensor::new([2, 3, 4], x).unwrap();
            let bias = Tensor::new([3], b.clone()).unwrap();
            let lhs = x.add(&bias).unwrap().sum();
            // each channel bias is added once per (batch, spatial) position
            let rhs = x.sum() + 8.0 * b.iter().sum::<f64>();
            prop_assert!((lhs - rhs).abs() < 1e-9);
        }

        #[test]
        fn reshape_round_trip(data in proptest::collection::vec(-1.0f32..1.0, 24)) {
            let x = Tensor::new([2, 3, 4], data.clone()).unwrap();
            let back = x.reshape([6, 4]).unwrap().reshape([2, 3, 4]).unwrap();
            prop_assert_eq!(back.data(), &data[..]);
        }
    }
}
