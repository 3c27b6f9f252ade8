//! Dense n-dimensional arrays and the numeric kernels built on them.
//!
//! A [`Tensor`] is a row-major contiguous buffer plus a shape. Images use
//! NHWC order (batch, height, width, channels), matrices are (rows, cols).
//! Training and inference run in `f32`; every kernel is also instantiated at
//! `f64` for finite-difference gradient tests. There is no broadcasting
//! beyond scalars and no view machinery: the fixed architecture never needs
//! them.
//!
//! All operations are pure functions of their inputs with a fixed summation
//! order, so results are reproducible bit-for-bit across runs.

mod gemm;

pub use gemm::{matmul, matmul_a_bt, matmul_at_b};
pub(crate) use gemm::{matmul_at_b_acc_raw, matmul_into_raw};

use crate::error::{Error, Result};

/// Element types tensors can hold (`f32` for training, `f64` for checks).
pub trait Scalar:
    num_traits::Float
    + num_traits::FromPrimitive
    + std::ops::AddAssign
    + std::fmt::Debug
    + std::fmt::Display
    + Default
    + Send
    + Sync
    + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Lossy cast from `f64` literals into the element type.
#[inline]
pub fn cast<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("f64 -> scalar cast")
}

/// Dense row-major n-dimensional array.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T: Scalar = f32> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![T::zero(); shape.iter().product()],
        }
    }

    pub fn filled(shape: &[usize], value: T) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    /// Wrap an existing buffer. The length must match the shape product.
    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(Error::Contract(format!(
                "buffer of {} elements does not fit shape {:?} ({} expected)",
                data.len(),
                shape,
                expected
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> T) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: (0..len).map(&mut f).collect(),
        }
    }

    /// Identity matrix of the given order.
    pub fn eye(n: usize) -> Self {
        let mut t = Tensor::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = T::one();
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Same buffer under a new shape with equal element count.
    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != self.data.len() {
            return Err(Error::ShapeMismatch {
                op: "reshape",
                left: self.shape.clone(),
                right: shape.to_vec(),
            });
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn fill(&mut self, value: T) {
        self.data.fill(value);
    }

    fn check_same_shape(&self, other: &Self, op: &'static str) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                op,
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other, "add")?;
        Ok(self.zip_with(other, |a, b| a + b))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other, "sub")?;
        Ok(self.zip_with(other, |a, b| a - b))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other, "mul")?;
        Ok(self.zip_with(other, |a, b| a * b))
    }

    pub fn scale(&self, factor: T) -> Self {
        self.map(|v| v * factor)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// Sum of every element, accumulated in buffer order.
    pub fn sum_all(&self) -> T {
        let mut acc = T::zero();
        for &v in &self.data {
            acc += v;
        }
        acc
    }

    pub fn mean_all(&self) -> Result<T> {
        if self.data.is_empty() {
            return Err(Error::Domain("mean of an empty tensor".into()));
        }
        Ok(self.sum_all() / cast(self.data.len() as f64))
    }

    /// Flat index of the largest element; the lowest index wins ties.
    pub fn argmax_all(&self) -> Result<usize> {
        if self.data.is_empty() {
            return Err(Error::Domain("argmax of an empty tensor".into()));
        }
        let mut best = 0;
        for (i, &v) in self.data.iter().enumerate().skip(1) {
            if v > self.data[best] {
                best = i;
            }
        }
        Ok(best)
    }

    fn axis_extents(&self, axis: usize) -> Result<(usize, usize, usize)> {
        if axis >= self.shape.len() {
            return Err(Error::Domain(format!(
                "axis {axis} out of range for shape {:?}",
                self.shape
            )));
        }
        let extent = self.shape[axis];
        if extent == 0 {
            return Err(Error::Domain(format!(
                "reduce over empty axis {axis} of shape {:?}",
                self.shape
            )));
        }
        let outer: usize = self.shape[..axis].iter().product();
        let inner: usize = self.shape[axis + 1..].iter().product();
        Ok((outer, extent, inner))
    }

    fn reduced_shape(&self, axis: usize) -> Vec<usize> {
        let mut s = self.shape.clone();
        s.remove(axis);
        s
    }

    fn reduce_axis(&self, axis: usize, mut f: impl FnMut(&mut T, T)) -> Result<Self> {
        let (outer, extent, inner) = self.axis_extents(axis)?;
        let mut out = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            let base = o * extent * inner;
            for i in 0..inner {
                let mut acc = self.data[base + i];
                for j in 1..extent {
                    f(&mut acc, self.data[base + j * inner + i]);
                }
                out.push(acc);
            }
        }
        Tensor::from_vec(&self.reduced_shape(axis), out)
    }

    pub fn sum_axis(&self, axis: usize) -> Result<Self> {
        self.reduce_axis(axis, |acc, v| *acc += v)
    }

    pub fn mean_axis(&self, axis: usize) -> Result<Self> {
        let extent = cast::<T>(self.shape.get(axis).copied().unwrap_or(0) as f64);
        Ok(self.sum_axis(axis)?.map(|v| v / extent))
    }

    pub fn max_axis(&self, axis: usize) -> Result<Self> {
        self.reduce_axis(axis, |acc, v| {
            if v > *acc {
                *acc = v;
            }
        })
    }

    /// Per-slot index of the largest element along `axis`; lowest index on
    /// ties. The result is laid out in the reduced shape's row-major order.
    pub fn argmax_axis(&self, axis: usize) -> Result<Vec<usize>> {
        let (outer, extent, inner) = self.axis_extents(axis)?;
        let mut out = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            let base = o * extent * inner;
            for i in 0..inner {
                let mut best = 0usize;
                for j in 1..extent {
                    if self.data[base + j * inner + i] > self.data[base + best * inner + i] {
                        best = j;
                    }
                }
                out.push(best);
            }
        }
        Ok(out)
    }

    /// Row-wise argmax of a 2-d tensor; the class-prediction rule.
    pub fn argmax_rows(&self) -> Result<Vec<usize>> {
        if self.shape.len() != 2 {
            return Err(Error::Domain(format!(
                "argmax_rows needs a 2-d tensor, got {:?}",
                self.shape
            )));
        }
        self.argmax_axis(1)
    }
}

impl Tensor<f32> {
    /// Exact widening copy used by the f64 gradient checks.
    pub fn to_f64(&self) -> Tensor<f64> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| v as f64).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(shape: &[usize], data: &[f32]) -> Tensor {
        Tensor::from_vec(shape, data.to_vec()).unwrap()
    }

    #[test]
    fn matmul_identity() {
        let a = t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(matmul(&Tensor::eye(2), &a).unwrap(), a);
        assert_eq!(matmul(&a, &Tensor::eye(2)).unwrap(), a);
    }

    #[test]
    fn matmul_zero() {
        let a = t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]);
        let z = Tensor::zeros(&[2, 2]);
        assert_eq!(matmul(&a, &z).unwrap(), z);
    }

    #[test]
    fn matmul_hand_expanded() {
        let a = t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]);
        let b = t(&[2, 2], &[5.0, 6.0, 7.0, 8.0]);
        let c = matmul(&a, &b).unwrap();
        assert_eq!(c.data(), &[19.0, 22.0, 43.0, 50.0]);
    }

    #[test]
    fn matmul_shape_mismatch_names_both_shapes() {
        let a = t(&[2, 3], &[0.0; 6]);
        let b = t(&[2, 2], &[0.0; 4]);
        let err = matmul(&a, &b).unwrap_err().to_string();
        assert!(err.contains("[2, 3]") && err.contains("[2, 2]"), "{err}");
    }

    #[test]
    fn elementwise_ops() {
        assert_eq!(
            t(&[2], &[1.0, 2.0]).add(&t(&[2], &[0.0, 0.0])).unwrap(),
            t(&[2], &[1.0, 2.0])
        );
        assert_eq!(
            t(&[2], &[1.0, -2.0]).scale(0.5),
            t(&[2], &[0.5, -1.0])
        );
        assert_eq!(
            t(&[2], &[2.0, 3.0]).mul(&t(&[2], &[4.0, 5.0])).unwrap(),
            t(&[2], &[8.0, 15.0])
        );
        assert!(t(&[2], &[0.0; 2]).add(&t(&[1, 2], &[0.0; 2])).is_err());
    }

    #[test]
    fn reduce_sum_and_argmax() {
        assert_eq!(t(&[3], &[1.0, 2.0, 3.0]).sum_all(), 6.0);
        assert_eq!(
            t(&[4], &[0.1, 0.7, 0.1, 0.1]).argmax_all().unwrap(),
            1
        );
        // Tie-break: lowest index.
        assert_eq!(t(&[2], &[0.5, 0.5]).argmax_all().unwrap(), 0);
        assert_eq!(t(&[2, 2], &[0.5, 0.5, 0.1, 0.9]).argmax_rows().unwrap(), vec![0, 1]);
    }

    #[test]
    fn reduce_over_axes() {
        let a = t(&[2, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(a.sum_axis(0).unwrap(), t(&[3], &[5.0, 7.0, 9.0]));
        assert_eq!(a.sum_axis(1).unwrap(), t(&[2], &[6.0, 15.0]));
        assert_eq!(a.max_axis(1).unwrap(), t(&[2], &[3.0, 6.0]));
        assert_eq!(a.mean_axis(1).unwrap(), t(&[2], &[2.0, 5.0]));
        assert!(a.sum_axis(2).is_err());
        assert!(Tensor::<f32>::zeros(&[0]).argmax_all().is_err());
    }

    #[test]
    fn matmul_linearity_f64_tight() {
        let mut rng = crate::rng::CounterRng::new(7);
        let rand = |rng: &mut crate::rng::CounterRng, n: usize| {
            Tensor::<f64>::from_vec(
                &[4, n],
                (0..4 * n).map(|_| rng.uniform(-1.0, 1.0)).collect(),
            )
            .unwrap()
        };
        let a = rand(&mut rng, 4);
        let b = rand(&mut rng, 4);
        let c = rand(&mut rng, 4);
        let lhs = matmul(&a, &b.add(&c).unwrap()).unwrap();
        let rhs = matmul(&a, &b).unwrap().add(&matmul(&a, &c).unwrap()).unwrap();
        for (x, y) in lhs.data().iter().zip(rhs.data()) {
            let rel = (x - y).abs() / x.abs().max(1.0);
            assert!(rel < 1e-12, "relative error {rel}");
        }
    }

    proptest! {
        #[test]
        fn matmul_right_identity_exact(data in proptest::collection::vec(-1.0f32..1.0, 12)) {
            let a = Tensor::from_vec(&[3, 4], data).unwrap();
            prop_assert_eq!(matmul(&a, &Tensor::eye(4)).unwrap(), a);
        }

        #[test]
        fn matmul_linearity_f32(data in proptest::collection::vec(-1.0f32..1.0, 27)) {
            let a = Tensor::from_vec(&[3, 3], data[0..9].to_vec()).unwrap();
            let b = Tensor::from_vec(&[3, 3], data[9..18].to_vec()).unwrap();
            let c = Tensor::from_vec(&[3, 3], data[18..27].to_vec()).unwrap();
            let lhs = matmul(&a, &b.add(&c).unwrap()).unwrap();
            let rhs = matmul(&a, &b).unwrap().add(&matmul(&a, &c).unwrap()).unwrap();
            for (x, y) in lhs.data().iter().zip(rhs.data()) {
                let rel = (x - y).abs() / x.abs().max(1.0);
                prop_assert!(rel < 1e-6, "relative error {}", rel);
            }
        }

        #[test]
        fn sum_all_matches_sequential_fold(data in proptest::collection::vec(-10.0f32..10.0, 1..64)) {
            let t = Tensor::from_vec(&[data.len()], data.clone()).unwrap();
            let mut seq = 0.0f32;
            for v in data {
                seq += v;
            }
            prop_assert_eq!(t.sum_all(), seq);
        }
    }
}
