//! Matrix products with a fixed, documented summation order.
//!
//! Each output element accumulates its terms in ascending index order, so all
//! three kernels are bit-reproducible. The loop shapes are chosen so the
//! inner loop runs over contiguous rows and auto-vectorizes.

use super::{Scalar, Tensor};
use crate::error::{Error, Result};

fn dims2(t: &Tensor<impl Scalar>, op: &'static str) -> Result<(usize, usize)> {
    match t.shape() {
        [r, c] => Ok((*r, *c)),
        other => Err(Error::Domain(format!("{op} needs 2-d operands, got {other:?}"))),
    }
}

/// `a[M,K] x b[K,N] -> [M,N]`; each element sums over `k` in ascending order.
pub fn matmul<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (m, k) = dims2(a, "matmul")?;
    let (k2, n) = dims2(b, "matmul")?;
    if k != k2 {
        return Err(Error::ShapeMismatch {
            op: "matmul",
            left: a.shape().to_vec(),
            right: b.shape().to_vec(),
        });
    }
    let mut out = Tensor::zeros(&[m, n]);
    matmul_into_raw(a.data(), b.data(), out.data_mut(), m, k, n);
    Ok(out)
}

/// `a[M,K]^T x b[M,N] -> [K,N]`: the weight-gradient product.
pub fn matmul_at_b<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (m, k) = dims2(a, "matmul_at_b")?;
    let (m2, n) = dims2(b, "matmul_at_b")?;
    if m != m2 {
        return Err(Error::ShapeMismatch {
            op: "matmul_at_b",
            left: a.shape().to_vec(),
            right: b.shape().to_vec(),
        });
    }
    let mut out = Tensor::zeros(&[k, n]);
    matmul_at_b_acc_raw(a.data(), b.data(), out.data_mut(), m, k, n);
    Ok(out)
}

/// `a[M,K] x b[N,K]^T -> [M,N]`: the input-gradient product.
pub fn matmul_a_bt<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (m, k) = dims2(a, "matmul_a_bt")?;
    let (n, k2) = dims2(b, "matmul_a_bt")?;
    if k != k2 {
        return Err(Error::ShapeMismatch {
            op: "matmul_a_bt",
            left: a.shape().to_vec(),
            right: b.shape().to_vec(),
        });
    }
    let a_data = a.data();
    let b_data = b.data();
    let mut out = vec![T::zero(); m * n];
    for i in 0..m {
        let a_row = &a_data[i * k..(i + 1) * k];
        let out_row = &mut out[i * n..(i + 1) * n];
        for (j, o) in out_row.iter_mut().enumerate() {
            *o = dot_lanes(a_row, &b_data[j * k..(j + 1) * k]);
        }
    }
    Tensor::from_vec(&[m, n], out)
}

/// `out[M,N] += a[M,K] x b[K,N]` over raw row-major buffers.
pub(crate) fn matmul_into_raw<T: Scalar>(
    a: &[T],
    b: &[T],
    out: &mut [T],
    m: usize,
    k: usize,
    n: usize,
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let out_row = &mut out[i * n..(i + 1) * n];
        for (kk, &a_ik) in a_row.iter().enumerate() {
            let b_row = &b[kk * n..(kk + 1) * n];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += a_ik * bv;
            }
        }
    }
}

/// `out[K,N] += a[M,K]^T x b[M,N]` over raw buffers, accumulating in place so
/// per-sample contributions can be summed without a scratch matrix.
///
/// Four output rows are produced per pass over `b`; each element still sums
/// its terms in ascending `m` order, so blocking does not change results.
pub(crate) fn matmul_at_b_acc_raw<T: Scalar>(
    a: &[T],
    b: &[T],
    out: &mut [T],
    m: usize,
    k: usize,
    n: usize,
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), m * n);
    debug_assert_eq!(out.len(), k * n);
    let blocks = k / 4 * 4;
    let mut i = 0;
    while i < blocks {
        let (r0, rest) = out[i * n..(i + 4) * n].split_at_mut(n);
        let (r1, rest) = rest.split_at_mut(n);
        let (r2, r3) = rest.split_at_mut(n);
        for mm in 0..m {
            let ab = &a[mm * k + i..mm * k + i + 4];
            let (a0, a1, a2, a3) = (ab[0], ab[1], ab[2], ab[3]);
            let b_row = &b[mm * n..(mm + 1) * n];
            for ((((o0, o1), o2), o3), &bv) in r0
                .iter_mut()
                .zip(r1.iter_mut())
                .zip(r2.iter_mut())
                .zip(r3.iter_mut())
                .zip(b_row)
            {
                *o0 += a0 * bv;
                *o1 += a1 * bv;
                *o2 += a2 * bv;
                *o3 += a3 * bv;
            }
        }
        i += 4;
    }
    for i in blocks..k {
        let out_row = &mut out[i * n..(i + 1) * n];
        for mm in 0..m {
            let a_mi = a[mm * k + i];
            let b_row = &b[mm * n..(mm + 1) * n];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += a_mi * bv;
            }
        }
    }
}

/// Dot product with eight independent accumulator lanes combined in a fixed
/// order; vectorizes without changing results between runs.
#[inline]
pub(crate) fn dot_lanes<T: Scalar>(x: &[T], y: &[T]) -> T {
    const LANES: usize = 8;
    let mut acc = [T::zero(); LANES];
    let mut xc = x.chunks_exact(LANES);
    let mut yc = y.chunks_exact(LANES);
    for (xs, ys) in (&mut xc).zip(&mut yc) {
        for l in 0..LANES {
            acc[l] += xs[l] * ys[l];
        }
    }
    let mut tail = T::zero();
    for (&a, &b) in xc.remainder().iter().zip(yc.remainder()) {
        tail += a * b;
    }
    let mut sum = T::zero();
    for a in acc {
        sum += a;
    }
    sum + tail
}
