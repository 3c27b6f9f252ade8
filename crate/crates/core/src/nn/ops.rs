//! Layer-local forward and backward kernels.
//!
//! Every kernel is a pure function, generic over the element type so the
//! same code path serves f32 training and f64 gradient checking. Convolution
//! is fixed at 3x3 kernels with zero padding of 1 and stride 1 ("same"
//! output size); pooling is non-overlapping 2x2 with floor semantics.

use crate::error::{Error, Result};
use crate::rng::CounterRng;
use crate::tensor::{cast, matmul_a_bt, Scalar, Tensor};
use crate::tensor::{matmul_at_b_acc_raw, matmul_into_raw};

pub const KERNEL: usize = 3;
const PAD: usize = 1;

fn dims4(t: &Tensor<impl Scalar>, op: &'static str) -> Result<(usize, usize, usize, usize)> {
    match t.shape() {
        [n, h, w, c] => Ok((*n, *h, *w, *c)),
        other => Err(Error::Domain(format!(
            "{op} needs an NHWC tensor, got {other:?}"
        ))),
    }
}

fn conv_check<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    b: &Tensor<T>,
) -> Result<(usize, usize, usize, usize, usize)> {
    let (n, h, wd, cin) = dims4(x, "conv2d")?;
    match w.shape() {
        [KERNEL, KERNEL, wc_in, cout] if *wc_in == cin => {
            if b.shape() != [*cout] {
                return Err(Error::ShapeMismatch {
                    op: "conv2d bias",
                    left: b.shape().to_vec(),
                    right: vec![*cout],
                });
            }
            Ok((n, h, wd, cin, *cout))
        }
        _ => Err(Error::ShapeMismatch {
            op: "conv2d",
            left: x.shape().to_vec(),
            right: w.shape().to_vec(),
        }),
    }
}

/// Unroll one image's 3x3 neighborhoods into a `[h*w, 9*cin]` patch matrix.
/// Patch columns are ordered (ky, kx, channel) to match the row-major layout
/// of a `[3,3,cin,cout]` weight tensor.
fn im2col<T: Scalar>(img: &[T], h: usize, w: usize, cin: usize, col: &mut [T]) {
    let patch = KERNEL * KERNEL * cin;
    debug_assert_eq!(img.len(), h * w * cin);
    debug_assert_eq!(col.len(), h * w * patch);
    for y in 0..h {
        for x in 0..w {
            let base = (y * w + x) * patch;
            for ky in 0..KERNEL {
                let iy = (y + ky).wrapping_sub(PAD);
                for kx in 0..KERNEL {
                    let ix = (x + kx).wrapping_sub(PAD);
                    let dst = base + (ky * KERNEL + kx) * cin;
                    if iy < h && ix < w {
                        let src = (iy * w + ix) * cin;
                        col[dst..dst + cin].copy_from_slice(&img[src..src + cin]);
                    } else {
                        col[dst..dst + cin].fill(T::zero());
                    }
                }
            }
        }
    }
}

/// Scatter a `[h*w, 9*cin]` patch-gradient matrix back onto the image grid.
fn col2im_add<T: Scalar>(col: &[T], h: usize, w: usize, cin: usize, img: &mut [T]) {
    let patch = KERNEL * KERNEL * cin;
    for y in 0..h {
        for x in 0..w {
            let base = (y * w + x) * patch;
            for ky in 0..KERNEL {
                let iy = (y + ky).wrapping_sub(PAD);
                for kx in 0..KERNEL {
                    let ix = (x + kx).wrapping_sub(PAD);
                    if iy < h && ix < w {
                        let src = base + (ky * KERNEL + kx) * cin;
                        let dst = (iy * w + ix) * cin;
                        for c in 0..cin {
                            img[dst + c] += col[src + c];
                        }
                    }
                }
            }
        }
    }
}

/// Cross-correlation of `x[n,h,w,cin]` with `w[3,3,cin,cout]` plus bias,
/// zero-padded so the spatial extent is preserved.
pub fn conv2d_forward<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, h, wd, cin, cout) = conv_check(x, w, b)?;
    let patch = KERNEL * KERNEL * cin;
    let pixels = h * wd;
    let mut col = vec![T::zero(); pixels * patch];
    let mut out = Tensor::zeros(&[n, h, wd, cout]);
    for i in 0..n {
        let img = &x.data()[i * pixels * cin..(i + 1) * pixels * cin];
        im2col(img, h, wd, cin, &mut col);
        let out_img = &mut out.data_mut()[i * pixels * cout..(i + 1) * pixels * cout];
        // Seed each output row with the bias, then accumulate the product.
        for row in out_img.chunks_exact_mut(cout) {
            row.copy_from_slice(b.data());
        }
        matmul_into_raw(&col, w.data(), out_img, pixels, patch, cout);
    }
    Ok(out)
}

/// Exact gradients of [`conv2d_forward`] with respect to input, weights and
/// bias. The bias gradient sums `grad_out` over batch and spatial axes.
pub fn conv2d_backward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    conv2d_backward_impl(x, w, grad_out, true)
}

/// Backward with an optional input gradient; the first layer of a network
/// never consumes `grad_x`, and skipping it saves a third of the work.
pub(crate) fn conv2d_backward_impl<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    grad_out: &Tensor<T>,
    need_grad_x: bool,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let cout = w.shape()[3];
    let b = Tensor::zeros(&[cout]);
    let (n, h, wd, cin, cout) = conv_check(x, w, &b)?;
    if grad_out.shape() != [n, h, wd, cout] {
        return Err(Error::ShapeMismatch {
            op: "conv2d_backward",
            left: grad_out.shape().to_vec(),
            right: vec![n, h, wd, cout],
        });
    }
    let patch = KERNEL * KERNEL * cin;
    let pixels = h * wd;

    let mut grad_x = Tensor::zeros(x.shape());
    let mut grad_w = Tensor::zeros(w.shape());
    let mut grad_b = Tensor::zeros(&[cout]);

    for go in grad_out.data().chunks_exact(cout) {
        for (acc, &g) in grad_b.data_mut().iter_mut().zip(go) {
            *acc += g;
        }
    }

    let w_mat = Tensor::from_vec(&[patch, cout], w.data().to_vec())?;
    let mut col = vec![T::zero(); pixels * patch];
    for i in 0..n {
        let img = &x.data()[i * pixels * cin..(i + 1) * pixels * cin];
        let g_img = Tensor::from_vec(
            &[pixels, cout],
            grad_out.data()[i * pixels * cout..(i + 1) * pixels * cout].to_vec(),
        )?;
        im2col(img, h, wd, cin, &mut col);
        // grad_w[K,cout] += col[P,K]^T . g[P,cout]
        matmul_at_b_acc_raw(&col, g_img.data(), grad_w.data_mut(), pixels, patch, cout);
        if need_grad_x {
            // grad_col[P,K] = g[P,cout] . w[K,cout]^T, scattered back onto the grid
            let grad_col = matmul_a_bt(&g_img, &w_mat)?;
            let gx_img = &mut grad_x.data_mut()[i * pixels * cin..(i + 1) * pixels * cin];
            col2im_add(grad_col.data(), h, wd, cin, gx_img);
        }
    }
    Ok((grad_x, grad_w, grad_b))
}

/// Winning input positions of a 2x2 max-pool, one flat input index per
/// output element. Tied to the input shape it was produced from.
#[derive(Clone, Debug)]
pub struct PoolIndices {
    pub input_shape: Vec<usize>,
    pub output_shape: Vec<usize>,
    pub winners: Vec<u32>,
}

/// Non-overlapping 2x2 max-pool with stride 2. Odd trailing rows/columns are
/// discarded; ties go to the lowest flat input index.
pub fn maxpool2x2_forward<T: Scalar>(x: &Tensor<T>) -> Result<(Tensor<T>, PoolIndices)> {
    let (n, h, w, c) = dims4(x, "maxpool2x2")?;
    if h < 2 || w < 2 {
        return Err(Error::ShapeMismatch {
            op: "maxpool2x2 (spatial extent below pool size)",
            left: x.shape().to_vec(),
            right: vec![n, 2, 2, c],
        });
    }
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor::zeros(&[n, oh, ow, c]);
    let mut winners = vec![0u32; n * oh * ow * c];
    let data = x.data();
    let out_data = out.data_mut();
    for i in 0..n {
        for oy in 0..oh {
            for ox in 0..ow {
                for ch in 0..c {
                    let mut best_idx = ((i * h + 2 * oy) * w + 2 * ox) * c + ch;
                    let mut best = data[best_idx];
                    for dy in 0..2 {
                        for dx in 0..2 {
                            let idx = ((i * h + 2 * oy + dy) * w + 2 * ox + dx) * c + ch;
                            if data[idx] > best {
                                best = data[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    let o = ((i * oh + oy) * ow + ox) * c + ch;
                    out_data[o] = best;
                    winners[o] = best_idx as u32;
                }
            }
        }
    }
    let indices = PoolIndices {
        input_shape: x.shape().to_vec(),
        output_shape: out.shape().to_vec(),
        winners,
    };
    Ok((out, indices))
}

/// Route `grad_out` back to the recorded winning positions; everything else,
/// including any discarded odd row/column, receives zero.
pub fn maxpool2x2_backward<T: Scalar>(
    indices: &PoolIndices,
    grad_out: &Tensor<T>,
) -> Result<Tensor<T>> {
    if grad_out.shape() != indices.output_shape.as_slice() {
        return Err(Error::Contract(format!(
            "pool index map for output {:?} does not match gradient {:?}",
            indices.output_shape,
            grad_out.shape()
        )));
    }
    let mut grad_x = Tensor::zeros(&indices.input_shape);
    let gx = grad_x.data_mut();
    for (&src, &g) in indices.winners.iter().zip(grad_out.data()) {
        gx[src as usize] += g;
    }
    Ok(grad_x)
}

/// `f(x) = x` for positive inputs, `alpha * x` otherwise.
pub fn leaky_relu_forward<T: Scalar>(x: &Tensor<T>, alpha: T) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { alpha * v })
}

/// Multiplies the incoming gradient by 1 where the forward input was
/// positive and by `alpha` elsewhere (the subgradient at 0 is `alpha`).
pub fn leaky_relu_backward<T: Scalar>(
    x: &Tensor<T>,
    grad_out: &Tensor<T>,
    alpha: T,
) -> Result<Tensor<T>> {
    if x.shape() != grad_out.shape() {
        return Err(Error::ShapeMismatch {
            op: "leaky_relu_backward",
            left: x.shape().to_vec(),
            right: grad_out.shape().to_vec(),
        });
    }
    Ok(Tensor::from_fn(x.shape(), |i| {
        let g = grad_out.data()[i];
        if x.data()[i] > T::zero() {
            g
        } else {
            alpha * g
        }
    }))
}

/// `x[N,F] . w[F,U] + b[U]`.
pub fn dense_forward<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, f) = match x.shape() {
        [n, f] => (*n, *f),
        other => {
            return Err(Error::Domain(format!(
                "dense_forward needs [N,F] input, got {other:?}"
            )))
        }
    };
    let u = match w.shape() {
        [wf, u] if *wf == f => *u,
        _ => {
            return Err(Error::ShapeMismatch {
                op: "dense_forward",
                left: x.shape().to_vec(),
                right: w.shape().to_vec(),
            })
        }
    };
    if b.shape() != [u] {
        return Err(Error::ShapeMismatch {
            op: "dense_forward bias",
            left: b.shape().to_vec(),
            right: vec![u],
        });
    }
    let mut out = Tensor::zeros(&[n, u]);
    for row in out.data_mut().chunks_exact_mut(u) {
        row.copy_from_slice(b.data());
    }
    matmul_into_raw(x.data(), w.data(), out.data_mut(), n, f, u);
    Ok(out)
}

/// Gradients of [`dense_forward`]: `(grad . w^T, x^T . grad, column sums)`.
pub fn dense_backward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let grad_x = matmul_a_bt(grad_out, w)?;
    if grad_x.shape() != x.shape() {
        return Err(Error::ShapeMismatch {
            op: "dense_backward",
            left: x.shape().to_vec(),
            right: grad_out.shape().to_vec(),
        });
    }
    let mut grad_w = Tensor::zeros(w.shape());
    matmul_at_b_acc_raw(
        x.data(),
        grad_out.data(),
        grad_w.data_mut(),
        x.shape()[0],
        x.shape()[1],
        grad_out.shape()[1],
    );
    let grad_b = grad_out.sum_axis(0)?;
    Ok((grad_x, grad_w, grad_b))
}

/// Inverted dropout. In train mode each element is zeroed with probability
/// `rate` and survivors are scaled by `1/(1-rate)`; the returned mask holds
/// those per-element factors for reuse in the backward pass. Eval mode (and
/// rate 0) is the identity with no mask.
pub fn dropout_forward<T: Scalar>(
    x: &Tensor<T>,
    rate: f64,
    train: bool,
    rng: &mut CounterRng,
) -> Result<(Tensor<T>, Option<Vec<T>>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Domain(format!("dropout rate {rate} outside [0, 1)")));
    }
    if !train || rate == 0.0 {
        return Ok((x.clone(), None));
    }
    let keep_scale = cast::<T>(1.0 / (1.0 - rate));
    let mask: Vec<T> = (0..x.len())
        .map(|_| if rng.bool(rate) { T::zero() } else { keep_scale })
        .collect();
    let out = Tensor::from_fn(x.shape(), |i| x.data()[i] * mask[i]);
    Ok((out, Some(mask)))
}

/// Backward through dropout: multiply by the mask saved at forward time.
pub fn dropout_backward<T: Scalar>(grad_out: &Tensor<T>, mask: Option<&[T]>) -> Tensor<T> {
    match mask {
        None => grad_out.clone(),
        Some(m) => Tensor::from_fn(grad_out.shape(), |i| grad_out.data()[i] * m[i]),
    }
}

/// Row-wise max-shifted softmax of `[N, C]` logits; rows sum to 1.
pub fn softmax_rows<T: Scalar>(logits: &Tensor<T>) -> Result<Tensor<T>> {
    let c = match logits.shape() {
        [_, c] => *c,
        other => {
            return Err(Error::Domain(format!(
                "softmax needs [N,C] logits, got {other:?}"
            )))
        }
    };
    let mut probs = Tensor::zeros(logits.shape());
    for (p_row, row) in probs
        .data_mut()
        .chunks_exact_mut(c)
        .zip(logits.data().chunks_exact(c))
    {
        let max = row.iter().fold(row[0], |m, &v| if v > m { v } else { m });
        let mut denom = T::zero();
        for (p, &z) in p_row.iter_mut().zip(row) {
            *p = (z - max).exp();
            denom += *p;
        }
        for p in p_row.iter_mut() {
            *p = *p / denom;
        }
    }
    Ok(probs)
}

/// Softmax cross-entropy over a batch of logit rows.
///
/// Returns the mean negative log-likelihood, the max-shifted softmax
/// probabilities, and the logit gradient `(probs - labels) / N`.
pub fn softmax_xent<T: Scalar>(
    logits: &Tensor<T>,
    labels: &Tensor<T>,
) -> Result<(T, Tensor<T>, Tensor<T>)> {
    let (n, c) = match logits.shape() {
        [n, c] => (*n, *c),
        other => {
            return Err(Error::Domain(format!(
                "softmax_xent needs [N,C] logits, got {other:?}"
            )))
        }
    };
    if labels.shape() != [n, c] {
        return Err(Error::ShapeMismatch {
            op: "softmax_xent",
            left: logits.shape().to_vec(),
            right: labels.shape().to_vec(),
        });
    }
    for row in labels.data().chunks_exact(c) {
        let ones = row.iter().filter(|&&v| v == T::one()).count();
        let zeros = row.iter().filter(|&&v| v == T::zero()).count();
        if ones != 1 || zeros != c - 1 {
            return Err(Error::Contract(format!(
                "label row {row:?} is not one-hot"
            )));
        }
    }

    let probs = softmax_rows(logits)?;
    let mut loss = T::zero();
    for (i, p_row) in probs.data().chunks_exact(c).enumerate() {
        let true_class = labels.data()[i * c..(i + 1) * c]
            .iter()
            .position(|&v| v == T::one())
            .expect("validated one-hot");
        loss = loss - p_row[true_class].max(T::min_positive_value()).ln();
    }
    let batch = cast::<T>(n as f64);
    loss = loss / batch;
    let grad = Tensor::from_fn(&[n, c], |i| (probs.data()[i] - labels.data()[i]) / batch);
    Ok((loss, probs, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f32]) -> Tensor {
        Tensor::from_vec(shape, data.to_vec()).unwrap()
    }

    fn identity_kernel() -> Tensor {
        // Center weight 1, everything else 0, single channel in and out.
        let mut w = Tensor::zeros(&[3, 3, 1, 1]);
        w.data_mut()[4] = 1.0;
        w
    }

    #[test]
    fn conv_identity_kernel_preserves_input() {
        let x = Tensor::from_fn(&[1, 4, 5, 1], |i| i as f32 * 0.3 - 2.0);
        let y = conv2d_forward(&x, &identity_kernel(), &Tensor::zeros(&[1])).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn conv_ones_matches_sliding_window() {
        let x = Tensor::filled(&[1, 3, 3, 1], 1.0f32);
        let w = Tensor::filled(&[3, 3, 1, 1], 1.0f32);
        let y = conv2d_forward(&x, &w, &Tensor::zeros(&[1])).unwrap();
        let want = [4.0, 6.0, 4.0, 6.0, 9.0, 6.0, 4.0, 6.0, 4.0];
        assert_eq!(y.data(), want);
    }

    #[test]
    fn conv_bias_only() {
        let x = Tensor::from_fn(&[2, 3, 3, 2], |i| i as f32);
        let w = Tensor::zeros(&[3, 3, 2, 4]);
        let mut b = Tensor::zeros(&[4]);
        b.data_mut().copy_from_slice(&[1.5, -2.0, 0.0, 3.0]);
        let y = conv2d_forward(&x, &w, &b).unwrap();
        for row in y.data().chunks_exact(4) {
            assert_eq!(row, b.data());
        }
    }

    #[test]
    fn conv_channel_mismatch_rejected() {
        let x = Tensor::<f32>::zeros(&[1, 4, 4, 3]);
        let w = Tensor::zeros(&[3, 3, 2, 8]);
        assert!(conv2d_forward(&x, &w, &Tensor::zeros(&[8])).is_err());
    }

    #[test]
    fn conv_backward_zero_grad_out() {
        let x = Tensor::from_fn(&[1, 4, 4, 2], |i| i as f32 * 0.1);
        let w = Tensor::from_fn(&[3, 3, 2, 3], |i| i as f32 * 0.01);
        let g = Tensor::zeros(&[1, 4, 4, 3]);
        let (gx, gw, gb) = conv2d_backward(&x, &w, &g).unwrap();
        assert!(gx.data().iter().all(|&v| v == 0.0));
        assert!(gw.data().iter().all(|&v| v == 0.0));
        assert!(gb.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn conv_backward_identity_kernel_routes_grad_through() {
        let x = Tensor::from_fn(&[1, 3, 3, 1], |i| i as f32);
        let mut g = Tensor::zeros(&[1, 3, 3, 1]);
        g.data_mut()[4] = 1.0; // single pixel
        let (gx, _, _) = conv2d_backward(&x, &identity_kernel(), &g).unwrap();
        assert_eq!(gx, g);
    }

    #[test]
    fn pool_single_window() {
        let x = t(&[1, 2, 2, 1], &[1.0, 2.0, 3.0, 4.0]);
        let (y, idx) = maxpool2x2_forward(&x).unwrap();
        assert_eq!(y.data(), &[4.0]);
        assert_eq!(idx.winners, vec![3]);
    }

    #[test]
    fn pool_floor_discards_odd_edge() {
        let x = Tensor::from_fn(&[1, 21, 21, 1], |i| i as f32);
        let (y, _) = maxpool2x2_forward(&x).unwrap();
        assert_eq!(y.shape(), &[1, 10, 10, 1]);
        // The discarded last row/column never contributes.
        let x5 = Tensor::from_fn(&[1, 5, 5, 1], |i| i as f32);
        let (y5, idx5) = maxpool2x2_forward(&x5).unwrap();
        assert_eq!(y5.shape(), &[1, 2, 2, 1]);
        assert!(idx5.winners.iter().all(|&w| {
            let (y, x) = ((w as usize / 5) % 5, w as usize % 5);
            y < 4 && x < 4
        }));
    }

    #[test]
    fn pool_tie_goes_to_lowest_index_and_backward_routes_once() {
        let x = Tensor::filled(&[1, 4, 4, 1], 7.0f32);
        let (y, idx) = maxpool2x2_forward(&x).unwrap();
        assert!(y.data().iter().all(|&v| v == 7.0));
        // Lowest flat index of each window is its top-left corner.
        assert_eq!(idx.winners, vec![0, 2, 8, 10]);
        let g = Tensor::filled(&[1, 2, 2, 1], 1.0f32);
        let gx = maxpool2x2_backward(&idx, &g).unwrap();
        assert_eq!(gx.data().iter().filter(|&&v| v != 0.0).count(), 4);
        assert_eq!(gx.sum_all(), 4.0);
    }

    #[test]
    fn pool_rejects_tiny_input_and_stale_map() {
        assert!(maxpool2x2_forward(&Tensor::<f32>::zeros(&[1, 1, 4, 1])).is_err());
        let (_, idx) = maxpool2x2_forward(&Tensor::<f32>::zeros(&[1, 4, 4, 1])).unwrap();
        let wrong = Tensor::<f32>::zeros(&[1, 3, 3, 1]);
        assert!(matches!(
            maxpool2x2_backward(&idx, &wrong),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn leaky_relu_definition() {
        let x = t(&[3], &[2.0, -1.0, 0.0]);
        let y = leaky_relu_forward(&x, 0.3);
        assert_eq!(y.data(), &[2.0, -0.3, 0.0]);
        // Subgradient at 0 is alpha.
        let g = leaky_relu_backward(&x, &t(&[3], &[1.0, 1.0, 1.0]), 0.3).unwrap();
        assert_eq!(g.data(), &[1.0, 0.3, 0.3]);
    }

    #[test]
    fn dense_identity_and_hand_case() {
        let x = t(&[1, 2], &[1.0, 2.0]);
        let y = dense_forward(&x, &Tensor::eye(2), &Tensor::zeros(&[2])).unwrap();
        assert_eq!(y, x);
        let y = dense_forward(&x, &Tensor::eye(2), &t(&[2], &[10.0, 20.0])).unwrap();
        assert_eq!(y.data(), &[11.0, 22.0]);
    }

    #[test]
    fn dense_backward_shapes_and_bias_columns() {
        let x = Tensor::from_fn(&[3, 4], |i| i as f32 * 0.5);
        let w = Tensor::from_fn(&[4, 2], |i| i as f32 * 0.1);
        let g = Tensor::filled(&[3, 2], 1.0f32);
        let (gx, gw, gb) = dense_backward(&x, &w, &g).unwrap();
        assert_eq!(gx.shape(), x.shape());
        assert_eq!(gw.shape(), w.shape());
        assert_eq!(gb.data(), &[3.0, 3.0]);
    }

    #[test]
    fn dropout_identity_paths() {
        let x = Tensor::from_fn(&[10], |i| i as f32);
        let mut rng = CounterRng::new(1);
        let (y, mask) = dropout_forward(&x, 0.0, true, &mut rng).unwrap();
        assert_eq!(y, x);
        assert!(mask.is_none());
        let (y, mask) = dropout_forward(&x, 0.7, false, &mut rng).unwrap();
        assert_eq!(y, x);
        assert!(mask.is_none());
    }

    #[test]
    fn dropout_preserves_mean_at_scale() {
        let x = Tensor::filled(&[1_000_000], 1.0f32);
        let mut rng = CounterRng::from_parts(&[99, 0]);
        let (y, mask) = dropout_forward(&x, 0.5, true, &mut rng).unwrap();
        let mean = y.data().iter().map(|&v| v as f64).sum::<f64>() / 1e6;
        assert!((0.95..=1.05).contains(&mean), "mean {mean}");
        // Backward reuses the identical mask.
        let g = dropout_backward(&Tensor::filled(&[1_000_000], 1.0f32), mask.as_deref());
        assert_eq!(g.data(), y.data());
    }

    #[test]
    fn softmax_uniform_logits_gives_ln_c() {
        let logits = Tensor::<f64>::zeros(&[2, 4]);
        let labels = Tensor::from_fn(&[2, 4], |i| if i % 4 == 0 { 1.0 } else { 0.0 });
        let (loss, probs, _) = softmax_xent(&logits, &labels).unwrap();
        assert!((loss - 4.0f64.ln()).abs() < 1e-12);
        assert!(probs.data().iter().all(|&p| (p - 0.25).abs() < 1e-12));
    }

    #[test]
    fn softmax_max_shift_handles_huge_logits() {
        let logits = t(&[1, 2], &[1000.0, 0.0]);
        let labels = t(&[1, 2], &[1.0, 0.0]);
        let (loss, probs, _) = softmax_xent(&logits, &labels).unwrap();
        assert!(loss.is_finite());
        assert!(loss.abs() < 1e-6, "loss {loss}");
        assert!(probs.is_finite());
    }

    #[test]
    fn softmax_grad_is_probs_minus_labels_over_n() {
        let logits = t(&[2, 3], &[0.2, -0.4, 1.0, 0.0, 0.5, -0.5]);
        let labels = t(&[2, 3], &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
        let (_, probs, grad) = softmax_xent(&logits, &labels).unwrap();
        for i in 0..6 {
            let want = (probs.data()[i] - labels.data()[i]) / 2.0;
            assert!((grad.data()[i] - want).abs() < 1e-7);
        }
        // Rows of probs sum to 1.
        for row in probs.data().chunks_exact(3) {
            assert!((row.iter().sum::<f32>() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn softmax_rejects_bad_labels() {
        let logits = Tensor::<f32>::zeros(&[1, 3]);
        let labels = t(&[1, 3], &[0.5, 0.5, 0.0]);
        assert!(matches!(
            softmax_xent(&logits, &labels),
            Err(Error::Contract(_))
        ));
    }
}
