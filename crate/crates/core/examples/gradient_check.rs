//! Check every layer's analytic backward pass against 64-bit central
//! finite differences on random small instances.
//!
//! ```bash
//! cargo run --example gradient_check
//! ```

use mcnn::nn::gradcheck::{max_rel_err, numerical_grad, DEFAULT_STEP};
use mcnn::nn::ops;
use mcnn::rng::CounterRng;
use mcnn::tensor::Tensor;

fn random(rng: &mut CounterRng, shape: &[usize]) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.uniform(-1.0, 1.0))
}

fn main() {
    let mut rng = CounterRng::new(2024);

    // Convolution: d/dx of sum(conv(x) * g).
    let x = random(&mut rng, &[2, 5, 5, 2]);
    let w = random(&mut rng, &[3, 3, 2, 3]);
    let b = random(&mut rng, &[3]);
    let g = random(&mut rng, &[2, 5, 5, 3]);
    let (gx, gw, _) = ops::conv2d_backward(&x, &w, &g).unwrap();
    let num_x = numerical_grad(
        x.data(),
        |d| {
            let probe = Tensor::from_vec(x.shape(), d.to_vec()).unwrap();
            let y = ops::conv2d_forward(&probe, &w, &b).unwrap();
            y.data().iter().zip(g.data()).map(|(a, b)| a * b).sum()
        },
        DEFAULT_STEP,
    );
    println!("conv2d   grad_x rel err: {:.2e}", max_rel_err(gx.data(), &num_x));
    let num_w = numerical_grad(
        w.data(),
        |d| {
            let probe = Tensor::from_vec(w.shape(), d.to_vec()).unwrap();
            let y = ops::conv2d_forward(&x, &probe, &b).unwrap();
            y.data().iter().zip(g.data()).map(|(a, b)| a * b).sum()
        },
        DEFAULT_STEP,
    );
    println!("conv2d   grad_w rel err: {:.2e}", max_rel_err(gw.data(), &num_w));

    // Dense layer.
    let x = random(&mut rng, &[4, 6]);
    let w = random(&mut rng, &[6, 3]);
    let b = random(&mut rng, &[3]);
    let g = random(&mut rng, &[4, 3]);
    let (gx, gw, _) = ops::dense_backward(&x, &w, &g).unwrap();
    let num_x = numerical_grad(
        x.data(),
        |d| {
            let probe = Tensor::from_vec(x.shape(), d.to_vec()).unwrap();
            let y = ops::dense_forward(&probe, &w, &b).unwrap();
            y.data().iter().zip(g.data()).map(|(a, b)| a * b).sum()
        },
        DEFAULT_STEP,
    );
    println!("dense    grad_x rel err: {:.2e}", max_rel_err(gx.data(), &num_x));
    let num_w = numerical_grad(
        w.data(),
        |d| {
            let probe = Tensor::from_vec(w.shape(), d.to_vec()).unwrap();
            let y = ops::dense_forward(&x, &probe, &b).unwrap();
            y.data().iter().zip(g.data()).map(|(a, b)| a * b).sum()
        },
        DEFAULT_STEP,
    );
    println!("dense    grad_w rel err: {:.2e}", max_rel_err(gw.data(), &num_w));

    // Max pooling (inputs separated so no window ties).
    let x = Tensor::<f64>::from_fn(&[1, 6, 6, 2], |i| {
        (i as f64 * 0.613).sin() + i as f64 * 1e-3
    });
    let g = random(&mut rng, &[1, 3, 3, 2]);
    let (_, idx) = ops::maxpool2x2_forward(&x).unwrap();
    let gx = ops::maxpool2x2_backward(&idx, &g).unwrap();
    let num = numerical_grad(
        x.data(),
        |d| {
            let probe = Tensor::from_vec(x.shape(), d.to_vec()).unwrap();
            let (y, _) = ops::maxpool2x2_forward(&probe).unwrap();
            y.data().iter().zip(g.data()).map(|(a, b)| a * b).sum()
        },
        DEFAULT_STEP,
    );
    println!("maxpool  grad_x rel err: {:.2e}", max_rel_err(gx.data(), &num));

    // LeakyReLU (inputs pushed away from the kink at 0).
    let x = random(&mut rng, &[20]).map(|v| if v.abs() < 0.05 { v + 0.1 } else { v });
    let g = random(&mut rng, &[20]);
    let gx = ops::leaky_relu_backward(&x, &g, 0.3).unwrap();
    let num = numerical_grad(
        x.data(),
        |d| {
            let probe = Tensor::from_vec(x.shape(), d.to_vec()).unwrap();
            let y = ops::leaky_relu_forward(&probe, 0.3);
            y.data().iter().zip(g.data()).map(|(a, b)| a * b).sum()
        },
        DEFAULT_STEP,
    );
    println!("lrelu    grad_x rel err: {:.2e}", max_rel_err(gx.data(), &num));

    // Softmax cross-entropy: the loss gradient itself.
    let logits = random(&mut rng, &[3, 4]);
    let labels = Tensor::<f64>::from_fn(&[3, 4], |i| f64::from(i % 4 == (i / 4) % 4));
    let (_, _, grad) = ops::softmax_xent(&logits, &labels).unwrap();
    let num = numerical_grad(
        logits.data(),
        |d| {
            let probe = Tensor::from_vec(logits.shape(), d.to_vec()).unwrap();
            ops::softmax_xent(&probe, &labels).unwrap().0
        },
        DEFAULT_STEP,
    );
    println!("softmax  grad   rel err: {:.2e}", max_rel_err(grad.data(), &num));
}
