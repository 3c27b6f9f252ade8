//! Central finite-difference gradient checking.
//!
//! The numeric gradient here is the independent oracle for every analytic
//! backward pass in [`super::ops`]: it only evaluates the forward map, never
//! the gradient code it is checking. Checks run in f64; use a step around
//! 1e-5 and keep test points away from ReLU kinks and pooling ties.

/// Step size used throughout the gradient tests.
pub const DEFAULT_STEP: f64 = 1e-5;

/// Central-difference gradient of a scalar-valued function of a buffer:
/// `g[i] = (f(x + h e_i) - f(x - h e_i)) / 2h`.
pub fn numerical_grad(x: &[f64], mut f: impl FnMut(&[f64]) -> f64, step: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    let mut grad = vec![0.0; x.len()];
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + step;
        let plus = f(&probe);
        probe[i] = orig - step;
        let minus = f(&probe);
        probe[i] = orig;
        grad[i] = (plus - minus) / (2.0 * step);
    }
    grad
}

/// Relative error between an analytic and a numeric value. Pairs that are
/// both negligible compare equal, since the finite difference of a genuinely
/// zero gradient is itself noise.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < 1e-10 {
        0.0
    } else {
        (analytic - numeric).abs() / scale
    }
}

/// Worst relative error across two gradient buffers.
pub fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len(), "gradient length mismatch");
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| rel_err(a, n))
        .fold(0.0, f64::max)
}
