//! Training-time image augmentation.
//!
//! The geometric transforms (flip, rotation, zoom, shift) compose into a
//! single affine warp sampled bilinearly with nearest-edge fill, so the
//! image is resampled exactly once. Brightness scaling is applied after the
//! geometry and the result is clamped back to [0, 1].

use crate::error::Result;
use crate::rng::CounterRng;
use crate::tensor::Tensor;

/// Sampling ranges for one augmentation draw. The defaults are the training
/// pipeline's policy: flips half the time, rotations within two degrees,
/// brightness 0.8-1.2, zoom 95-105%, shifts up to 1% of the extent per axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AugmentPolicy {
    pub enabled: bool,
    pub flip_prob: f64,
    /// Rotation is uniform in [-rotation_degrees, +rotation_degrees].
    pub rotation_degrees: f64,
    pub brightness: (f64, f64),
    pub zoom: (f64, f64),
    /// Shift per axis is uniform in [-shift_fraction, +shift_fraction],
    /// as a fraction of the image extent along that axis.
    pub shift_fraction: f64,
}

impl Default for AugmentPolicy {
    fn default() -> Self {
        AugmentPolicy {
            enabled: true,
            flip_prob: 0.5,
            rotation_degrees: 2.0,
            brightness: (0.8, 1.2),
            zoom: (0.95, 1.05),
            shift_fraction: 0.01,
        }
    }
}

impl AugmentPolicy {
    /// The identity policy used for evaluation streams.
    pub fn disabled() -> Self {
        AugmentPolicy {
            enabled: false,
            ..Default::default()
        }
    }
}

/// One concrete draw from an [`AugmentPolicy`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AugmentParams {
    pub flip: bool,
    pub rotation_deg: f64,
    pub zoom: f64,
    pub shift_x: f64,
    pub shift_y: f64,
    pub brightness: f64,
}

impl AugmentParams {
    /// Parameters that leave the image untouched.
    pub fn identity() -> Self {
        AugmentParams {
            flip: false,
            rotation_deg: 0.0,
            zoom: 1.0,
            shift_x: 0.0,
            shift_y: 0.0,
            brightness: 1.0,
        }
    }
}

/// Draw augmentation factors. The draw order is fixed (flip, rotation,
/// zoom, shift x, shift y, brightness) so a key always yields the same
/// parameters.
pub fn sample_params(policy: &AugmentPolicy, rng: &mut CounterRng) -> AugmentParams {
    let params = AugmentParams {
        flip: rng.bool(policy.flip_prob),
        rotation_deg: rng.uniform(-policy.rotation_degrees, policy.rotation_degrees),
        zoom: rng.uniform(policy.zoom.0, policy.zoom.1),
        shift_x: rng.uniform(-policy.shift_fraction, policy.shift_fraction),
        shift_y: rng.uniform(-policy.shift_fraction, policy.shift_fraction),
        brightness: rng.uniform(policy.brightness.0, policy.brightness.1),
    };
    debug_assert!(params.rotation_deg.abs() <= policy.rotation_degrees);
    debug_assert!(params.zoom >= policy.zoom.0 && params.zoom <= policy.zoom.1);
    debug_assert!(params.shift_x.abs() <= policy.shift_fraction);
    debug_assert!(params.shift_y.abs() <= policy.shift_fraction);
    debug_assert!(params.brightness >= policy.brightness.0 && params.brightness <= policy.brightness.1);
    params
}

/// Augment an `[h, w, c]` image in [0, 1]: geometry in one warp, then
/// brightness, then clamp. All randomness comes from the counter stream
/// for `rng_key`, so the result is a pure function of (image, policy, key).
pub fn augment(image: &Tensor, policy: &AugmentPolicy, rng_key: u64) -> Result<Tensor> {
    if !policy.enabled {
        return Ok(image.clone());
    }
    let mut rng = CounterRng::new(rng_key);
    let params = sample_params(policy, &mut rng);
    apply(image, &params)
}

/// Apply fixed augmentation parameters to an `[h, w, c]` image.
pub fn apply(image: &Tensor, params: &AugmentParams) -> Result<Tensor> {
    let (h, w, c) = match image.shape() {
        [h, w, c] => (*h, *w, *c),
        other => {
            return Err(crate::error::Error::Domain(format!(
                "augment needs an [h, w, c] image, got {other:?}"
            )))
        }
    };
    let (cy, cx) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);

    // Source -> destination coordinates about the center: d = Z R F (s - c),
    // then a translation by (tx, ty). Composed here as one 2x2 matrix.
    let theta = params.rotation_deg.to_radians();
    let (sin, cos) = theta.sin_cos();
    let fx = if params.flip { -1.0 } else { 1.0 };
    let z = params.zoom;
    let m = [z * cos * fx, -z * sin, z * sin * fx, z * cos];
    let det = m[0] * m[3] - m[1] * m[2];
    let inv = [m[3] / det, -m[1] / det, -m[2] / det, m[0] / det];
    let (tx, ty) = (params.shift_x * w as f64, params.shift_y * h as f64);

    let src = image.data();
    let mut out = vec![0.0f32; src.len()];
    for y in 0..h {
        let dy = y as f64 - cy - ty;
        // Walk the row incrementally: moving one pixel right adds the first
        // inverse column to the source coordinates.
        let mut u = inv[0] * (0.0 - cx - tx) + inv[1] * dy + cx;
        let mut v = inv[2] * (0.0 - cx - tx) + inv[3] * dy + cy;
        for x in 0..w {
            // Nearest-edge fill: clamp the sample point into the image.
            let uc = u.clamp(0.0, (w - 1) as f64);
            let vc = v.clamp(0.0, (h - 1) as f64);
            let (x0, y0) = (uc.floor() as usize, vc.floor() as usize);
            let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
            let (fu, fv) = ((uc - x0 as f64) as f32, (vc - y0 as f64) as f32);
            let base = (y * w + x) * c;
            for ch in 0..c {
                let p00 = src[(y0 * w + x0) * c + ch];
                let p01 = src[(y0 * w + x1) * c + ch];
                let p10 = src[(y1 * w + x0) * c + ch];
                let p11 = src[(y1 * w + x1) * c + ch];
                let top = p00 + (p01 - p00) * fu;
                let bottom = p10 + (p11 - p10) * fu;
                out[base + ch] = top + (bottom - top) * fv;
            }
            u += inv[0];
            v += inv[2];
        }
    }

    let brightness = params.brightness as f32;
    for px in &mut out {
        *px = (*px * brightness).clamp(0.0, 1.0);
    }
    Tensor::from_vec(image.shape(), out)
}
