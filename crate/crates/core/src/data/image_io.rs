//! Image decoding, resizing and normalization.

use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Decode a PNG or JPEG into an `[h, w, 3]` tensor with values in [0, 1].
///
/// Grayscale sources are replicated across the three channels, then the
/// image is bilinearly resized to `target` (height, width) and divided
/// by 255.
pub fn load_image(path: &Path, target: (usize, usize)) -> Result<Tensor> {
    let decoded = image::open(path).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let rgb = decoded.to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let raw: Vec<f32> = rgb.into_raw().iter().map(|&b| b as f32 / 255.0).collect();
    let (th, tw) = target;
    let resized = resize_bilinear(&raw, h, w, 3, th, tw);
    Tensor::from_vec(&[th, tw, 3], resized)
}

/// Bilinear resampling with half-pixel centers and edge clamping.
///
/// Destination pixel (y, x) samples the source at
/// `((y + 0.5) * sh / dh - 0.5, (x + 0.5) * sw / dw - 0.5)`.
pub fn resize_bilinear(
    src: &[f32],
    sh: usize,
    sw: usize,
    channels: usize,
    dh: usize,
    dw: usize,
) -> Vec<f32> {
    assert_eq!(src.len(), sh * sw * channels);
    if (sh, sw) == (dh, dw) {
        return src.to_vec();
    }
    let mut dst = vec![0.0f32; dh * dw * channels];
    let sy_scale = sh as f32 / dh as f32;
    let sx_scale = sw as f32 / dw as f32;
    for y in 0..dh {
        let sy = ((y as f32 + 0.5) * sy_scale - 0.5).clamp(0.0, (sh - 1) as f32);
        let y0 = sy.floor() as usize;
        let y1 = (y0 + 1).min(sh - 1);
        let fy = sy - y0 as f32;
        for x in 0..dw {
            let sx = ((x as f32 + 0.5) * sx_scale - 0.5).clamp(0.0, (sw - 1) as f32);
            let x0 = sx.floor() as usize;
            let x1 = (x0 + 1).min(sw - 1);
            let fx = sx - x0 as f32;
            for c in 0..channels {
                let p00 = src[(y0 * sw + x0) * channels + c];
                let p01 = src[(y0 * sw + x1) * channels + c];
                let p10 = src[(y1 * sw + x0) * channels + c];
                let p11 = src[(y1 * sw + x1) * channels + c];
                let top = p00 + (p01 - p00) * fx;
                let bottom = p10 + (p11 - p10) * fx;
                dst[(y * dw + x) * channels + c] = top + (bottom - top) * fy;
            }
        }
    }
    dst
}

/// Quick magic-byte check used while scanning: PNG signature or JPEG SOI.
pub(crate) fn sniff_decodable(path: &Path) -> bool {
    use std::io::Read;
    let mut head = [0u8; 8];
    let Ok(mut file) = std::fs::File::open(path) else {
        return false;
    };
    let Ok(n) = file.read(&mut head) else {
        return false;
    };
    (n >= 8 && head == [0x89, b'P', b'N', b'G', 0x0D, 0x0A, 0x1A, 0x0A])
        || (n >= 3 && head[0] == 0xFF && head[1] == 0xD8 && head[2] == 0xFF)
}
