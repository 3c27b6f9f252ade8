//! Procedural image fixtures.
//!
//! Generates a small class-per-directory dataset of structured grayscale
//! patterns (stripes, checkers, rings) with per-image jitter. Used by the
//! runnable examples and the test suites, so nothing in the repository
//! depends on downloading real data.

use std::f64::consts::PI;
use std::path::Path;

use crate::error::{Error, Result};
use crate::rng::CounterRng;

/// Pattern families, one per class. Names sort in this order.
pub const CLASS_NAMES: [&str; 4] = ["checker", "hstripes", "rings", "vstripes"];

/// Pixel intensity in [0, 1] for a class pattern at (y, x) of an
/// `extent`-sized image. `freq` and `phase` jitter individual images.
fn pattern(class: usize, y: f64, x: f64, extent: f64, freq: f64, phase: f64) -> f64 {
    let wave = |t: f64| (2.0 * PI * freq * t / extent + phase).sin();
    let v = match class {
        0 => wave(x) * wave(y),
        1 => wave(y),
        2 => {
            let (cy, cx) = (extent / 2.0, extent / 2.0);
            let r = ((y - cy).powi(2) + (x - cx).powi(2)).sqrt();
            wave(r)
        }
        _ => wave(x),
    };
    0.5 + 0.45 * v
}

/// Write `per_class` PNGs for each of the four pattern classes under
/// `root/<class_name>/`. Deterministic in `seed`.
pub fn write_synthetic_dataset(
    root: &Path,
    extent: u32,
    per_class: usize,
    seed: u64,
) -> Result<()> {
    for (class, name) in CLASS_NAMES.iter().enumerate() {
        let dir = root.join(name);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for i in 0..per_class {
            let mut rng = CounterRng::from_parts(&[seed, class as u64, i as u64]);
            let freq = rng.uniform(4.0, 8.0);
            let phase = rng.uniform(0.0, 2.0 * PI);
            let gain = rng.uniform(0.85, 1.0);
            let img = image::GrayImage::from_fn(extent, extent, |x, y| {
                let v = pattern(class, y as f64, x as f64, extent as f64, freq, phase) * gain;
                image::Luma([(v.clamp(0.0, 1.0) * 255.0).round() as u8])
            });
            let path = dir.join(format!("{name}_{i:04}.png"));
            img.save(&path)
                .map_err(|e| Error::Image { path, reason: e.to_string() })?;
        }
    }
    Ok(())
}
