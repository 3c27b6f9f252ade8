//! Sample the augmentation pipeline: draw factors for many keys, show the
//! observed envelopes, and warp one synthetic image.
//!
//! ```bash
//! cargo run --example augmentation_demo
//! ```

use mcnn::data::{augment, sample_params, AugmentPolicy};
use mcnn::rng::{derive_key, CounterRng};
use mcnn::tensor::Tensor;

fn main() -> mcnn::Result<()> {
    let policy = AugmentPolicy::default();
    let draws = 20_000;

    let mut rot = (f64::MAX, f64::MIN);
    let mut zoom = (f64::MAX, f64::MIN);
    let mut bright = (f64::MAX, f64::MIN);
    let mut shift = (f64::MAX, f64::MIN);
    let mut flips = 0usize;
    for i in 0..draws {
        let mut rng = CounterRng::new(derive_key(&[11, 0, i]));
        let p = sample_params(&policy, &mut rng);
        rot = (rot.0.min(p.rotation_deg), rot.1.max(p.rotation_deg));
        zoom = (zoom.0.min(p.zoom), zoom.1.max(p.zoom));
        bright = (bright.0.min(p.brightness), bright.1.max(p.brightness));
        shift = (shift.0.min(p.shift_x.min(p.shift_y)), shift.1.max(p.shift_x.max(p.shift_y)));
        flips += usize::from(p.flip);
    }
    println!("{draws} draws:");
    println!("  rotation   [{:+.4}, {:+.4}] deg", rot.0, rot.1);
    println!("  zoom       [{:.4}, {:.4}]", zoom.0, zoom.1);
    println!("  brightness [{:.4}, {:.4}]", bright.0, bright.1);
    println!("  shift      [{:+.5}, {:+.5}] of extent", shift.0, shift.1);
    println!("  flip rate  {:.3}", flips as f64 / draws as f64);

    // Warp one image: a bright diagonal band on a dark field.
    let img = Tensor::from_fn(&[168, 168, 3], |i| {
        let (px, _c) = (i / 3, i % 3);
        let (y, x) = (px / 168, px % 168);
        if (y as i64 - x as i64).abs() < 12 {
            0.9
        } else {
            0.1
        }
    });
    let out = augment(&img, &policy, derive_key(&[11, 1, 0]))?;
    let (lo, hi) = out
        .data()
        .iter()
        .fold((f32::MAX, f32::MIN), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let changed = img
        .data()
        .iter()
        .zip(out.data())
        .filter(|(a, b)| a != b)
        .count();
    println!("\naugmented one 168x168 image: pixel range [{lo:.3}, {hi:.3}], {changed} of {} pixels changed", out.len());
    Ok(())
}
