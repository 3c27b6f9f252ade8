//! Save a seeded model to the binary checkpoint container, reload it, and
//! verify the reloaded model evaluates bit-identically.
//!
//! ```bash
//! cargo run --example checkpoint_roundtrip
//! ```

use mcnn::checkpoint;
use mcnn::config::ExperimentConfig;
use mcnn::nn::{build_proposed_cnn, Model};
use mcnn::optim::AdamW;
use mcnn::rng::CounterRng;
use mcnn::tensor::Tensor;

fn main() -> mcnn::Result<()> {
    let cfg = ExperimentConfig::default();
    let spec = build_proposed_cnn((168, 168, 3), 4)?;
    let mut rng = CounterRng::new(99);
    let model = Model::seeded(spec, &mut rng)?;
    let opt = AdamW::new(model.params(), cfg.adamw());

    let path = std::env::temp_dir().join("mcnn_roundtrip.mcn1");
    checkpoint::save(&path, &model, Some(&opt), &cfg, 0, 0)?;
    let bytes = std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0);
    println!("wrote {} ({:.1} MiB)", path.display(), bytes as f64 / (1024.0 * 1024.0));

    let loaded = checkpoint::load(&path)?;
    let x = Tensor::from_fn(&[2, 168, 168, 3], |i| (i % 251) as f32 / 251.0);
    let before = model.forward_eval(&x)?;
    let after = loaded.model.forward_eval(&x)?;
    assert_eq!(before, after, "eval outputs must round-trip bit-exactly");
    println!("eval outputs identical after reload: {:?}", &after.data()[..4]);

    std::fs::remove_file(&path).ok();
    Ok(())
}
