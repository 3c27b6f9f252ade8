//! Plan stratified 10-fold cross-validation over an index with the class
//! proportions of a 3,064-slice three-class corpus, and show per-fold class
//! balance plus the JSON serialization.
//!
//! ```bash
//! cargo run --example fold_planning
//! ```

use std::path::PathBuf;

use mcnn::cv::{make_folds, Strategy};
use mcnn::data::DatasetIndex;

fn main() -> mcnn::Result<()> {
    let counts = [("glioma", 1426usize), ("meningioma", 708), ("pituitary", 930)];
    let class_names: Vec<String> = counts.iter().map(|(n, _)| n.to_string()).collect();
    let mut samples = Vec::new();
    for (class_id, (name, count)) in counts.iter().enumerate() {
        for i in 0..*count {
            samples.push((PathBuf::from(format!("{name}/{i:05}.png")), class_id));
        }
    }
    let index = DatasetIndex::from_parts(class_names, samples)?;

    for strategy in [Strategy::Stratified, Strategy::Plain] {
        let plan = make_folds(&index, 10, 42, strategy)?;
        println!("{strategy} folds over {} samples:", plan.n_samples());
        for (f, fold) in plan.folds.iter().enumerate() {
            let mut per_class = [0usize; 3];
            for &i in fold {
                per_class[index.label(i)] += 1;
            }
            println!(
                "  fold {f}: {:4} test ({} glioma / {} meningioma / {} pituitary)",
                fold.len(),
                per_class[0],
                per_class[1],
                per_class[2]
            );
        }
    }

    let plan = make_folds(&index, 10, 42, Strategy::Stratified)?;
    let json = plan.to_json();
    println!("\nserialized plan: {} bytes of JSON; first 120:", json.len());
    println!("{}...", &json[..120.min(json.len())]);
    Ok(())
}
