//! Build a full metrics report (confusion matrix, per-class
//! precision/recall/F1, ROC/AUC) from synthetic predictions and print the
//! CSV emissions.
//!
//! ```bash
//! cargo run --example metrics_report
//! ```

use mcnn::metrics::evaluate;
use mcnn::rng::CounterRng;
use mcnn::runner::{confusion_csv, metrics_csv, roc_csv};
use mcnn::tensor::Tensor;

fn main() -> mcnn::Result<()> {
    let class_names: Vec<String> = ["glioma", "meningioma", "notumor", "pituitary"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let n = 200;
    let c = class_names.len();

    // A decent-but-imperfect classifier: probability mass biased toward the
    // true class with seeded noise.
    let mut rng = CounterRng::new(77);
    let labels: Vec<usize> = (0..n).map(|_| rng.below(c as u64) as usize).collect();
    let mut probs = Vec::with_capacity(n * c);
    for &label in &labels {
        let mut row: Vec<f64> = (0..c).map(|_| rng.uniform(0.01, 0.4)).collect();
        row[label] += rng.uniform(0.2, 1.2);
        let sum: f64 = row.iter().sum();
        probs.extend(row.into_iter().map(|v| (v / sum) as f32));
    }
    let probs = Tensor::from_vec(&[n, c], probs)?;

    let report = evaluate(&class_names, &labels, &probs)?;
    println!("accuracy  {:.4}", report.accuracy);
    println!("macro F1  {:.4}", report.macro_f1);
    if let Some(auc) = report.macro_auc {
        println!("macro AUC {auc:.4}");
    }
    for (name, prf) in class_names.iter().zip(&report.per_class) {
        println!(
            "  {name:<12} P {:.3}  R {:.3}  F1 {:.3}",
            prf.precision, prf.recall, prf.f1
        );
    }

    println!("\n--- metrics.csv ---\n{}", metrics_csv(0, &report));
    println!("--- confusion.csv ---\n{}", confusion_csv(&report.confusion));
    let roc = roc_csv(&report);
    let head: Vec<&str> = roc.lines().take(6).collect();
    println!("--- roc.csv (first rows) ---\n{}\n...", head.join("\n"));
    Ok(())
}
