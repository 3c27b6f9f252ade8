//! The report path: CSV emission, re-parsing, and cross-fold aggregation
//! over synthetic fold directories.

use std::path::Path;

use mcnn::metrics::{evaluate, MetricsReport};
use mcnn::rng::CounterRng;
use mcnn::runner::{confusion_csv, metrics_csv, read_fold_report, report, roc_csv};
use mcnn::tensor::Tensor;

fn synthetic_report(seed: u64, classes: &[String]) -> MetricsReport {
    let c = classes.len();
    let n = 40;
    let mut rng = CounterRng::new(seed);
    let labels: Vec<usize> = (0..n).map(|i| i % c).collect();
    let mut probs = Vec::with_capacity(n * c);
    for &label in &labels {
        let mut row: Vec<f64> = (0..c).map(|_| rng.uniform(0.05, 0.5)).collect();
        // Mostly right, sometimes wrong.
        if rng.bool(0.8) {
            row[label] += 1.0;
        }
        let sum: f64 = row.iter().sum();
        probs.extend(row.into_iter().map(|v| (v / sum) as f32));
    }
    evaluate(classes, &labels, &Tensor::from_vec(&[n, c], probs).unwrap()).unwrap()
}

fn write_fold(dir: &Path, fold: usize, report: &MetricsReport) {
    let fold_dir = dir.join(format!("fold_{fold}"));
    std::fs::create_dir_all(&fold_dir).unwrap();
    std::fs::write(fold_dir.join("metrics.csv"), metrics_csv(fold, report)).unwrap();
    std::fs::write(fold_dir.join("confusion.csv"), confusion_csv(&report.confusion)).unwrap();
    std::fs::write(fold_dir.join("roc.csv"), roc_csv(report)).unwrap();
}

#[test]
fn emitted_csvs_reparse_to_the_same_report() {
    let classes: Vec<String> = ["glioma", "meningioma", "notumor", "pituitary"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let original = synthetic_report(1, &classes);
    write_fold(dir.path(), 0, &original);

    let parsed = read_fold_report(&dir.path().join("fold_0")).unwrap();
    assert_eq!(parsed.confusion.counts(), original.confusion.counts());
    assert_eq!(parsed.accuracy, original.accuracy);
    assert_eq!(parsed.macro_f1, original.macro_f1);
    for (a, b) in parsed.per_class.iter().zip(&original.per_class) {
        assert_eq!(a.precision, b.precision);
        assert_eq!(a.recall, b.recall);
        assert_eq!(a.f1, b.f1);
        assert_eq!(a.degenerate, b.degenerate);
    }
    // AUCs recomputed from the stored points land on the same values.
    for (a, b) in parsed.auc_per_class.iter().zip(&original.auc_per_class) {
        match (a, b) {
            (Some(x), Some(y)) => assert!((x - y).abs() < 1e-12),
            (None, None) => {}
            other => panic!("auc definedness changed: {other:?}"),
        }
    }
}

#[test]
fn ten_fold_report_aggregates_every_metric() {
    let classes: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
    let dir = tempfile::tempdir().unwrap();
    let reports: Vec<MetricsReport> =
        (0..10).map(|f| synthetic_report(100 + f, &classes)).collect();
    for (fold, r) in reports.iter().enumerate() {
        write_fold(dir.path(), fold, r);
    }

    let summary = report(dir.path()).unwrap();
    assert!(dir.path().join("summary.csv").is_file());
    assert!(dir.path().join("summary.txt").is_file());

    // One row per scalar metric: 3 aggregate + 4 per class.
    let expected_rows = 3 + 4 * classes.len();
    assert_eq!(summary.rows.len(), expected_rows);
    for row in &summary.rows {
        assert_eq!(row.folds, 10, "{} aggregated over {} folds", row.name, row.folds);
        assert!(row.mean.is_finite() && row.std.is_finite());
    }

    // Mean/std spot check against direct arithmetic.
    let acc_row = summary.rows.iter().find(|r| r.name == "accuracy").unwrap();
    let accs: Vec<f64> = reports.iter().map(|r| r.accuracy).collect();
    let mean = accs.iter().sum::<f64>() / 10.0;
    let var = accs.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / 10.0;
    assert!((acc_row.mean - mean).abs() < 1e-12);
    assert!((acc_row.std - var.sqrt()).abs() < 1e-12);

    // Pooled confusion totals add up.
    let total: u64 = reports.iter().map(|r| r.confusion.total()).sum();
    assert_eq!(summary.pooled_confusion.total(), total);

    // summary.csv parses under its schema.
    let text = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("metric,mean,std,folds"));
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), 4);
        cells[1].parse::<f64>().unwrap();
        cells[2].parse::<f64>().unwrap();
        cells[3].parse::<usize>().unwrap();
    }
}

#[test]
fn mixed_class_tables_across_folds_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let four: Vec<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
    let three: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
    write_fold(dir.path(), 0, &synthetic_report(5, &four));
    write_fold(dir.path(), 1, &synthetic_report(6, &three));
    let err = report(dir.path()).unwrap_err();
    assert!(err.to_string().contains("pool"), "{err}");
}

#[test]
fn single_fold_summary_equals_the_fold() {
    let classes: Vec<String> = ["x", "y"].iter().map(|s| s.to_string()).collect();
    let dir = tempfile::tempdir().unwrap();
    let original = synthetic_report(9, &classes);
    write_fold(dir.path(), 0, &original);
    let summary = report(dir.path()).unwrap();
    let acc = summary.rows.iter().find(|r| r.name == "accuracy").unwrap();
    assert_eq!(acc.mean, original.accuracy);
    assert_eq!(acc.std, 0.0);
}
