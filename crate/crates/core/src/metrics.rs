//! Confusion matrix, precision/recall/F1, ROC curves and cross-fold
//! aggregation.
//!
//! All rates are computed in f64. Per-class metrics are one-vs-rest; macro
//! values are unweighted means over classes. Degenerate cases (a class with
//! no predictions or no truth) yield 0 with a flag instead of NaN so fold
//! aggregates stay well defined.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Row = true class, column = predicted class.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: Vec<String>,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    /// Count (true, predicted) label pairs. Labels must lie in
    /// `[0, classes.len())` and the input must be non-empty.
    pub fn from_labels(
        classes: Vec<String>,
        true_labels: &[usize],
        predicted: &[usize],
    ) -> Result<Self> {
        if true_labels.is_empty() {
            return Err(Error::Contract("confusion matrix over no samples".into()));
        }
        if true_labels.len() != predicted.len() {
            return Err(Error::Contract(format!(
                "{} true labels vs {} predictions",
                true_labels.len(),
                predicted.len()
            )));
        }
        let c = classes.len();
        let mut counts = vec![0u64; c * c];
        for (&t, &p) in true_labels.iter().zip(predicted) {
            if t >= c || p >= c {
                return Err(Error::Contract(format!(
                    "label pair ({t}, {p}) outside {c} classes"
                )));
            }
            counts[t * c + p] += 1;
        }
        Ok(ConfusionMatrix { classes, counts })
    }

    pub fn from_counts(classes: Vec<String>, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != classes.len() * classes.len() {
            return Err(Error::Contract(format!(
                "{} counts for a {}-class matrix",
                counts.len(),
                classes.len()
            )));
        }
        Ok(ConfusionMatrix { classes, counts })
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.classes
    }

    pub fn at(&self, true_class: usize, predicted: usize) -> u64 {
        self.counts[true_class * self.classes.len() + predicted]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes.len()).map(|i| self.at(i, i)).sum()
    }

    fn row_sum(&self, class: usize) -> u64 {
        (0..self.classes.len()).map(|p| self.at(class, p)).sum()
    }

    fn col_sum(&self, class: usize) -> u64 {
        (0..self.classes.len()).map(|t| self.at(t, class)).sum()
    }

    /// Elementwise sum with another matrix over the same class table.
    pub fn merge(&self, other: &ConfusionMatrix) -> Result<ConfusionMatrix> {
        if self.classes != other.classes {
            return Err(Error::Contract(format!(
                "cannot pool confusion matrices over {:?} and {:?}",
                self.classes, other.classes
            )));
        }
        let counts = self
            .counts
            .iter()
            .zip(&other.counts)
            .map(|(a, b)| a + b)
            .collect();
        Ok(ConfusionMatrix {
            classes: self.classes.clone(),
            counts,
        })
    }
}

/// `trace / total`: the multiclass generalization of (TP+TN)/(TP+FP+TN+FN).
pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Domain("accuracy of an empty confusion matrix".into()));
    }
    Ok(cm.trace() as f64 / total as f64)
}

/// One-vs-rest precision, recall and F1 for a single class. `degenerate`
/// marks zero-denominator cases, which report 0 instead of NaN.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassPrf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub degenerate: bool,
}

/// Per-class precision `TP/(TP+FP)`, recall `TP/(TP+FN)` and their harmonic
/// mean.
pub fn precision_recall_f1(cm: &ConfusionMatrix) -> Vec<ClassPrf> {
    (0..cm.n_classes())
        .map(|c| {
            let tp = cm.at(c, c) as f64;
            let col = cm.col_sum(c) as f64;
            let row = cm.row_sum(c) as f64;
            let degenerate = col == 0.0 || row == 0.0;
            let precision = if col == 0.0 { 0.0 } else { tp / col };
            let recall = if row == 0.0 { 0.0 } else { tp / row };
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            ClassPrf {
                precision,
                recall,
                f1,
                degenerate,
            }
        })
        .collect()
}

/// `(2/C) * sum_c P_c R_c / (P_c + R_c)`, with zero-sum terms contributing
/// nothing. Algebraically the mean of the per-class F1 scores.
pub fn macro_f1(per_class: &[ClassPrf]) -> f64 {
    let c = per_class.len() as f64;
    let sum: f64 = per_class
        .iter()
        .map(|prf| {
            let denom = prf.precision + prf.recall;
            if denom == 0.0 {
                0.0
            } else {
                prf.precision * prf.recall / denom
            }
        })
        .sum();
    2.0 / c * sum
}

/// One point of a ROC sweep. The first point is the (0, 0) anchor with an
/// infinite threshold; the final point is always (1, 1).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// Sweep thresholds over every distinct score, descending; tied scores move
/// the curve in one step. Both classes must be present.
pub fn roc_curve(scores: &[f64], truth: &[bool]) -> Result<Vec<RocPoint>> {
    if scores.len() != truth.len() {
        return Err(Error::Contract(format!(
            "{} scores vs {} labels",
            scores.len(),
            truth.len()
        )));
    }
    let pos = truth.iter().filter(|&&t| t).count();
    let neg = truth.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Domain(
            "roc is undefined when only one class is present".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("finite scores"));

    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        // Consume the whole tie group before emitting a point.
        while i < order.len() && scores[order[i]] == threshold {
            if truth[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold,
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
        });
    }
    Ok(points)
}

/// Trapezoid area under an ordered ROC point list.
pub fn auc(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[0].tpr + w[1].tpr) / 2.0)
        .sum()
}

/// Everything measured on one evaluation pass.
#[derive(Clone, Debug)]
pub struct MetricsReport {
    pub confusion: ConfusionMatrix,
    pub per_class: Vec<ClassPrf>,
    pub accuracy: f64,
    pub macro_f1: f64,
    /// Per-class one-vs-rest ROC points; `None` when undefined for a class.
    pub roc: Vec<Option<Vec<RocPoint>>>,
    pub auc_per_class: Vec<Option<f64>>,
    /// Mean of the defined per-class AUCs.
    pub macro_auc: Option<f64>,
}

/// Full evaluation: argmax predictions (lowest index on ties), confusion
/// matrix, per-class rates, and a one-vs-rest ROC per class scored by the
/// softmax probabilities.
pub fn evaluate(
    class_names: &[String],
    true_labels: &[usize],
    probs: &Tensor,
) -> Result<MetricsReport> {
    let c = class_names.len();
    if probs.shape() != [true_labels.len(), c] {
        return Err(Error::Contract(format!(
            "probability matrix {:?} does not cover {} samples x {} classes",
            probs.shape(),
            true_labels.len(),
            c
        )));
    }
    let predicted = probs.argmax_rows()?;
    let confusion = ConfusionMatrix::from_labels(class_names.to_vec(), true_labels, &predicted)?;
    let per_class = precision_recall_f1(&confusion);
    let accuracy = accuracy(&confusion)?;
    let macro_f1 = macro_f1(&per_class);

    let mut roc = Vec::with_capacity(c);
    let mut auc_per_class = Vec::with_capacity(c);
    for class in 0..c {
        let scores: Vec<f64> = (0..true_labels.len())
            .map(|i| probs.data()[i * c + class] as f64)
            .collect();
        let truth: Vec<bool> = true_labels.iter().map(|&t| t == class).collect();
        match roc_curve(&scores, &truth) {
            Ok(points) => {
                auc_per_class.push(Some(auc(&points)));
                roc.push(Some(points));
            }
            Err(_) => {
                auc_per_class.push(None);
                roc.push(None);
            }
        }
    }
    let defined: Vec<f64> = auc_per_class.iter().flatten().copied().collect();
    let macro_auc = if defined.is_empty() {
        None
    } else {
        Some(defined.iter().sum::<f64>() / defined.len() as f64)
    };

    Ok(MetricsReport {
        confusion,
        per_class,
        accuracy,
        macro_f1,
        roc,
        auc_per_class,
        macro_auc,
    })
}

/// Mean and population standard deviation of one scalar across folds.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub name: String,
    pub mean: f64,
    pub std: f64,
    /// Folds the scalar was defined in.
    pub folds: usize,
}

/// Cross-fold aggregate: per-metric mean/std plus the pooled confusion
/// matrix.
#[derive(Clone, Debug)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
    pub pooled_confusion: ConfusionMatrix,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Aggregate fold reports that share a class table.
pub fn aggregate(reports: &[MetricsReport]) -> Result<Summary> {
    let first = reports
        .first()
        .ok_or_else(|| Error::Contract("aggregate over zero fold reports".into()))?;
    let classes = first.confusion.class_names().to_vec();
    let mut pooled = first.confusion.clone();
    for report in &reports[1..] {
        pooled = pooled.merge(&report.confusion)?;
    }

    let mut rows = Vec::new();
    let mut push = |name: String, values: Vec<f64>| {
        if values.is_empty() {
            return;
        }
        let (mean, std) = mean_std(&values);
        rows.push(SummaryRow {
            name,
            mean,
            std,
            folds: values.len(),
        });
    };

    push("accuracy".into(), reports.iter().map(|r| r.accuracy).collect());
    push("macro_f1".into(), reports.iter().map(|r| r.macro_f1).collect());
    push(
        "macro_auc".into(),
        reports.iter().filter_map(|r| r.macro_auc).collect(),
    );
    for (c, name) in classes.iter().enumerate() {
        push(
            format!("precision_{name}"),
            reports.iter().map(|r| r.per_class[c].precision).collect(),
        );
        push(
            format!("recall_{name}"),
            reports.iter().map(|r| r.per_class[c].recall).collect(),
        );
        push(
            format!("f1_{name}"),
            reports.iter().map(|r| r.per_class[c].f1).collect(),
        );
        push(
            format!("auc_{name}"),
            reports.iter().filter_map(|r| r.auc_per_class[c]).collect(),
        );
    }

    Ok(Summary {
        rows,
        pooled_confusion: pooled,
    })
}
