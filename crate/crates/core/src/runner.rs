//! Experiment runner: cross-validated training, checkpointing, evaluation
//! and report files.
//!
//! A run directory looks like:
//!
//! ```text
//! <out>/
//!   config.ini          # snapshot of the effective configuration
//!   fold_plan.json      # seed, strategy, per-fold test indices
//!   skip_report.txt     # unreadable files found while scanning (if any)
//!   fold_0/
//!     checkpoint.mcn1   # parameters + optimizer state + metadata
//!     loss.log          # epoch,mean_train_loss
//!     metrics.csv       # fold,class,precision,recall,f1,flag
//!     confusion.csv     # header of class names, then integer count rows
//!     roc.csv           # class,threshold,fpr,tpr
//!   fold_1/ ...
//!   summary.csv         # metric,mean,std,folds   (written by `report`)
//!   summary.txt
//! ```

use std::path::{Path, PathBuf};

use crate::checkpoint;
use crate::config::{ExperimentConfig, Precision};
use crate::cv::{make_folds, FoldPlan};
use crate::data::{batches, DatasetIndex, StreamConfig};
use crate::error::{Error, Result};
use crate::metrics::{self, ClassPrf, ConfusionMatrix, MetricsReport, RocPoint, Summary};
use crate::nn::{build_proposed_cnn_with, gradcheck, ops, Model};
use crate::optim::AdamW;
use crate::rng::CounterRng;
use crate::tensor::Tensor;

const INPUT: (usize, usize, usize) = (168, 168, 3);
const STREAM_INIT: u64 = 0x494E_4954; // "INIT"
const STREAM_DROPOUT: u64 = 0x4452_4F50; // "DROP"

/// Outcome of one trained fold.
pub struct FoldResult {
    pub fold: usize,
    /// Loss of the very first training batch; a cheap determinism probe.
    pub first_batch_loss: f32,
    pub report: MetricsReport,
    pub dir: PathBuf,
}

/// Outcome of a full `train` invocation. Failed folds do not abort the run.
pub struct TrainOutcome {
    pub plan: FoldPlan,
    pub completed: Vec<FoldResult>,
    pub failures: Vec<(usize, Error)>,
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).map_err(|e| Error::io(path, e))
}

/// Train one model per fold and emit per-fold reports.
pub fn train(config: &ExperimentConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if !config.data.exists() {
        return Err(Error::Dataset(format!(
            "dataset root {} does not exist",
            config.data.display()
        )));
    }
    if config.precision == Precision::F64Check {
        gradient_self_check()?;
    }
    let index = DatasetIndex::scan(&config.data)?;
    let plan = make_folds(&index, config.folds, config.seed, config.strategy)?;

    create_dir(&config.out)?;
    config.save(&config.out.join("config.ini"))?;
    write_file(&config.out.join("fold_plan.json"), &plan.to_json())?;
    if !index.skipped().is_empty() {
        index.write_skip_report(&config.out.join("skip_report.txt"))?;
    }

    let mut completed = Vec::new();
    let mut failures = Vec::new();
    for fold in 0..plan.k() {
        match train_fold(config, &index, &plan, fold) {
            Ok(result) => completed.push(result),
            Err(e) => {
                eprintln!("fold {fold} failed: {e}");
                failures.push((fold, e));
            }
        }
    }
    Ok(TrainOutcome {
        plan,
        completed,
        failures,
    })
}

/// Train and evaluate a single fold of the plan.
pub fn train_fold(
    config: &ExperimentConfig,
    index: &DatasetIndex,
    plan: &FoldPlan,
    fold: usize,
) -> Result<FoldResult> {
    let dir = config.out.join(format!("fold_{fold}"));
    create_dir(&dir)?;

    let spec = build_proposed_cnn_with(
        INPUT,
        index.classes(),
        config.leaky_slope,
        config.dropout,
    )?;
    let mut init_rng = CounterRng::from_parts(&[STREAM_INIT, config.seed, fold as u64]);
    let mut model = Model::seeded(spec, &mut init_rng)?;
    let mut opt = AdamW::new(model.params(), config.adamw());

    let train_idx = plan.train_indices(fold);
    let mut first_batch_loss = None;
    let mut loss_lines = String::new();
    for epoch in 0..config.epochs {
        let stream_cfg = StreamConfig {
            batch_size: config.batch_size,
            epoch: epoch as u64,
            seed: config.seed,
            train: true,
            policy: config.augment_policy(),
            target: (INPUT.0, INPUT.1),
        };
        let mut loss_sum = 0.0f64;
        let mut samples = 0usize;
        for (step, batch) in batches(index, &train_idx, stream_cfg)?.enumerate() {
            let batch = batch?;
            let n = batch.images.shape()[0];
            let mut drop_rng = CounterRng::from_parts(&[
                STREAM_DROPOUT,
                config.seed,
                fold as u64,
                epoch as u64,
                step as u64,
            ]);
            model.zero_grads();
            let trace = model.forward_train(batch.images, &mut drop_rng)?;
            let (loss, _) = model.backward(&trace, &batch.labels)?;
            opt.step(model.params_mut())?;
            if first_batch_loss.is_none() {
                first_batch_loss = Some(loss);
            }
            loss_sum += loss as f64 * n as f64;
            samples += n;
        }
        let mean = (loss_sum / samples as f64) as f32;
        loss_lines.push_str(&format!("{epoch},{mean}\n"));
    }
    write_file(&dir.join("loss.log"), &loss_lines)?;

    let (labels, probs) = eval_on_subset(&model, index, plan.test_indices(fold))?;
    let report = metrics::evaluate(index.class_names(), &labels, &probs)?;

    checkpoint::save(
        &dir.join("checkpoint.mcn1"),
        &model,
        Some(&opt),
        config,
        fold,
        config.epochs,
    )?;
    write_file(&dir.join("metrics.csv"), &metrics_csv(fold, &report))?;
    write_file(&dir.join("confusion.csv"), &confusion_csv(&report.confusion))?;
    write_file(&dir.join("roc.csv"), &roc_csv(&report))?;

    Ok(FoldResult {
        fold,
        first_batch_loss: first_batch_loss.expect("at least one training batch"),
        report,
        dir,
    })
}

/// Eval-mode forward over a subset; returns true labels and stacked
/// probability rows in subset order.
pub fn eval_on_subset(
    model: &Model,
    index: &DatasetIndex,
    subset: &[usize],
) -> Result<(Vec<usize>, Tensor)> {
    let classes = index.classes();
    let mut labels = Vec::with_capacity(subset.len());
    let mut probs = Vec::with_capacity(subset.len() * classes);
    let (h, w, _) = model.spec().input;
    let mut cfg = StreamConfig::eval();
    cfg.target = (h, w);
    for batch in batches(index, subset, cfg)? {
        let batch = batch?;
        let batch_probs = model.forward_eval(&batch.images)?;
        probs.extend_from_slice(batch_probs.data());
        labels.extend(batch.source_indices.iter().map(|&i| index.label(i)));
    }
    let probs = Tensor::from_vec(&[labels.len(), classes], probs)?;
    Ok((labels, probs))
}

/// Evaluate a checkpoint over every sample under a dataset root and write
/// the usual report files into `out`.
pub fn eval_checkpoint(
    checkpoint_path: &Path,
    data_root: &Path,
    out: &Path,
) -> Result<MetricsReport> {
    let loaded = checkpoint::load(checkpoint_path)?;
    let index = DatasetIndex::scan(data_root)?;
    let model_classes = loaded.model.spec().classes;
    if model_classes != index.classes() {
        return Err(Error::Contract(format!(
            "checkpoint has {model_classes} classes but the dataset has {}",
            index.classes()
        )));
    }
    let subset: Vec<usize> = (0..index.len()).collect();
    let (labels, probs) = eval_on_subset(&loaded.model, &index, &subset)?;
    let report = metrics::evaluate(index.class_names(), &labels, &probs)?;

    create_dir(out)?;
    write_file(&out.join("metrics.csv"), &metrics_csv(loaded.fold, &report))?;
    write_file(&out.join("confusion.csv"), &confusion_csv(&report.confusion))?;
    write_file(&out.join("roc.csv"), &roc_csv(&report))?;
    Ok(report)
}

/// Aggregate the fold reports under a run directory into summary files.
pub fn report(run_dir: &Path) -> Result<Summary> {
    let mut fold_dirs: Vec<(usize, PathBuf)> = Vec::new();
    for entry in std::fs::read_dir(run_dir).map_err(|e| Error::io(run_dir, e))? {
        let path = entry.map_err(|e| Error::io(run_dir, e))?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        if let Some(fold) = name.strip_prefix("fold_").and_then(|n| n.parse().ok()) {
            if path.join("metrics.csv").is_file() {
                fold_dirs.push((fold, path));
            }
        }
    }
    if fold_dirs.is_empty() {
        return Err(Error::Contract(format!(
            "no fold reports under {}",
            run_dir.display()
        )));
    }
    fold_dirs.sort();

    let reports: Vec<MetricsReport> = fold_dirs
        .iter()
        .map(|(_, dir)| read_fold_report(dir))
        .collect::<Result<_>>()?;
    let summary = metrics::aggregate(&reports)?;
    write_file(&run_dir.join("summary.csv"), &summary_csv(&summary))?;
    write_file(&run_dir.join("summary.txt"), &summary_txt(&summary))?;
    Ok(summary)
}

/// The architecture table behind the `params` subcommand.
pub fn params_table(classes: usize, slope: f32, dropout: f32) -> Result<String> {
    let spec = build_proposed_cnn_with(INPUT, classes, slope, dropout)?;
    let rows = spec.layer_table()?;
    let mut out = String::new();
    out.push_str(&format!("{:<12} {:>14} {:>12}\n", "layer", "output", "params"));
    out.push_str(&format!(
        "{:<12} {:>14} {:>12}\n",
        "input",
        format!("{}x{}x{}", INPUT.0, INPUT.1, INPUT.2),
        0
    ));
    for row in &rows {
        out.push_str(&format!(
            "{:<12} {:>14} {:>12}\n",
            row.name,
            row.output.to_string(),
            row.params
        ));
    }
    let total: usize = rows.iter().map(|r| r.params).sum();
    out.push_str(&format!("total trainable params: {total}\n"));
    Ok(out)
}

/// One randomized 64-bit finite-difference probe per layer kind; the
/// heavier sweep lives in the test suite.
fn gradient_self_check() -> Result<()> {
    let mut rng = CounterRng::new(0x6AD5);
    let rand = |rng: &mut CounterRng, shape: &[usize]| {
        Tensor::<f64>::from_fn(shape, |_| rng.uniform(-1.0, 1.0))
    };
    let x = rand(&mut rng, &[1, 5, 5, 2]);
    let w = rand(&mut rng, &[3, 3, 2, 3]);
    let b = rand(&mut rng, &[3]);
    let go = rand(&mut rng, &[1, 5, 5, 3]);
    let (gx, _, _) = ops::conv2d_backward(&x, &w, &go)?;
    let analytic: f64 = gx.data().iter().sum();
    let loss = |data: &[f64]| {
        let probe = Tensor::from_vec(x.shape(), data.to_vec()).unwrap();
        let y = ops::conv2d_forward(&probe, &w, &b).unwrap();
        y.data().iter().zip(go.data()).map(|(a, g)| a * g).sum()
    };
    let numeric = gradcheck::numerical_grad(x.data(), loss, gradcheck::DEFAULT_STEP);
    let numeric_sum: f64 = numeric.iter().sum();
    if gradcheck::rel_err(analytic, numeric_sum) > 1e-4 {
        return Err(Error::Contract(format!(
            "f64 gradient self-check failed: analytic {analytic} vs numeric {numeric_sum}"
        )));
    }
    Ok(())
}

fn fmt_cell(value: f64, degenerate: bool) -> String {
    if degenerate {
        String::new()
    } else {
        format!("{value}")
    }
}

/// `fold,class,precision,recall,f1,flag` rows plus the
/// `fold,ALL,accuracy,macro_f1,macro_auc` row.
pub fn metrics_csv(fold: usize, report: &MetricsReport) -> String {
    let mut out = String::from("fold,class,precision,recall,f1,flag\n");
    for (name, prf) in report
        .confusion
        .class_names()
        .iter()
        .zip(&report.per_class)
    {
        let flag = if prf.degenerate { "degenerate" } else { "" };
        out.push_str(&format!(
            "{fold},{name},{},{},{},{flag}\n",
            fmt_cell(prf.precision, prf.degenerate),
            fmt_cell(prf.recall, prf.degenerate),
            fmt_cell(prf.f1, prf.degenerate),
        ));
    }
    let (auc_cell, flag) = match report.macro_auc {
        Some(auc) => (format!("{auc}"), ""),
        None => (String::new(), "degenerate"),
    };
    out.push_str(&format!(
        "{fold},ALL,{},{},{auc_cell},{flag}\n",
        report.accuracy, report.macro_f1
    ));
    out
}

/// Header row of class names, then one integer row per true class.
pub fn confusion_csv(cm: &ConfusionMatrix) -> String {
    let mut out = cm.class_names().join(",");
    out.push('\n');
    let c = cm.n_classes();
    for t in 0..c {
        let row: Vec<String> = (0..c).map(|p| cm.at(t, p).to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// `class,threshold,fpr,tpr` rows for every defined per-class curve.
pub fn roc_csv(report: &MetricsReport) -> String {
    let mut out = String::from("class,threshold,fpr,tpr\n");
    for (name, points) in report.confusion.class_names().iter().zip(&report.roc) {
        if let Some(points) = points {
            for p in points {
                out.push_str(&format!("{name},{},{},{}\n", p.threshold, p.fpr, p.tpr));
            }
        }
    }
    out
}

fn summary_csv(summary: &Summary) -> String {
    let mut out = String::from("metric,mean,std,folds\n");
    for row in &summary.rows {
        out.push_str(&format!("{},{},{},{}\n", row.name, row.mean, row.std, row.folds));
    }
    out
}

fn summary_txt(summary: &Summary) -> String {
    let mut out = String::new();
    out.push_str(&format!("{:<24} {:>10} {:>10} {:>6}\n", "metric", "mean", "std", "folds"));
    for row in &summary.rows {
        out.push_str(&format!(
            "{:<24} {:>10.4} {:>10.4} {:>6}\n",
            row.name, row.mean, row.std, row.folds
        ));
    }
    out.push_str("\npooled confusion matrix (rows = true class):\n");
    let cm = &summary.pooled_confusion;
    out.push_str(&format!("{:<14}", ""));
    for name in cm.class_names() {
        out.push_str(&format!("{name:>12}"));
    }
    out.push('\n');
    for (t, name) in cm.class_names().iter().enumerate() {
        out.push_str(&format!("{name:<14}"));
        for p in 0..cm.n_classes() {
            out.push_str(&format!("{:>12}", cm.at(t, p)));
        }
        out.push('\n');
    }
    out
}

fn parse_f64(cell: &str, what: &str) -> Result<f64> {
    cell.parse()
        .map_err(|_| Error::Contract(format!("bad {what} value '{cell}'")))
}

/// Rebuild a fold's `MetricsReport` from its emitted CSV files. Per-class
/// AUCs are recomputed from the stored ROC points.
pub fn read_fold_report(dir: &Path) -> Result<MetricsReport> {
    let read = |name: &str| -> Result<String> {
        let path = dir.join(name);
        std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))
    };

    // confusion.csv: class names then count rows.
    let confusion_text = read("confusion.csv")?;
    let mut lines = confusion_text.lines();
    let classes: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Contract("empty confusion.csv".into()))?
        .split(',')
        .map(str::to_string)
        .collect();
    let c = classes.len();
    let mut counts = Vec::with_capacity(c * c);
    for line in lines.filter(|l| !l.is_empty()) {
        for cell in line.split(',') {
            counts.push(
                cell.parse::<u64>()
                    .map_err(|_| Error::Contract(format!("bad count '{cell}'")))?,
            );
        }
    }
    let confusion = ConfusionMatrix::from_counts(classes.clone(), counts)?;

    // metrics.csv: per-class rows then the ALL row.
    let metrics_text = read("metrics.csv")?;
    let mut per_class = vec![None; c];
    let mut accuracy = None;
    let mut macro_f1 = None;
    let mut macro_auc = None;
    for line in metrics_text.lines().skip(1).filter(|l| !l.is_empty()) {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 6 {
            return Err(Error::Contract(format!("bad metrics.csv row '{line}'")));
        }
        let (class, v1, v2, v3, flag) = (cells[1], cells[2], cells[3], cells[4], cells[5]);
        if class == "ALL" {
            accuracy = Some(parse_f64(v1, "accuracy")?);
            macro_f1 = Some(parse_f64(v2, "macro_f1")?);
            macro_auc = if v3.is_empty() {
                None
            } else {
                Some(parse_f64(v3, "macro_auc")?)
            };
        } else {
            let slot = classes.iter().position(|n| n == class).ok_or_else(|| {
                Error::Contract(format!("metrics.csv row for unknown class '{class}'"))
            })?;
            let degenerate = flag == "degenerate";
            per_class[slot] = Some(if degenerate {
                ClassPrf {
                    precision: 0.0,
                    recall: 0.0,
                    f1: 0.0,
                    degenerate: true,
                }
            } else {
                ClassPrf {
                    precision: parse_f64(v1, "precision")?,
                    recall: parse_f64(v2, "recall")?,
                    f1: parse_f64(v3, "f1")?,
                    degenerate: false,
                }
            });
        }
    }
    let per_class: Vec<ClassPrf> = per_class
        .into_iter()
        .collect::<Option<_>>()
        .ok_or_else(|| Error::Contract("metrics.csv is missing a class row".into()))?;

    // roc.csv: points per class, AUC recomputed by trapezoid.
    let roc_text = read("roc.csv")?;
    let mut roc: Vec<Option<Vec<RocPoint>>> = vec![None; c];
    for line in roc_text.lines().skip(1).filter(|l| !l.is_empty()) {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 4 {
            return Err(Error::Contract(format!("bad roc.csv row '{line}'")));
        }
        let slot = classes.iter().position(|n| n == cells[0]).ok_or_else(|| {
            Error::Contract(format!("roc.csv row for unknown class '{}'", cells[0]))
        })?;
        roc[slot].get_or_insert_with(Vec::new).push(RocPoint {
            threshold: parse_f64(cells[1], "threshold")?,
            fpr: parse_f64(cells[2], "fpr")?,
            tpr: parse_f64(cells[3], "tpr")?,
        });
    }
    let auc_per_class: Vec<Option<f64>> = roc
        .iter()
        .map(|points| points.as_ref().map(|p| metrics::auc(p)))
        .collect();

    Ok(MetricsReport {
        confusion,
        per_class,
        accuracy: accuracy.ok_or_else(|| Error::Contract("metrics.csv has no ALL row".into()))?,
        macro_f1: macro_f1.expect("set with accuracy"),
        roc,
        auc_per_class,
        macro_auc,
    })
}
