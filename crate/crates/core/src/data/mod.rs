//! Dataset indexing, image loading, augmentation and batch generation.
//!
//! Datasets live on disk as one directory per class:
//! `<root>/<class_name>/*.png|*.jpg|*.jpeg`. Class ids are assigned in
//! sorted class-name order and the sample list is sorted by path, so an
//! index built twice from the same tree is identical.

pub mod augment;
pub mod image_io;

pub use augment::{augment, sample_params, AugmentParams, AugmentPolicy};
pub use image_io::{load_image, resize_bilinear};

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::rng::{derive_key, CounterRng};
use crate::tensor::Tensor;

/// Stream-purpose tags folded into RNG keys so the shuffle stream and the
/// per-sample augmentation streams never alias.
const STREAM_SHUFFLE: u64 = 0x5348_5546; // "SHUF"
const STREAM_AUGMENT: u64 = 0x4155_4721; // "AUG!"

/// An ordered list of (path, class id) pairs plus the class-name table.
#[derive(Clone, Debug)]
pub struct DatasetIndex {
    class_names: Vec<String>,
    samples: Vec<(PathBuf, usize)>,
    class_counts: Vec<usize>,
    skipped: Vec<PathBuf>,
}

impl DatasetIndex {
    /// Scan a class-per-directory tree.
    ///
    /// Files whose header is not a decodable PNG/JPEG are collected into a
    /// skip list rather than failing the scan; an empty class directory or
    /// fewer than two classes is an error.
    pub fn scan(root: &Path) -> Result<Self> {
        let entries = std::fs::read_dir(root).map_err(|e| Error::io(root, e))?;
        let mut class_dirs: Vec<(String, PathBuf)> = Vec::new();
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(root, e))?;
            if entry.path().is_dir() {
                class_dirs.push((entry.file_name().to_string_lossy().into_owned(), entry.path()));
            }
        }
        class_dirs.sort_by(|a, b| a.0.cmp(&b.0));
        if class_dirs.len() < 2 {
            return Err(Error::Dataset(format!(
                "{} holds {} class directories; need at least 2",
                root.display(),
                class_dirs.len()
            )));
        }

        let mut samples = Vec::new();
        let mut skipped = Vec::new();
        let class_names: Vec<String> = class_dirs.iter().map(|(n, _)| n.clone()).collect();
        for (class_id, (name, dir)) in class_dirs.iter().enumerate() {
            let mut found = 0usize;
            for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
                let path = entry.map_err(|e| Error::io(dir, e))?.path();
                if !path.is_file() || !has_image_extension(&path) {
                    continue;
                }
                if image_io::sniff_decodable(&path) {
                    samples.push((path, class_id));
                    found += 1;
                } else {
                    skipped.push(path);
                }
            }
            if found == 0 {
                return Err(Error::Dataset(format!(
                    "class directory '{name}' contains no decodable images"
                )));
            }
        }
        samples.sort_by(|a, b| a.0.cmp(&b.0));
        skipped.sort();
        Self::assemble(class_names, samples, skipped)
    }

    /// Build an index directly from labeled paths (fold planning and tests).
    pub fn from_parts(class_names: Vec<String>, samples: Vec<(PathBuf, usize)>) -> Result<Self> {
        let mut samples = samples;
        samples.sort_by(|a, b| a.0.cmp(&b.0));
        Self::assemble(class_names, samples, Vec::new())
    }

    fn assemble(
        class_names: Vec<String>,
        samples: Vec<(PathBuf, usize)>,
        skipped: Vec<PathBuf>,
    ) -> Result<Self> {
        let mut class_counts = vec![0usize; class_names.len()];
        for (path, class_id) in &samples {
            if *class_id >= class_names.len() {
                return Err(Error::Dataset(format!(
                    "sample {} has class id {class_id} outside the {}-entry class table",
                    path.display(),
                    class_names.len()
                )));
            }
            class_counts[*class_id] += 1;
        }
        for pair in samples.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(Error::Dataset(format!(
                    "duplicate sample path {}",
                    pair[0].0.display()
                )));
            }
        }
        Ok(DatasetIndex {
            class_names,
            samples,
            class_counts,
            skipped,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn samples(&self) -> &[(PathBuf, usize)] {
        &self.samples
    }

    pub fn class_counts(&self) -> &[usize] {
        &self.class_counts
    }

    pub fn label(&self, sample: usize) -> usize {
        self.samples[sample].1
    }

    /// Files that looked like images by extension but failed the header
    /// check during the scan.
    pub fn skipped(&self) -> &[PathBuf] {
        &self.skipped
    }

    /// Write the skip report: one unreadable path per line.
    pub fn write_skip_report(&self, path: &Path) -> Result<()> {
        let body = self
            .skipped
            .iter()
            .map(|p| p.display().to_string())
            .collect::<Vec<_>>()
            .join("\n");
        std::fs::write(path, body + "\n").map_err(|e| Error::io(path, e))
    }
}

fn has_image_extension(path: &Path) -> bool {
    matches!(
        path.extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref(),
        Some("png" | "jpg" | "jpeg")
    )
}

/// A loaded mini-batch: images in [0, 1], one-hot labels, and the dataset
/// indices each row came from.
#[derive(Clone, Debug)]
pub struct Batch {
    pub images: Tensor,
    pub labels: Tensor,
    pub source_indices: Vec<usize>,
}

/// Settings for one epoch's batch stream.
#[derive(Clone, Debug)]
pub struct StreamConfig {
    pub batch_size: usize,
    pub epoch: u64,
    pub seed: u64,
    /// Train mode shuffles by (seed, epoch) and augments each sample with a
    /// key derived from (seed, epoch, sample index). Eval mode keeps the
    /// subset order and only normalizes.
    pub train: bool,
    pub policy: AugmentPolicy,
    pub target: (usize, usize),
}

impl StreamConfig {
    pub fn train(seed: u64, epoch: u64, policy: AugmentPolicy) -> Self {
        StreamConfig {
            batch_size: 32,
            epoch,
            seed,
            train: true,
            policy,
            target: (168, 168),
        }
    }

    pub fn eval() -> Self {
        StreamConfig {
            batch_size: 32,
            epoch: 0,
            seed: 0,
            train: false,
            policy: AugmentPolicy::disabled(),
            target: (168, 168),
        }
    }
}

/// Lazy stream of batches over a subset of a dataset. The emitted tensors
/// are a pure function of (index, subset, seed, epoch, train), so two
/// identically-configured streams are bit-for-bit equal.
pub struct BatchStream<'a> {
    index: &'a DatasetIndex,
    order: Vec<usize>,
    cursor: usize,
    cfg: StreamConfig,
}

/// Build the batch stream for `subset` indices of `index`. The final batch
/// may be short.
pub fn batches<'a>(
    index: &'a DatasetIndex,
    subset: &[usize],
    cfg: StreamConfig,
) -> Result<BatchStream<'a>> {
    if subset.is_empty() {
        return Err(Error::Data("empty subset for batch stream".into()));
    }
    if cfg.batch_size == 0 {
        return Err(Error::Data("batch size must be positive".into()));
    }
    if let Some(&bad) = subset.iter().find(|&&i| i >= index.len()) {
        return Err(Error::Data(format!(
            "subset index {bad} outside dataset of {} samples",
            index.len()
        )));
    }
    let mut order = subset.to_vec();
    if cfg.train {
        let mut rng = CounterRng::from_parts(&[STREAM_SHUFFLE, cfg.seed, cfg.epoch]);
        rng.shuffle(&mut order);
    }
    Ok(BatchStream {
        index,
        order,
        cursor: 0,
        cfg,
    })
}

impl BatchStream<'_> {
    fn load_sample(&self, sample: usize) -> Result<Tensor> {
        let (path, _) = &self.index.samples()[sample];
        let img = load_image(path, self.cfg.target)?;
        if self.cfg.train && self.cfg.policy.enabled {
            let key = derive_key(&[STREAM_AUGMENT, self.cfg.seed, self.cfg.epoch, sample as u64]);
            augment(&img, &self.cfg.policy, key)
        } else {
            Ok(img)
        }
    }
}

impl Iterator for BatchStream<'_> {
    type Item = Result<Batch>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.cursor >= self.order.len() {
            return None;
        }
        let end = (self.cursor + self.cfg.batch_size).min(self.order.len());
        let chunk = &self.order[self.cursor..end];
        self.cursor = end;

        let (th, tw) = self.cfg.target;
        let classes = self.index.classes();
        let mut images = Tensor::zeros(&[chunk.len(), th, tw, 3]);
        let mut labels = Tensor::zeros(&[chunk.len(), classes]);
        let px = th * tw * 3;
        for (row, &sample) in chunk.iter().enumerate() {
            let img = match self.load_sample(sample) {
                Ok(img) => img,
                Err(e) => return Some(Err(e)),
            };
            images.data_mut()[row * px..(row + 1) * px].copy_from_slice(img.data());
            labels.data_mut()[row * classes + self.index.label(sample)] = 1.0;
        }
        Some(Ok(Batch {
            images,
            labels,
            source_indices: chunk.to_vec(),
        }))
    }
}
