//! A compact, self-contained deep-learning toolkit built for one job:
//! training and evaluating a small four-block CNN on class-per-directory
//! image datasets, with stratified cross-validation and a full
//! classification metrics suite.
//!
//! Everything numeric is implemented in this crate: dense tensors and
//! matrix kernels, im2col convolution with hand-derived backward passes,
//! AdamW, a counter-based RNG that makes every run bit-reproducible, an
//! augmentation pipeline, k-fold planning, and ROC/AUC metrics.
//!
//! ## Examples
//!
//! One runnable example per capability:
//!
//! ```bash
//! cargo run --example params_table          # architecture + parameter counts
//! cargo run --example gradient_check        # finite differences vs analytic grads
//! cargo run --example augmentation_demo     # factor envelopes + a warped image
//! cargo run --example fold_planning         # stratified vs plain 10-fold plans
//! cargo run --example metrics_report        # metrics + CSV emission
//! cargo run --example train_synthetic       # end-to-end training on generated data
//! cargo run --example checkpoint_roundtrip  # checkpoint save/load bit-identity
//! ```
//!
//! The `mcnn` binary exposes the same pipeline as `train`, `eval`,
//! `report` and `params` subcommands; see the repository README.

pub mod checkpoint;
pub mod config;
pub mod cv;
pub mod data;
pub mod error;
pub mod metrics;
pub mod nn;
pub mod optim;
pub mod rng;
pub mod runner;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
