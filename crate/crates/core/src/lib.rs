//! Bias-corrected training with synthetic minority samples.
//!
//! Logistic models trained on imbalanced data augmented by a synthetic generator,
//! with a correction term estimated from held-out majority rows. Also covers
//! multi-task subspace estimation, AIPW treatment-effect estimation and a seeded
//! Monte Carlo harness.

// `!(x >= 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ate;
pub mod dataset;
pub mod error;
pub mod generators;
pub mod linalg;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod mtl;
pub mod rng;
pub mod simbench;

pub use ate::{aipw, estimate_ate, AipwResult, CausalDataset, OutcomeModels};
pub use dataset::{ClassSplit, Dataset, MajorityPartition, TrainValTest};
pub use error::{Error, ErrorKind, Result};
pub use generators::{Generator, PerturbParams, SmoteParams};
pub use loss::{augment, AugmentOptions, AugmentedTrainSet, Objective};
pub use metrics::{compute_metrics, confusion, ConfusionMatrix, MetricReport};
pub use model::{fit, FitResult, Init, LogisticModel, TrainConfig};
pub use mtl::{SharedSubspace, TaskCollection};
pub use rng::{RngStream, Stage};
