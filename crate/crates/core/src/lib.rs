//! Training and evaluation for long-tailed classification over frame-feature
//! sequences.
//!
//! The centerpiece is frame-level pair resampling driven by running average
//! precision: two videos from a batch are temporally subsampled with a budget
//! split derived from their classes' relative AP, concatenated into one
//! fixed-length sample, and given a label vector mixed with the same ratio.
//! Alongside it live the usual imbalance baselines (class-balanced sampling,
//! class-balanced / focal / margin / gradient-masking losses, feature-space
//! mixup), two sequence classification heads, a deterministic Adam training
//! loop, and multi-label AP metrics with head/medium/tail breakdowns.

pub mod config;
pub mod datagen;
pub mod error;
pub mod fseq;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod rebalance;
pub mod rng;
pub mod trainer;
pub mod types;

pub use error::{Error, ErrorCategory, Result};
pub use types::{
    assign_group, ClassStats, DatasetManifest, FeatureSequence, Group, GroupThresholds,
    LabelVector, ManifestRecord, Split,
};
