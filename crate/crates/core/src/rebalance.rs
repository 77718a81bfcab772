//! Batch samplers and the pair-level augmentation policies that fight class
//! imbalance.
//!
//! Frame stacking draws a budget ratio from each pair's relative running AP
//! (or class frequency, or a constant), temporally subsamples both parents
//! with the split budgets, concatenates the frames, and mixes the label
//! vectors with the same ratio. Feature-space mixup blends frames
//! arithmetically instead. Both act on a seeded fraction of each batch.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;

use crate::error::{Error, Result};
use crate::metrics::RapTable;
use crate::types::{FeatureSequence, LabelVector};

/// Which pair augmentation runs inside a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AugKind {
    None,
    Framestack,
    Mixup,
}

/// How the two frame budgets are rounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthMode {
    /// `L_i = floor((1-beta)*L)`, `L_j = L - L_i`: every output has
    /// exactly L frames (default; keeps batches dense).
    ExactL,
    /// Both budgets floored independently, so outputs have L-1 or L
    /// frames. Preserves the published arithmetic literally.
    StrictPaper,
}

/// Where the per-class values fed into the budget ratio come from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaSource {
    /// Previous epoch's running AP (the headline method).
    RunningAp,
    /// Per-class training frequency, normalized by the max count. Feeding
    /// frequencies through the ratio gives frame budgets proportional to
    /// inverse frequency: frequent classes contribute fewer frames.
    ClassFrequency,
    /// Fixed ratio for every pair (0.5 reproduces the equal-split
    /// ablation).
    Constant(f64),
}

/// Pair augmentation policy: what to mix, how much of the batch, and the
/// frame-budget parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AugPolicy {
    pub kind: AugKind,
    /// Fraction of each batch replaced by mixed samples.
    pub eta: f64,
    /// Floor under `rap_i + rap_j` below which the ratio falls back to 0.5.
    pub epsilon: f64,
    /// Output clip length L.
    pub clip_len: usize,
    pub length_mode: LengthMode,
    pub beta_source: BetaSource,
    /// Beta(alpha, alpha) parameter for mixup's blend draw.
    pub mixup_alpha: f64,
}

impl Default for AugPolicy {
    fn default() -> Self {
        AugPolicy {
            kind: AugKind::None,
            eta: 0.5,
            epsilon: 1e-5,
            clip_len: 60,
            length_mode: LengthMode::ExactL,
            beta_source: BetaSource::RunningAp,
            mixup_alpha: 0.2,
        }
    }
}

impl AugPolicy {
    /// Validate the policy against the batch size it will be used with.
    pub fn validate(&self, batch_size: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::Config(format!(
                "eta must lie in [0, 1], got {}",
                self.eta
            )));
        }
        if self.epsilon <= 0.0 {
            return Err(Error::Config("epsilon must be > 0".to_string()));
        }
        if self.clip_len < 2 {
            return Err(Error::Config("clip_len must be >= 2".to_string()));
        }
        if self.mixup_alpha <= 0.0 {
            return Err(Error::Config("mixup_alpha must be > 0".to_string()));
        }
        if let BetaSource::Constant(c) = self.beta_source {
            if !(0.0..=1.0).contains(&c) {
                return Err(Error::Config(format!(
                    "constant beta must lie in [0, 1], got {c}"
                )));
            }
        }
        if self.kind != AugKind::None && batch_size < 2 {
            return Err(Error::Config(
                "pair augmentation needs batch_size >= 2".to_string(),
            ));
        }
        Ok(())
    }
}

/// Seeded permutation of the training set, chunked into batches; the last
/// partial batch is kept.
pub fn random_batch_sampler(
    n_samples: usize,
    batch_size: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<usize>> {
    assert!(batch_size >= 1);
    let mut order: Vec<usize> = (0..n_samples).collect();
    for i in (1..order.len()).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    order.chunks(batch_size).map(|c| c.to_vec()).collect()
}

/// Class-balanced sampling: each slot draws a class uniformly, then a video
/// uniformly within it (with replacement). Epoch length matches the
/// dataset size, so head and tail classes land in batches with the same
/// probability.
pub fn class_balanced_sampler(
    class_members: &[Vec<usize>],
    n_samples: usize,
    batch_size: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<usize>>> {
    assert!(batch_size >= 1);
    if let Some(empty) = class_members.iter().position(|m| m.is_empty()) {
        return Err(Error::Config(format!(
            "class-balanced sampling needs every class populated; class {empty} has no training videos"
        )));
    }
    let classes = class_members.len();
    let draws: Vec<usize> = (0..n_samples)
        .map(|_| {
            let class = rng.random_range(0..classes);
            let members = &class_members[class];
            members[rng.random_range(0..members.len())]
        })
        .collect();
    Ok(draws.chunks(batch_size).map(|c| c.to_vec()).collect())
}

/// Center-of-bin uniform sampling indices: `idx_k = floor((k+0.5)*len/m)`.
/// Pure integer arithmetic, temporal order preserved; `m > len` repeats
/// indices.
pub fn uniform_indices(len: usize, m: usize) -> Vec<usize> {
    (0..m).map(|k| ((2 * k + 1) * len) / (2 * m)).collect()
}

/// Uniformly subsample a sequence to `m` frames; `m = 0` yields an empty
/// sequence.
pub fn uniform_subsample(seq: &FeatureSequence, m: usize) -> FeatureSequence {
    if m == 0 {
        return FeatureSequence::empty(seq.dim());
    }
    assert!(
        !seq.is_empty(),
        "cannot subsample an empty sequence to {m} frames"
    );
    seq.select(&uniform_indices(seq.len(), m))
}

/// Sorted sample of `m` distinct frame indices, uniform without
/// replacement. Asking for more frames than exist falls back to sampling
/// with replacement (warned once per process).
pub fn random_subsample(seq: &FeatureSequence, m: usize, rng: &mut ChaCha8Rng) -> FeatureSequence {
    let len = seq.len();
    let mut indices: Vec<usize> = if m <= len {
        rand::seq::index::sample(rng, len, m).into_vec()
    } else {
        static WARN_ONCE: std::sync::Once = std::sync::Once::new();
        WARN_ONCE.call_once(|| {
            log::warn!("requested more frames than stored; sampling with replacement");
        });
        (0..m).map(|_| rng.random_range(0..len)).collect()
    };
    indices.sort_unstable();
    seq.select(&indices)
}

/// Temporal sampling ratio from two performance values: relative share of
/// the first, with a 0.5 fallback while both are effectively zero.
pub fn compute_beta(rap_i: f64, rap_j: f64, epsilon: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&rap_i) && (0.0..=1.0).contains(&rap_j));
    if rap_i + rap_j < epsilon {
        0.5
    } else {
        rap_i / (rap_i + rap_j)
    }
}

// Absorbs representation noise in the ratio before flooring, so budgets
// match exact-arithmetic evaluation (e.g. beta=0.9, L=60 must give 6, not
// floor(5.999999999999999)). Far below 1/L for any practical clip length.
const FLOOR_EPS: f64 = 1e-9;

/// Frame budgets for the pair: the better the first video's classes
/// perform, the larger beta and the fewer frames it contributes.
pub fn split_lengths(beta: f64, clip_len: usize, mode: LengthMode) -> (usize, usize) {
    debug_assert!((0.0..=1.0).contains(&beta));
    let len_i = ((1.0 - beta) * clip_len as f64 + FLOOR_EPS).floor() as usize;
    let len_j = match mode {
        LengthMode::ExactL => clip_len - len_i,
        LengthMode::StrictPaper => (beta * clip_len as f64 + FLOOR_EPS).floor() as usize,
    };
    (len_i, len_j)
}

/// Per-pair budget-ratio lookup, resolved once per epoch from the policy's
/// beta source.
#[derive(Debug, Clone, PartialEq)]
pub enum BetaLookup {
    PerClass(Vec<f64>),
    Constant(f64),
}

impl BetaLookup {
    pub fn for_epoch(source: BetaSource, rap: &RapTable, train_counts: &[usize]) -> BetaLookup {
        match source {
            BetaSource::RunningAp => BetaLookup::PerClass(rap.values().to_vec()),
            BetaSource::ClassFrequency => BetaLookup::PerClass(frequency_values(train_counts)),
            BetaSource::Constant(c) => BetaLookup::Constant(c),
        }
    }

    /// Per-video value: mean over the video's positive classes.
    fn video_value(values: &[f64], labels: &LabelVector) -> f64 {
        let positives = labels.binarize(0.0);
        if positives.is_empty() {
            return 0.0;
        }
        positives.iter().map(|&c| values[c]).sum::<f64>() / positives.len() as f64
    }

    pub fn beta_for_pair(&self, y_i: &LabelVector, y_j: &LabelVector, epsilon: f64) -> f64 {
        match self {
            BetaLookup::PerClass(values) => compute_beta(
                Self::video_value(values, y_i),
                Self::video_value(values, y_j),
                epsilon,
            ),
            BetaLookup::Constant(c) => *c,
        }
    }
}

/// Per-class training frequency scaled so the largest class maps to 1.
/// Running these through the budget ratio hands frequent classes fewer
/// frames, i.e. budgets proportional to inverse frequency.
pub fn frequency_values(counts: &[usize]) -> Vec<f64> {
    let max = counts.iter().copied().max().unwrap_or(1).max(1) as f64;
    counts.iter().map(|&c| c as f64 / max).collect()
}

/// Concatenate budget-subsampled frames from two parents and mix their
/// labels by the same ratio. Output frames are copies of parent frames;
/// no values are synthesized.
pub fn framestack_pair(
    seq_i: &FeatureSequence,
    y_i: &LabelVector,
    seq_j: &FeatureSequence,
    y_j: &LabelVector,
    lookup: &BetaLookup,
    policy: &AugPolicy,
) -> (FeatureSequence, LabelVector) {
    let beta = lookup.beta_for_pair(y_i, y_j, policy.epsilon);
    let (len_i, len_j) = split_lengths(beta, policy.clip_len, policy.length_mode);
    let stacked = FeatureSequence::concat(
        &uniform_subsample(seq_i, len_i),
        &uniform_subsample(seq_j, len_j),
    );
    (stacked, LabelVector::mix(y_i, y_j, beta))
}

/// Frame-by-frame convex blend of two equal-length sequences and their
/// labels: `lambda` of the first plus `1 - lambda` of the second.
pub fn mixup_pair(
    seq_i: &FeatureSequence,
    y_i: &LabelVector,
    seq_j: &FeatureSequence,
    y_j: &LabelVector,
    lambda: f64,
) -> Result<(FeatureSequence, LabelVector)> {
    if seq_i.len() != seq_j.len() {
        return Err(Error::Config(format!(
            "mixup needs equal-length sequences, got {} and {}",
            seq_i.len(),
            seq_j.len()
        )));
    }
    let lam = lambda as f32;
    let data = seq_i.data() * lam + seq_j.data() * (1.0 - lam);
    Ok((
        FeatureSequence::new(data),
        LabelVector::mix(y_i, y_j, 1.0 - lambda),
    ))
}

/// How one output slot of an augmented batch was produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SlotOrigin {
    /// Pass-through, only normalized to the clip length.
    Plain,
    /// Mixed with the (pre-augmentation) sample at `partner`.
    Mixed { partner: usize, ratio: f64 },
}

pub struct AugmentedBatch {
    pub samples: Vec<(FeatureSequence, LabelVector)>,
    pub origins: Vec<SlotOrigin>,
}

/// Apply the policy to one batch. A seeded subset of `floor(eta * B)`
/// slots is replaced by pair-augmented samples whose partners are drawn
/// uniformly from the same batch (never the slot itself); the remaining
/// slots pass through uniformly subsampled to the clip length. Parents are
/// always the original batch contents, so a sample may appear both raw and
/// inside a mix.
pub fn apply_batch_augmentation(
    batch: &[(FeatureSequence, LabelVector)],
    policy: &AugPolicy,
    lookup: &BetaLookup,
    rng: &mut ChaCha8Rng,
) -> Result<AugmentedBatch> {
    let b = batch.len();
    let normalize =
        |seq: &FeatureSequence| uniform_subsample(seq, policy.clip_len.min(seq.len().max(1)));
    // Pass-through keeps sequences shorter than the clip length instead of
    // padding by repetition; mixed outputs always have exactly clip_len.
    let plain = |(seq, y): &(FeatureSequence, LabelVector)| (normalize(seq), y.clone());

    if policy.kind == AugKind::None {
        return Ok(AugmentedBatch {
            samples: batch.iter().map(plain).collect(),
            origins: vec![SlotOrigin::Plain; b],
        });
    }

    let n_mix = if b < 2 {
        0
    } else {
        (policy.eta * b as f64).floor() as usize
    };
    if n_mix == 0 {
        return Ok(AugmentedBatch {
            samples: batch.iter().map(plain).collect(),
            origins: vec![SlotOrigin::Plain; b],
        });
    }

    let mut slots: Vec<usize> = (0..b).collect();
    for i in (1..slots.len()).rev() {
        slots.swap(i, rng.random_range(0..=i));
    }
    let mut mixed_slots = slots[..n_mix].to_vec();
    mixed_slots.sort_unstable();

    let mut samples: Vec<(FeatureSequence, LabelVector)> = batch.iter().map(plain).collect();
    let mut origins = vec![SlotOrigin::Plain; b];
    for &slot in &mixed_slots {
        let partner = loop {
            let p = rng.random_range(0..b);
            if p != slot {
                break p;
            }
        };
        let (seq_i, y_i) = &batch[slot];
        let (seq_j, y_j) = &batch[partner];
        match policy.kind {
            AugKind::Framestack => {
                let beta = lookup.beta_for_pair(y_i, y_j, policy.epsilon);
                let (out, y) = framestack_pair(seq_i, y_i, seq_j, y_j, lookup, policy);
                samples[slot] = (out, y);
                origins[slot] = SlotOrigin::Mixed {
                    partner,
                    ratio: beta,
                };
            }
            AugKind::Mixup => {
                let lambda = rand_distr::Beta::new(policy.mixup_alpha, policy.mixup_alpha)
                    .expect("validated alpha")
                    .sample(rng);
                let (out, y) = mixup_pair(
                    &uniform_subsample(seq_i, policy.clip_len),
                    y_i,
                    &uniform_subsample(seq_j, policy.clip_len),
                    y_j,
                    lambda,
                )?;
                samples[slot] = (out, y);
                origins[slot] = SlotOrigin::Mixed {
                    partner,
                    ratio: lambda,
                };
            }
            AugKind::None => unreachable!(),
        }
    }
    Ok(AugmentedBatch { samples, origins })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use ndarray::Array2;
    use rand_chacha::rand_core::SeedableRng;

    fn seq_with_rows(rows: usize, dim: usize, tag: f32) -> FeatureSequence {
        FeatureSequence::new(Array2::from_shape_fn((rows, dim), |(r, c)| {
            tag + r as f32 * 10.0 + c as f32
        }))
    }

    #[test]
    fn random_sampler_chunks_with_partial_tail() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let batches = random_batch_sampler(10, 4, &mut rng);
        let sizes: Vec<usize> = batches.iter().map(|b| b.len()).collect();
        assert_eq!(sizes, vec![4, 4, 2]);
        let mut all: Vec<usize> = batches.into_iter().flatten().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn random_sampler_is_seed_deterministic() {
        let a = random_batch_sampler(50, 8, &mut ChaCha8Rng::seed_from_u64(7));
        let b = random_batch_sampler(50, 8, &mut ChaCha8Rng::seed_from_u64(7));
        assert_eq!(a, b);
        let c = random_batch_sampler(50, 8, &mut ChaCha8Rng::seed_from_u64(8));
        assert_ne!(a, c);
    }

    #[test]
    fn pair_policies_reject_batch_of_one() {
        let policy = AugPolicy {
            kind: AugKind::Framestack,
            ..AugPolicy::default()
        };
        assert!(policy.validate(1).is_err());
        assert!(policy.validate(2).is_ok());
        let none = AugPolicy::default();
        assert!(none.validate(1).is_ok());
    }

    #[test]
    fn cbs_rejects_empty_class_and_handles_single_class() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(class_balanced_sampler(&[vec![0], vec![]], 4, 2, &mut rng).is_err());
        let batches = class_balanced_sampler(&[vec![3, 4, 5]], 6, 2, &mut rng).unwrap();
        assert!(batches.iter().flatten().all(|&i| (3..=5).contains(&i)));
        assert_eq!(batches.iter().map(|b| b.len()).sum::<usize>(), 6);
    }

    #[test]
    fn uniform_indices_match_hand_enumeration() {
        assert_eq!(uniform_indices(6, 3), vec![1, 3, 5]);
        assert_eq!(uniform_indices(5, 5), vec![0, 1, 2, 3, 4]);
        assert_eq!(uniform_indices(2, 4), vec![0, 0, 1, 1]);
        assert!(uniform_indices(6, 0).is_empty());
    }

    #[test]
    fn uniform_subsample_identity_and_empty() {
        let seq = seq_with_rows(6, 2, 0.0);
        assert_eq!(uniform_subsample(&seq, 6), seq);
        assert!(uniform_subsample(&seq, 0).is_empty());
        let three = uniform_subsample(&seq, 3);
        assert_eq!(three.frame(0), seq.frame(1));
        assert_eq!(three.frame(2), seq.frame(5));
    }

    #[test]
    fn random_subsample_is_sorted_distinct_and_deterministic() {
        let seq = seq_with_rows(20, 3, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_subsample(&seq, 8, &mut rng);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b = random_subsample(&seq, 8, &mut rng);
        assert_eq!(a, b);
        assert_eq!(a.len(), 8);
        // sorted temporal order: first feature column encodes the row index
        let rows: Vec<f32> = (0..8).map(|t| a.frame(t)[0]).collect();
        assert!(rows.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn random_subsample_full_length_is_identity() {
        let seq = seq_with_rows(9, 2, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert_eq!(random_subsample(&seq, 9, &mut rng), seq);
    }

    #[test]
    fn random_subsample_overdraw_falls_back_to_replacement() {
        let seq = seq_with_rows(4, 2, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let out = random_subsample(&seq, 7, &mut rng);
        assert_eq!(out.len(), 7);
    }

    #[test]
    fn beta_matches_direct_evaluation() {
        assert_eq!(compute_beta(0.2, 0.6, 1e-5), 0.25);
        assert_eq!(compute_beta(0.0, 0.0, 1e-5), 0.5);
        assert_eq!(compute_beta(0.3, 0.3, 1e-5), 0.5);
    }

    #[test]
    fn beta_is_antisymmetric_above_the_floor() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let a: f64 = rng.random();
            let b: f64 = rng.random();
            if a + b >= 1e-5 {
                let sum = compute_beta(a, b, 1e-5) + compute_beta(b, a, 1e-5);
                assert!((sum - 1.0).abs() < 1e-12, "a={a} b={b} sum={sum}");
            }
        }
    }

    #[test]
    fn split_lengths_match_worked_examples() {
        assert_eq!(split_lengths(0.25, 60, LengthMode::ExactL), (45, 15));
        assert_eq!(split_lengths(0.5, 61, LengthMode::StrictPaper), (30, 30));
        assert_eq!(split_lengths(0.0, 60, LengthMode::ExactL), (60, 0));
        assert_eq!(split_lengths(0.0, 60, LengthMode::StrictPaper), (60, 0));
        assert_eq!(split_lengths(1.0, 60, LengthMode::ExactL), (0, 60));
    }

    fn one_hot(class: usize, classes: usize) -> LabelVector {
        LabelVector::from_indices(&[class], classes)
    }

    #[test]
    fn framestack_mixes_labels_by_beta() {
        let policy = AugPolicy {
            kind: AugKind::Framestack,
            ..AugPolicy::default()
        };
        // rap chosen so beta = 0.2/(0.2+0.6) = 0.25
        let mut values = vec![0.0; 8];
        values[3] = 0.2;
        values[7] = 0.6;
        let lookup = BetaLookup::PerClass(values);
        let seq_i = seq_with_rows(60, 2, 0.0);
        let seq_j = seq_with_rows(60, 2, 1000.0);
        let (out, y) = framestack_pair(
            &seq_i,
            &one_hot(3, 8),
            &seq_j,
            &one_hot(7, 8),
            &lookup,
            &policy,
        );
        assert_eq!(y.weight(3), 0.75);
        assert_eq!(y.weight(7), 0.25);
        assert_eq!(y.binarize(0.0), vec![3, 7]);
        assert_eq!(out.len(), 60);
        // first 45 frames come from seq_i, the rest from seq_j
        assert!(out.frame(0)[0] < 1000.0);
        assert!(out.frame(44)[0] < 1000.0);
        assert!(out.frame(45)[0] >= 1000.0);
    }

    #[test]
    fn framestack_epoch_zero_splits_half_and_half() {
        let policy = AugPolicy {
            kind: AugKind::Framestack,
            ..AugPolicy::default()
        };
        let lookup = BetaLookup::for_epoch(BetaSource::RunningAp, &RapTable::zeros(4), &[1; 4]);
        let (out, y) = framestack_pair(
            &seq_with_rows(60, 2, 0.0),
            &one_hot(0, 4),
            &seq_with_rows(60, 2, 1000.0),
            &one_hot(1, 4),
            &lookup,
            &policy,
        );
        assert_eq!(out.len(), 60);
        assert_eq!(y.weight(0), 0.5);
        assert_eq!(y.weight(1), 0.5);
        let from_i = (0..60).filter(|&t| out.frame(t)[0] < 1000.0).count();
        assert_eq!(from_i, 30);
    }

    #[test]
    fn framestack_strong_class_contributes_few_frames() {
        let policy = AugPolicy {
            kind: AugKind::Framestack,
            ..AugPolicy::default()
        };
        let lookup = BetaLookup::PerClass(vec![0.9, 0.1]);
        let (out, y) = framestack_pair(
            &seq_with_rows(60, 2, 0.0),
            &one_hot(0, 2),
            &seq_with_rows(60, 2, 1000.0),
            &one_hot(1, 2),
            &lookup,
            &policy,
        );
        let from_i = (0..60).filter(|&t| out.frame(t)[0] < 1000.0).count();
        assert_eq!(from_i, 6);
        assert!((y.weight(0) - 0.1).abs() < 1e-12);
        assert!((y.weight(1) - 0.9).abs() < 1e-12);
    }

    #[test]
    fn framestack_output_frames_are_bit_copies() {
        let policy = AugPolicy {
            kind: AugKind::Framestack,
            ..AugPolicy::default()
        };
        let lookup = BetaLookup::PerClass(vec![0.37, 0.81]);
        let seq_i = seq_with_rows(60, 4, 0.0);
        let seq_j = seq_with_rows(77, 4, 5000.0);
        let (out, _) = framestack_pair(
            &seq_i,
            &one_hot(0, 2),
            &seq_j,
            &one_hot(1, 2),
            &lookup,
            &policy,
        );
        for t in 0..out.len() {
            let frame = out.frame(t);
            let in_i = (0..seq_i.len()).any(|s| seq_i.frame(s) == frame);
            let in_j = (0..seq_j.len()).any(|s| seq_j.frame(s) == frame);
            assert!(in_i || in_j, "frame {t} is not a copy of any parent frame");
        }
    }

    #[test]
    fn framestack_equal_values_degenerate_to_constant_half() {
        let policy = AugPolicy {
            kind: AugKind::Framestack,
            ..AugPolicy::default()
        };
        let equal = BetaLookup::PerClass(vec![0.42, 0.42]);
        let constant = BetaLookup::Constant(0.5);
        let seq_i = seq_with_rows(60, 2, 0.0);
        let seq_j = seq_with_rows(60, 2, 1000.0);
        let a = framestack_pair(
            &seq_i,
            &one_hot(0, 2),
            &seq_j,
            &one_hot(1, 2),
            &equal,
            &policy,
        );
        let b = framestack_pair(
            &seq_i,
            &one_hot(0, 2),
            &seq_j,
            &one_hot(1, 2),
            &constant,
            &policy,
        );
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn frequency_source_gives_tail_more_frames() {
        let policy = AugPolicy {
            kind: AugKind::Framestack,
            beta_source: BetaSource::ClassFrequency,
            ..AugPolicy::default()
        };
        // class 0 is head (500 videos), class 1 is tail (10 videos)
        let lookup =
            BetaLookup::for_epoch(BetaSource::ClassFrequency, &RapTable::zeros(2), &[500, 10]);
        let (out, _) = framestack_pair(
            &seq_with_rows(60, 2, 0.0),
            &one_hot(0, 2),
            &seq_with_rows(60, 2, 1000.0),
            &one_hot(1, 2),
            &lookup,
            &policy,
        );
        let head_frames = (0..60).filter(|&t| out.frame(t)[0] < 1000.0).count();
        let tail_frames = 60 - head_frames;
        assert!(
            tail_frames > head_frames,
            "tail got {tail_frames} frames vs head {head_frames}"
        );
    }

    #[test]
    fn mixup_identity_and_cancellation() {
        let seq_i = seq_with_rows(5, 3, 1.0);
        let neg = FeatureSequence::new(seq_i.data() * -1.0);
        let (identity, y) = mixup_pair(&seq_i, &one_hot(0, 2), &neg, &one_hot(1, 2), 1.0).unwrap();
        assert_eq!(identity, seq_i);
        assert_eq!(y.weight(0), 1.0);
        assert_eq!(y.weight(1), 0.0);
        let (zeroed, _) = mixup_pair(&seq_i, &one_hot(0, 2), &neg, &one_hot(1, 2), 0.5).unwrap();
        assert!(zeroed.view().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn mixup_label_mass_is_linear() {
        let y_i = LabelVector::new(vec![1.0, 1.0, 0.0]);
        let y_j = LabelVector::new(vec![0.0, 0.0, 1.0]);
        let seq = seq_with_rows(4, 2, 0.0);
        let lambda = 0.3;
        let (_, y) = mixup_pair(&seq, &y_i, &seq, &y_j, lambda).unwrap();
        let expect = y_i.sum() * lambda + y_j.sum() * (1.0 - lambda);
        assert!((y.sum() - expect).abs() < 1e-12);
    }

    #[test]
    fn mixup_rejects_length_mismatch() {
        let a = seq_with_rows(5, 2, 0.0);
        let b = seq_with_rows(6, 2, 0.0);
        assert!(mixup_pair(&a, &one_hot(0, 2), &b, &one_hot(1, 2), 0.5).is_err());
    }

    fn toy_batch(n: usize, frames: usize) -> Vec<(FeatureSequence, LabelVector)> {
        (0..n)
            .map(|i| {
                (
                    seq_with_rows(frames, 2, (i * 10_000) as f32),
                    one_hot(i % 4, 4),
                )
            })
            .collect()
    }

    #[test]
    fn eta_zero_only_normalizes_lengths() {
        let policy = AugPolicy {
            kind: AugKind::Framestack,
            eta: 0.0,
            clip_len: 8,
            ..AugPolicy::default()
        };
        let batch = toy_batch(6, 16);
        let mut rng = stream(1, "aug", 0);
        let out = apply_batch_augmentation(&batch, &policy, &BetaLookup::Constant(0.5), &mut rng)
            .unwrap();
        assert!(out.origins.iter().all(|o| *o == SlotOrigin::Plain));
        for (slot, (seq, y)) in out.samples.iter().enumerate() {
            assert_eq!(seq.len(), 8);
            assert_eq!(*seq, uniform_subsample(&batch[slot].0, 8));
            assert_eq!(y, &batch[slot].1);
        }
    }

    #[test]
    fn eta_controls_the_mixed_slot_count() {
        let lookup = BetaLookup::Constant(0.5);
        for (eta, expect) in [(0.5, 64), (1.0, 128), (0.25, 32)] {
            let policy = AugPolicy {
                kind: AugKind::Framestack,
                eta,
                clip_len: 8,
                ..AugPolicy::default()
            };
            let batch = toy_batch(128, 16);
            let mut rng = stream(1, "aug", 0);
            let out = apply_batch_augmentation(&batch, &policy, &lookup, &mut rng).unwrap();
            let mixed = out
                .origins
                .iter()
                .filter(|o| matches!(o, SlotOrigin::Mixed { .. }))
                .count();
            assert_eq!(mixed, expect, "eta={eta}");
            assert!(out.samples.iter().all(|(seq, _)| seq.len() == 8));
        }
    }

    #[test]
    fn partners_are_never_the_slot_itself() {
        let policy = AugPolicy {
            kind: AugKind::Framestack,
            eta: 1.0,
            clip_len: 8,
            ..AugPolicy::default()
        };
        let batch = toy_batch(16, 16);
        for epoch in 0..20 {
            let mut rng = stream(9, "aug", epoch);
            let out =
                apply_batch_augmentation(&batch, &policy, &BetaLookup::Constant(0.5), &mut rng)
                    .unwrap();
            for (slot, origin) in out.origins.iter().enumerate() {
                if let SlotOrigin::Mixed { partner, .. } = origin {
                    assert_ne!(*partner, slot);
                }
            }
        }
    }

    #[test]
    fn augmentation_is_seed_deterministic() {
        let policy = AugPolicy {
            kind: AugKind::Mixup,
            eta: 0.5,
            clip_len: 8,
            ..AugPolicy::default()
        };
        let batch = toy_batch(12, 16);
        let lookup = BetaLookup::Constant(0.5);
        let run = |seed| {
            let mut rng = stream(seed, "aug", 3);
            apply_batch_augmentation(&batch, &policy, &lookup, &mut rng)
                .unwrap()
                .samples
        };
        let a = run(5);
        let b = run(5);
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.0, y.0);
            assert_eq!(x.1, y.1);
        }
    }

    #[test]
    fn strict_mode_lengths_are_l_or_l_minus_one() {
        let policy = AugPolicy {
            kind: AugKind::Framestack,
            eta: 1.0,
            clip_len: 9,
            length_mode: LengthMode::StrictPaper,
            ..AugPolicy::default()
        };
        let lookup = BetaLookup::PerClass(vec![0.3, 0.44, 0.9, 0.05]);
        let batch = toy_batch(10, 16);
        let mut rng = stream(2, "aug", 0);
        let out = apply_batch_augmentation(&batch, &policy, &lookup, &mut rng).unwrap();
        for (origin, (seq, _)) in out.origins.iter().zip(&out.samples) {
            if matches!(origin, SlotOrigin::Mixed { .. }) {
                assert!(seq.len() == 9 || seq.len() == 8, "got {}", seq.len());
            }
        }
    }
}
