//! The epoch loop: sample batches, subsample frames, pair-augment with the
//! previous epoch's running AP, forward, loss, backward, Adam step, record
//! predictions, finalize the next running-AP table; plus evaluation,
//! checkpointing, and the run history.

mod checkpoint;

pub use checkpoint::{load_checkpoint, save_checkpoint};

use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::fseq::read_fseq;
use crate::loss::{LossConfig, LossFn};
use crate::metrics::{
    acc_at_k, average_precision, map_by_group, EpochBuffer, MetricsReport, RapCarryMode, RapTable,
};
use crate::model::{adam_step, lr_schedule, AdamHyper, AdamState, Arch, Model};
use crate::rebalance::{
    apply_batch_augmentation, class_balanced_sampler, random_batch_sampler, random_subsample,
    uniform_subsample, AugKind, AugPolicy, BetaLookup,
};
use crate::rng::stream;
use crate::types::{
    ClassStats, DatasetManifest, FeatureSequence, GroupThresholds, LabelVector, Split,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    Random,
    Cbs,
}

/// Everything a training run needs beyond the dataset itself.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub batch_size: usize,
    /// Frames randomly subsampled from each stored sequence at train time.
    pub train_frames: usize,
    /// Frames uniformly subsampled at evaluation time.
    pub test_frames: usize,
    pub seed: u64,
    pub sampler: SamplerKind,
    pub aug: AugPolicy,
    pub loss: LossConfig,
    pub arch: Arch,
    pub lr: f64,
    pub lr_decay: f64,
    pub lr_decay_every: usize,
    pub adam: AdamHyper,
    pub rap_carry: RapCarryMode,
    /// Evaluate on the val split every this many epochs (the final epoch
    /// always evaluates).
    pub eval_every: usize,
    /// Write a checkpoint every this many epochs (0 = only the final one).
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_epochs: 100,
            batch_size: 128,
            train_frames: 60,
            test_frames: 150,
            seed: 1,
            sampler: SamplerKind::Random,
            aug: AugPolicy::default(),
            loss: LossConfig::default(),
            arch: Arch::default(),
            lr: 1e-4,
            lr_decay: 0.1,
            lr_decay_every: 30,
            adam: AdamHyper::default(),
            rap_carry: RapCarryMode::Carry,
            eval_every: 1,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be >= 1".to_string()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".to_string()));
        }
        self.aug.validate(self.batch_size)?;
        self.loss.validate()?;
        if self.aug.kind != AugKind::None && self.train_frames < self.aug.clip_len {
            return Err(Error::Config(format!(
                "train_frames ({}) must cover the clip length ({})",
                self.train_frames, self.aug.clip_len
            )));
        }
        if self.lr <= 0.0 || self.lr_decay <= 0.0 || self.lr_decay_every == 0 {
            return Err(Error::Config(
                "lr and lr_decay must be positive, lr_decay_every >= 1".to_string(),
            ));
        }
        if self.eval_every == 0 {
            return Err(Error::Config("eval_every must be >= 1".to_string()));
        }
        Ok(())
    }
}

/// One split with its features resident in memory.
pub struct LoadedSplit {
    pub manifest: DatasetManifest,
    pub features: Vec<FeatureSequence>,
    pub labels: Vec<LabelVector>,
    pub label_sets: Vec<Vec<usize>>,
}

impl LoadedSplit {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Load every feature file named by the manifest, relative to `root`.
    pub fn load(manifest: DatasetManifest, root: &Path) -> Result<LoadedSplit> {
        let mut features = Vec::with_capacity(manifest.records.len());
        let mut labels = Vec::with_capacity(manifest.records.len());
        let mut label_sets = Vec::with_capacity(manifest.records.len());
        for record in &manifest.records {
            let seq = read_fseq(&root.join(&record.path))?;
            features.push(seq);
            labels.push(LabelVector::from_indices(&record.labels, manifest.classes));
            label_sets.push(record.labels.clone());
        }
        Ok(LoadedSplit {
            manifest,
            features,
            labels,
            label_sets,
        })
    }
}

/// A fully loaded dataset: train/val(/test) splits, class statistics from
/// the train split, and the per-class membership lists the balanced
/// sampler draws from.
pub struct Dataset {
    pub classes: usize,
    pub feature_dim: usize,
    pub train: LoadedSplit,
    pub val: LoadedSplit,
    pub test: Option<LoadedSplit>,
    pub stats: ClassStats,
    pub class_members: Vec<Vec<usize>>,
}

impl Dataset {
    /// Load `train.tsv`, `val.tsv`, and (when present) `test.tsv` from a
    /// dataset directory produced by the generator.
    pub fn load(root: &Path, thresholds: GroupThresholds) -> Result<Dataset> {
        let train = DatasetManifest::load(&root.join("train.tsv"))?.with_split(Split::Train);
        let val = DatasetManifest::load(&root.join("val.tsv"))?.with_split(Split::Val);
        let test_path = root.join("test.tsv");
        let test = if test_path.is_file() {
            Some(DatasetManifest::load(&test_path)?.with_split(Split::Test))
        } else {
            None
        };
        Dataset::from_manifests(train, val, test, root, thresholds)
    }

    pub fn from_manifests(
        train: DatasetManifest,
        val: DatasetManifest,
        test: Option<DatasetManifest>,
        root: &Path,
        thresholds: GroupThresholds,
    ) -> Result<Dataset> {
        let stats = train.validate(thresholds, Some(root))?;
        val.validate(thresholds, Some(root))?;
        let classes = train.classes;
        let train = LoadedSplit::load(train, root)?;
        let val = LoadedSplit::load(val, root)?;
        let test = match test {
            Some(m) => {
                m.validate(thresholds, Some(root))?;
                Some(LoadedSplit::load(m, root)?)
            }
            None => None,
        };
        let feature_dim = train
            .features
            .first()
            .map(|s| s.dim())
            .ok_or_else(|| Error::Config("train split is empty".to_string()))?;
        for split in [&train, &val].into_iter().chain(test.as_ref()) {
            if let Some(bad) = split.features.iter().find(|s| s.dim() != feature_dim) {
                return Err(Error::Config(format!(
                    "inconsistent feature dimension: expected {feature_dim}, found {}",
                    bad.dim()
                )));
            }
        }
        let mut class_members = vec![Vec::new(); classes];
        for (i, record) in train.manifest.records.iter().enumerate() {
            for &c in &record.labels {
                class_members[c].push(i);
            }
        }
        Ok(Dataset {
            classes,
            feature_dim,
            train,
            val,
            test,
            stats,
            class_members,
        })
    }

    /// Deterministic pool of training frames (frame 0 of every train
    /// video) used to seed cluster centers.
    pub fn center_pool(&self) -> Array2<f64> {
        let mut pool = Array2::zeros((self.train.len(), self.feature_dim));
        for (i, seq) in self.train.features.iter().enumerate() {
            for (d, &x) in seq.frame(0).iter().enumerate() {
                pool[[i, d]] = x as f64;
            }
        }
        pool
    }
}

/// Mutable training state; everything a checkpoint round-trips.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub model: Model,
    pub adam: AdamState,
    /// Next epoch to run.
    pub epoch: usize,
    pub rap: RapTable,
}

impl TrainState {
    pub fn fresh(dataset: &Dataset, config: &TrainConfig) -> TrainState {
        let pool = matches!(config.arch, Arch::Netvlad { .. }).then(|| dataset.center_pool());
        let model = Model::init(
            config.arch,
            dataset.feature_dim,
            dataset.classes,
            config.seed,
            pool.as_ref(),
        );
        let adam = AdamState::new(&model, config.adam);
        TrainState {
            model,
            adam,
            epoch: 0,
            rap: RapTable::zeros(dataset.classes),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub lr: f64,
    pub val: Option<MetricsReport>,
    pub rap_digest: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunHistory {
    pub records: Vec<EpochRecord>,
}

impl RunHistory {
    /// Epoch with the best val overall mAP (earliest on ties).
    pub fn best_val_epoch(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for r in &self.records {
            if let Some(overall) = r.val.as_ref().and_then(|v| v.map.overall) {
                if best.is_none_or(|(_, b)| overall > b) {
                    best = Some((r.epoch, overall));
                }
            }
        }
        best.map(|(e, _)| e)
    }

    pub fn last_eval(&self) -> Option<&MetricsReport> {
        self.records.iter().rev().find_map(|r| r.val.as_ref())
    }

    pub fn eval_at(&self, epoch: usize) -> Option<&MetricsReport> {
        self.records
            .iter()
            .find(|r| r.epoch == epoch)
            .and_then(|r| r.val.as_ref())
    }

    /// Stable TSV: epoch, loss, lr, val overall/head/medium/tail mAP,
    /// Acc@1, Acc@5. Missing evaluations render as "-".
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("#history\n");
        out.push_str("epoch\tloss\tlr\toverall\thead\tmedium\ttail\tacc@1\tacc@5\n");
        for r in &self.records {
            let opt = |v: Option<f64>| match v {
                Some(x) => format!("{x:.6}"),
                None => "-".to_string(),
            };
            let (overall, head, medium, tail, acc1, acc5) = match &r.val {
                Some(m) => (
                    opt(m.map.overall),
                    opt(m.map.head),
                    opt(m.map.medium),
                    opt(m.map.tail),
                    format!("{:.6}", m.acc1),
                    format!("{:.6}", m.acc5),
                ),
                None => (
                    "-".to_string(),
                    "-".to_string(),
                    "-".to_string(),
                    "-".to_string(),
                    "-".to_string(),
                    "-".to_string(),
                ),
            };
            out.push_str(&format!(
                "{}\t{:.6}\t{:e}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                r.epoch, r.train_loss, r.lr, overall, head, medium, tail, acc1, acc5
            ));
        }
        out
    }
}

fn targets_matrix(labels: &[LabelVector], classes: usize) -> Array2<f64> {
    let mut out = Array2::zeros((labels.len(), classes));
    for (b, y) in labels.iter().enumerate() {
        for (c, &w) in y.weights().iter().enumerate() {
            out[[b, c]] = w;
        }
    }
    out
}

/// Run one training epoch in place and return the mean batch loss.
///
/// The pair budgets for the whole epoch come from the running-AP table
/// frozen at the previous epoch's end; the table produced here only
/// becomes visible to epoch `state.epoch + 1`.
pub fn train_epoch(
    state: &mut TrainState,
    dataset: &Dataset,
    config: &TrainConfig,
    loss_fn: &LossFn,
) -> Result<f64> {
    let epoch = state.epoch;
    assert_eq!(
        state.rap.epoch(),
        epoch,
        "budget table must be the one finalized at the previous epoch"
    );
    let lr = lr_schedule(epoch, config.lr, config.lr_decay, config.lr_decay_every);
    let n = dataset.train.len();
    let epoch_u64 = epoch as u64;

    let mut sampler_rng = stream(config.seed, "sampler", epoch_u64);
    let batches = match config.sampler {
        SamplerKind::Random => random_batch_sampler(n, config.batch_size, &mut sampler_rng),
        SamplerKind::Cbs => class_balanced_sampler(
            &dataset.class_members,
            n,
            config.batch_size,
            &mut sampler_rng,
        )?,
    };

    let mut frame_rng = stream(config.seed, "frames", epoch_u64);
    let mut aug_rng = stream(config.seed, "aug", epoch_u64);
    let mut loss_rng = stream(config.seed, "loss", epoch_u64);
    let lookup = BetaLookup::for_epoch(config.aug.beta_source, &state.rap, dataset.stats.counts());

    let mut buffer = EpochBuffer::new(dataset.classes);
    let mut total_loss = 0.0;
    for (batch_no, indices) in batches.iter().enumerate() {
        let batch: Vec<(FeatureSequence, LabelVector)> = indices
            .iter()
            .map(|&i| {
                let seq = &dataset.train.features[i];
                let clipped =
                    random_subsample(seq, config.train_frames.min(seq.len()), &mut frame_rng);
                (clipped, dataset.train.labels[i].clone())
            })
            .collect();
        let augmented = apply_batch_augmentation(&batch, &config.aug, &lookup, &mut aug_rng)?;
        let frames_f64: Vec<Array2<f64>> =
            augmented.samples.iter().map(|(s, _)| s.to_f64()).collect();
        let labels: Vec<LabelVector> = augmented.samples.iter().map(|(_, y)| y.clone()).collect();
        let targets = targets_matrix(&labels, dataset.classes);

        let (scores, cache) = state.model.forward_cached(&frames_f64);
        let (loss, dscores) = loss_fn.eval(&scores, &targets, epoch, &mut loss_rng);
        if !loss.is_finite() {
            let batch_ids = indices
                .iter()
                .map(|&i| dataset.train.manifest.records[i].video_id.clone())
                .collect();
            return Err(Error::NonFiniteLoss {
                epoch,
                batch: batch_no,
                value: loss,
                loss_kind: loss_fn.kind().as_str().to_string(),
                lr,
                batch_ids,
            });
        }
        let grads = state.model.backward(&frames_f64, &cache, &dscores);
        adam_step(&mut state.model, &grads, &mut state.adam, lr);

        buffer.record(scores.view(), &labels);
        total_loss += loss;
    }

    let batch_count = batches.len().max(1);
    state.rap = buffer.finalize(&state.rap, config.rap_carry)?;
    state.epoch += 1;
    Ok(total_loss / batch_count as f64)
}

/// Side-effect-free evaluation: uniform subsampling to the test clip
/// length, plain forward passes, full metrics.
pub fn evaluate(
    model: &Model,
    split: &LoadedSplit,
    stats: &ClassStats,
    test_frames: usize,
    batch_size: usize,
    epoch: usize,
) -> Result<MetricsReport> {
    if split.is_empty() {
        return Err(Error::Config("cannot evaluate an empty split".to_string()));
    }
    let classes = split.manifest.classes;
    let n = split.len();
    let mut all_scores = Array2::zeros((n, classes));
    let mut row = 0;
    for chunk in (0..n).collect::<Vec<_>>().chunks(batch_size.max(1)) {
        let batch: Vec<Array2<f64>> = chunk
            .iter()
            .map(|&i| uniform_subsample(&split.features[i], test_frames).to_f64())
            .collect();
        let scores = model.forward(&batch);
        for b in 0..chunk.len() {
            all_scores.row_mut(row).assign(&scores.row(b));
            row += 1;
        }
    }

    let mut per_class_ap = Vec::with_capacity(classes);
    let mut column = vec![0.0; n];
    let mut relevance = vec![false; n];
    for c in 0..classes {
        for i in 0..n {
            column[i] = all_scores[[i, c]];
            relevance[i] = split.label_sets[i].contains(&c);
        }
        per_class_ap.push(average_precision(&column, &relevance));
    }
    let map = map_by_group(&per_class_ap, stats);
    let acc1 = acc_at_k(all_scores.view(), &split.label_sets, 1);
    let acc5 = acc_at_k(all_scores.view(), &split.label_sets, 5.min(classes));
    Ok(MetricsReport {
        epoch,
        split: split.manifest.split.unwrap_or(Split::Val),
        per_class_ap,
        map,
        acc1,
        acc5,
    })
}

/// Train to `max_epochs`, evaluating and checkpointing on schedule. When
/// `out_dir` is given, `history.tsv` is rewritten after every epoch and
/// checkpoints land as `checkpoint_<epoch>.fsck` plus a final
/// `checkpoint_final.fsck`.
pub fn fit(
    dataset: &Dataset,
    config: &TrainConfig,
    resume: Option<TrainState>,
    out_dir: Option<&Path>,
) -> Result<(RunHistory, TrainState)> {
    config.validate()?;
    let loss_fn = LossFn::new(
        config.loss.clone(),
        dataset.stats.counts(),
        config.max_epochs,
    )?;
    let mut state = match resume {
        Some(state) => {
            if state.model.feature_dim() != dataset.feature_dim
                || state.model.classes() != dataset.classes
            {
                return Err(Error::Config(
                    "checkpoint dimensions do not match the dataset".to_string(),
                ));
            }
            state
        }
        None => TrainState::fresh(dataset, config),
    };
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }

    let mut history = RunHistory::default();
    while state.epoch < config.max_epochs {
        let lr = lr_schedule(
            state.epoch,
            config.lr,
            config.lr_decay,
            config.lr_decay_every,
        );
        let train_loss = train_epoch(&mut state, dataset, config, &loss_fn)?;
        let epoch_done = state.epoch - 1;
        let is_last = state.epoch == config.max_epochs;
        let val = if (epoch_done + 1) % config.eval_every == 0 || is_last {
            Some(evaluate(
                &state.model,
                &dataset.val,
                &dataset.stats,
                config.test_frames,
                config.batch_size,
                epoch_done,
            )?)
        } else {
            None
        };
        if let Some(m) = &val {
            log::info!(
                "epoch {epoch_done}: loss {train_loss:.4}, val mAP {:?}",
                m.map.overall
            );
        }
        history.records.push(EpochRecord {
            epoch: epoch_done,
            train_loss,
            lr,
            val,
            rap_digest: state.rap.digest(),
        });
        if let Some(dir) = out_dir {
            let hist_path = dir.join("history.tsv");
            std::fs::write(&hist_path, history.to_tsv()).map_err(|e| Error::io(&hist_path, e))?;
            let want_periodic =
                config.checkpoint_every > 0 && state.epoch % config.checkpoint_every == 0;
            if want_periodic && !is_last {
                save_checkpoint(
                    &state,
                    &dir.join(format!("checkpoint_{}.fsck", state.epoch)),
                )?;
            }
            if is_last {
                save_checkpoint(&state, &dir.join("checkpoint_final.fsck"))?;
            }
        }
    }
    Ok((history, state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate_dataset, split_dataset, SynthConfig};

    pub(crate) fn tiny_dataset(dir: &Path, seed: u64) -> Dataset {
        let config = SynthConfig {
            classes: 4,
            feature_dim: 6,
            raw_len: 10,
            counts: vec![12, 9, 6, 5],
            signal_fraction: 0.7,
            noise_sigma: 0.2,
            background_protos: 2,
            seed,
        };
        let manifest = generate_dataset(&config, dir).unwrap();
        let (train, val, test) = split_dataset(&manifest, [0.6, 0.2, 0.2], seed).unwrap();
        Dataset::from_manifests(
            train,
            val,
            Some(test),
            dir,
            GroupThresholds::new(10, 6).unwrap(),
        )
        .unwrap()
    }

    pub(crate) fn tiny_config() -> TrainConfig {
        TrainConfig {
            max_epochs: 3,
            batch_size: 4,
            train_frames: 8,
            test_frames: 10,
            seed: 5,
            lr: 1e-3,
            aug: AugPolicy {
                kind: AugKind::Framestack,
                clip_len: 8,
                ..AugPolicy::default()
            },
            arch: Arch::Nonlinear { hidden: 8 },
            eval_every: 1,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn fit_is_deterministic_and_records_every_epoch() {
        let dir = tempfile::tempdir().unwrap();
        let dataset = tiny_dataset(dir.path(), 3);
        let config = tiny_config();
        let (h1, s1) = fit(&dataset, &config, None, None).unwrap();
        let (h2, s2) = fit(&dataset, &config, None, None).unwrap();
        assert_eq!(h1.to_tsv(), h2.to_tsv());
        assert_eq!(s1.model, s2.model);
        assert_eq!(h1.records.len(), 3);
        assert!(h1.records.iter().all(|r| r.val.is_some()));
        // different seed diverges
        let other = TrainConfig {
            seed: 6,
            ..config.clone()
        };
        let (h3, _) = fit(&dataset, &other, None, None).unwrap();
        assert_ne!(h1.to_tsv(), h3.to_tsv());
    }

    #[test]
    fn epoch_zero_uses_the_zero_table() {
        let dir = tempfile::tempdir().unwrap();
        let dataset = tiny_dataset(dir.path(), 3);
        let config = tiny_config();
        let loss_fn = LossFn::new(
            config.loss.clone(),
            dataset.stats.counts(),
            config.max_epochs,
        )
        .unwrap();
        let mut state = TrainState::fresh(&dataset, &config);
        assert_eq!(state.rap.epoch(), 0);
        assert!(state.rap.values().iter().all(|&v| v == 0.0));
        train_epoch(&mut state, &dataset, &config, &loss_fn).unwrap();
        assert_eq!(state.rap.epoch(), 1);
        assert_eq!(state.epoch, 1);
    }

    #[test]
    fn evaluate_is_repeatable_and_matches_group_stats() {
        let dir = tempfile::tempdir().unwrap();
        let dataset = tiny_dataset(dir.path(), 4);
        let config = tiny_config();
        let state = TrainState::fresh(&dataset, &config);
        let a = evaluate(&state.model, &dataset.val, &dataset.stats, 10, 4, 0).unwrap();
        let b = evaluate(&state.model, &dataset.val, &dataset.stats, 10, 4, 0).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.per_class_ap.len(), dataset.classes);
    }

    #[test]
    fn history_tsv_shape_is_stable() {
        let dir = tempfile::tempdir().unwrap();
        let dataset = tiny_dataset(dir.path(), 5);
        let config = TrainConfig {
            eval_every: 2,
            ..tiny_config()
        };
        let (history, _) = fit(&dataset, &config, None, None).unwrap();
        let tsv = history.to_tsv();
        let lines: Vec<&str> = tsv.lines().collect();
        assert_eq!(lines[0], "#history");
        assert!(lines[1].starts_with("epoch\tloss\tlr\toverall"));
        // epochs 0 and 2 did not evaluate under eval_every=2... epoch 1 and
        // final epoch 2 did: epoch 0 row carries dashes
        assert!(lines[2].contains("\t-\t"));
        assert_eq!(lines.len(), 2 + 3);
    }

    #[test]
    fn mean_loss_is_finite_and_positive() {
        let dir = tempfile::tempdir().unwrap();
        let dataset = tiny_dataset(dir.path(), 6);
        let config = tiny_config();
        let loss_fn = LossFn::new(
            config.loss.clone(),
            dataset.stats.counts(),
            config.max_epochs,
        )
        .unwrap();
        let mut state = TrainState::fresh(&dataset, &config);
        let loss = train_epoch(&mut state, &dataset, &config, &loss_fn).unwrap();
        assert!(loss.is_finite() && loss > 0.0);
    }

    #[test]
    fn non_finite_loss_aborts_with_diagnostics() {
        let dir = tempfile::tempdir().unwrap();
        let dataset = tiny_dataset(dir.path(), 7);
        let config = tiny_config();
        let loss_fn = LossFn::new(
            config.loss.clone(),
            dataset.stats.counts(),
            config.max_epochs,
        )
        .unwrap();
        let mut state = TrainState::fresh(&dataset, &config);
        // poison the output bias; upstream blocks are shielded by the
        // rectifier, which maps NaN to 0
        let mut blocks = state.model.blocks_mut();
        let last = blocks.len() - 1;
        blocks[last][[0, 0]] = f64::NAN;
        drop(blocks);
        let err = train_epoch(&mut state, &dataset, &config, &loss_fn).unwrap_err();
        match err {
            Error::NonFiniteLoss {
                epoch,
                batch,
                loss_kind,
                batch_ids,
                ..
            } => {
                assert_eq!(epoch, 0);
                assert_eq!(batch, 0);
                assert_eq!(loss_kind, "bce");
                assert!(!batch_ids.is_empty());
            }
            other => panic!("expected the loss diagnostic, got {other}"),
        }
    }

    #[test]
    fn config_validation_catches_bad_combinations() {
        // pairing augmentation with a batch of one
        let mut config = tiny_config();
        config.batch_size = 1;
        assert!(config.validate().is_err());
        // training clips shorter than the stacking length
        let mut config = tiny_config();
        config.train_frames = 4;
        assert!(config.validate().is_err());
        assert!(tiny_config().validate().is_ok());
    }
}
