//! The experiment configuration file: one TOML document with `dataset`,
//! `thresholds`, `train`, `aug`, and `loss` tables. Every key has a
//! default, and every key can be overridden by a dotted path (the CLI
//! flags and sweep axes both go through [`FileConfig::set_key`]).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datagen::{banded_counts, zipf_counts, SynthConfig};
use crate::error::{Error, Result};
use crate::loss::{LossConfig, LossKind};
use crate::metrics::RapCarryMode;
use crate::model::{AdamHyper, Arch};
use crate::rebalance::{AugKind, AugPolicy, BetaSource, LengthMode};
use crate::trainer::{SamplerKind, TrainConfig};
use crate::types::GroupThresholds;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    pub classes: usize,
    pub feature_dim: usize,
    pub raw_len: usize,
    /// "banded" or "zipf".
    pub count_mode: String,
    /// Bands as (class span, videos per class), head first.
    pub bands: Vec<(usize, usize)>,
    pub zipf_max: usize,
    pub zipf_min: usize,
    pub zipf_alpha: f64,
    pub signal_fraction: f64,
    pub noise_sigma: f64,
    pub background_protos: usize,
    pub seed: u64,
    /// Train/val/test fractions, summing to 1.
    pub split: [f64; 3],
}

impl Default for DatasetSection {
    fn default() -> Self {
        DatasetSection {
            classes: 50,
            feature_dim: 64,
            raw_len: 150,
            count_mode: "banded".to_string(),
            bands: vec![(5, 200), (25, 40), (20, 8)],
            zipf_max: 200,
            zipf_min: 5,
            zipf_alpha: 1.0,
            signal_fraction: 0.4,
            noise_sigma: 1.0,
            background_protos: 8,
            seed: 7,
            split: [0.7, 0.1, 0.2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdSection {
    pub head_min: usize,
    pub medium_min: usize,
}

impl Default for ThresholdSection {
    fn default() -> Self {
        // desk-scale bands; the published 500/100 suit full-size datasets
        ThresholdSection {
            head_min: 100,
            medium_min: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub max_epochs: usize,
    pub batch_size: usize,
    pub train_frames: usize,
    pub test_frames: usize,
    pub seed: u64,
    /// "random" or "cbs".
    pub sampler: String,
    /// "nonlinear" or "netvlad".
    pub arch: String,
    pub hidden: usize,
    pub clusters: usize,
    pub netvlad_hidden: usize,
    pub lr: f64,
    pub lr_decay: f64,
    pub lr_decay_every: usize,
    pub eval_every: usize,
    pub checkpoint_every: usize,
    /// "carry" or "reset".
    pub rap_carry: String,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            max_epochs: 30,
            batch_size: 64,
            train_frames: 60,
            test_frames: 150,
            seed: 1,
            sampler: "random".to_string(),
            arch: "nonlinear".to_string(),
            hidden: 512,
            clusters: 64,
            netvlad_hidden: 1024,
            lr: 1e-3,
            lr_decay: 0.1,
            lr_decay_every: 30,
            eval_every: 5,
            checkpoint_every: 0,
            rap_carry: "carry".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugSection {
    /// "none", "framestack", or "mixup".
    pub kind: String,
    pub eta: f64,
    pub clip_len: usize,
    /// "exact_l" or "strict_paper".
    pub length_mode: String,
    /// "rap", "freq", or "const:<x>".
    pub beta_source: String,
    pub epsilon: f64,
    pub mixup_alpha: f64,
}

impl Default for AugSection {
    fn default() -> Self {
        AugSection {
            kind: "none".to_string(),
            eta: 0.5,
            clip_len: 60,
            length_mode: "exact_l".to_string(),
            beta_source: "rap".to_string(),
            epsilon: 1e-5,
            mixup_alpha: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossSection {
    /// "bce", "focal", "cb", "ldam_drw", or "eql".
    pub kind: String,
    pub gamma_focal: f64,
    pub beta_cb: f64,
    pub ldam_c: f64,
    /// Negative means "resolve to 60% of max_epochs".
    pub drw_start: i64,
    pub eql_lambda: f64,
    pub eql_gamma: f64,
}

impl Default for LossSection {
    fn default() -> Self {
        LossSection {
            kind: "bce".to_string(),
            gamma_focal: 2.0,
            beta_cb: 0.9999,
            ldam_c: 0.5,
            drw_start: -1,
            eql_lambda: 0.03,
            eql_gamma: 0.95,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub dataset: DatasetSection,
    pub thresholds: ThresholdSection,
    pub train: TrainSection,
    pub aug: AugSection,
    pub loss: LossSection,
}

pub fn parse_beta_source(text: &str) -> Result<BetaSource> {
    match text {
        "rap" => Ok(BetaSource::RunningAp),
        "freq" => Ok(BetaSource::ClassFrequency),
        other => {
            if let Some(value) = other.strip_prefix("const:") {
                let c: f64 = value
                    .parse()
                    .map_err(|e| Error::Config(format!("bad constant beta {value:?}: {e}")))?;
                Ok(BetaSource::Constant(c))
            } else {
                Err(Error::Config(format!(
                    "unknown beta source {other:?} (expected rap, freq, or const:<x>)"
                )))
            }
        }
    }
}

pub fn beta_source_to_string(source: BetaSource) -> String {
    match source {
        BetaSource::RunningAp => "rap".to_string(),
        BetaSource::ClassFrequency => "freq".to_string(),
        BetaSource::Constant(c) => format!("const:{c}"),
    }
}

fn parse_enum<T>(what: &str, text: &str, table: &[(&str, T)]) -> Result<T>
where
    T: Copy,
{
    table
        .iter()
        .find(|(name, _)| *name == text)
        .map(|(_, v)| *v)
        .ok_or_else(|| {
            let options: Vec<&str> = table.iter().map(|(n, _)| *n).collect();
            Error::Config(format!(
                "unknown {what} {text:?} (expected one of {})",
                options.join(", ")
            ))
        })
}

impl FileConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<FileConfig> {
        toml::from_str(text).map_err(|e| Error::bad_format(origin, format!("config parse: {e}")))
    }

    pub fn load(path: &Path) -> Result<FileConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn resolve_thresholds(&self) -> Result<GroupThresholds> {
        GroupThresholds::new(self.thresholds.head_min, self.thresholds.medium_min)
    }

    pub fn resolve_synth(&self) -> Result<SynthConfig> {
        let d = &self.dataset;
        let counts = match d.count_mode.as_str() {
            "banded" => {
                let counts = banded_counts(&d.bands)?;
                if counts.len() != d.classes {
                    return Err(Error::Config(format!(
                        "bands cover {} classes but dataset.classes is {}",
                        counts.len(),
                        d.classes
                    )));
                }
                counts
            }
            "zipf" => zipf_counts(d.classes, d.zipf_max, d.zipf_min, d.zipf_alpha)?,
            other => {
                return Err(Error::Config(format!(
                    "unknown count_mode {other:?} (expected banded or zipf)"
                )))
            }
        };
        let config = SynthConfig {
            classes: d.classes,
            feature_dim: d.feature_dim,
            raw_len: d.raw_len,
            counts,
            signal_fraction: d.signal_fraction,
            noise_sigma: d.noise_sigma,
            background_protos: d.background_protos,
            seed: d.seed,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn resolve_split_ratios(&self) -> Result<[f64; 3]> {
        let ratios = self.dataset.split;
        if ratios.iter().any(|&r| r < 0.0) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "dataset.split must be non-negative and sum to 1, got {ratios:?}"
            )));
        }
        Ok(ratios)
    }

    pub fn resolve_arch(&self) -> Result<Arch> {
        match self.train.arch.as_str() {
            "nonlinear" => Ok(Arch::Nonlinear {
                hidden: self.train.hidden,
            }),
            "netvlad" => Ok(Arch::Netvlad {
                clusters: self.train.clusters,
                hidden: self.train.netvlad_hidden,
            }),
            other => Err(Error::Config(format!(
                "unknown arch {other:?} (expected nonlinear or netvlad)"
            ))),
        }
    }

    pub fn resolve_aug(&self) -> Result<AugPolicy> {
        Ok(AugPolicy {
            kind: parse_enum(
                "augmentation",
                &self.aug.kind,
                &[
                    ("none", AugKind::None),
                    ("framestack", AugKind::Framestack),
                    ("mixup", AugKind::Mixup),
                ],
            )?,
            eta: self.aug.eta,
            epsilon: self.aug.epsilon,
            clip_len: self.aug.clip_len,
            length_mode: parse_enum(
                "length mode",
                &self.aug.length_mode,
                &[
                    ("exact_l", LengthMode::ExactL),
                    ("strict_paper", LengthMode::StrictPaper),
                ],
            )?,
            beta_source: parse_beta_source(&self.aug.beta_source)?,
            mixup_alpha: self.aug.mixup_alpha,
        })
    }

    pub fn resolve_loss(&self) -> Result<LossConfig> {
        let l = &self.loss;
        let config = LossConfig {
            kind: parse_enum(
                "loss",
                &l.kind,
                &[
                    ("bce", LossKind::Bce),
                    ("focal", LossKind::Focal),
                    ("cb", LossKind::Cb),
                    ("ldam_drw", LossKind::LdamDrw),
                    ("eql", LossKind::Eql),
                ],
            )?,
            gamma_focal: l.gamma_focal,
            beta_cb: l.beta_cb,
            ldam_c: l.ldam_c,
            drw_start_epoch: (l.drw_start >= 0).then_some(l.drw_start as usize),
            eql_lambda: l.eql_lambda,
            eql_gamma: l.eql_gamma,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn resolve_train(&self) -> Result<TrainConfig> {
        let t = &self.train;
        let config = TrainConfig {
            max_epochs: t.max_epochs,
            batch_size: t.batch_size,
            train_frames: t.train_frames,
            test_frames: t.test_frames,
            seed: t.seed,
            sampler: parse_enum(
                "sampler",
                &t.sampler,
                &[("random", SamplerKind::Random), ("cbs", SamplerKind::Cbs)],
            )?,
            aug: self.resolve_aug()?,
            loss: self.resolve_loss()?,
            arch: self.resolve_arch()?,
            lr: t.lr,
            lr_decay: t.lr_decay,
            lr_decay_every: t.lr_decay_every,
            adam: AdamHyper::default(),
            rap_carry: parse_enum(
                "rap carry mode",
                &t.rap_carry,
                &[
                    ("carry", RapCarryMode::Carry),
                    ("reset", RapCarryMode::Reset),
                ],
            )?,
            eval_every: t.eval_every,
            checkpoint_every: t.checkpoint_every,
        };
        config.validate()?;
        Ok(config)
    }

    /// Override one key by dotted path, e.g. `set_key("aug.eta", "0.3")`.
    /// This is the single override mechanism behind CLI flags and sweep
    /// axes.
    pub fn set_key(&mut self, key: &str, value: &str) -> Result<()> {
        let bad_value = |e: &dyn std::fmt::Display| {
            Error::Config(format!("bad value {value:?} for {key}: {e}"))
        };
        macro_rules! parse_to {
            ($slot:expr) => {
                $slot = value.parse().map_err(|e| bad_value(&e))?
            };
        }
        match key {
            "dataset.classes" => parse_to!(self.dataset.classes),
            "dataset.feature_dim" => parse_to!(self.dataset.feature_dim),
            "dataset.raw_len" => parse_to!(self.dataset.raw_len),
            "dataset.count_mode" => self.dataset.count_mode = value.to_string(),
            "dataset.bands" => self.dataset.bands = parse_bands(value)?,
            "dataset.zipf_max" => parse_to!(self.dataset.zipf_max),
            "dataset.zipf_min" => parse_to!(self.dataset.zipf_min),
            "dataset.zipf_alpha" => parse_to!(self.dataset.zipf_alpha),
            "dataset.signal_fraction" => parse_to!(self.dataset.signal_fraction),
            "dataset.noise_sigma" => parse_to!(self.dataset.noise_sigma),
            "dataset.background_protos" => parse_to!(self.dataset.background_protos),
            "dataset.seed" => parse_to!(self.dataset.seed),
            "dataset.split" => {
                let parts: Vec<&str> = value.split(',').collect();
                if parts.len() != 3 {
                    return Err(Error::Config(format!(
                        "dataset.split expects three comma-separated fractions, got {value:?}"
                    )));
                }
                for (i, p) in parts.iter().enumerate() {
                    self.dataset.split[i] = p.trim().parse().map_err(|e| bad_value(&e))?;
                }
            }
            "thresholds.head_min" => parse_to!(self.thresholds.head_min),
            "thresholds.medium_min" => parse_to!(self.thresholds.medium_min),
            "train.max_epochs" => parse_to!(self.train.max_epochs),
            "train.batch_size" => parse_to!(self.train.batch_size),
            "train.train_frames" => parse_to!(self.train.train_frames),
            "train.test_frames" => parse_to!(self.train.test_frames),
            "train.seed" => parse_to!(self.train.seed),
            "train.sampler" => self.train.sampler = value.to_string(),
            "train.arch" => self.train.arch = value.to_string(),
            "train.hidden" => parse_to!(self.train.hidden),
            "train.clusters" => parse_to!(self.train.clusters),
            "train.netvlad_hidden" => parse_to!(self.train.netvlad_hidden),
            "train.lr" => parse_to!(self.train.lr),
            "train.lr_decay" => parse_to!(self.train.lr_decay),
            "train.lr_decay_every" => parse_to!(self.train.lr_decay_every),
            "train.eval_every" => parse_to!(self.train.eval_every),
            "train.checkpoint_every" => parse_to!(self.train.checkpoint_every),
            "train.rap_carry" => self.train.rap_carry = value.to_string(),
            "aug.kind" => self.aug.kind = value.to_string(),
            "aug.eta" => parse_to!(self.aug.eta),
            "aug.clip_len" => parse_to!(self.aug.clip_len),
            "aug.length_mode" => self.aug.length_mode = value.to_string(),
            "aug.beta_source" => self.aug.beta_source = value.to_string(),
            "aug.epsilon" => parse_to!(self.aug.epsilon),
            "aug.mixup_alpha" => parse_to!(self.aug.mixup_alpha),
            "loss.kind" => self.loss.kind = value.to_string(),
            "loss.gamma_focal" => parse_to!(self.loss.gamma_focal),
            "loss.beta_cb" => parse_to!(self.loss.beta_cb),
            "loss.ldam_c" => parse_to!(self.loss.ldam_c),
            "loss.drw_start" => parse_to!(self.loss.drw_start),
            "loss.eql_lambda" => parse_to!(self.loss.eql_lambda),
            "loss.eql_gamma" => parse_to!(self.loss.eql_gamma),
            other => {
                return Err(Error::Config(format!("unknown config key {other:?}")));
            }
        }
        Ok(())
    }
}

/// Bands from a compact string: `"5@200,25@40,20@8"`.
pub fn parse_bands(text: &str) -> Result<Vec<(usize, usize)>> {
    text.split(',')
        .map(|part| {
            let (span, count) = part.trim().split_once('@').ok_or_else(|| {
                Error::Config(format!("bad band {part:?} (expected <classes>@<count>)"))
            })?;
            let span = span
                .parse()
                .map_err(|e| Error::Config(format!("bad band span {span:?}: {e}")))?;
            let count = count
                .parse()
                .map_err(|e| Error::Config(format!("bad band count {count:?}: {e}")))?;
            Ok((span, count))
        })
        .collect()
}

/// Declarative sweep: a base configuration, a seed list, and any number of
/// key/value axes expanded as a cartesian product.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub grid: GridSection,
    pub base: FileConfig,
    pub axis: Vec<AxisSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub seeds: Vec<u64>,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { seeds: vec![1] }
    }
}

/// One sweep axis. The common form sets a single key to each value; the
/// special key `"set"` treats every value as a `;`-separated bundle of
/// `key=value` assignments, so one axis can switch whole methods.
/// `labels`, when given, names the cells instead of the sanitized values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSection {
    pub key: String,
    pub values: Vec<String>,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub labels: Option<Vec<String>>,
}

/// One expanded sweep cell: resolved config plus a filesystem-safe name.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub name: String,
    pub config: FileConfig,
    pub seed: u64,
}

impl GridConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<GridConfig> {
        toml::from_str(text).map_err(|e| Error::bad_format(origin, format!("grid parse: {e}")))
    }

    pub fn load(path: &Path) -> Result<GridConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Cartesian product over axes and seeds, in declaration order.
    pub fn expand(&self) -> Result<Vec<GridCell>> {
        if self.grid.seeds.is_empty() {
            return Err(Error::Config("grid.seeds must be non-empty".to_string()));
        }
        for axis in &self.axis {
            if axis.values.is_empty() {
                return Err(Error::Config(format!("axis {:?} has no values", axis.key)));
            }
            if let Some(labels) = &axis.labels {
                if labels.len() != axis.values.len() {
                    return Err(Error::Config(format!(
                        "axis {:?} has {} labels for {} values",
                        axis.key,
                        labels.len(),
                        axis.values.len()
                    )));
                }
            }
        }
        let mut cells = vec![(String::new(), self.base.clone())];
        for axis in &self.axis {
            let label = axis
                .name
                .clone()
                .unwrap_or_else(|| axis.key.rsplit('.').next().unwrap_or(&axis.key).to_string());
            let mut next = Vec::with_capacity(cells.len() * axis.values.len());
            for (name, config) in &cells {
                for (vi, value) in axis.values.iter().enumerate() {
                    let mut config = config.clone();
                    if axis.key == "set" {
                        for assignment in value.split(';') {
                            let (k, v) = assignment.trim().split_once('=').ok_or_else(|| {
                                Error::Config(format!(
                                    "bundle assignment {assignment:?} must be key=value"
                                ))
                            })?;
                            config.set_key(k.trim(), v.trim())?;
                        }
                    } else {
                        config.set_key(&axis.key, value)?;
                    }
                    let value_name = axis
                        .labels
                        .as_ref()
                        .map(|l| l[vi].clone())
                        .unwrap_or_else(|| sanitize(value));
                    let tag = format!("{label}={value_name}");
                    let name = if name.is_empty() {
                        tag
                    } else {
                        format!("{name}_{tag}")
                    };
                    next.push((name, config));
                }
            }
            cells = next;
        }
        let mut out = Vec::with_capacity(cells.len() * self.grid.seeds.len());
        for (name, config) in cells {
            for &seed in &self.grid.seeds {
                let mut config = config.clone();
                config.train.seed = seed;
                let name = if name.is_empty() {
                    format!("seed={seed}")
                } else {
                    format!("{name}_seed={seed}")
                };
                out.push(GridCell { name, config, seed });
            }
        }
        Ok(out)
    }
}

fn sanitize(value: &str) -> String {
    value
        .chars()
        .map(|c| {
            if c.is_alphanumeric() || c == '.' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}
