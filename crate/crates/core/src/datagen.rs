//! Synthetic long-tailed feature-sequence datasets.
//!
//! Videos are weakly labeled: each stored frame is either informative
//! (the prototype of one of the video's classes plus noise) with
//! probability `signal_fraction`, or one of a pool of shared background
//! prototypes plus noise. Class counts follow a zipf curve or explicit
//! head/medium/tail bands. Everything is derived from the dataset seed,
//! with per-video seeds hashed from the video id so generation order is
//! irrelevant.

use std::path::Path;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::fseq::write_fseq;
use crate::rng::{stream, video_seed};
use crate::types::{DatasetManifest, FeatureSequence, ManifestRecord, Split};

/// Parameters of one synthetic dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub classes: usize,
    pub feature_dim: usize,
    /// Stored sequence length.
    pub raw_len: usize,
    /// Per-class video counts, one entry per class.
    pub counts: Vec<usize>,
    /// Probability that a frame is informative rather than background.
    pub signal_fraction: f64,
    /// Scale of the Gaussian noise added to every frame.
    pub noise_sigma: f64,
    /// Size of the shared background prototype pool.
    pub background_protos: usize,
    pub seed: u64,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 3 {
            return Err(Error::Config(format!(
                "need at least 3 classes, got {}",
                self.classes
            )));
        }
        if self.counts.len() != self.classes {
            return Err(Error::Config(format!(
                "counts has {} entries for {} classes",
                self.counts.len(),
                self.classes
            )));
        }
        if self.counts.contains(&0) {
            return Err(Error::Config(
                "every class needs at least 1 video".to_string(),
            ));
        }
        if self.raw_len == 0 || self.feature_dim == 0 {
            return Err(Error::Config(
                "raw_len and feature_dim must be >= 1".to_string(),
            ));
        }
        if !(0.0..=1.0).contains(&self.signal_fraction) {
            return Err(Error::Config(format!(
                "signal_fraction must lie in [0, 1], got {}",
                self.signal_fraction
            )));
        }
        if self.signal_fraction == 0.0 {
            log::warn!("signal_fraction is 0: every frame will be background noise");
        }
        if self.noise_sigma < 0.0 {
            return Err(Error::Config("noise_sigma must be >= 0".to_string()));
        }
        if self.background_protos == 0 {
            return Err(Error::Config(
                "need at least one background prototype".to_string(),
            ));
        }
        Ok(())
    }
}

/// Zipf-style counts: class at 1-based rank r gets
/// `max(n_min, floor(n_max * r^-alpha))`. Non-increasing in r; alpha 0
/// gives a balanced control.
pub fn zipf_counts(classes: usize, n_max: usize, n_min: usize, alpha: f64) -> Result<Vec<usize>> {
    if n_min < 1 || n_max < n_min {
        return Err(Error::Config(format!(
            "need n_max >= n_min >= 1, got {n_max}/{n_min}"
        )));
    }
    if alpha < 0.0 {
        return Err(Error::Config("alpha must be >= 0".to_string()));
    }
    Ok((1..=classes)
        .map(|rank| {
            let raw = (n_max as f64 * (rank as f64).powf(-alpha)).floor() as usize;
            raw.max(n_min)
        })
        .collect())
}

/// Explicit band counts: `[(2, 200), (1, 8)]` yields `[200, 200, 8]`.
pub fn banded_counts(bands: &[(usize, usize)]) -> Result<Vec<usize>> {
    if bands.is_empty() {
        return Err(Error::Config("no bands given".to_string()));
    }
    let mut counts = Vec::new();
    for &(width, count) in bands {
        if width == 0 {
            return Err(Error::Config("band width must be >= 1".to_string()));
        }
        if count == 0 {
            return Err(Error::Config("count must be >= 1".to_string()));
        }
        counts.extend(std::iter::repeat_n(count, width));
    }
    Ok(counts)
}

/// Unit-norm class and background prototype vectors, drawn once per
/// dataset from the seeded generator.
#[derive(Debug, Clone)]
pub struct Prototypes {
    pub class: Array2<f64>,
    pub background: Array2<f64>,
}

fn unit_vector(dim: usize, rng: &mut ChaCha8Rng) -> Array1<f64> {
    loop {
        let v: Array1<f64> = Array1::from_shape_fn(dim, |_| StandardNormal.sample(rng));
        let norm = v.dot(&v).sqrt();
        if norm > 1e-9 {
            return v / norm;
        }
    }
}

impl Prototypes {
    pub fn generate(config: &SynthConfig) -> Prototypes {
        let mut rng = stream(config.seed, "prototypes", 0);
        let mut class = Array2::zeros((config.classes, config.feature_dim));
        for c in 0..config.classes {
            class
                .row_mut(c)
                .assign(&unit_vector(config.feature_dim, &mut rng));
        }
        let mut background = Array2::zeros((config.background_protos, config.feature_dim));
        for b in 0..config.background_protos {
            background
                .row_mut(b)
                .assign(&unit_vector(config.feature_dim, &mut rng));
        }
        Prototypes { class, background }
    }
}

/// Generate one video's stored frames. Bit-identical for identical
/// `(labels, config, prototypes, seed)`.
pub fn synth_video(
    labels: &[usize],
    config: &SynthConfig,
    prototypes: &Prototypes,
    seed: u64,
) -> FeatureSequence {
    assert!(
        !labels.is_empty(),
        "training samples need at least one label"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = config.feature_dim;
    let mut data = Array2::zeros((config.raw_len, dim));
    for t in 0..config.raw_len {
        let base = if rng.random::<f64>() < config.signal_fraction {
            let class = labels[rng.random_range(0..labels.len())];
            prototypes.class.row(class)
        } else {
            let b = rng.random_range(0..config.background_protos);
            prototypes.background.row(b)
        };
        for d in 0..dim {
            let noise: f64 = StandardNormal.sample(&mut rng);
            data[[t, d]] = (base[d] + config.noise_sigma * noise) as f32;
        }
    }
    FeatureSequence::new(data)
}

fn synth_video_id(class: usize, index: usize) -> String {
    format!("v{class:04}_{index:05}")
}

/// Write the full dataset (feature files plus manifest) under `out_dir`.
/// Every class c gets exactly `counts[c]` single-label videos.
pub fn generate_dataset(config: &SynthConfig, out_dir: &Path) -> Result<DatasetManifest> {
    config.validate()?;
    let features_dir = out_dir.join("features");
    std::fs::create_dir_all(&features_dir).map_err(|e| Error::io(&features_dir, e))?;
    let prototypes = Prototypes::generate(config);
    let mut records = Vec::new();
    for class in 0..config.classes {
        for index in 0..config.counts[class] {
            let id = synth_video_id(class, index);
            let seq = synth_video(&[class], config, &prototypes, video_seed(config.seed, &id));
            let rel = Path::new("features").join(format!("{id}.fseq"));
            write_fseq(&seq, &out_dir.join(&rel))?;
            records.push(ManifestRecord {
                video_id: id,
                path: rel,
                labels: vec![class],
            });
        }
    }
    let manifest = DatasetManifest::new(config.classes, records);
    manifest.save(&out_dir.join("manifest.tsv"))?;
    Ok(manifest)
}

/// Per-class stratified split. Ratios must sum to 1; floor rounding sends
/// the remainder to train. A positive val/test ratio gets at least one
/// video per class (with a warning) unless the class is too small to
/// stratify at all. Multi-label records stratify by their first label.
pub fn split_dataset(
    manifest: &DatasetManifest,
    ratios: [f64; 3],
    seed: u64,
) -> Result<(DatasetManifest, DatasetManifest, DatasetManifest)> {
    if ratios.iter().any(|&r| r < 0.0) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "split ratios must be non-negative and sum to 1, got {ratios:?}"
        )));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); manifest.classes];
    for (i, record) in manifest.records.iter().enumerate() {
        let Some(&class) = record.labels.first() else {
            return Err(Error::InvalidManifest {
                violations: vec![format!("record {}: empty label set", record.video_id)],
            });
        };
        if class >= manifest.classes {
            return Err(Error::InvalidManifest {
                violations: vec![format!(
                    "record {}: class index {} out of range (classes={})",
                    record.video_id, class, manifest.classes
                )],
            });
        }
        by_class[class].push(i);
    }

    let [_, r_val, r_test] = ratios;
    let mut train = Vec::new();
    let mut val = Vec::new();
    let mut test = Vec::new();
    for (class, members) in by_class.iter().enumerate() {
        let n = members.len();
        if n == 0 {
            continue;
        }
        let mut n_val = (n as f64 * r_val).floor() as usize;
        if r_val > 0.0 && n_val == 0 {
            log::warn!("class {class}: only {n} video(s); forcing one into val");
            n_val = 1;
        }
        let mut n_test = (n as f64 * r_test).floor() as usize;
        if r_test > 0.0 && n_test == 0 {
            log::warn!("class {class}: only {n} video(s); forcing one into test");
            n_test = 1;
        }
        if n_val + n_test > n {
            return Err(Error::CannotStratify { class, count: n });
        }
        let mut order = members.clone();
        let mut rng = stream(seed, "split", class as u64);
        for i in (1..order.len()).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        val.extend(order[..n_val].iter().copied());
        test.extend(order[n_val..n_val + n_test].iter().copied());
        train.extend(order[n_val + n_test..].iter().copied());
    }

    let build = |mut indices: Vec<usize>, split: Split| {
        indices.sort_unstable();
        DatasetManifest::new(
            manifest.classes,
            indices
                .into_iter()
                .map(|i| manifest.records[i].clone())
                .collect(),
        )
        .with_split(split)
    };
    Ok((
        build(train, Split::Train),
        build(val, Split::Val),
        build(test, Split::Test),
    ))
}
