//! Shared domain types: feature sequences, label vectors, class grouping,
//! and the dataset manifest.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Per-frame feature vectors for one video: L rows (frames, time ordered)
/// by D columns. Sequences loaded from disk always have L >= 1; transient
/// subsampling outputs may be empty.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    data: Array2<f32>,
}

impl FeatureSequence {
    pub fn new(data: Array2<f32>) -> Self {
        FeatureSequence { data }
    }

    pub fn empty(dim: usize) -> Self {
        FeatureSequence {
            data: Array2::zeros((0, dim)),
        }
    }

    /// Number of frames.
    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.nrows() == 0
    }

    /// Feature dimension.
    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn frame(&self, i: usize) -> ArrayView1<'_, f32> {
        self.data.row(i)
    }

    pub fn view(&self) -> ArrayView2<'_, f32> {
        self.data.view()
    }

    pub fn data(&self) -> &Array2<f32> {
        &self.data
    }

    /// Select frames by index, preserving the given order. Indices may
    /// repeat.
    pub fn select(&self, indices: &[usize]) -> FeatureSequence {
        FeatureSequence {
            data: self.data.select(Axis(0), indices),
        }
    }

    /// Time-wise concatenation.
    pub fn concat(a: &FeatureSequence, b: &FeatureSequence) -> FeatureSequence {
        debug_assert_eq!(a.dim(), b.dim());
        let data = ndarray::concatenate(Axis(0), &[a.data.view(), b.data.view()])
            .expect("sequences share a feature dimension");
        FeatureSequence { data }
    }

    /// Widened copy for the 64-bit compute path.
    pub fn to_f64(&self) -> Array2<f64> {
        self.data.mapv(|x| x as f64)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Per-class relevance weights in [0, 1]. Unmixed samples are 0/1 vectors;
/// pair-mixed samples carry fractional weights.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVector {
    weights: Vec<f64>,
}

impl LabelVector {
    pub fn new(weights: Vec<f64>) -> Self {
        debug_assert!(weights.iter().all(|&w| (0.0..=1.0).contains(&w)));
        LabelVector { weights }
    }

    /// Multi-hot vector from a set of class indices.
    pub fn from_indices(indices: &[usize], classes: usize) -> Self {
        let mut weights = vec![0.0; classes];
        for &c in indices {
            debug_assert!(c < classes);
            weights[c] = 1.0;
        }
        LabelVector { weights }
    }

    pub fn classes(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, class: usize) -> f64 {
        self.weights[class]
    }

    /// Classes with weight strictly above `tau`. Default threshold 0, so
    /// both parents of a mixed sample count as positives.
    pub fn binarize(&self, tau: f64) -> Vec<usize> {
        debug_assert!((0.0..1.0).contains(&tau));
        (0..self.weights.len())
            .filter(|&c| self.weights[c] > tau)
            .collect()
    }

    /// Convex label combination: `(1 - beta) * a + beta * b`.
    pub fn mix(a: &LabelVector, b: &LabelVector, beta: f64) -> LabelVector {
        debug_assert_eq!(a.classes(), b.classes());
        let weights = a
            .weights
            .iter()
            .zip(&b.weights)
            .map(|(&x, &y)| (1.0 - beta) * x + beta * y)
            .collect();
        LabelVector { weights }
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Count thresholds separating head, medium, and tail classes. Both bounds
/// are exclusive lower bounds on the training-video count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct GroupThresholds {
    pub head_min: usize,
    pub medium_min: usize,
}

impl Default for GroupThresholds {
    fn default() -> Self {
        GroupThresholds {
            head_min: 500,
            medium_min: 100,
        }
    }
}

impl GroupThresholds {
    pub fn new(head_min: usize, medium_min: usize) -> Result<Self> {
        if !(head_min > medium_min && medium_min > 0) {
            return Err(Error::Config(format!(
                "thresholds must satisfy head_min > medium_min > 0, got {head_min}/{medium_min}"
            )));
        }
        Ok(GroupThresholds {
            head_min,
            medium_min,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Group {
    Head,
    Medium,
    Tail,
}

impl Group {
    pub const ALL: [Group; 3] = [Group::Head, Group::Medium, Group::Tail];

    pub fn as_str(self) -> &'static str {
        match self {
            Group::Head => "head",
            Group::Medium => "medium",
            Group::Tail => "tail",
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Group from a per-class video count. Total over all counts; the three
/// bands partition `0..`.
pub fn assign_group(count: usize, thresholds: &GroupThresholds) -> Group {
    if count > thresholds.head_min {
        Group::Head
    } else if count > thresholds.medium_min {
        Group::Medium
    } else {
        Group::Tail
    }
}

/// Per-class training-video counts and their head/medium/tail assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassStats {
    counts: Vec<usize>,
    groups: Vec<Group>,
    thresholds: GroupThresholds,
}

impl ClassStats {
    pub fn from_counts(counts: Vec<usize>, thresholds: GroupThresholds) -> Self {
        let groups = counts
            .iter()
            .map(|&c| assign_group(c, &thresholds))
            .collect();
        ClassStats {
            counts,
            groups,
            thresholds,
        }
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn count(&self, class: usize) -> usize {
        self.counts[class]
    }

    pub fn group(&self, class: usize) -> Group {
        self.groups[class]
    }

    pub fn thresholds(&self) -> &GroupThresholds {
        &self.thresholds
    }

    pub fn classes_in_group(&self, group: Group) -> Vec<usize> {
        (0..self.counts.len())
            .filter(|&c| self.groups[c] == group)
            .collect()
    }

    /// Stats TSV: thresholds in the header, one row per class with its
    /// training count and group.
    pub fn to_tsv(&self) -> String {
        let mut out = format!(
            "#stats\thead_min={}\tmedium_min={}\n",
            self.thresholds.head_min, self.thresholds.medium_min
        );
        out.push_str("class\tcount\tgroup\n");
        for c in 0..self.counts.len() {
            out.push_str(&format!("{}\t{}\t{}\n", c, self.counts[c], self.groups[c]));
        }
        out
    }

    pub fn parse_tsv(text: &str, origin: &Path) -> Result<ClassStats> {
        let bad = |line: usize, reason: String| {
            Error::bad_format(origin, format!("line {}: {}", line, reason))
        };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::bad_format(origin, "empty stats file"))?;
        let mut head_min = None;
        let mut medium_min = None;
        if !header.starts_with("#stats") {
            return Err(bad(1, format!("expected #stats header, got {header:?}")));
        }
        for field in header.split('\t').skip(1) {
            if let Some(v) = field.strip_prefix("head_min=") {
                head_min = Some(
                    v.parse()
                        .map_err(|e| bad(1, format!("bad head_min: {e}")))?,
                );
            } else if let Some(v) = field.strip_prefix("medium_min=") {
                medium_min = Some(
                    v.parse()
                        .map_err(|e| bad(1, format!("bad medium_min: {e}")))?,
                );
            }
        }
        let (Some(head_min), Some(medium_min)) = (head_min, medium_min) else {
            return Err(bad(
                1,
                "header must carry head_min= and medium_min=".to_string(),
            ));
        };
        let thresholds = GroupThresholds::new(head_min, medium_min)?;
        let mut counts = Vec::new();
        for (idx, line) in lines {
            let lineno = idx + 1;
            if line.trim().is_empty() || line.starts_with("class\t") {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(bad(
                    lineno,
                    format!("expected 3 fields, got {}", fields.len()),
                ));
            }
            let class: usize = fields[0]
                .parse()
                .map_err(|e| bad(lineno, format!("bad class index: {e}")))?;
            if class != counts.len() {
                return Err(bad(lineno, format!("classes out of order at {class}")));
            }
            counts.push(
                fields[1]
                    .parse()
                    .map_err(|e| bad(lineno, format!("bad count: {e}")))?,
            );
        }
        if counts.is_empty() {
            return Err(Error::bad_format(origin, "stats file lists no classes"));
        }
        Ok(ClassStats::from_counts(counts, thresholds))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One video record: id, feature file path relative to the dataset root,
/// and its class indices.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRecord {
    pub video_id: String,
    pub path: PathBuf,
    pub labels: Vec<usize>,
}

/// Video records plus the class count. The split tag is contextual (which
/// file the manifest was loaded from), not part of the on-disk format.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub classes: usize,
    pub records: Vec<ManifestRecord>,
    pub split: Option<Split>,
}

impl DatasetManifest {
    pub fn new(classes: usize, records: Vec<ManifestRecord>) -> Self {
        DatasetManifest {
            classes,
            records,
            split: None,
        }
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = Some(split);
        self
    }

    /// Parse the tab-separated manifest format:
    ///
    /// ```text
    /// #classes=<C>
    /// <video_id>\t<relative path>\t<comma-separated class indices>
    /// ```
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let bad = |line: usize, reason: String| {
            Error::bad_format(origin, format!("line {}: {}", line, reason))
        };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::bad_format(origin, "empty file, expected #classes=<C> header"))?;
        let classes: usize = header
            .strip_prefix("#classes=")
            .ok_or_else(|| bad(1, format!("expected #classes=<C> header, got {header:?}")))?
            .trim()
            .parse()
            .map_err(|e| bad(1, format!("bad class count: {e}")))?;
        if classes == 0 {
            return Err(bad(1, "class count must be >= 1".to_string()));
        }

        let mut records = Vec::new();
        for (idx, line) in lines {
            let lineno = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(bad(
                    lineno,
                    format!("expected 3 tab-separated fields, got {}", fields.len()),
                ));
            }
            let mut labels = Vec::new();
            if !fields[2].trim().is_empty() {
                for part in fields[2].split(',') {
                    let c: usize = part
                        .trim()
                        .parse()
                        .map_err(|e| bad(lineno, format!("bad class index {part:?}: {e}")))?;
                    labels.push(c);
                }
            }
            labels.sort_unstable();
            labels.dedup();
            records.push(ManifestRecord {
                video_id: fields[0].to_string(),
                path: PathBuf::from(fields[1]),
                labels,
            });
        }
        Ok(DatasetManifest::new(classes, records))
    }

    pub fn to_tsv(&self) -> String {
        let mut out = format!("#classes={}\n", self.classes);
        for r in &self.records {
            let labels: Vec<String> = r.labels.iter().map(|c| c.to_string()).collect();
            out.push_str(&format!(
                "{}\t{}\t{}\n",
                r.video_id,
                r.path.display(),
                labels.join(",")
            ));
        }
        out
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }

    /// Check every manifest invariant, reporting all violations at once,
    /// and return per-class counts with group assignments. When
    /// `base_dir` is given, feature paths must resolve under it.
    pub fn validate(
        &self,
        thresholds: GroupThresholds,
        base_dir: Option<&Path>,
    ) -> Result<ClassStats> {
        let mut violations = Vec::new();
        if self.records.is_empty() {
            violations.push("no records".to_string());
        }
        let mut seen = HashSet::new();
        let mut counts = vec![0usize; self.classes];
        for r in &self.records {
            if !seen.insert(r.video_id.as_str()) {
                violations.push(format!("duplicate video_id: {}", r.video_id));
            }
            if r.labels.is_empty() {
                violations.push(format!("record {}: empty label set", r.video_id));
            }
            for &c in &r.labels {
                if c >= self.classes {
                    violations.push(format!(
                        "record {}: class index {} out of range (classes={})",
                        r.video_id, c, self.classes
                    ));
                } else {
                    counts[c] += 1;
                }
            }
            if let Some(base) = base_dir {
                let full = base.join(&r.path);
                if !full.is_file() {
                    violations.push(format!(
                        "record {}: dangling path {}",
                        r.video_id,
                        full.display()
                    ));
                }
            }
        }
        if violations.is_empty() {
            Ok(ClassStats::from_counts(counts, thresholds))
        } else {
            Err(Error::InvalidManifest { violations })
        }
    }
}
