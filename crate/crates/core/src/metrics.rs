//! Average precision, group-wise mAP, Acc@k, and the running-AP tracker
//! that drives frame-budget allocation.

use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::rng::fnv1a;
use crate::types::{ClassStats, Group, LabelVector, Split};

/// Ranking order shared by AP and Acc@k: score descending, ties broken by
/// original index ascending.
fn ranked_indices(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("scores must be comparable (finite)")
            .then(a.cmp(&b))
    });
    order
}

/// Non-interpolated average precision: mean over positive ranks k of the
/// precision among the top k. Returns `None` when there are no positives,
/// so the class can be excluded from mAP rather than scored zero.
pub fn average_precision(scores: &[f64], relevance: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), relevance.len());
    let positives = relevance.iter().filter(|&&r| r).count();
    if positives == 0 {
        return None;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &idx) in ranked_indices(scores).iter().enumerate() {
        if relevance[idx] {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Some(sum / positives as f64)
}

/// Unweighted AP means per band plus the overall mean. Classes whose AP is
/// absent (no positives in the split) are excluded; an empty band yields
/// `None`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupedMap {
    pub overall: Option<f64>,
    pub head: Option<f64>,
    pub medium: Option<f64>,
    pub tail: Option<f64>,
}

impl GroupedMap {
    pub fn get(&self, group: Group) -> Option<f64> {
        match group {
            Group::Head => self.head,
            Group::Medium => self.medium,
            Group::Tail => self.tail,
        }
    }
}

pub fn map_by_group(per_class_ap: &[Option<f64>], stats: &ClassStats) -> GroupedMap {
    assert_eq!(per_class_ap.len(), stats.classes());
    let mean_over = |classes: &[usize]| {
        let aps: Vec<f64> = classes.iter().filter_map(|&c| per_class_ap[c]).collect();
        if aps.is_empty() {
            None
        } else {
            Some(aps.iter().sum::<f64>() / aps.len() as f64)
        }
    };
    let all: Vec<usize> = (0..stats.classes()).collect();
    let grouped = GroupedMap {
        overall: mean_over(&all),
        head: mean_over(&stats.classes_in_group(Group::Head)),
        medium: mean_over(&stats.classes_in_group(Group::Medium)),
        tail: mean_over(&stats.classes_in_group(Group::Tail)),
    };
    for group in Group::ALL {
        if grouped.get(group).is_none() {
            log::warn!("no evaluable class in group {group}; omitting its mAP");
        }
    }
    grouped
}

/// Fraction of samples whose top-k scored classes intersect the positive
/// label set (any-hit rule for multi-label ground truth).
pub fn acc_at_k(scores: ArrayView2<'_, f64>, label_sets: &[Vec<usize>], k: usize) -> f64 {
    assert!(k >= 1);
    assert_eq!(scores.nrows(), label_sets.len());
    if label_sets.is_empty() {
        return 0.0;
    }
    let mut hits = 0usize;
    for (row, labels) in scores.rows().into_iter().zip(label_sets) {
        let row: Vec<f64> = row.to_vec();
        let order = ranked_indices(&row);
        let top = &order[..k.min(order.len())];
        if top.iter().any(|c| labels.contains(c)) {
            hits += 1;
        }
    }
    hits as f64 / label_sets.len() as f64
}

/// Per-class running AP, finalized once per epoch and frozen for the next
/// epoch's pair mixing.
#[derive(Debug, Clone, PartialEq)]
pub struct RapTable {
    values: Vec<f64>,
    epoch: usize,
}

impl RapTable {
    /// The epoch-0 table: all zeros, which forces the 0.5 budget fallback
    /// on every pair mixed during the first epoch.
    pub fn zeros(classes: usize) -> Self {
        RapTable {
            values: vec![0.0; classes],
            epoch: 0,
        }
    }

    pub fn from_values(values: Vec<f64>, epoch: usize) -> Self {
        debug_assert!(values.iter().all(|&v| (0.0..=1.0).contains(&v)));
        RapTable { values, epoch }
    }

    pub fn classes(&self) -> usize {
        self.values.len()
    }

    pub fn value(&self, class: usize) -> f64 {
        self.values[class]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Epoch this table is valid for: it was finalized at the end of
    /// `epoch - 1` (or initialized to zeros for epoch 0).
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    /// Mean value over a class subset; the per-video score for multi-label
    /// videos.
    pub fn mean_over(&self, classes: &[usize]) -> f64 {
        if classes.is_empty() {
            return 0.0;
        }
        classes.iter().map(|&c| self.values[c]).sum::<f64>() / classes.len() as f64
    }

    /// Order-sensitive content digest, for run histories and drift checks.
    pub fn digest(&self) -> u64 {
        let mut bytes = Vec::with_capacity(8 * self.values.len() + 8);
        bytes.extend_from_slice(&(self.epoch as u64).to_le_bytes());
        for v in &self.values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        fnv1a(&bytes)
    }
}

/// What to do with a class that had no recorded positives this epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
#[derive(Default)]
pub enum RapCarryMode {
    /// Keep the previous epoch's value (default; avoids budget whiplash).
    #[default]
    Carry,
    /// Reset the value to zero.
    Reset,
}

/// Accumulated training predictions for one epoch: scores row-by-row plus
/// targets binarized at threshold 0 (so both parents of a mixed sample
/// count as positives).
#[derive(Debug, Clone)]
pub struct EpochBuffer {
    classes: usize,
    scores: Vec<f64>,
    positives: Vec<bool>,
    rows: usize,
}

impl EpochBuffer {
    pub fn new(classes: usize) -> Self {
        EpochBuffer {
            classes,
            scores: Vec::new(),
            positives: Vec::new(),
            rows: 0,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    /// Append one batch of predictions and targets, in batch order.
    pub fn record(&mut self, scores: ArrayView2<'_, f64>, targets: &[LabelVector]) {
        assert_eq!(scores.nrows(), targets.len());
        assert_eq!(scores.ncols(), self.classes);
        for (row, target) in scores.rows().into_iter().zip(targets) {
            assert_eq!(target.classes(), self.classes);
            self.scores.extend(row.iter());
            self.positives
                .extend(target.weights().iter().map(|&w| w > 0.0));
            self.rows += 1;
        }
    }

    /// Compute per-class AP over everything recorded this epoch and emit
    /// the table for the next epoch. Classes with no recorded positives
    /// take the previous value or zero per `mode`. Consumes the buffer,
    /// which is how it gets cleared.
    pub fn finalize(self, previous: &RapTable, mode: RapCarryMode) -> Result<RapTable> {
        if self.rows == 0 {
            return Err(Error::Config(
                "cannot finalize running AP from an empty epoch buffer".to_string(),
            ));
        }
        assert_eq!(previous.classes(), self.classes);
        let mut values = Vec::with_capacity(self.classes);
        let mut column_scores = vec![0.0; self.rows];
        let mut column_rel = vec![false; self.rows];
        for c in 0..self.classes {
            for r in 0..self.rows {
                column_scores[r] = self.scores[r * self.classes + c];
                column_rel[r] = self.positives[r * self.classes + c];
            }
            let ap = average_precision(&column_scores, &column_rel);
            values.push(match (ap, mode) {
                (Some(ap), _) => ap,
                (None, RapCarryMode::Carry) => previous.value(c),
                (None, RapCarryMode::Reset) => 0.0,
            });
        }
        Ok(RapTable::from_values(values, previous.epoch() + 1))
    }
}

/// Full evaluation result for one split at one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub epoch: usize,
    pub split: Split,
    pub per_class_ap: Vec<Option<f64>>,
    pub map: GroupedMap,
    pub acc1: f64,
    pub acc5: f64,
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.6}"),
        None => "-".to_string(),
    }
}

impl MetricsReport {
    /// Stable TSV rendering: one row per class (class, count, group, AP)
    /// and a summary block. Column order and float formatting are fixed so
    /// identical runs diff empty.
    pub fn to_tsv(&self, stats: &ClassStats) -> String {
        assert_eq!(stats.classes(), self.per_class_ap.len());
        let mut out = String::new();
        out.push_str(&format!(
            "#metrics\tepoch={}\tsplit={}\n",
            self.epoch, self.split
        ));
        out.push_str("class\tcount\tgroup\tap\n");
        for c in 0..stats.classes() {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                c,
                stats.count(c),
                stats.group(c),
                fmt_opt(self.per_class_ap[c])
            ));
        }
        out.push_str("#summary\n");
        out.push_str(&format!("overall_map\t{}\n", fmt_opt(self.map.overall)));
        out.push_str(&format!("head_map\t{}\n", fmt_opt(self.map.head)));
        out.push_str(&format!("medium_map\t{}\n", fmt_opt(self.map.medium)));
        out.push_str(&format!("tail_map\t{}\n", fmt_opt(self.map.tail)));
        out.push_str(&format!("acc@1\t{:.6}\n", self.acc1));
        out.push_str(&format!("acc@5\t{:.6}\n", self.acc5));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::GroupThresholds;
    use ndarray::array;

    #[test]
    fn ap_matches_hand_enumeration() {
        let ap = average_precision(&[0.9, 0.8, 0.7], &[true, false, true]).unwrap();
        assert!((ap - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn ap_all_positive_is_one() {
        let ap = average_precision(&[0.3, 0.2, 0.9, 0.5], &[true; 4]).unwrap();
        assert_eq!(ap, 1.0);
    }

    #[test]
    fn ap_single_positive_ranked_last() {
        let n = 7;
        let scores: Vec<f64> = (0..n).map(|i| (n - i) as f64).collect();
        let mut rel = vec![false; n];
        rel[n - 1] = true;
        let ap = average_precision(&scores, &rel).unwrap();
        assert!((ap - 1.0 / n as f64).abs() < 1e-15);
    }

    #[test]
    fn ap_requires_a_positive() {
        assert_eq!(average_precision(&[0.1, 0.2], &[false, false]), None);
    }

    #[test]
    fn ap_ties_break_by_index() {
        // Equal scores rank in index order, so the positive at index 1
        // lands at rank 2.
        assert_eq!(average_precision(&[0.5, 0.5], &[false, true]), Some(0.5));
        assert_eq!(average_precision(&[0.5, 0.5], &[true, false]), Some(1.0));
    }

    #[test]
    fn ap_is_invariant_under_exact_monotone_transforms() {
        let scores = [0.25, -1.5, 0.75, 0.25, 3.0, -0.5];
        let rel = [true, false, false, true, false, true];
        let base = average_precision(&scores, &rel);
        let doubled: Vec<f64> = scores.iter().map(|s| s * 2.0).collect();
        let halved: Vec<f64> = scores.iter().map(|s| s * 0.5).collect();
        assert_eq!(average_precision(&doubled, &rel), base);
        assert_eq!(average_precision(&halved, &rel), base);
    }

    fn tiny_stats() -> ClassStats {
        // counts: classes 0,1 head; class 2 tail; no medium classes
        ClassStats::from_counts(vec![600, 700, 50], GroupThresholds::default())
    }

    #[test]
    fn grouped_map_is_unweighted_means() {
        let aps = vec![Some(0.6), Some(0.8), Some(0.2)];
        let g = map_by_group(&aps, &tiny_stats());
        assert!((g.head.unwrap() - 0.7).abs() < 1e-15);
        assert_eq!(g.medium, None);
        assert!((g.tail.unwrap() - 0.2).abs() < 1e-15);
        assert!((g.overall.unwrap() - (0.6 + 0.8 + 0.2) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn grouped_map_excludes_absent_classes() {
        let aps = vec![Some(0.6), None, Some(0.2)];
        let g = map_by_group(&aps, &tiny_stats());
        assert!((g.head.unwrap() - 0.6).abs() < 1e-15);
        assert!((g.overall.unwrap() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn acc_at_k_counts_any_hit() {
        let scores = array![[0.9, 0.1, 0.0], [0.1, 0.2, 0.7]];
        let labels = vec![vec![0], vec![0]];
        assert_eq!(acc_at_k(scores.view(), &labels, 1), 0.5);
        assert_eq!(acc_at_k(scores.view(), &labels, 3), 1.0);
        let labels_hit = vec![vec![0], vec![2]];
        assert_eq!(acc_at_k(scores.view(), &labels_hit, 1), 1.0);
    }

    #[test]
    fn buffer_counts_rows_and_binarizes() {
        let mut buf = EpochBuffer::new(8);
        let scores = ndarray::Array2::zeros((3, 8));
        let mut y = vec![0.0; 8];
        y[3] = 0.75;
        y[7] = 0.25;
        let targets = vec![LabelVector::new(y); 3];
        buf.record(scores.view(), &targets);
        buf.record(scores.view(), &targets);
        assert_eq!(buf.rows(), 6);
        // mixed sample records positives {3, 7}
        assert!(buf.positives[3] && buf.positives[7]);
        assert!(!buf.positives[0]);
    }

    #[test]
    fn finalize_on_one_batch_reduces_to_plain_ap() {
        let mut buf = EpochBuffer::new(2);
        let scores = array![[0.9, 0.1], [0.2, 0.8], [0.7, 0.3]];
        let targets = vec![
            LabelVector::from_indices(&[0], 2),
            LabelVector::from_indices(&[1], 2),
            LabelVector::from_indices(&[1], 2),
        ];
        buf.record(scores.view(), &targets);
        let table = buf
            .finalize(&RapTable::zeros(2), RapCarryMode::Carry)
            .unwrap();
        let ap0 = average_precision(&[0.9, 0.2, 0.7], &[true, false, false]).unwrap();
        let ap1 = average_precision(&[0.1, 0.8, 0.3], &[false, true, true]).unwrap();
        assert_eq!(table.value(0), ap0);
        assert_eq!(table.value(1), ap1);
        assert_eq!(table.epoch(), 1);
    }

    #[test]
    fn finalize_carries_or_resets_unseen_classes() {
        let previous = RapTable::from_values(vec![0.4, 0.9], 3);
        let record = |buf: &mut EpochBuffer| {
            let scores = array![[0.9, 0.1]];
            let targets = vec![LabelVector::from_indices(&[0], 2)];
            buf.record(scores.view(), &targets);
        };
        let mut buf = EpochBuffer::new(2);
        record(&mut buf);
        let carried = buf.finalize(&previous, RapCarryMode::Carry).unwrap();
        assert_eq!(carried.value(1), 0.9);
        assert_eq!(carried.epoch(), 4);

        let mut buf = EpochBuffer::new(2);
        record(&mut buf);
        let reset = buf.finalize(&previous, RapCarryMode::Reset).unwrap();
        assert_eq!(reset.value(1), 0.0);
    }

    #[test]
    fn finalize_rejects_empty_buffer() {
        let buf = EpochBuffer::new(2);
        assert!(buf
            .finalize(&RapTable::zeros(2), RapCarryMode::Carry)
            .is_err());
    }

    #[test]
    fn report_tsv_is_stable() {
        let report = MetricsReport {
            epoch: 3,
            split: Split::Val,
            per_class_ap: vec![Some(0.5), None, Some(0.25)],
            map: GroupedMap {
                overall: Some(0.375),
                head: Some(0.5),
                medium: None,
                tail: Some(0.25),
            },
            acc1: 0.75,
            acc5: 1.0,
        };
        let tsv = report.to_tsv(&tiny_stats());
        let again = report.to_tsv(&tiny_stats());
        assert_eq!(tsv, again);
        assert!(tsv.contains("1\t700\thead\t-\n"));
        assert!(tsv.contains("overall_map\t0.375000\n"));
        assert!(tsv.contains("acc@5\t1.000000\n"));
    }
}
