//! Frame-level evaluation: ACC, AUC, AP, EER, precision/recall, ROC and PR
//! curve series, top-3 checkpoint averaging, and per-dataset aggregation over
//! stored prediction dumps.
//!
//! AUC follows the Mann-Whitney convention with ties credited 0.5. EER is
//! located by linear interpolation between the two operating points bracketing
//! the FPR = FNR crossing.

mod dump;

pub use dump::{read_dump, write_csv, DumpFormat};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One frame's stored prediction: fake-class probability plus its label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub frame_id: String,
    pub video_id: String,
    pub dataset: String,
    pub score: f64,
    pub label: u8,
    /// Optional checkpoint tag carried through from the dump.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<String>,
}

impl PredictionRecord {
    pub fn validate(&self) -> Result<()> {
        if !self.score.is_finite() || !(0.0..=1.0).contains(&self.score) {
            return Err(Error::Parse {
                line: 0,
                message: format!("score {} outside [0, 1]", self.score),
            });
        }
        if self.label > 1 {
            return Err(Error::Parse {
                line: 0,
                message: format!("label {} is not binary", self.label),
            });
        }
        Ok(())
    }
}

/// Ordered (x, y) pairs: (FPR, TPR) for ROC, (recall, precision) for PR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSeries {
    pub points: Vec<(f64, f64)>,
}

impl CurveSeries {
    pub fn to_csv(&self, x_name: &str, y_name: &str) -> String {
        let mut out = format!("{x_name},{y_name}\n");
        for &(x, y) in &self.points {
            out.push_str(&format!("{x},{y}\n"));
        }
        out
    }
}

/// Per-group metric values. AUC/AP/EER are `None` when undefined for the
/// group (single class, or no positives).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub acc: f64,
    pub auc: Option<f64>,
    pub ap: Option<f64>,
    pub eer: Option<f64>,
    pub precision: f64,
    pub recall: f64,
    pub n_pos: usize,
    pub n_neg: usize,
    pub threshold: f64,
}

/// ROC vertices with their score thresholds, shared by AUC and EER.
///
/// Vertices run from (0, 0) at threshold above the maximum score to (1, 1)
/// below the minimum, one vertex per distinct score (tied scores collapse to
/// a single vertex, which is what gives ties a 0.5 trapezoid credit).
struct RocPoints {
    /// (fpr, tpr, threshold) per vertex; the first is (0, 0, +inf).
    vertices: Vec<(f64, f64, f64)>,
}

fn roc_points(records: &[PredictionRecord]) -> Result<RocPoints> {
    let n_pos = records.iter().filter(|r| r.label == 1).count();
    let n_neg = records.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut sorted: Vec<(f64, u8)> = records.iter().map(|r| (r.score, r.label)).collect();
    sorted.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());

    let mut vertices = vec![(0.0, 0.0, f64::INFINITY)];
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0;
    while i < sorted.len() {
        let score = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == score {
            if sorted[i].1 == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        vertices.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64, score));
    }
    Ok(RocPoints { vertices })
}

/// Area under the ROC curve plus the curve itself.
///
/// The returned value is the Mann-Whitney statistic (tied pairs credited
/// 0.5), computed via trapezoidal integration of the tie-grouped ROC, which
/// is algebraically the same quantity.
pub fn compute_auc(records: &[PredictionRecord]) -> Result<(f64, CurveSeries)> {
    let roc = roc_points(records)?;
    let mut auc = 0.0;
    for pair in roc.vertices.windows(2) {
        let (x0, y0, _) = pair[0];
        let (x1, y1, _) = pair[1];
        auc += (x1 - x0) * (y0 + y1) / 2.0;
    }
    let curve = CurveSeries {
        points: roc.vertices.iter().map(|&(x, y, _)| (x, y)).collect(),
    };
    Ok((auc, curve))
}

/// Average precision over descending-score prefixes (step interpolation),
/// plus the precision-recall curve.
pub fn compute_ap(records: &[PredictionRecord]) -> Result<(f64, CurveSeries)> {
    let n_pos = records.iter().filter(|r| r.label == 1).count();
    if n_pos == 0 {
        return Err(Error::NoPositives);
    }
    let mut sorted: Vec<(f64, u8)> = records.iter().map(|r| (r.score, r.label)).collect();
    sorted.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());

    let mut points = vec![(0.0, 1.0)];
    let mut ap = 0.0;
    let mut tp = 0usize;
    let mut seen = 0usize;
    let mut prev_recall = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let score = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == score {
            if sorted[i].1 == 1 {
                tp += 1;
            }
            seen += 1;
            i += 1;
        }
        let recall = tp as f64 / n_pos as f64;
        let precision = tp as f64 / seen as f64;
        ap += (recall - prev_recall) * precision;
        points.push((recall, precision));
        prev_recall = recall;
    }
    Ok((ap, CurveSeries { points }))
}

/// Equal error rate and the score threshold nearest the crossing.
pub fn compute_eer(records: &[PredictionRecord]) -> Result<(f64, f64)> {
    let roc = roc_points(records)?;
    // f = FPR - FNR = x + y - 1 is non-decreasing along the curve, from -1 to +1.
    let f = |x: f64, y: f64| x + y - 1.0;
    let mut prev = roc.vertices[0];
    for &(x, y, thr) in &roc.vertices[1..] {
        let fv = f(x, y);
        if fv >= 0.0 {
            let (px, py, pthr) = prev;
            let pf = f(px, py);
            if fv == 0.0 {
                return Ok((x, thr));
            }
            // Interpolate along the segment to FPR = FNR. The denominator is
            // positive because f strictly increases across the bracket.
            let t = -pf / (fv - pf);
            let eer = px + t * (x - px);
            // Report the midpoint of the bracketing score thresholds; it
            // minimizes |FPR - FNR| among realizable cutoffs.
            let hi = if pthr.is_finite() { pthr } else { thr };
            return Ok((eer, (hi + thr) / 2.0));
        }
        prev = (x, y, thr);
    }
    unreachable!("f reaches +1 at the final vertex");
}

/// Accuracy, precision, and recall at a fixed decision threshold
/// (`score >= threshold` predicts fake). Precision is 0 when nothing is
/// predicted positive; recall is 0 when there are no positives.
pub fn compute_threshold_metrics(
    records: &[PredictionRecord],
    threshold: f64,
) -> (f64, f64, f64) {
    assert!(!records.is_empty());
    let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for r in records {
        let pred = r.score >= threshold;
        match (pred, r.label == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let acc = (tp + tn) as f64 / records.len() as f64;
    let precision = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    (acc, precision, recall)
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let split = |v: f64| {
        let t = 134_217_729.0 * v; // 2^27 + 1
        let hi = t - (t - v);
        (hi, v - hi)
    };
    let p = a * b;
    let (ah, al) = split(a);
    let (bh, bl) = split(b);
    (p, ((ah * bh - p) + ah * bl + al * bh) + al * bl)
}

/// Correctly rounded mean of a handful of values. Plain summation can land
/// one ulp off (e.g. mean(0.9, 0.8, 0.7) != 0.8), so the sum is carried as a
/// double-double and the division gets one correction term.
fn exact_mean(values: &[f64]) -> f64 {
    let (mut hi, mut lo) = (0.0f64, 0.0f64);
    for &v in values {
        let (s, e) = two_sum(hi, v);
        let e = e + lo;
        hi = s + e;
        lo = e - (hi - s);
    }
    let n = values.len() as f64;
    let q1 = hi / n;
    let (p, perr) = two_prod(q1, n);
    let (d, derr) = two_sum(hi, -p);
    let q2 = (d + (derr + lo - perr)) / n;
    q1 + q2
}

/// Mean of the 3 largest values; with fewer than 3 entries, mean of all.
pub fn top3_average(series: &[f64]) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::EmptySeries);
    }
    let mut sorted = series.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let k = sorted.len().min(3);
    Ok(exact_mean(&sorted[..k]))
}

/// How prediction records are grouped for reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    Dataset,
    DatasetCheckpoint,
}

/// Grouping key: dataset name plus, for per-checkpoint grouping, the
/// checkpoint tag.
pub type GroupKey = (String, Option<String>);

/// Build one [`MetricReport`] for a record slice.
pub fn report_for(records: &[PredictionRecord], threshold: f64) -> MetricReport {
    let (acc, precision, recall) = compute_threshold_metrics(records, threshold);
    let n_pos = records.iter().filter(|r| r.label == 1).count();
    let n_neg = records.len() - n_pos;
    MetricReport {
        acc,
        auc: compute_auc(records).ok().map(|(v, _)| v),
        ap: compute_ap(records).ok().map(|(v, _)| v),
        eer: compute_eer(records).ok().map(|(v, _)| v),
        precision,
        recall,
        n_pos,
        n_neg,
        threshold,
    }
}

/// Group records and compute one report per group, in deterministic
/// (sorted-key) order.
pub fn aggregate(
    records: &[PredictionRecord],
    group_by: GroupBy,
    threshold: f64,
) -> BTreeMap<GroupKey, MetricReport> {
    let mut groups: BTreeMap<GroupKey, Vec<&PredictionRecord>> = BTreeMap::new();
    for r in records {
        let key = match group_by {
            GroupBy::Dataset => (r.dataset.clone(), None),
            GroupBy::DatasetCheckpoint => (r.dataset.clone(), r.checkpoint.clone()),
        };
        groups.entry(key).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(key, recs)| {
            let owned: Vec<PredictionRecord> = recs.into_iter().cloned().collect();
            (key, report_for(&owned, threshold))
        })
        .collect()
}

/// ROC and PR curves per group, in the same deterministic order as
/// [`aggregate`]. Groups where a curve is undefined are omitted from that map.
pub fn curves(
    records: &[PredictionRecord],
    group_by: GroupBy,
) -> (
    BTreeMap<GroupKey, CurveSeries>,
    BTreeMap<GroupKey, CurveSeries>,
) {
    let mut groups: BTreeMap<GroupKey, Vec<PredictionRecord>> = BTreeMap::new();
    for r in records {
        let key = match group_by {
            GroupBy::Dataset => (r.dataset.clone(), None),
            GroupBy::DatasetCheckpoint => (r.dataset.clone(), r.checkpoint.clone()),
        };
        groups.entry(key).or_default().push(r.clone());
    }
    let mut roc = BTreeMap::new();
    let mut pr = BTreeMap::new();
    for (key, recs) in groups {
        if let Ok((_, c)) = compute_auc(&recs) {
            roc.insert(key.clone(), c);
        }
        if let Ok((_, c)) = compute_ap(&recs) {
            pr.insert(key, c);
        }
    }
    (roc, pr)
}
