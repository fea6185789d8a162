//! Paired-consistency scores, the PRC score, and the group-fairness metric
//! suite.
//!
//! Group coding convention throughout: `d = 1` privileged, `d = 0`
//! unprivileged. Differences are unprivileged minus privileged, so a negative
//! sign means the unprivileged group is disadvantaged.

use serde::{Deserialize, Serialize};

use crate::data::EncodedDataset;
use crate::error::{Error, Result};
use crate::pairs::PairSet;

/// Model outputs: probability scores and the thresholded labels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Predictions {
    pub scores: Vec<f64>,
    pub labels_hat: Vec<u8>,
    pub threshold: f64,
}

impl Predictions {
    pub fn from_scores(scores: Vec<f64>, threshold: f64) -> Result<Self> {
        for &s in &scores {
            if !(s.is_finite() && (0.0..=1.0).contains(&s)) {
                return Err(Error::InvalidArgument(format!(
                    "score {s} outside [0,1]"
                )));
            }
        }
        let labels_hat = scores.iter().map(|&s| u8::from(s >= threshold)).collect();
        Ok(Predictions {
            scores,
            labels_hat,
            threshold,
        })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// Protected-group coding: 0 = unprivileged, 1 = privileged.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupAssignment {
    pub d: Vec<u8>,
}

impl GroupAssignment {
    /// Binarizes a numeric protected column: privileged iff value >= threshold.
    pub fn from_threshold(values: &[f64], threshold: f64) -> Self {
        GroupAssignment {
            d: values.iter().map(|&v| u8::from(v >= threshold)).collect(),
        }
    }
}

/// Fraction of pairs on which the thresholded labels agree.
pub fn paired_consistency_cls(preds: &Predictions, pairs: &PairSet) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyPairSet);
    }
    pairs.validate(preds.len())?;
    let agree = pairs
        .pairs
        .iter()
        .filter(|p| preds.labels_hat[p.i] == preds.labels_hat[p.j])
        .count();
    Ok(agree as f64 / pairs.len() as f64)
}

/// 1 minus the normalized mean squared score gap over pairs.
pub fn paired_consistency_reg(
    preds: &Predictions,
    pairs: &PairSet,
    delta_max: f64,
) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyPairSet);
    }
    if !(delta_max > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "delta_max must be > 0, got {delta_max}"
        )));
    }
    pairs.validate(preds.len())?;
    let mut sum = 0.0;
    for p in &pairs.pairs {
        let gap = (preds.scores[p.i] - preds.scores[p.j]).powi(2);
        if gap > delta_max {
            return Err(Error::GapExceedsDeltaMax { gap, delta_max });
        }
        sum += gap;
    }
    Ok(1.0 - sum / (pairs.len() as f64 * delta_max))
}

/// Weight-normalized agreement: sum(w * agree) / sum(w). With unit weights
/// this reduces exactly to [`paired_consistency_cls`].
pub fn paired_consistency_weighted(preds: &Predictions, pairs: &PairSet) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyPairSet);
    }
    pairs.validate(preds.len())?;
    let (mut num, mut den) = (0.0, 0.0);
    for p in &pairs.pairs {
        den += p.weight;
        if preds.labels_hat[p.i] == preds.labels_hat[p.j] {
            num += p.weight;
        }
    }
    Ok(num / den)
}

/// Weighted harmonic mean of precision, recall, and paired consistency.
/// Defined as 0 when any component is 0 (the harmonic-mean limit).
pub fn prc_score(precision: f64, recall: f64, paired_consistency: f64, weights: [f64; 3]) -> f64 {
    let xs = [precision, recall, paired_consistency];
    if xs.iter().any(|&x| x == 0.0) {
        return 0.0;
    }
    let wsum: f64 = weights.iter().sum();
    wsum / xs.iter().zip(weights.iter()).map(|(x, w)| w / x).sum::<f64>()
}

fn group_positive_rates(preds: &Predictions, groups: &GroupAssignment) -> Result<(f64, f64)> {
    let mut count = [0usize; 2];
    let mut pos = [0usize; 2];
    for (lh, &d) in preds.labels_hat.iter().zip(groups.d.iter()) {
        let g = usize::from(d == 1);
        count[g] += 1;
        pos[g] += usize::from(*lh == 1);
    }
    if count[0] == 0 || count[1] == 0 {
        return Err(Error::EmptyGroup {
            what: "group positive rate",
        });
    }
    Ok((
        pos[0] as f64 / count[0] as f64,
        pos[1] as f64 / count[1] as f64,
    ))
}

/// Pr(Y_hat=1 | D=0) - Pr(Y_hat=1 | D=1).
pub fn statistical_parity_difference(
    preds: &Predictions,
    groups: &GroupAssignment,
) -> Result<f64> {
    let (r0, r1) = group_positive_rates(preds, groups)?;
    Ok(r0 - r1)
}

/// Pr(Y_hat=1 | D=0) / Pr(Y_hat=1 | D=1).
pub fn disparate_impact(preds: &Predictions, groups: &GroupAssignment) -> Result<f64> {
    let (r0, r1) = group_positive_rates(preds, groups)?;
    if r1 == 0.0 {
        return Err(Error::ZeroPrivilegedRate);
    }
    Ok(r0 / r1)
}

fn group_rates(
    what: &'static str,
    preds: &Predictions,
    truth: &[u8],
    groups: &GroupAssignment,
) -> Result<([f64; 2], [f64; 2])> {
    // (TPR per group, FPR per group)
    let mut tp = [0usize; 2];
    let mut fp = [0usize; 2];
    let mut pos = [0usize; 2];
    let mut neg = [0usize; 2];
    for i in 0..truth.len() {
        let g = usize::from(groups.d[i] == 1);
        if truth[i] == 1 {
            pos[g] += 1;
            tp[g] += usize::from(preds.labels_hat[i] == 1);
        } else {
            neg[g] += 1;
            fp[g] += usize::from(preds.labels_hat[i] == 1);
        }
    }
    for g in 0..2 {
        if pos[g] == 0 {
            return Err(Error::DegenerateGroup {
                what,
                group: g as u8,
                needed: "positive",
            });
        }
    }
    let tpr = [tp[0] as f64 / pos[0] as f64, tp[1] as f64 / pos[1] as f64];
    if neg[0] == 0 || neg[1] == 0 {
        let g = u8::from(neg[1] == 0);
        return Err(Error::DegenerateGroup {
            what,
            group: g,
            needed: "negative",
        });
    }
    let fpr = [fp[0] as f64 / neg[0] as f64, fp[1] as f64 / neg[1] as f64];
    Ok((tpr, fpr))
}

/// 0.5 * [(FPR_0 - FPR_1) + (TPR_0 - TPR_1)].
pub fn average_odds_difference(
    preds: &Predictions,
    truth: &[u8],
    groups: &GroupAssignment,
) -> Result<f64> {
    let (tpr, fpr) = group_rates("average odds difference", preds, truth, groups)?;
    Ok(0.5 * ((fpr[0] - fpr[1]) + (tpr[0] - tpr[1])))
}

/// TPR_0 - TPR_1.
pub fn equal_opportunity_difference(
    preds: &Predictions,
    truth: &[u8],
    groups: &GroupAssignment,
) -> Result<f64> {
    // only positives are needed; tolerate groups without negatives
    let mut tp = [0usize; 2];
    let mut pos = [0usize; 2];
    for i in 0..truth.len() {
        let g = usize::from(groups.d[i] == 1);
        if truth[i] == 1 {
            pos[g] += 1;
            tp[g] += usize::from(preds.labels_hat[i] == 1);
        }
    }
    for g in 0..2 {
        if pos[g] == 0 {
            return Err(Error::DegenerateGroup {
                what: "equal opportunity difference",
                group: g as u8,
                needed: "positive",
            });
        }
    }
    Ok(tp[0] as f64 / pos[0] as f64 - tp[1] as f64 / pos[1] as f64)
}

/// Agreement of each prediction with its k nearest neighbors' predictions
/// (Euclidean distance on the encoded features, self excluded, ties at the
/// k-th distance broken by lower row index).
pub fn knn_consistency(preds: &Predictions, features: &EncodedDataset, k: usize) -> Result<f64> {
    let n = features.n_rows;
    if k < 1 || k >= n {
        return Err(Error::BadK { k, n });
    }
    if preds.len() != n {
        return Err(Error::DimensionMismatch {
            model: preds.len(),
            data: n,
        });
    }
    let mut total = 0.0;
    let mut dists: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
    for i in 0..n {
        dists.clear();
        let xi = features.row(i);
        for j in 0..n {
            if j == i {
                continue;
            }
            let xj = features.row(j);
            let d2: f64 = xi
                .iter()
                .zip(xj.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            dists.push((d2, j));
        }
        dists.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let neigh_mean: f64 = dists[..k]
            .iter()
            .map(|&(_, j)| preds.labels_hat[j] as f64)
            .sum::<f64>()
            / k as f64;
        total += (preds.labels_hat[i] as f64 - neigh_mean).abs();
    }
    Ok(1.0 - total / n as f64)
}

/// Mutual information (natural log) between thresholded predictions and the
/// protected group under the empirical joint; 0 ln 0 = 0.
pub fn prejudice_index(preds: &Predictions, groups: &GroupAssignment) -> Result<f64> {
    let n = preds.len();
    if n == 0 || groups.d.len() != n {
        return Err(Error::DimensionMismatch {
            model: n,
            data: groups.d.len(),
        });
    }
    let mut joint = [[0.0f64; 2]; 2];
    for (lh, &d) in preds.labels_hat.iter().zip(groups.d.iter()) {
        joint[*lh as usize][d as usize] += 1.0;
    }
    for row in joint.iter_mut() {
        for cell in row.iter_mut() {
            *cell /= n as f64;
        }
    }
    let py = [joint[0][0] + joint[0][1], joint[1][0] + joint[1][1]];
    let pd = [joint[0][0] + joint[1][0], joint[0][1] + joint[1][1]];
    let mut mi = 0.0;
    for y in 0..2 {
        for d in 0..2 {
            let p = joint[y][d];
            if p > 0.0 {
                mi += p * (p / (py[y] * pd[d])).ln();
            }
        }
    }
    Ok(mi.max(0.0))
}

/// Accuracy, precision, recall of thresholded labels against ground truth.
/// Precision is None when nothing is predicted positive; recall is None when
/// there are no ground-truth positives.
pub fn accuracy_precision_recall(
    preds: &Predictions,
    truth: &[u8],
) -> (f64, Option<f64>, Option<f64>) {
    let n = truth.len();
    let mut correct = 0usize;
    let (mut tp, mut fp, mut fne) = (0usize, 0usize, 0usize);
    for i in 0..n {
        let (p, t) = (preds.labels_hat[i], truth[i]);
        correct += usize::from(p == t);
        match (p, t) {
            (1, 1) => tp += 1,
            (1, 0) => fp += 1,
            (0, 1) => fne += 1,
            _ => {}
        }
    }
    let accuracy = correct as f64 / n as f64;
    let precision = (tp + fp > 0).then(|| tp as f64 / (tp + fp) as f64);
    let recall = (tp + fne > 0).then(|| tp as f64 / (tp + fne) as f64);
    (accuracy, precision, recall)
}

/// Everything the evaluation of one (model, dataset, pairs, grouping) yields.
/// `None` fields are undefined for this input; the cause is recorded in
/// `notes`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FairnessReport {
    pub paired_consistency: f64,
    pub paired_consistency_reg: f64,
    pub prc: f64,
    pub accuracy: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub statistical_parity_difference: Option<f64>,
    pub disparate_impact: Option<f64>,
    pub average_odds_difference: Option<f64>,
    pub equal_opportunity_difference: Option<f64>,
    pub knn_consistency: Option<f64>,
    pub prejudice_index: Option<f64>,
    pub notes: Vec<String>,
    pub config: ReportConfig,
}

/// Echo of the evaluation configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportConfig {
    pub k: usize,
    pub threshold: f64,
    pub group_coding: String,
    pub prc_weights: [f64; 3],
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            k: 5,
            threshold: 0.5,
            group_coding: "d=1 privileged, d=0 unprivileged".into(),
            prc_weights: [1.0, 1.0, 1.0],
        }
    }
}

/// Fixed column order of the one-row CSV serialization.
pub const REPORT_CSV_COLUMNS: [&str; 12] = [
    "paired_consistency",
    "paired_consistency_reg",
    "prc",
    "accuracy",
    "precision",
    "recall",
    "statistical_parity_difference",
    "disparate_impact",
    "average_odds_difference",
    "equal_opportunity_difference",
    "knn_consistency",
    "prejudice_index",
];

impl FairnessReport {
    pub fn csv_row(&self) -> Vec<String> {
        fn cell(v: Option<f64>) -> String {
            v.map(|x| format!("{x}")).unwrap_or_default()
        }
        vec![
            format!("{}", self.paired_consistency),
            format!("{}", self.paired_consistency_reg),
            format!("{}", self.prc),
            format!("{}", self.accuracy),
            cell(self.precision),
            cell(self.recall),
            cell(self.statistical_parity_difference),
            cell(self.disparate_impact),
            cell(self.average_odds_difference),
            cell(self.equal_opportunity_difference),
            cell(self.knn_consistency),
            cell(self.prejudice_index),
        ]
    }
}
