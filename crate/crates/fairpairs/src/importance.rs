//! Permutation feature importance: accuracy drop when one column is shuffled.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::EncodedDataset;
use crate::error::{Error, Result};
use crate::logreg::{predict_proba, LogisticModel};
use crate::metrics::Predictions;
use crate::tree::{predict_tree, DecisionTree};

/// Anything that can label an encoded dataset.
pub trait Classifier {
    fn predict(&self, data: &EncodedDataset) -> Result<Predictions>;
    fn kind(&self) -> &'static str;

    /// Downcast for tree-specific diagnostics (leaf routing).
    fn as_tree(&self) -> Option<&DecisionTree> {
        None
    }
}

impl Classifier for LogisticModel {
    fn predict(&self, data: &EncodedDataset) -> Result<Predictions> {
        let scores = predict_proba(self, data)?;
        Predictions::from_scores(scores, 0.5)
    }

    fn kind(&self) -> &'static str {
        "logreg"
    }
}

impl Classifier for DecisionTree {
    fn predict(&self, data: &EncodedDataset) -> Result<Predictions> {
        predict_tree(self, data)
    }

    fn kind(&self) -> &'static str {
        "tree"
    }

    fn as_tree(&self) -> Option<&DecisionTree> {
        Some(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceEntry {
    pub feature: String,
    pub mean_drop: f64,
    pub std: f64,
    /// 1-based; ties broken by feature order.
    pub rank: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImportanceReport {
    /// In original feature order; `rank` carries the ordering.
    pub entries: Vec<ImportanceEntry>,
    pub baseline_accuracy: f64,
    pub n_repeats: usize,
    pub seed: u64,
}

fn accuracy(preds: &Predictions, labels: &[u8]) -> f64 {
    let hits = preds
        .labels_hat
        .iter()
        .zip(labels)
        .filter(|(a, b)| a == b)
        .count();
    hits as f64 / labels.len() as f64
}

/// Mean accuracy drop over `n_repeats` seeded shuffles of each column.
///
/// Each feature draws from its own RNG stream, so results do not depend on
/// evaluation order.
pub fn permutation_importance(
    model: &dyn Classifier,
    test: &EncodedDataset,
    n_repeats: usize,
    seed: u64,
) -> Result<ImportanceReport> {
    if n_repeats == 0 {
        return Err(Error::InvalidArgument("n_repeats must be >= 1".into()));
    }
    if test.n_rows == 0 {
        return Err(Error::EmptyTrainingSet);
    }
    let baseline = accuracy(&model.predict(test)?, &test.labels);

    let mut stats: Vec<(f64, f64)> = Vec::with_capacity(test.n_features);
    let mut scratch = test.clone();
    for feature in 0..test.n_features {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(feature as u64);
        let mut drops = Vec::with_capacity(n_repeats);
        for _ in 0..n_repeats {
            let mut column: Vec<f64> =
                (0..test.n_rows).map(|i| test.value(i, feature)).collect();
            column.shuffle(&mut rng);
            for (i, v) in column.into_iter().enumerate() {
                scratch.matrix[i * test.n_features + feature] = v;
            }
            let permuted = accuracy(&model.predict(&scratch)?, &test.labels);
            drops.push(baseline - permuted);
        }
        // restore the column before moving on
        for i in 0..test.n_rows {
            scratch.matrix[i * test.n_features + feature] = test.value(i, feature);
        }
        let mean = drops.iter().sum::<f64>() / n_repeats as f64;
        let var = drops.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n_repeats as f64;
        stats.push((mean, var.sqrt()));
    }

    // rank by descending mean drop, earlier feature wins ties
    let mut order: Vec<usize> = (0..test.n_features).collect();
    order.sort_by(|&a, &b| {
        stats[b]
            .0
            .partial_cmp(&stats[a].0)
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut rank = vec![0usize; test.n_features];
    for (r, &f) in order.iter().enumerate() {
        rank[f] = r + 1;
    }

    let entries = (0..test.n_features)
        .map(|f| ImportanceEntry {
            feature: test.feature_names[f].clone(),
            mean_drop: stats[f].0,
            std: stats[f].1,
            rank: rank[f],
        })
        .collect();
    Ok(ImportanceReport {
        entries,
        baseline_accuracy: baseline,
        n_repeats,
        seed,
    })
}

/// 1-based rank of a feature in the report.
pub fn rank_of(report: &ImportanceReport, feature: &str) -> Result<usize> {
    report
        .entries
        .iter()
        .find(|e| e.feature == feature)
        .map(|e| e.rank)
        .ok_or_else(|| Error::UnknownFeature(feature.to_string()))
}

/// Entries sorted by rank, as written to CSV.
pub fn sorted_entries(report: &ImportanceReport) -> Vec<&ImportanceEntry> {
    let mut v: Vec<&ImportanceEntry> = report.entries.iter().collect();
    v.sort_by_key(|e| e.rank);
    v
}
