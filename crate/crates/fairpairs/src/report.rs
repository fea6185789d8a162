//! Evaluation artifacts: fairness reports, eta sweeps, pair-count sweeps,
//! training-trace exports, and the output-directory writers.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::EncodedDataset;
use crate::error::{Error, Result};
use crate::importance::{
    permutation_importance, rank_of, sorted_entries, Classifier, ImportanceReport,
};
use crate::logreg::{train_logreg, TraceRow, TrainConfig, TrainingTrace};
use crate::metrics::{
    accuracy_precision_recall, average_odds_difference, disparate_impact,
    equal_opportunity_difference, knn_consistency, paired_consistency_reg,
    paired_consistency_weighted, prc_score, prejudice_index,
    statistical_parity_difference, FairnessReport, GroupAssignment, Predictions, ReportConfig,
    REPORT_CSV_COLUMNS,
};
use crate::pairs::{subsample_pairs, PairSet};
use crate::tree::{leaf_assignments, train_tree, TreeConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    Logreg,
    Tree,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Logreg => "logreg",
            ModelKind::Tree => "tree",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logreg" => Ok(ModelKind::Logreg),
            "tree" => Ok(ModelKind::Tree),
            other => Err(Error::InvalidArgument(format!(
                "unknown model kind {other:?} (expected logreg or tree)"
            ))),
        }
    }
}

/// Full metric suite for one model on one test set. Metrics that are
/// undefined for the input come back as `None` with the cause in `notes`.
pub fn evaluate(
    model: &dyn Classifier,
    test: &EncodedDataset,
    test_pairs: &PairSet,
    groups: &GroupAssignment,
    cfg: &ReportConfig,
) -> Result<FairnessReport> {
    let preds = model.predict(test)?;
    test_pairs.validate(test.n_rows)?;
    let truth = &test.labels;

    let paired_consistency = paired_consistency_weighted(&preds, test_pairs)?;
    let pc_reg = paired_consistency_reg(&preds, test_pairs, 1.0)?;
    let (accuracy, precision, recall) = accuracy_precision_recall(&preds, truth);
    let prc = match (precision, recall) {
        (Some(p), Some(r)) => prc_score(p, r, paired_consistency, cfg.prc_weights),
        _ => 0.0,
    };

    let mut notes = Vec::new();
    let mut soft = |what: &str, r: crate::error::Result<f64>| match r {
        Ok(v) => Some(v),
        Err(e) => {
            notes.push(format!("{what}: {e}"));
            None
        }
    };

    let spd = soft("statistical_parity_difference", statistical_parity_difference(&preds, groups));
    let di = soft("disparate_impact", disparate_impact(&preds, groups));
    let aod = soft(
        "average_odds_difference",
        average_odds_difference(&preds, truth, groups),
    );
    let eod = soft(
        "equal_opportunity_difference",
        equal_opportunity_difference(&preds, truth, groups),
    );
    let knn = soft("knn_consistency", knn_consistency(&preds, test, cfg.k));
    let pi = soft("prejudice_index", prejudice_index(&preds, groups));

    if precision.is_none() {
        notes.push("precision undefined: no predicted positives".into());
    }
    if recall.is_none() {
        notes.push("recall undefined: no ground-truth positives".into());
    }

    Ok(FairnessReport {
        paired_consistency,
        paired_consistency_reg: pc_reg,
        prc,
        accuracy,
        precision,
        recall,
        statistical_parity_difference: spd,
        disparate_impact: di,
        average_odds_difference: aod,
        equal_opportunity_difference: eod,
        knn_consistency: knn,
        prejudice_index: pi,
        notes,
        config: cfg.clone(),
    })
}

/// One grid point of a sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    /// eta for eta sweeps, pair count for pair-count sweeps.
    pub grid_value: f64,
    pub accuracy: f64,
    pub paired_consistency: f64,
    /// Test pairs whose members land in the same leaf (tree) or receive the
    /// same label (logreg).
    pub pct_pairs_intact: f64,
    pub protected_importance: f64,
    pub protected_rank: usize,
    pub statistical_parity_difference: Option<f64>,
    pub average_odds_difference: Option<f64>,
    pub disparate_impact: Option<f64>,
    pub equal_opportunity_difference: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub grid_name: String,
    pub model: ModelKind,
    pub protected_feature: String,
    pub rows: Vec<SweepRow>,
}

/// Shared inputs for both sweep kinds.
pub struct SweepInputs<'a> {
    pub train: &'a EncodedDataset,
    pub test: &'a EncodedDataset,
    pub train_pairs: &'a PairSet,
    pub test_pairs: &'a PairSet,
    pub groups: &'a GroupAssignment,
    pub protected_feature: &'a str,
}

pub struct SweepSettings {
    pub logreg: TrainConfig,
    pub tree: TreeConfig,
    pub importance_repeats: usize,
    pub importance_seed: u64,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            logreg: TrainConfig::default(),
            tree: TreeConfig::default(),
            importance_repeats: 5,
            importance_seed: 0,
        }
    }
}

pub struct SweepOutput {
    pub result: SweepResult,
    /// One (eta, trace) per eta-sweep grid point when the model is logreg.
    pub traces: Vec<(f64, TrainingTrace)>,
    /// Importance report per grid point, in grid order.
    pub importances: Vec<ImportanceReport>,
}

fn fraction_pairs_intact(
    kind: ModelKind,
    model: &dyn Classifier,
    preds: &Predictions,
    test: &EncodedDataset,
    test_pairs: &PairSet,
) -> Result<f64> {
    if test_pairs.is_empty() {
        return Err(Error::EmptyPairSet);
    }
    let intact = match kind {
        ModelKind::Tree => {
            // route through the actual tree: same leaf = intact
            let tree = model
                .as_tree()
                .expect("kind says tree but model is not a tree");
            let leaves = leaf_assignments(tree, test)?;
            test_pairs
                .pairs
                .iter()
                .filter(|p| leaves[p.i] == leaves[p.j])
                .count()
        }
        ModelKind::Logreg => test_pairs
            .pairs
            .iter()
            .filter(|p| preds.labels_hat[p.i] == preds.labels_hat[p.j])
            .count(),
    };
    Ok(intact as f64 / test_pairs.len() as f64)
}

fn train_and_score(
    inputs: &SweepInputs<'_>,
    kind: ModelKind,
    eta: f64,
    train_pairs: &PairSet,
    settings: &SweepSettings,
    grid_value: f64,
) -> Result<(SweepRow, Option<TrainingTrace>, ImportanceReport)> {
    let (model, trace): (Box<dyn Classifier>, Option<TrainingTrace>) = match kind {
        ModelKind::Logreg => {
            let cfg = TrainConfig {
                eta,
                ..settings.logreg.clone()
            };
            let (m, t) = train_logreg(inputs.train, train_pairs, &cfg)?;
            (Box::new(m), Some(t))
        }
        ModelKind::Tree => {
            let cfg = TreeConfig {
                eta,
                ..settings.tree.clone()
            };
            let m = train_tree(inputs.train, train_pairs, &cfg)?;
            (Box::new(m), None)
        }
    };
    let preds = model.predict(inputs.test)?;
    let (accuracy, _, _) = accuracy_precision_recall(&preds, &inputs.test.labels);
    let paired_consistency = paired_consistency_weighted(&preds, inputs.test_pairs)?;
    let pct_pairs_intact =
        fraction_pairs_intact(kind, model.as_ref(), &preds, inputs.test, inputs.test_pairs)?;
    let importance = permutation_importance(
        model.as_ref(),
        inputs.test,
        settings.importance_repeats,
        settings.importance_seed,
    )?;
    let protected_rank = rank_of(&importance, inputs.protected_feature)?;
    let protected_importance = importance
        .entries
        .iter()
        .find(|e| e.feature == inputs.protected_feature)
        .map(|e| e.mean_drop)
        .expect("rank_of already found the feature");
    let row = SweepRow {
        grid_value,
        accuracy,
        paired_consistency,
        pct_pairs_intact,
        protected_importance,
        protected_rank,
        statistical_parity_difference: statistical_parity_difference(&preds, inputs.groups).ok(),
        average_odds_difference: average_odds_difference(&preds, &inputs.test.labels, inputs.groups)
            .ok(),
        disparate_impact: disparate_impact(&preds, inputs.groups).ok(),
        equal_opportunity_difference: equal_opportunity_difference(
            &preds,
            &inputs.test.labels,
            inputs.groups,
        )
        .ok(),
    };
    Ok((row, trace, importance))
}

/// One model per eta; records metrics and the protected feature's importance
/// rank at every grid point.
pub fn sweep_eta(
    inputs: &SweepInputs<'_>,
    kind: ModelKind,
    grid: &[f64],
    settings: &SweepSettings,
) -> Result<SweepOutput> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty eta grid".into()));
    }
    let mut rows = Vec::with_capacity(grid.len());
    let mut traces = Vec::new();
    let mut importances = Vec::new();
    for &eta in grid {
        let (row, trace, importance) =
            train_and_score(inputs, kind, eta, inputs.train_pairs, settings, eta)?;
        rows.push(row);
        if let Some(t) = trace {
            traces.push((eta, t));
        }
        importances.push(importance);
    }
    Ok(SweepOutput {
        result: SweepResult {
            grid_name: "eta".into(),
            model: kind,
            protected_feature: inputs.protected_feature.to_string(),
            rows,
        },
        traces,
        importances,
    })
}

/// Fixed eta, varying number of training pairs. `None` in the grid means the
/// full mined pair set; counts are drawn as seeded subsamples.
pub fn sweep_pair_count(
    inputs: &SweepInputs<'_>,
    kind: ModelKind,
    counts: &[Option<usize>],
    eta: f64,
    settings: &SweepSettings,
    subsample_seed: u64,
) -> Result<SweepOutput> {
    if counts.is_empty() {
        return Err(Error::InvalidArgument("empty pair-count grid".into()));
    }
    let mut rows = Vec::with_capacity(counts.len());
    let mut traces = Vec::new();
    let mut importances = Vec::new();
    for &count in counts {
        let subset = match count {
            Some(n) => subsample_pairs(inputs.train_pairs, n, subsample_seed)?,
            None => inputs.train_pairs.clone(),
        };
        let (row, trace, importance) =
            train_and_score(inputs, kind, eta, &subset, settings, subset.len() as f64)?;
        rows.push(row);
        if let Some(t) = trace {
            traces.push((subset.len() as f64, t));
        }
        importances.push(importance);
    }
    Ok(SweepOutput {
        result: SweepResult {
            grid_name: "n_pairs".into(),
            model: kind,
            protected_feature: inputs.protected_feature.to_string(),
            rows,
        },
        traces,
        importances,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

pub fn write_report_json(report: &FairnessReport, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(report)
        .map_err(|e| Error::InvalidArgument(format!("serialize report: {e}")))?;
    write_file(path, &json)
}

pub fn write_report_csv(report: &FairnessReport, path: &Path) -> Result<()> {
    let mut out = REPORT_CSV_COLUMNS.join(",");
    out.push('\n');
    out.push_str(&report.csv_row().join(","));
    out.push('\n');
    write_file(path, &out)
}

pub fn write_sweep_csv(sweep: &SweepResult, path: &Path) -> Result<()> {
    let mut out = format!(
        "{},accuracy,paired_consistency,pct_pairs_intact,{}_importance,{}_rank,\
         statistical_parity_difference,average_odds_difference,disparate_impact,\
         equal_opportunity_difference\n",
        sweep.grid_name, sweep.protected_feature, sweep.protected_feature
    );
    for r in &sweep.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.grid_value,
            r.accuracy,
            r.paired_consistency,
            r.pct_pairs_intact,
            r.protected_importance,
            r.protected_rank,
            opt_cell(r.statistical_parity_difference),
            opt_cell(r.average_odds_difference),
            opt_cell(r.disparate_impact),
            opt_cell(r.equal_opportunity_difference),
        ));
    }
    write_file(path, &out)
}

/// Per-epoch loss components.
pub fn write_trace_csv(trace: &TrainingTrace, path: &Path) -> Result<()> {
    let mut out = String::from("epoch,ce_loss,pair_loss,total\n");
    for (epoch, r) in trace.rows.iter().enumerate() {
        out.push_str(&format!("{},{},{},{}\n", epoch, r.ce_loss, r.pair_loss, r.total));
    }
    write_file(path, &out)
}

/// Final loss components per eta, plus the same values normalized to the
/// eta=0 grid point (or the first grid point when 0 is absent): the
/// accuracy-vs-consistency trade-off curve.
pub fn write_tradeoff_csv(traces: &[(f64, TrainingTrace)], path: &Path) -> Result<()> {
    let finals: Vec<(f64, TraceRow)> = traces
        .iter()
        .filter_map(|(eta, t)| t.rows.last().map(|r| (*eta, *r)))
        .collect();
    let base = finals
        .iter()
        .find(|(eta, _)| *eta == 0.0)
        .or_else(|| finals.first())
        .map(|(_, r)| *r)
        .ok_or(Error::InvalidArgument("no traces to summarize".into()))?;
    let norm = |v: f64, v0: f64| if v0 != 0.0 { v / v0 } else { 0.0 };
    let mut out = String::from("eta,ce_loss,pair_loss,total,ce_rel,pair_rel\n");
    for (eta, r) in &finals {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            eta,
            r.ce_loss,
            r.pair_loss,
            r.total,
            norm(r.ce_loss, base.ce_loss),
            norm(r.pair_loss, base.pair_loss),
        ));
    }
    write_file(path, &out)
}

pub fn write_importance_csv(report: &ImportanceReport, path: &Path) -> Result<()> {
    let mut out = String::from("feature,mean_drop,std,rank\n");
    for e in sorted_entries(report) {
        out.push_str(&format!("{},{},{},{}\n", e.feature, e.mean_drop, e.std, e.rank));
    }
    write_file(path, &out)
}

/// Tag used in trace file names, e.g. eta 0.1 -> `trace_eta_0.1.csv`.
pub fn eta_tag(eta: f64) -> String {
    format!("{eta}")
}

/// Written last by every pipeline stage: lists the artifacts the run
/// produced, so its presence marks a complete run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub files: Vec<String>,
    pub seed: u64,
    pub extra: serde_json::Value,
}

pub fn write_manifest(manifest: &Manifest, dir: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(manifest)
        .map_err(|e| Error::InvalidArgument(format!("serialize manifest: {e}")))?;
    write_file(&dir.join("manifest.json"), &json)
}
