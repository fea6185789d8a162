//! `fairpairs`: a subcommand pipeline with file handoff between stages, so a
//! hand-curated pair file can replace the mined one at the mine -> train
//! boundary.
//!
//! Exit codes: 0 success, 2 I/O, 3 data validation, 4 empty mining result,
//! 5 numeric failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use fairpairs::config::{parse_match_spec, parse_schema, ConfigFile};
use fairpairs::data::{
    encode, load_csv, pair_aware_split, write_encoded_csv, EncodedDataset, FeatureSchema,
    SplitResult,
};
use fairpairs::importance::{permutation_importance, Classifier};
use fairpairs::logreg::{train_logreg, LogisticModel, TrainConfig};
use fairpairs::metrics::{GroupAssignment, ReportConfig};
use fairpairs::pairs::{load_pairs, mine_pairs, write_pairs};
use fairpairs::report::{
    evaluate, eta_tag, sweep_eta, sweep_pair_count, write_importance_csv, write_manifest,
    write_report_csv, write_report_json, write_sweep_csv, write_trace_csv, write_tradeoff_csv,
    Manifest, ModelKind, SweepInputs, SweepOutput, SweepSettings,
};
use fairpairs::tree::{render, train_tree, DecisionTree, TreeConfig};

#[derive(Parser)]
#[command(name = "fairpairs", version, about = "Consistency-pair fairness pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate and one-hot encode a CSV dataset.
    Ingest(IngestArgs),
    /// Mine consistency pairs from a dataset and a match spec.
    MinePairs(MineArgs),
    /// Train a model on the pair-preserving train split.
    Train(TrainArgs),
    /// Evaluate a trained model: full fairness report on the test split.
    Evaluate(EvaluateArgs),
    /// Train and evaluate across an eta grid or a pair-count grid.
    Sweep(SweepArgs),
    /// Permutation feature importance of a trained model on the test split.
    Importance(ImportanceArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Schema config (column = <name> <numeric|categorical> <role> lines).
    #[arg(long)]
    schema: PathBuf,
}

#[derive(Args)]
struct SplitArgs {
    /// Pair CSV (i,j[,weight]) as produced by mine-pairs.
    #[arg(long)]
    pairs: PathBuf,
    /// Fraction of rows held out for testing.
    #[arg(long, default_value_t = 0.2)]
    test_ratio: f64,
    /// Seed for the pair-preserving split.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct GroupArgs {
    /// Encoded feature defining the protected groups.
    #[arg(long)]
    protected: String,
    /// Rows with protected value >= this threshold are the privileged group.
    #[arg(long, default_value_t = 0.5)]
    group_threshold: f64,
}

fn default_out() -> PathBuf {
    std::env::var_os("FAIRPAIRS_OUT")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("out"))
}

#[derive(Args)]
struct IngestArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Output directory.
    #[arg(long, default_value_os_t = default_out())]
    out: PathBuf,
}

#[derive(Args)]
struct MineArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Match spec config (protected / min_gap / exact_match / ... lines).
    #[arg(long)]
    matchspec: PathBuf,
    /// Cap on the number of pairs kept (seeded subsample).
    #[arg(long)]
    max_pairs: Option<usize>,
    /// Overrides the seed from the match spec.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_os_t = default_out())]
    out: PathBuf,
}

#[derive(Args)]
struct ModelHyperArgs {
    /// logreg or tree.
    #[arg(long)]
    model: ModelKind,
    /// Fairness trade-off weight.
    #[arg(long, default_value_t = 0.0)]
    eta: f64,
    /// Gradient-descent epochs (logreg).
    #[arg(long, default_value_t = 500)]
    epochs: usize,
    /// Learning rate (logreg).
    #[arg(long, default_value_t = 0.5)]
    learning_rate: f64,
    /// L2 penalty (logreg).
    #[arg(long, default_value_t = 1e-6)]
    l2: f64,
    /// Maximum tree depth.
    #[arg(long, default_value_t = 5)]
    max_depth: usize,
    /// Minimum rows per leaf.
    #[arg(long, default_value_t = 5)]
    min_leaf: usize,
}

impl ModelHyperArgs {
    fn logreg_cfg(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            eta: self.eta,
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            seed,
            l2: self.l2,
        }
    }

    fn tree_cfg(&self, seed: u64) -> TreeConfig {
        TreeConfig {
            eta: self.eta,
            max_depth: self.max_depth,
            min_leaf: self.min_leaf,
            seed,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    split: SplitArgs,
    #[command(flatten)]
    hyper: ModelHyperArgs,
    #[arg(long, default_value_os_t = default_out())]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    split: SplitArgs,
    #[command(flatten)]
    group: GroupArgs,
    /// model.json written by the train command.
    #[arg(long)]
    model_file: PathBuf,
    /// Neighborhood size for kNN consistency.
    #[arg(long, default_value_t = 5)]
    knn_k: usize,
    #[arg(long, default_value_os_t = default_out())]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    split: SplitArgs,
    #[command(flatten)]
    group: GroupArgs,
    #[command(flatten)]
    hyper: ModelHyperArgs,
    /// Comma-separated eta grid, e.g. 0,0.1,1,10.
    #[arg(long)]
    grid: Option<String>,
    /// Comma-separated pair counts, e.g. 100,500,1000,all. Uses --eta for
    /// every point; mutually exclusive with --grid.
    #[arg(long)]
    n_pairs: Option<String>,
    /// Permutation-importance repeats per feature.
    #[arg(long, default_value_t = 5)]
    n_repeats: usize,
    /// Seed for pair subsampling in --n-pairs sweeps.
    #[arg(long, default_value_t = 0)]
    subsample_seed: u64,
    #[arg(long, default_value_os_t = default_out())]
    out: PathBuf,
}

#[derive(Args)]
struct ImportanceArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    split: SplitArgs,
    /// model.json written by the train command.
    #[arg(long)]
    model_file: PathBuf,
    /// Permutation repeats per feature.
    #[arg(long, default_value_t = 5)]
    n_repeats: usize,
    #[arg(long, default_value_os_t = default_out())]
    out: PathBuf,
}

/// On-disk model format; the tag keeps evaluate/importance model-agnostic.
#[derive(Serialize, Deserialize)]
#[serde(tag = "kind")]
enum ModelFile {
    #[serde(rename = "logreg")]
    Logreg(LogisticModel),
    #[serde(rename = "tree")]
    Tree(DecisionTree),
}

impl ModelFile {
    fn classifier(&self) -> &dyn Classifier {
        match self {
            ModelFile::Logreg(m) => m,
            ModelFile::Tree(m) => m,
        }
    }
}

fn io_err(path: &Path, source: std::io::Error) -> fairpairs::Error {
    fairpairs::Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn ensure_out(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    Ok(())
}

fn load_schema(path: &Path) -> anyhow::Result<FeatureSchema> {
    let cfg = ConfigFile::load(path)?;
    Ok(parse_schema(&cfg)?)
}

fn load_split(data_args: &DataArgs, split_args: &SplitArgs) -> anyhow::Result<SplitResult> {
    let schema = load_schema(&data_args.schema)?;
    let (dataset, _) = load_csv(&data_args.data, &schema)?;
    let encoded = encode(&dataset);
    let pairs = load_pairs(&split_args.pairs, encoded.n_rows)?;
    Ok(pair_aware_split(
        &encoded,
        &pairs,
        split_args.test_ratio,
        split_args.seed,
    )?)
}

fn groups_for(encoded: &EncodedDataset, group_args: &GroupArgs) -> anyhow::Result<GroupAssignment> {
    let idx = encoded
        .feature_index(&group_args.protected)
        .ok_or_else(|| fairpairs::Error::UnknownFeature(group_args.protected.clone()))?;
    Ok(GroupAssignment::from_threshold(
        &encoded.column(idx),
        group_args.group_threshold,
    ))
}

fn load_model(path: &Path) -> anyhow::Result<ModelFile> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).with_context(|| format!("parse model file {}", path.display()))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> anyhow::Result<()> {
    let json = serde_json::to_string_pretty(value)?;
    std::fs::write(path, json).map_err(|e| io_err(path, e))?;
    Ok(())
}

fn finish(out: &Path, command: &str, files: Vec<String>, seed: u64, extra: serde_json::Value) -> anyhow::Result<()> {
    write_manifest(
        &Manifest {
            command: command.to_string(),
            files,
            seed,
            extra,
        },
        out,
    )?;
    Ok(())
}

fn cmd_ingest(args: &IngestArgs) -> anyhow::Result<()> {
    ensure_out(&args.out)?;
    let schema = load_schema(&args.data.schema)?;
    let (dataset, diag) = load_csv(&args.data.data, &schema)?;
    let encoded = encode(&dataset);
    let enc_path = args.out.join("encoded.csv");
    write_encoded_csv(&encoded, &enc_path)?;
    println!(
        "ingested {} rows ({} dropped for missing values), {} encoded features",
        diag.kept, diag.dropped, encoded.n_features
    );
    finish(
        &args.out,
        "ingest",
        vec!["encoded.csv".into()],
        0,
        serde_json::json!({
            "kept": diag.kept,
            "dropped": diag.dropped,
            "n_features": encoded.n_features,
        }),
    )
}

fn cmd_mine_pairs(args: &MineArgs) -> anyhow::Result<()> {
    ensure_out(&args.out)?;
    let schema = load_schema(&args.data.schema)?;
    let (dataset, _) = load_csv(&args.data.data, &schema)?;
    let cfg = ConfigFile::load(&args.matchspec)?;
    let mut spec = parse_match_spec(&cfg, &dataset.schema)?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if args.max_pairs.is_some() {
        spec.max_pairs = args.max_pairs;
    }
    let (pairs, stats) = mine_pairs(&dataset, &spec)?;
    let path = args.out.join("pairs.csv");
    write_pairs(&pairs, &path)?;
    println!("{stats}");
    println!("wrote {} pairs to {}", pairs.len(), path.display());
    finish(
        &args.out,
        "mine-pairs",
        vec!["pairs.csv".into()],
        spec.seed,
        serde_json::json!({
            "kept": pairs.len(),
            "candidates": stats.candidates,
            "blocks": stats.blocks,
        }),
    )
}

fn cmd_train(args: &TrainArgs) -> anyhow::Result<()> {
    ensure_out(&args.out)?;
    let split = load_split(&args.data, &args.split)?;
    let mut files = vec!["model.json".into()];
    let mut extra = serde_json::json!({
        "model": args.hyper.model.as_str(),
        "eta": args.hyper.eta,
        "train_rows": split.train.n_rows,
        "test_rows": split.test.n_rows,
        "train_pairs": split.train_pairs.len(),
        "test_pairs": split.test_pairs.len(),
    });
    let model = match args.hyper.model {
        ModelKind::Logreg => {
            let cfg = args.hyper.logreg_cfg(args.split.seed);
            let (model, trace) = train_logreg(&split.train, &split.train_pairs, &cfg)?;
            let trace_name = format!("trace_eta_{}.csv", eta_tag(args.hyper.eta));
            write_trace_csv(&trace, &args.out.join(&trace_name))?;
            files.push(trace_name);
            ModelFile::Logreg(model)
        }
        ModelKind::Tree => {
            let cfg = args.hyper.tree_cfg(args.split.seed);
            let model = train_tree(&split.train, &split.train_pairs, &cfg)?;
            let txt = args.out.join("tree.txt");
            std::fs::write(&txt, render(&model)).map_err(|e| io_err(&txt, e))?;
            files.push("tree.txt".into());
            ModelFile::Tree(model)
        }
    };
    write_json(&model, &args.out.join("model.json"))?;
    let preds = model.classifier().predict(&split.test)?;
    let correct = preds
        .labels_hat
        .iter()
        .zip(&split.test.labels)
        .filter(|(a, b)| a == b)
        .count();
    let accuracy = correct as f64 / split.test.n_rows as f64;
    println!("test accuracy: {accuracy:.4}");
    extra["test_accuracy"] = serde_json::json!(accuracy);
    finish(&args.out, "train", files, args.split.seed, extra)
}

fn cmd_evaluate(args: &EvaluateArgs) -> anyhow::Result<()> {
    ensure_out(&args.out)?;
    let split = load_split(&args.data, &args.split)?;
    let model = load_model(&args.model_file)?;
    let groups = groups_for(&split.test, &args.group)?;
    let cfg = ReportConfig {
        k: args.knn_k,
        ..ReportConfig::default()
    };
    let report = evaluate(
        model.classifier(),
        &split.test,
        &split.test_pairs,
        &groups,
        &cfg,
    )?;
    write_report_json(&report, &args.out.join("report.json"))?;
    write_report_csv(&report, &args.out.join("fairness_report.csv"))?;
    println!(
        "accuracy {:.4}  paired_consistency {:.4}  prc {:.4}",
        report.accuracy, report.paired_consistency, report.prc
    );
    for note in &report.notes {
        eprintln!("note: {note}");
    }
    finish(
        &args.out,
        "evaluate",
        vec!["report.json".into(), "fairness_report.csv".into()],
        args.split.seed,
        serde_json::json!({
            "protected": args.group.protected,
            "group_threshold": args.group.group_threshold,
        }),
    )
}

fn parse_grid(text: &str) -> anyhow::Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| fairpairs::Error::InvalidArgument(format!("bad grid value {s:?}")).into())
        })
        .collect()
}

fn parse_counts(text: &str) -> anyhow::Result<Vec<Option<usize>>> {
    text.split(',')
        .map(|s| {
            let s = s.trim();
            if s == "all" {
                Ok(None)
            } else {
                s.parse::<usize>().map(Some).map_err(|_| {
                    fairpairs::Error::InvalidArgument(format!("bad pair count {s:?}")).into()
                })
            }
        })
        .collect()
}

fn cmd_sweep(args: &SweepArgs) -> anyhow::Result<()> {
    ensure_out(&args.out)?;
    let split = load_split(&args.data, &args.split)?;
    let groups = groups_for(&split.test, &args.group)?;
    let inputs = SweepInputs {
        train: &split.train,
        test: &split.test,
        train_pairs: &split.train_pairs,
        test_pairs: &split.test_pairs,
        groups: &groups,
        protected_feature: &args.group.protected,
    };
    let settings = SweepSettings {
        logreg: args.hyper.logreg_cfg(args.split.seed),
        tree: args.hyper.tree_cfg(args.split.seed),
        importance_repeats: args.n_repeats,
        importance_seed: args.split.seed,
    };
    let (output, sweep_name, echo): (SweepOutput, &str, serde_json::Value) =
        match (&args.grid, &args.n_pairs) {
            (Some(grid), None) => {
                let grid = parse_grid(grid)?;
                let out = sweep_eta(&inputs, args.hyper.model, &grid, &settings)?;
                let echo = serde_json::json!({ "grid": grid });
                (out, "sweep_eta.csv", echo)
            }
            (None, Some(counts)) => {
                let counts = parse_counts(counts)?;
                let out = sweep_pair_count(
                    &inputs,
                    args.hyper.model,
                    &counts,
                    args.hyper.eta,
                    &settings,
                    args.subsample_seed,
                )?;
                let echo = serde_json::json!({
                    "eta": args.hyper.eta,
                    "counts": counts,
                    "subsample_seed": args.subsample_seed,
                });
                (out, "sweep_pairs.csv", echo)
            }
            _ => {
                return Err(fairpairs::Error::InvalidArgument(
                    "pass exactly one of --grid (eta sweep) or --n-pairs (pair-count sweep)".into(),
                )
                .into())
            }
        };
    let mut files = vec![sweep_name.to_string()];
    write_sweep_csv(&output.result, &args.out.join(sweep_name))?;
    for (eta, trace) in &output.traces {
        let name = format!("trace_eta_{}.csv", eta_tag(*eta));
        write_trace_csv(trace, &args.out.join(&name))?;
        files.push(name);
    }
    if !output.traces.is_empty() && output.result.grid_name == "eta" {
        write_tradeoff_csv(&output.traces, &args.out.join("tradeoff_eta.csv"))?;
        files.push("tradeoff_eta.csv".into());
    }
    for row in &output.result.rows {
        println!(
            "{} {}: accuracy {:.4}  pairs_intact {:.4}  {} rank {}",
            output.result.grid_name,
            row.grid_value,
            row.accuracy,
            row.pct_pairs_intact,
            args.group.protected,
            row.protected_rank
        );
    }
    finish(&args.out, "sweep", files, args.split.seed, echo)
}

fn cmd_importance(args: &ImportanceArgs) -> anyhow::Result<()> {
    ensure_out(&args.out)?;
    let split = load_split(&args.data, &args.split)?;
    let model = load_model(&args.model_file)?;
    let clf = model.classifier();
    let report = permutation_importance(clf, &split.test, args.n_repeats, args.split.seed)?;
    let name = format!("importance_{}.csv", clf.kind());
    write_importance_csv(&report, &args.out.join(&name))?;
    let mut top: Vec<_> = report.entries.iter().collect();
    top.sort_by_key(|e| e.rank);
    for e in top.iter().take(6) {
        println!("{:>2}. {}  {:.5}", e.rank, e.feature, e.mean_drop);
    }
    finish(
        &args.out,
        "importance",
        vec![name],
        args.split.seed,
        serde_json::json!({ "n_repeats": args.n_repeats }),
    )
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    use fairpairs::Error as E;
    match err.downcast_ref::<E>() {
        Some(E::Io { .. }) => 2,
        Some(E::NoPairs { .. }) => 4,
        Some(E::Diverged { .. }) | Some(E::ZeroPrivilegedRate) | Some(E::GapExceedsDeltaMax { .. }) => 5,
        Some(_) => 3,
        None => {
            // std::io errors wrapped by anyhow (e.g. while reading configs)
            if err.downcast_ref::<std::io::Error>().is_some() {
                2
            } else {
                3
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Ingest(args) => cmd_ingest(args),
        Command::MinePairs(args) => cmd_mine_pairs(args),
        Command::Train(args) => cmd_train(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Importance(args) => cmd_importance(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
