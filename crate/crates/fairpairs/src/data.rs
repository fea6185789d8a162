//! Tabular ingestion, dummy encoding, and pair-preserving train/test splits.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pairs::{ConsistencyPair, PairSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Categorical,
    Numeric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnRole {
    Feature,
    Protected,
    Target,
    Ignored,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    pub role: ColumnRole,
}

/// Column layout of a raw dataset: exactly one target column, unique names.
/// Categorical vocabularies are recorded during ingestion, in lexicographic
/// order, so downstream encodings are deterministic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub columns: Vec<ColumnSpec>,
    pub target_positive_value: String,
    vocabularies: BTreeMap<String, Vec<String>>,
}

impl FeatureSchema {
    pub fn new(columns: Vec<ColumnSpec>, target_positive_value: String) -> Result<Self> {
        let mut names = BTreeSet::new();
        for c in &columns {
            if !names.insert(c.name.clone()) {
                return Err(Error::Schema(format!("duplicate column name {:?}", c.name)));
            }
        }
        let targets: Vec<_> = columns
            .iter()
            .filter(|c| c.role == ColumnRole::Target)
            .collect();
        if targets.len() != 1 {
            return Err(Error::Schema(format!(
                "expected exactly one target column, found {}",
                targets.len()
            )));
        }
        Ok(FeatureSchema {
            columns,
            target_positive_value,
            vocabularies: BTreeMap::new(),
        })
    }

    pub fn target_column(&self) -> &str {
        &self
            .columns
            .iter()
            .find(|c| c.role == ColumnRole::Target)
            .expect("schema invariant: one target")
            .name
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Option<&ColumnSpec> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Recorded category vocabulary (lexicographic) for a categorical column.
    pub fn vocabulary(&self, name: &str) -> Option<&[String]> {
        self.vocabularies.get(name).map(|v| v.as_slice())
    }
}

/// A raw cell value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Cat(String),
    Num(f64),
}

impl Value {
    pub fn as_num(&self) -> Option<f64> {
        match self {
            Value::Num(x) => Some(*x),
            Value::Cat(_) => None,
        }
    }
}

/// Raw typed rows plus binary labels. Rows follow the schema column order and
/// include every column (ignored and target included) so the original record
/// is always recoverable.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub schema: FeatureSchema,
    pub rows: Vec<Vec<Value>>,
    pub labels: Vec<u8>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct IngestDiagnostics {
    /// Rows kept.
    pub kept: usize,
    /// Rows dropped for a missing value in a feature/protected/target column.
    pub dropped: usize,
}

const MISSING: &str = "?";

/// Loads an RFC-4180 CSV with a header row that must match the schema column
/// names exactly. Rows with missing values (`?` or empty) in feature,
/// protected, or target columns are dropped and counted.
pub fn load_csv(path: &Path, schema: &FeatureSchema) -> Result<(Dataset, IngestDiagnostics)> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let expected: Vec<String> = schema.columns.iter().map(|c| c.name.clone()).collect();
    let found: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
        })?
        .iter()
        .map(str::to_string)
        .collect();
    if found != expected {
        return Err(Error::HeaderMismatch { expected, found });
    }

    let target_idx = schema.column_index(schema.target_column()).unwrap();
    let positive = schema.target_positive_value.clone();

    let mut rows: Vec<Vec<Value>> = Vec::new();
    let mut labels: Vec<u8> = Vec::new();
    let mut dropped = 0usize;
    let mut vocab_sets: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();

    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
        })?;
        // row numbers reported 1-based over data rows
        let rowno = line + 1;
        let mut missing = false;
        for (ci, col) in schema.columns.iter().enumerate() {
            let cell = record.get(ci).unwrap_or("");
            if col.role != ColumnRole::Ignored && (cell == MISSING || cell.is_empty()) {
                missing = true;
            }
        }
        if missing {
            dropped += 1;
            continue;
        }
        let mut row = Vec::with_capacity(schema.columns.len());
        for (ci, col) in schema.columns.iter().enumerate() {
            let cell = record.get(ci).unwrap_or("");
            match col.kind {
                ColumnKind::Numeric => {
                    if col.role == ColumnRole::Ignored && (cell == MISSING || cell.is_empty()) {
                        row.push(Value::Num(f64::NAN));
                        continue;
                    }
                    let x: f64 = cell.parse().map_err(|_| Error::BadNumeric {
                        row: rowno,
                        column: col.name.clone(),
                        value: cell.to_string(),
                    })?;
                    if !x.is_finite() && col.role != ColumnRole::Ignored {
                        return Err(Error::BadNumeric {
                            row: rowno,
                            column: col.name.clone(),
                            value: cell.to_string(),
                        });
                    }
                    row.push(Value::Num(x));
                }
                ColumnKind::Categorical => {
                    if col.role != ColumnRole::Ignored {
                        vocab_sets
                            .entry(col.name.clone())
                            .or_default()
                            .insert(cell.to_string());
                    }
                    row.push(Value::Cat(cell.to_string()));
                }
            }
        }
        labels.push(u8::from(record.get(target_idx).unwrap_or("") == positive));
        rows.push(row);
    }

    if rows.is_empty() {
        return Err(Error::NoUsableRows { dropped });
    }

    let mut schema = schema.clone();
    schema.vocabularies = vocab_sets
        .into_iter()
        .map(|(k, set)| (k, set.into_iter().collect()))
        .collect();

    let diagnostics = IngestDiagnostics {
        kept: rows.len(),
        dropped,
    };
    Ok((
        Dataset {
            schema,
            rows,
            labels,
        },
        diagnostics,
    ))
}

/// One-hot expansion of a dataset. Numeric feature/protected columns pass
/// through unchanged; categorical ones expand to one indicator per category
/// (no category dropped). Matrix is row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EncodedDataset {
    pub feature_names: Vec<String>,
    pub n_rows: usize,
    pub n_features: usize,
    pub matrix: Vec<f64>,
    pub labels: Vec<u8>,
    /// Encoded row index -> original Dataset row index.
    pub row_origin: Vec<usize>,
}

impl EncodedDataset {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.matrix[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn value(&self, i: usize, f: usize) -> f64 {
        self.matrix[i * self.n_features + f]
    }

    pub fn column(&self, f: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.value(i, f)).collect()
    }

    /// Index of a named feature column.
    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    /// Row subset in the given order, with row_origin composed through.
    pub fn subset(&self, indices: &[usize]) -> EncodedDataset {
        let mut matrix = Vec::with_capacity(indices.len() * self.n_features);
        let mut labels = Vec::with_capacity(indices.len());
        let mut row_origin = Vec::with_capacity(indices.len());
        for &i in indices {
            matrix.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
            row_origin.push(self.row_origin[i]);
        }
        EncodedDataset {
            feature_names: self.feature_names.clone(),
            n_rows: indices.len(),
            n_features: self.n_features,
            matrix,
            labels,
            row_origin,
        }
    }
}

/// Encodes feature and protected columns; source-column order, vocabulary
/// (lexicographic) order within each categorical block.
pub fn encode(dataset: &Dataset) -> EncodedDataset {
    let mut feature_names = Vec::new();
    // (column index, None for numeric / Some(category list) for categorical)
    let mut layout: Vec<(usize, Option<Vec<String>>)> = Vec::new();
    for (ci, col) in dataset.schema.columns.iter().enumerate() {
        match col.role {
            ColumnRole::Feature | ColumnRole::Protected => match col.kind {
                ColumnKind::Numeric => {
                    feature_names.push(col.name.clone());
                    layout.push((ci, None));
                }
                ColumnKind::Categorical => {
                    let vocab: Vec<String> = dataset
                        .schema
                        .vocabulary(&col.name)
                        .unwrap_or(&[])
                        .to_vec();
                    for cat in &vocab {
                        feature_names.push(format!("{}={}", col.name, cat));
                    }
                    layout.push((ci, Some(vocab)));
                }
            },
            ColumnRole::Target | ColumnRole::Ignored => {}
        }
    }

    let n_features = feature_names.len();
    let n_rows = dataset.len();
    let mut matrix = vec![0.0; n_rows * n_features];
    for (ri, row) in dataset.rows.iter().enumerate() {
        let mut f = 0usize;
        for (ci, vocab) in &layout {
            match vocab {
                None => {
                    matrix[ri * n_features + f] = row[*ci].as_num().expect("numeric column");
                    f += 1;
                }
                Some(vocab) => {
                    if let Value::Cat(v) = &row[*ci] {
                        if let Ok(pos) = vocab.binary_search(v) {
                            matrix[ri * n_features + f + pos] = 1.0;
                        }
                    }
                    f += vocab.len();
                }
            }
        }
    }

    EncodedDataset {
        feature_names,
        n_rows,
        n_features,
        matrix,
        labels: dataset.labels.clone(),
        row_origin: (0..n_rows).collect(),
    }
}

#[derive(Debug, Clone)]
pub struct SplitResult {
    pub train: EncodedDataset,
    pub test: EncodedDataset,
    pub train_pairs: PairSet,
    pub test_pairs: PairSet,
    pub seed: u64,
}

/// Splits rows into train/test so that both members of every pair land in the
/// same partition. Rows linked through shared pairs form connected components
/// assigned whole: components go largest-first (seeded shuffle within equal
/// sizes) to whichever partition is proportionally furthest below its target.
pub fn pair_aware_split(
    encoded: &EncodedDataset,
    pairs: &PairSet,
    test_ratio: f64,
    seed: u64,
) -> Result<SplitResult> {
    if !(test_ratio > 0.0 && test_ratio < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test_ratio must be in (0,1), got {test_ratio}"
        )));
    }
    let n = encoded.n_rows;
    for p in &pairs.pairs {
        if p.i >= n || p.j >= n {
            return Err(Error::DanglingPairIndex { i: p.i, j: p.j, n });
        }
    }

    // union-find over rows
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for p in &pairs.pairs {
        let (a, b) = (find(&mut parent, p.i), find(&mut parent, p.j));
        if a != b {
            parent[a] = b;
        }
    }
    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        members.entry(root).or_default().push(i);
    }
    let mut components: Vec<Vec<usize>> = members.into_values().collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    components.shuffle(&mut rng);
    components.sort_by_key(|c| std::cmp::Reverse(c.len()));

    let target_test = (test_ratio * n as f64).round() as usize;
    let target_train = n - target_test;
    let largest = components.first().map(|c| c.len()).unwrap_or(0);
    let tolerance = (0.02 * n as f64).ceil() as usize;
    if largest > target_test.max(target_train) + tolerance {
        return Err(Error::ImpossibleSplit {
            ratio: test_ratio,
            component_size: largest,
        });
    }

    let mut in_test = vec![false; n];
    let (mut cur_test, mut cur_train) = (0usize, 0usize);
    for comp in &components {
        let test_fill = (cur_test + comp.len()) as f64 / (target_test.max(1)) as f64;
        let train_fill = (cur_train + comp.len()) as f64 / (target_train.max(1)) as f64;
        let to_test = test_fill <= train_fill;
        for &i in comp {
            in_test[i] = to_test;
        }
        if to_test {
            cur_test += comp.len();
        } else {
            cur_train += comp.len();
        }
    }

    if (cur_test as f64 / n as f64 - test_ratio).abs() > 0.02 {
        return Err(Error::ImpossibleSplit {
            ratio: test_ratio,
            component_size: largest,
        });
    }

    let train_rows: Vec<usize> = (0..n).filter(|&i| !in_test[i]).collect();
    let test_rows: Vec<usize> = (0..n).filter(|&i| in_test[i]).collect();
    let mut new_index = vec![usize::MAX; n];
    for (k, &i) in train_rows.iter().enumerate() {
        new_index[i] = k;
    }
    for (k, &i) in test_rows.iter().enumerate() {
        new_index[i] = k;
    }

    let mut train_pairs = Vec::new();
    let mut test_pairs = Vec::new();
    for p in &pairs.pairs {
        let remapped = ConsistencyPair {
            i: new_index[p.i],
            j: new_index[p.j],
            weight: p.weight,
        };
        if in_test[p.i] {
            test_pairs.push(remapped);
        } else {
            train_pairs.push(remapped);
        }
    }
    train_pairs.sort_by_key(|p| (p.i, p.j));
    test_pairs.sort_by_key(|p| (p.i, p.j));

    Ok(SplitResult {
        train: encoded.subset(&train_rows),
        test: encoded.subset(&test_rows),
        train_pairs: PairSet::new(train_pairs, pairs.provenance.clone()),
        test_pairs: PairSet::new(test_pairs, pairs.provenance.clone()),
        seed,
    })
}

/// Writes an encoded dataset as a columnar CSV (feature columns + label) for
/// inspection.
pub fn write_encoded_csv(encoded: &EncodedDataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: std::io::Error::new(std::io::ErrorKind::Other, e),
    })?;
    let mut header: Vec<String> = encoded.feature_names.clone();
    header.push("label".into());
    header.push("row_origin".into());
    let io_err = |path: &Path, e: csv::Error| Error::Io {
        path: path.display().to_string(),
        source: std::io::Error::new(std::io::ErrorKind::Other, e),
    };
    w.write_record(&header).map_err(|e| io_err(path, e))?;
    for i in 0..encoded.n_rows {
        let mut rec: Vec<String> = encoded.row(i).iter().map(|x| format!("{x}")).collect();
        rec.push(encoded.labels[i].to_string());
        rec.push(encoded.row_origin[i].to_string());
        w.write_record(&rec).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn simple_schema() -> FeatureSchema {
        FeatureSchema::new(
            vec![
                ColumnSpec {
                    name: "age".into(),
                    kind: ColumnKind::Numeric,
                    role: ColumnRole::Protected,
                },
                ColumnSpec {
                    name: "color".into(),
                    kind: ColumnKind::Categorical,
                    role: ColumnRole::Feature,
                },
                ColumnSpec {
                    name: "y".into(),
                    kind: ColumnKind::Categorical,
                    role: ColumnRole::Target,
                },
            ],
            "yes".into(),
        )
        .unwrap()
    }

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_and_drops_missing() {
        let f = write_tmp("age,color,y\n25,red,yes\n30,?,no\n41,blue,no\n");
        let (ds, diag) = load_csv(f.path(), &simple_schema()).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(diag.dropped, 1);
        assert_eq!(ds.labels, vec![1, 0]);
    }

    #[test]
    fn header_mismatch_is_an_error() {
        let f = write_tmp("age,colour,y\n25,red,yes\n");
        match load_csv(f.path(), &simple_schema()) {
            Err(Error::HeaderMismatch { .. }) => {}
            other => panic!("expected header mismatch, got {other:?}"),
        }
    }

    #[test]
    fn bad_numeric_reports_row() {
        let f = write_tmp("age,color,y\n25,red,yes\nabc,blue,no\n");
        match load_csv(f.path(), &simple_schema()) {
            Err(Error::BadNumeric { row, .. }) => assert_eq!(row, 2),
            other => panic!("expected bad numeric, got {other:?}"),
        }
    }

    #[test]
    fn zero_usable_rows_is_an_error() {
        let f = write_tmp("age,color,y\n?,red,yes\n");
        assert!(matches!(
            load_csv(f.path(), &simple_schema()),
            Err(Error::NoUsableRows { dropped: 1 })
        ));
    }

    #[test]
    fn one_hot_blocks_and_passthrough() {
        let f = write_tmp("age,color,y\n25,red,yes\n30,blue,no\n41,red,no\n");
        let (ds, _) = load_csv(f.path(), &simple_schema()).unwrap();
        let enc = encode(&ds);
        assert_eq!(enc.feature_names, vec!["age", "color=blue", "color=red"]);
        assert_eq!(enc.row(0), &[25.0, 0.0, 1.0]);
        assert_eq!(enc.row(1), &[30.0, 1.0, 0.0]);
        assert_eq!(enc.row(2), &[41.0, 0.0, 1.0]);
    }

    #[test]
    fn split_keeps_pairs_together() {
        // 10 rows, pairs {(0,1),(1,2)}: rows 0,1,2 form one component
        let rows = 10;
        let enc = EncodedDataset {
            feature_names: vec!["x".into()],
            n_rows: rows,
            n_features: 1,
            matrix: (0..rows).map(|i| i as f64).collect(),
            labels: vec![0; rows],
            row_origin: (0..rows).collect(),
        };
        let pairs = PairSet::new(
            vec![
                ConsistencyPair::unit(0, 1),
                ConsistencyPair::unit(1, 2),
            ],
            "test".into(),
        );
        for seed in 0..20 {
            let split = pair_aware_split(&enc, &pairs, 0.3, seed).unwrap();
            let origins = |d: &EncodedDataset| d.row_origin.clone();
            let train = origins(&split.train);
            let test = origins(&split.test);
            let together = [0, 1, 2]
                .iter()
                .all(|o| train.contains(o))
                || [0, 1, 2].iter().all(|o| test.contains(o));
            assert!(together, "component split apart at seed {seed}");
            assert_eq!(train.len() + test.len(), rows);
        }
    }

    #[test]
    fn split_is_deterministic() {
        let rows = 50;
        let enc = EncodedDataset {
            feature_names: vec!["x".into()],
            n_rows: rows,
            n_features: 1,
            matrix: (0..rows).map(|i| i as f64).collect(),
            labels: vec![0; rows],
            row_origin: (0..rows).collect(),
        };
        let pairs = PairSet::new(vec![ConsistencyPair::unit(3, 9)], "test".into());
        let a = pair_aware_split(&enc, &pairs, 0.2, 7).unwrap();
        let b = pair_aware_split(&enc, &pairs, 0.2, 7).unwrap();
        assert_eq!(a.train.row_origin, b.train.row_origin);
        assert_eq!(a.test.row_origin, b.test.row_origin);
        assert_eq!(a.train.matrix, b.train.matrix);
    }

    #[test]
    fn plain_split_ratio_within_tolerance() {
        let rows = 100;
        let enc = EncodedDataset {
            feature_names: vec!["x".into()],
            n_rows: rows,
            n_features: 1,
            matrix: (0..rows).map(|i| i as f64).collect(),
            labels: vec![0; rows],
            row_origin: (0..rows).collect(),
        };
        let pairs = PairSet::new(vec![], "test".into());
        let split = pair_aware_split(&enc, &pairs, 0.2, 1).unwrap();
        let t = split.test.n_rows as i64;
        assert!((t - 20).abs() <= 2, "test size {t}");
    }

    #[test]
    fn giant_component_errors() {
        let rows = 10;
        let enc = EncodedDataset {
            feature_names: vec!["x".into()],
            n_rows: rows,
            n_features: 1,
            matrix: (0..rows).map(|i| i as f64).collect(),
            labels: vec![0; rows],
            row_origin: (0..rows).collect(),
        };
        // chain all rows into one component
        let pairs = PairSet::new(
            (0..rows - 1).map(|i| ConsistencyPair::unit(i, i + 1)).collect(),
            "test".into(),
        );
        match pair_aware_split(&enc, &pairs, 0.5, 0) {
            Err(Error::ImpossibleSplit { component_size, .. }) => {
                assert_eq!(component_size, rows)
            }
            other => panic!("expected impossible split, got {other:?}"),
        }
    }
}
