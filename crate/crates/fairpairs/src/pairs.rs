//! Consistency-pair mining and pair-set plumbing.
//!
//! Mining is the surrogate fair expert: it pairs rows that differ on the
//! protected column by at least `min_gap` while matching on everything else.
//! Blocking on the exact-match categorical key keeps it near-linear.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{ColumnKind, ColumnRole, Dataset, FeatureSchema, Value};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyPair {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

impl ConsistencyPair {
    pub fn unit(i: usize, j: usize) -> Self {
        ConsistencyPair { i, j, weight: 1.0 }
    }
}

/// The consistency set: M pairs, optionally weighted.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairSet {
    pub pairs: Vec<ConsistencyPair>,
    pub provenance: String,
}

impl PairSet {
    pub fn new(pairs: Vec<ConsistencyPair>, provenance: String) -> Self {
        PairSet { pairs, provenance }
    }

    pub fn empty() -> Self {
        PairSet {
            pairs: Vec::new(),
            provenance: "empty".into(),
        }
    }

    /// M, the pair count.
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn validate(&self, n_rows: usize) -> Result<()> {
        for p in &self.pairs {
            if p.i == p.j {
                return Err(Error::SelfPair { i: p.i });
            }
            if p.i >= n_rows || p.j >= n_rows {
                return Err(Error::DanglingPairIndex {
                    i: p.i,
                    j: p.j,
                    n: n_rows,
                });
            }
            if !(p.weight > 0.0) {
                return Err(Error::BadPairWeight {
                    i: p.i,
                    j: p.j,
                    weight: p.weight,
                });
            }
        }
        Ok(())
    }
}

/// Declarative matching predicate for pair mining.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatchSpec {
    pub protected_column: String,
    /// Minimum absolute gap on the (numeric) protected column.
    pub min_gap: f64,
    pub exact_match_columns: Vec<String>,
    /// Absolute tolerance per numeric column; columns not listed default to 0.
    pub numeric_tolerance: BTreeMap<String, f64>,
    pub ignore_columns: Vec<String>,
    pub disjoint: bool,
    pub max_pairs: Option<usize>,
    pub seed: u64,
}

impl MatchSpec {
    pub fn validate(&self, schema: &FeatureSchema) -> Result<()> {
        if self
            .exact_match_columns
            .contains(&self.protected_column)
        {
            return Err(Error::Config(format!(
                "protected column {:?} cannot be an exact-match column",
                self.protected_column
            )));
        }
        if !self
            .ignore_columns
            .iter()
            .any(|c| c == schema.target_column())
        {
            return Err(Error::Config(format!(
                "target column {:?} must be in ignore_columns",
                schema.target_column()
            )));
        }
        let all_named = std::iter::once(&self.protected_column)
            .chain(self.exact_match_columns.iter())
            .chain(self.numeric_tolerance.keys())
            .chain(self.ignore_columns.iter());
        for name in all_named {
            if schema.column_index(name).is_none() {
                return Err(Error::Config(format!("unknown column {name:?} in match spec")));
            }
        }
        Ok(())
    }
}

/// Per-constraint counters, reported so an empty result can be diagnosed.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct MatchStats {
    pub rows: usize,
    pub blocks: usize,
    /// Row pairs sharing an exact-match block.
    pub same_block: usize,
    pub failed_gap: usize,
    pub failed_tolerance: usize,
    /// Pairs satisfying the full predicate before disjoint filtering / capping.
    pub candidates: usize,
    pub kept: usize,
}

impl std::fmt::Display for MatchStats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "rows={} blocks={} same_block={} failed_gap={} failed_tolerance={} candidates={} kept={}",
            self.rows, self.blocks, self.same_block, self.failed_gap, self.failed_tolerance,
            self.candidates, self.kept
        )
    }
}

fn protected_gap_ok(a: &Value, b: &Value, min_gap: f64) -> bool {
    match (a, b) {
        (Value::Num(x), Value::Num(y)) => (x - y).abs() >= min_gap,
        // categorical protected: the pair must differ
        (Value::Cat(x), Value::Cat(y)) => x != y,
        _ => false,
    }
}

/// Mines the consistency set. Every returned pair satisfies the full match
/// predicate; in disjoint mode each row appears in at most one pair (greedy in
/// seeded-shuffled candidate order). Output is canonicalized: i < j, sorted.
pub fn mine_pairs(dataset: &Dataset, spec: &MatchSpec) -> Result<(PairSet, MatchStats)> {
    spec.validate(&dataset.schema)?;
    if spec.min_gap <= 0.0 {
        let prot = dataset
            .schema
            .column(&spec.protected_column)
            .expect("validated");
        if prot.kind == ColumnKind::Numeric {
            return Err(Error::InvalidArgument(
                "min_gap must be > 0 for a numeric protected column".into(),
            ));
        }
    }

    let schema = &dataset.schema;
    let prot_idx = schema.column_index(&spec.protected_column).expect("validated");
    let exact_idx: Vec<usize> = spec
        .exact_match_columns
        .iter()
        .map(|c| schema.column_index(c).expect("validated"))
        .collect();

    // residual constrained columns: everything not protected, not exact-match,
    // not ignored, not target/ignored-role
    let mut residual: Vec<(usize, f64)> = Vec::new();
    for (ci, col) in schema.columns.iter().enumerate() {
        if ci == prot_idx
            || exact_idx.contains(&ci)
            || spec.ignore_columns.iter().any(|c| c == &col.name)
            || matches!(col.role, ColumnRole::Target | ColumnRole::Ignored)
        {
            continue;
        }
        let tol = spec.numeric_tolerance.get(&col.name).copied().unwrap_or(0.0);
        residual.push((ci, tol));
    }

    let mut stats = MatchStats {
        rows: dataset.len(),
        ..Default::default()
    };

    // block on the concatenated exact-match key
    let mut blocks: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (ri, row) in dataset.rows.iter().enumerate() {
        let mut key = String::new();
        for &ci in &exact_idx {
            match &row[ci] {
                Value::Cat(v) => key.push_str(v),
                Value::Num(x) => key.push_str(&x.to_bits().to_string()),
            }
            key.push('\u{1f}');
        }
        blocks.entry(key).or_default().push(ri);
    }
    stats.blocks = blocks.len();

    let mut candidates: Vec<(usize, usize)> = Vec::new();
    for idxs in blocks.values() {
        for (a, &i) in idxs.iter().enumerate() {
            for &j in &idxs[a + 1..] {
                stats.same_block += 1;
                let (ri, rj) = (&dataset.rows[i], &dataset.rows[j]);
                if !protected_gap_ok(&ri[prot_idx], &rj[prot_idx], spec.min_gap) {
                    stats.failed_gap += 1;
                    continue;
                }
                let mut ok = true;
                for &(ci, tol) in &residual {
                    let close = match (&ri[ci], &rj[ci]) {
                        (Value::Num(x), Value::Num(y)) => (x - y).abs() <= tol,
                        (Value::Cat(x), Value::Cat(y)) => x == y,
                        _ => false,
                    };
                    if !close {
                        ok = false;
                        break;
                    }
                }
                if !ok {
                    stats.failed_tolerance += 1;
                    continue;
                }
                candidates.push((i.min(j), i.max(j)));
            }
        }
    }
    candidates.sort_unstable();
    stats.candidates = candidates.len();

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut selected: Vec<(usize, usize)> = if spec.disjoint {
        let mut order = candidates.clone();
        order.shuffle(&mut rng);
        let mut used = vec![false; dataset.len()];
        let mut picked = Vec::new();
        for (i, j) in order {
            if !used[i] && !used[j] {
                used[i] = true;
                used[j] = true;
                picked.push((i, j));
            }
        }
        picked
    } else {
        candidates
    };

    if let Some(cap) = spec.max_pairs {
        if selected.len() > cap {
            selected.sort_unstable();
            selected.shuffle(&mut rng);
            selected.truncate(cap);
        }
    }
    selected.sort_unstable();
    stats.kept = selected.len();

    if selected.is_empty() {
        return Err(Error::NoPairs { stats });
    }

    let pairs = selected
        .into_iter()
        .map(|(i, j)| ConsistencyPair::unit(i, j))
        .collect();
    Ok((
        PairSet::new(pairs, format!("mined: {spec:?}")),
        stats,
    ))
}

/// Loads an external pair file: CSV `i,j[,weight]`, optional header, 0-based
/// row indices into the ingested dataset. Missing weights default to 1.
pub fn load_pairs(path: &Path, n_rows: usize) -> Result<PairSet> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut pairs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if lineno == 0 && fields[0].parse::<usize>().is_err() {
            continue; // header
        }
        if fields.len() < 2 || fields.len() > 3 {
            return Err(Error::Config(format!(
                "{}: line {}: expected `i,j[,weight]`",
                path.display(),
                lineno + 1
            )));
        }
        let parse_idx = |s: &str| -> Result<usize> {
            s.parse().map_err(|_| {
                Error::Config(format!(
                    "{}: line {}: bad row index {s:?}",
                    path.display(),
                    lineno + 1
                ))
            })
        };
        let i = parse_idx(fields[0])?;
        let j = parse_idx(fields[1])?;
        let weight = match fields.get(2) {
            Some(w) => w.parse().map_err(|_| {
                Error::Config(format!(
                    "{}: line {}: bad weight {w:?}",
                    path.display(),
                    lineno + 1
                ))
            })?,
            None => 1.0,
        };
        pairs.push(ConsistencyPair { i, j, weight });
    }
    if pairs.is_empty() {
        return Err(Error::EmptyPairSet);
    }
    let set = PairSet::new(pairs, "external file".into());
    set.validate(n_rows)?;
    Ok(set)
}

/// Uniform seeded subsample without replacement, re-canonicalized.
pub fn subsample_pairs(pairs: &PairSet, n: usize, seed: u64) -> Result<PairSet> {
    let m = pairs.len();
    if n < 1 || n > m {
        return Err(Error::SubsampleOutOfRange { n, m });
    }
    let mut indices: Vec<usize> = (0..m).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    indices.truncate(n);
    indices.sort_unstable();
    let sampled = indices.into_iter().map(|k| pairs.pairs[k]).collect();
    Ok(PairSet::new(sampled, pairs.provenance.clone()))
}

/// Writes a pair file in the external CSV format.
pub fn write_pairs(pairs: &PairSet, path: &Path) -> Result<()> {
    let mut out = String::from("i,j,weight\n");
    for p in &pairs.pairs {
        out.push_str(&format!("{},{},{}\n", p.i, p.j, p.weight));
    }
    std::fs::write(path, out).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}
