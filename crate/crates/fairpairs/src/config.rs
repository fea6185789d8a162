//! Declarative `key = value` config files.
//!
//! One directive per line, `#` starts a comment, keys may repeat where the
//! directive is naturally a list (e.g. `column`). The same format describes
//! feature schemas, match specs, and experiment run configs:
//!
//! ```text
//! # adult.schema
//! column = age numeric protected
//! column = workclass categorical feature
//! column = income categorical target
//! target_positive = >50K
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use crate::data::{ColumnKind, ColumnRole, ColumnSpec, FeatureSchema};
use crate::error::{Error, Result};
use crate::pairs::MatchSpec;

/// An ordered list of `(key, value)` directives.
#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    entries: Vec<(String, String)>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            entries.push((key.trim().to_string(), value.trim().to_string()));
        }
        Ok(ConfigFile { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn get_all(&self, key: &str) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .collect()
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }
}

/// Parses a schema config: repeated `column = <name> <kind> <role>` directives
/// plus `target_positive = <raw value>`.
pub fn parse_schema(cfg: &ConfigFile) -> Result<FeatureSchema> {
    let mut columns = Vec::new();
    for spec in cfg.get_all("column") {
        let parts: Vec<&str> = spec.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(Error::Config(format!(
                "column directive {spec:?}: expected `<name> <kind> <role>`"
            )));
        }
        let kind = match parts[1] {
            "categorical" => ColumnKind::Categorical,
            "numeric" => ColumnKind::Numeric,
            other => return Err(Error::Config(format!("unknown column kind {other:?}"))),
        };
        let role = match parts[2] {
            "feature" => ColumnRole::Feature,
            "protected" => ColumnRole::Protected,
            "target" => ColumnRole::Target,
            "ignored" => ColumnRole::Ignored,
            other => return Err(Error::Config(format!("unknown column role {other:?}"))),
        };
        columns.push(ColumnSpec {
            name: parts[0].to_string(),
            kind,
            role,
        });
    }
    let target_positive = cfg
        .get("target_positive")
        .ok_or_else(|| Error::Config("missing `target_positive`".into()))?
        .to_string();
    FeatureSchema::new(columns, target_positive)
}

/// Parses a match spec config against a schema (column names are validated).
pub fn parse_match_spec(cfg: &ConfigFile, schema: &FeatureSchema) -> Result<MatchSpec> {
    let protected_column = cfg
        .get("protected")
        .ok_or_else(|| Error::Config("missing `protected`".into()))?
        .to_string();
    let min_gap: f64 = match cfg.get("min_gap") {
        Some(v) => v
            .parse()
            .map_err(|_| Error::Config(format!("min_gap: not a number: {v:?}")))?,
        None => 0.0,
    };
    let exact_match_columns: Vec<String> = cfg
        .get_all("exact_match")
        .iter()
        .flat_map(|v| v.split_whitespace())
        .map(str::to_string)
        .collect();
    let mut ignore_columns: Vec<String> = cfg
        .get_all("ignore")
        .iter()
        .flat_map(|v| v.split_whitespace())
        .map(str::to_string)
        .collect();
    // the target is never a matching constraint
    let target = schema.target_column().to_string();
    if !ignore_columns.contains(&target) {
        ignore_columns.push(target);
    }
    let mut numeric_tolerance = BTreeMap::new();
    for tol in cfg.get_all("tolerance") {
        let parts: Vec<&str> = tol.split_whitespace().collect();
        if parts.len() != 2 {
            return Err(Error::Config(format!(
                "tolerance directive {tol:?}: expected `<column> <abs tolerance>`"
            )));
        }
        let v: f64 = parts[1]
            .parse()
            .map_err(|_| Error::Config(format!("tolerance: not a number: {:?}", parts[1])))?;
        numeric_tolerance.insert(parts[0].to_string(), v);
    }
    let disjoint = match cfg.get("disjoint") {
        Some("true") | None => true,
        Some("false") => false,
        Some(other) => {
            return Err(Error::Config(format!(
                "disjoint: expected true/false, got {other:?}"
            )))
        }
    };
    let max_pairs = match cfg.get("max_pairs") {
        Some(v) => Some(
            v.parse()
                .map_err(|_| Error::Config(format!("max_pairs: not an integer: {v:?}")))?,
        ),
        None => None,
    };
    let seed: u64 = match cfg.get("seed") {
        Some(v) => v
            .parse()
            .map_err(|_| Error::Config(format!("seed: not an integer: {v:?}")))?,
        None => 0,
    };
    let spec = MatchSpec {
        protected_column,
        min_gap,
        exact_match_columns,
        numeric_tolerance,
        ignore_columns,
        disjoint,
        max_pairs,
        seed,
    };
    spec.validate(schema)?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_entries_and_comments() {
        let cfg = ConfigFile::parse("a = 1\n# comment\nb = two words # trailing\n").unwrap();
        assert_eq!(cfg.get("a"), Some("1"));
        assert_eq!(cfg.get("b"), Some("two words"));
        assert_eq!(cfg.get("c"), None);
    }

    #[test]
    fn repeated_keys_keep_order_and_last_wins_for_get() {
        let cfg = ConfigFile::parse("k = 1\nk = 2\n").unwrap();
        assert_eq!(cfg.get_all("k"), vec!["1", "2"]);
        assert_eq!(cfg.get("k"), Some("2"));
    }

    #[test]
    fn rejects_missing_equals() {
        assert!(ConfigFile::parse("just some words\n").is_err());
    }
}
