use crate::pairs::MatchStats;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("header mismatch: expected columns {expected:?}, file has {found:?}")]
    HeaderMismatch {
        expected: Vec<String>,
        found: Vec<String>,
    },

    #[error("row {row}: cannot parse {column}={value:?} as a number")]
    BadNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("no usable rows ({dropped} rows dropped for missing values)")]
    NoUsableRows { dropped: usize },

    #[error("schema: {0}")]
    Schema(String),

    #[error("config: {0}")]
    Config(String),

    #[error("no pairs matched the spec; {stats}")]
    NoPairs { stats: MatchStats },

    #[error("pair ({i},{j}) references a row outside the {n}-row dataset")]
    DanglingPairIndex { i: usize, j: usize, n: usize },

    #[error("pair ({i},{i}) pairs a row with itself")]
    SelfPair { i: usize },

    #[error("pair ({i},{j}) has non-positive weight {weight}")]
    BadPairWeight { i: usize, j: usize, weight: f64 },

    #[error("subsample size {n} out of range 1..={m}")]
    SubsampleOutOfRange { n: usize, m: usize },

    #[error("empty pair set")]
    EmptyPairSet,

    #[error("{what} requires both protected groups to be non-empty")]
    EmptyGroup { what: &'static str },

    #[error("disparate impact undefined: privileged positive rate is zero")]
    ZeroPrivilegedRate,

    #[error("{what} undefined: group {group} has no ground-truth {needed} examples")]
    DegenerateGroup {
        what: &'static str,
        group: u8,
        needed: &'static str,
    },

    #[error("k={k} out of range for {n} rows (need 1 <= k < n)")]
    BadK { k: usize, n: usize },

    #[error("score gap {gap} exceeds delta_max {delta_max}")]
    GapExceedsDeltaMax { gap: f64, delta_max: f64 },

    #[error("dimension mismatch: model has {model} features, data has {data}")]
    DimensionMismatch { model: usize, data: usize },

    #[error("training diverged (non-finite loss) at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("fairness penalty requested (eta={eta}) but the pair set is empty")]
    PenaltyWithoutPairs { eta: f64 },

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("unknown feature {0:?}")]
    UnknownFeature(String),

    #[error(
        "cannot reach test ratio {ratio}: a connected pair component of {component_size} rows \
         exceeds both partitions"
    )]
    ImpossibleSplit { ratio: f64, component_size: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
