//! Paired-consistency fairness toolkit.
//!
//! The library covers the full pipeline for training classifiers under a
//! consistency-pair fairness constraint:
//!
//! - [`data`]: CSV ingestion against a declared schema, one-hot encoding,
//!   and pair-preserving train/test splits.
//! - [`pairs`]: mining consistency pairs (rows that agree on everything but
//!   the protected attribute), plus loading, subsampling, and writing them.
//! - [`logreg`]: logistic regression with the pair penalty embedded in the
//!   gradient-descent loss.
//! - [`tree`]: a CART decision tree whose split criterion rewards keeping
//!   pairs intact.
//! - [`metrics`]: paired consistency, PRC, and the standard group-fairness
//!   metric suite.
//! - [`importance`]: permutation feature importance for any trained model.
//! - [`report`]: evaluation reports, eta and pair-count sweeps, and CSV/JSON
//!   artifact writers.
//!
//! Everything is deterministic given explicit seeds and runs single-threaded.

pub mod config;
pub mod data;
pub mod error;
pub mod importance;
pub mod logreg;
pub mod metrics;
pub mod pairs;
pub mod report;
pub mod tree;

pub use error::{Error, Result};
