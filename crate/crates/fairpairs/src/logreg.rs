//! Logistic regression trained by full-batch gradient descent with the
//! paired-consistency penalty.
//!
//! Loss: L(w,b) = CE + eta * (1/M) * sum_j w_j * (sigma(x1_j) - sigma(x2_j))^2
//!              + l2 * ||w||^2
//!
//! where CE is mean binary cross-entropy and the penalty acts on the sigmoid
//! outputs (the model's predicted scores). Training is deterministic:
//! zero-initialized weights, fixed iteration order, full batches. Steps are
//! scaled per-coordinate by a fixed diagonal preconditioner (the feature
//! second moments, computed once from the training matrix) so the unscaled
//! age column does not dictate the global step size; the model itself stays
//! in raw feature space.

use serde::{Deserialize, Serialize};

use crate::data::EncodedDataset;
use crate::error::{Error, Result};
use crate::pairs::PairSet;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub feature_names: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Fairness trade-off multiplier on the pair penalty.
    pub eta: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub l2: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            eta: 0.0,
            learning_rate: 0.5,
            epochs: 500,
            seed: 0,
            l2: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TraceRow {
    pub ce_loss: f64,
    pub pair_loss: f64,
    pub total: f64,
}

/// Per-epoch loss components, recorded at the start of each epoch.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainingTrace {
    pub rows: Vec<TraceRow>,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// sigma(w . x + b) per row.
pub fn predict_proba(model: &LogisticModel, data: &EncodedDataset) -> Result<Vec<f64>> {
    if model.weights.len() != data.n_features {
        return Err(Error::DimensionMismatch {
            model: model.weights.len(),
            data: data.n_features,
        });
    }
    Ok((0..data.n_rows)
        .map(|i| {
            let z: f64 = data
                .row(i)
                .iter()
                .zip(model.weights.iter())
                .map(|(x, w)| x * w)
                .sum::<f64>()
                + model.bias;
            sigmoid(z)
        })
        .collect())
}

/// Loss components and the full analytic gradient at the current iterate.
/// Gradient layout: F weight coordinates then the bias.
struct Evaluation {
    ce_loss: f64,
    pair_loss: f64,
    grad: Vec<f64>,
}

fn evaluate_loss(
    model: &LogisticModel,
    data: &EncodedDataset,
    pairs: &PairSet,
    cfg: &TrainConfig,
) -> Evaluation {
    let n = data.n_rows;
    let f = data.n_features;
    let probs = predict_proba(model, data).expect("dimensions checked by caller");

    let mut grad = vec![0.0; f + 1];
    let mut ce = 0.0;
    for i in 0..n {
        let (p, y) = (probs[i], data.labels[i] as f64);
        let eps = 1e-12;
        ce -= y * (p.max(eps)).ln() + (1.0 - y) * ((1.0 - p).max(eps)).ln();
        let r = (p - y) / n as f64;
        for (g, x) in grad[..f].iter_mut().zip(data.row(i)) {
            *g += r * x;
        }
        grad[f] += r;
    }
    ce /= n as f64;

    let mut pair_loss = 0.0;
    if !pairs.is_empty() {
        let m = pairs.len() as f64;
        for pr in &pairs.pairs {
            let (p1, p2) = (probs[pr.i], probs[pr.j]);
            let gap = p1 - p2;
            pair_loss += pr.weight * gap * gap;
            if cfg.eta > 0.0 {
                let c1 = cfg.eta * pr.weight * 2.0 / m * gap * p1 * (1.0 - p1);
                let c2 = cfg.eta * pr.weight * 2.0 / m * gap * p2 * (1.0 - p2);
                for (k, (x1, x2)) in data.row(pr.i).iter().zip(data.row(pr.j)).enumerate() {
                    grad[k] += c1 * x1 - c2 * x2;
                }
                grad[f] += c1 - c2;
            }
        }
        pair_loss /= m;
    }

    if cfg.l2 > 0.0 {
        for (g, w) in grad[..f].iter_mut().zip(model.weights.iter()) {
            *g += 2.0 * cfg.l2 * w;
        }
    }

    Evaluation {
        ce_loss: ce,
        pair_loss,
        grad,
    }
}

/// Exact analytic gradient of the full loss (CE + eta-weighted pair penalty
/// + l2), F weight coordinates followed by the bias coordinate.
pub fn gradient(
    model: &LogisticModel,
    data: &EncodedDataset,
    pairs: &PairSet,
    cfg: &TrainConfig,
) -> Result<Vec<f64>> {
    if model.weights.len() != data.n_features {
        return Err(Error::DimensionMismatch {
            model: model.weights.len(),
            data: data.n_features,
        });
    }
    Ok(evaluate_loss(model, data, pairs, cfg).grad)
}

/// Total loss at the current iterate (for finite-difference checks).
pub fn loss(
    model: &LogisticModel,
    data: &EncodedDataset,
    pairs: &PairSet,
    cfg: &TrainConfig,
) -> f64 {
    let ev = evaluate_loss(model, data, pairs, cfg);
    let l2: f64 = model.weights.iter().map(|w| w * w).sum::<f64>() * cfg.l2;
    ev.ce_loss + cfg.eta * ev.pair_loss + l2
}

/// Trains by full-batch preconditioned gradient descent from zero weights.
pub fn train_logreg(
    train: &EncodedDataset,
    pairs: &PairSet,
    cfg: &TrainConfig,
) -> Result<(LogisticModel, TrainingTrace)> {
    if train.n_rows == 0 {
        return Err(Error::EmptyTrainingSet);
    }
    if cfg.eta > 0.0 && pairs.is_empty() {
        return Err(Error::PenaltyWithoutPairs { eta: cfg.eta });
    }
    pairs.validate(train.n_rows)?;

    let f = train.n_features;
    // fixed diagonal preconditioner: per-feature second moment
    let mut precond = vec![0.0; f];
    for i in 0..train.n_rows {
        for (s, x) in precond.iter_mut().zip(train.row(i)) {
            *s += x * x;
        }
    }
    for s in precond.iter_mut() {
        *s = (*s / train.n_rows as f64).max(1e-8);
    }

    let mut model = LogisticModel {
        weights: vec![0.0; f],
        bias: 0.0,
        feature_names: train.feature_names.clone(),
    };
    let mut trace = TrainingTrace::default();

    for epoch in 0..cfg.epochs {
        let ev = evaluate_loss(&model, train, pairs, cfg);
        let l2_term: f64 = model.weights.iter().map(|w| w * w).sum::<f64>() * cfg.l2;
        let total = ev.ce_loss + cfg.eta * ev.pair_loss + l2_term;
        if !total.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        trace.rows.push(TraceRow {
            ce_loss: ev.ce_loss,
            pair_loss: ev.pair_loss,
            total,
        });
        for k in 0..f {
            model.weights[k] -= cfg.learning_rate * ev.grad[k] / precond[k];
        }
        model.bias -= cfg.learning_rate * ev.grad[f];
    }

    Ok((model, trace))
}
