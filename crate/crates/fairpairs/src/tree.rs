//! CART-style binary decision tree with a pair-aware split criterion.
//!
//! At each node the split maximizes `GiniGain + eta * intact_fraction`, where
//! the intact fraction is the share of consistency pairs arriving at the node
//! whose two members route to the same child. A pair whose members reach
//! different nodes is broken and never counted again further down.

use serde::{Deserialize, Serialize};

use crate::data::EncodedDataset;
use crate::error::{Error, Result};
use crate::metrics::Predictions;
use crate::pairs::PairSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitScore {
    pub gini_gain: f64,
    /// Intact pairs / pairs at the node; 1 when no pairs reach the node.
    pub intact_fraction: f64,
    pub combined: f64,
    pub pairs_at_node: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        score: SplitScore,
    },
    Leaf {
        /// (negative, positive) training counts.
        counts: [usize; 2],
        label: u8,
        prob: f64,
    },
}

/// Preorder node list; node 0 is the root.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
    pub feature_names: Vec<String>,
    pub max_depth: usize,
    pub min_leaf: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeConfig {
    pub eta: f64,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub seed: u64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            eta: 0.0,
            max_depth: 5,
            min_leaf: 5,
            seed: 0,
        }
    }
}

/// Midpoints between consecutive distinct sorted values; empty when constant.
pub fn candidate_thresholds(values: &[f64]) -> Vec<f64> {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sorted.dedup();
    sorted.windows(2).map(|w| (w[0] + w[1]) / 2.0).collect()
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

struct Grower<'a> {
    data: &'a EncodedDataset,
    cfg: &'a TreeConfig,
    nodes: Vec<Node>,
}

impl<'a> Grower<'a> {
    /// Best (combined, feature, threshold, score) over all legal candidates,
    /// ties broken by lower feature index then lower threshold.
    fn best_split(&self, rows: &[usize], pairs: &[(usize, usize)]) -> Option<(usize, f64, SplitScore)> {
        let n = rows.len();
        let pos: usize = rows.iter().map(|&i| self.data.labels[i] as usize).sum();
        let node_gini = gini(pos, n);
        let mut best: Option<(usize, f64, SplitScore)> = None;

        for feature in 0..self.data.n_features {
            let values: Vec<f64> = rows.iter().map(|&i| self.data.value(i, feature)).collect();
            let thresholds = candidate_thresholds(&values);
            if thresholds.is_empty() {
                continue;
            }
            // sort rows once per feature for prefix-sum counting
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
            let sorted_vals: Vec<f64> = order.iter().map(|&k| values[k]).collect();
            let prefix_pos: Vec<usize> = {
                let mut acc = 0usize;
                order
                    .iter()
                    .map(|&k| {
                        acc += self.data.labels[rows[k]] as usize;
                        acc
                    })
                    .collect()
            };
            for &threshold in &thresholds {
                let left_count = sorted_vals.partition_point(|&v| v < threshold);
                let right_count = n - left_count;
                if left_count < self.cfg.min_leaf || right_count < self.cfg.min_leaf {
                    continue;
                }
                let left_pos = if left_count > 0 { prefix_pos[left_count - 1] } else { 0 };
                let right_pos = pos - left_pos;
                let gain = node_gini
                    - (left_count as f64 / n as f64) * gini(left_pos, left_count)
                    - (right_count as f64 / n as f64) * gini(right_pos, right_count);
                let intact_fraction = if pairs.is_empty() {
                    1.0
                } else {
                    let intact = pairs
                        .iter()
                        .filter(|&&(i, j)| {
                            (self.data.value(i, feature) < threshold)
                                == (self.data.value(j, feature) < threshold)
                        })
                        .count();
                    intact as f64 / pairs.len() as f64
                };
                let combined = gain + self.cfg.eta * intact_fraction;
                let better = match &best {
                    None => true,
                    Some((_, _, s)) => combined > s.combined,
                };
                if better {
                    best = Some((
                        feature,
                        threshold,
                        SplitScore {
                            gini_gain: gain,
                            intact_fraction,
                            combined,
                            pairs_at_node: pairs.len(),
                        },
                    ));
                }
            }
        }
        best
    }

    fn grow(&mut self, rows: Vec<usize>, pairs: Vec<(usize, usize)>, depth: usize) -> usize {
        let id = self.nodes.len();
        let n = rows.len();
        let pos: usize = rows.iter().map(|&i| self.data.labels[i] as usize).sum();
        let leaf = |pos: usize, n: usize| Node::Leaf {
            counts: [n - pos, pos],
            label: u8::from(pos * 2 >= n), // tie goes to the positive class
            prob: pos as f64 / n as f64,
        };
        self.nodes.push(leaf(pos, n));
        if depth >= self.cfg.max_depth || pos == 0 || pos == n {
            return id;
        }
        let Some((feature, threshold, score)) = self.best_split(&rows, &pairs) else {
            return id;
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&i| self.data.value(i, feature) < threshold);
        let mut left_pairs = Vec::new();
        let mut right_pairs = Vec::new();
        for &(i, j) in &pairs {
            let li = self.data.value(i, feature) < threshold;
            let lj = self.data.value(j, feature) < threshold;
            if li == lj {
                if li {
                    left_pairs.push((i, j));
                } else {
                    right_pairs.push((i, j));
                }
            }
            // broken pairs drop out here and never reappear below
        }
        let left = self.grow(left_rows, left_pairs, depth + 1);
        let right = self.grow(right_rows, right_pairs, depth + 1);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
            score,
        };
        id
    }
}

/// Greedy recursive growth under the combined criterion.
pub fn train_tree(
    train: &EncodedDataset,
    pairs: &PairSet,
    cfg: &TreeConfig,
) -> Result<DecisionTree> {
    if train.n_rows == 0 {
        return Err(Error::EmptyTrainingSet);
    }
    pairs.validate(train.n_rows)?;
    let mut grower = Grower {
        data: train,
        cfg,
        nodes: Vec::new(),
    };
    let root_pairs: Vec<(usize, usize)> = pairs.pairs.iter().map(|p| (p.i, p.j)).collect();
    grower.grow((0..train.n_rows).collect(), root_pairs, 0);
    Ok(DecisionTree {
        nodes: grower.nodes,
        feature_names: train.feature_names.clone(),
        max_depth: cfg.max_depth,
        min_leaf: cfg.min_leaf,
    })
}

/// Routes rows to leaves; score is the leaf positive fraction, label the
/// majority class (ties to 1).
pub fn predict_tree(tree: &DecisionTree, data: &EncodedDataset) -> Result<Predictions> {
    if tree.feature_names.len() != data.n_features {
        return Err(Error::DimensionMismatch {
            model: tree.feature_names.len(),
            data: data.n_features,
        });
    }
    let mut scores = Vec::with_capacity(data.n_rows);
    let mut labels_hat = Vec::with_capacity(data.n_rows);
    for i in 0..data.n_rows {
        let mut node = 0usize;
        loop {
            match &tree.nodes[node] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    node = if data.value(i, *feature) < *threshold {
                        *left
                    } else {
                        *right
                    };
                }
                Node::Leaf { label, prob, .. } => {
                    scores.push(*prob);
                    labels_hat.push(*label);
                    break;
                }
            }
        }
    }
    Ok(Predictions {
        scores,
        labels_hat,
        threshold: 0.5,
    })
}

/// Leaf node index each row lands in.
pub fn leaf_assignments(tree: &DecisionTree, data: &EncodedDataset) -> Result<Vec<usize>> {
    if tree.feature_names.len() != data.n_features {
        return Err(Error::DimensionMismatch {
            model: tree.feature_names.len(),
            data: data.n_features,
        });
    }
    let mut leaves = Vec::with_capacity(data.n_rows);
    for i in 0..data.n_rows {
        let mut node = 0usize;
        while let Node::Split {
            feature,
            threshold,
            left,
            right,
            ..
        } = &tree.nodes[node]
        {
            node = if data.value(i, *feature) < *threshold {
                *left
            } else {
                *right
            };
        }
        leaves.push(node);
    }
    Ok(leaves)
}

/// Plain-text rendering for interpretability.
pub fn render(tree: &DecisionTree) -> String {
    fn walk(tree: &DecisionTree, node: usize, indent: usize, out: &mut String) {
        let pad = "  ".repeat(indent);
        match &tree.nodes[node] {
            Node::Split {
                feature,
                threshold,
                left,
                right,
                score,
            } => {
                out.push_str(&format!(
                    "{pad}{} < {:.4}  (gain={:.5}, intact={:.3}, pairs={})\n",
                    tree.feature_names[*feature],
                    threshold,
                    score.gini_gain,
                    score.intact_fraction,
                    score.pairs_at_node
                ));
                walk(tree, *left, indent + 1, out);
                out.push_str(&format!("{pad}else\n"));
                walk(tree, *right, indent + 1, out);
            }
            Node::Leaf {
                counts,
                label,
                prob,
            } => {
                out.push_str(&format!(
                    "{pad}leaf: label={label} p={prob:.4} (neg={}, pos={})\n",
                    counts[0], counts[1]
                ));
            }
        }
    }
    let mut out = String::new();
    walk(tree, 0, 0, &mut out);
    out
}
