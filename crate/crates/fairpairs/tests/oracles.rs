//! Independent-oracle checks: finite-difference gradients, exhaustive split
//! enumeration, hand-computed metric fixtures, and trainer reductions.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use fairpairs::data::EncodedDataset;
use fairpairs::importance::Classifier;
use fairpairs::logreg::{gradient, loss, train_logreg, LogisticModel, TrainConfig};
use fairpairs::metrics::{GroupAssignment, Predictions, ReportConfig};
use fairpairs::pairs::{ConsistencyPair, PairSet};
use fairpairs::report::{evaluate, ModelKind};
use fairpairs::tree::{predict_tree, train_tree, DecisionTree, Node, TreeConfig};

fn dataset(matrix: Vec<Vec<f64>>, labels: Vec<u8>) -> EncodedDataset {
    let n_features = matrix[0].len();
    EncodedDataset {
        feature_names: (0..n_features).map(|i| format!("f{i}")).collect(),
        n_rows: matrix.len(),
        n_features,
        matrix: matrix.into_iter().flatten().collect(),
        labels,
        row_origin: vec![],
    }
}

#[test]
fn gradient_matches_central_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..100 {
        let n = rng.gen_range(4..10);
        let f = rng.gen_range(1..5);
        let matrix: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..f).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        let data = dataset(matrix, labels);
        let n_pairs = rng.gen_range(0..n / 2);
        let pairs = PairSet::new(
            (0..n_pairs)
                .map(|k| ConsistencyPair {
                    i: 2 * k,
                    j: 2 * k + 1,
                    weight: rng.gen_range(0.2..3.0),
                })
                .collect(),
            "oracle".into(),
        );
        // a third of cases exercise the pair penalty, a third add l2
        let eta = if case % 3 == 0 && !pairs.is_empty() {
            rng.gen_range(0.1..2.0)
        } else {
            0.0
        };
        let l2 = if case % 3 == 1 { rng.gen_range(0.0..0.1) } else { 0.0 };
        let cfg = TrainConfig {
            eta,
            l2,
            ..TrainConfig::default()
        };
        let model = LogisticModel {
            weights: (0..f).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            bias: rng.gen_range(-1.0..1.0),
            feature_names: data.feature_names.clone(),
        };
        let grad = gradient(&model, &data, &pairs, &cfg).unwrap();
        let h = 1e-6;
        for k in 0..=f {
            let mut plus = model.clone();
            let mut minus = model.clone();
            if k < f {
                plus.weights[k] += h;
                minus.weights[k] -= h;
            } else {
                plus.bias += h;
                minus.bias -= h;
            }
            let fd = (loss(&plus, &data, &pairs, &cfg) - loss(&minus, &data, &pairs, &cfg))
                / (2.0 * h);
            let denom = grad[k].abs().max(fd.abs()).max(1e-4);
            let rel = (grad[k] - fd).abs() / denom;
            assert!(
                rel <= 1e-5,
                "case {case} coord {k}: analytic {} vs fd {fd} (rel {rel})",
                grad[k]
            );
        }
    }
}

#[test]
fn eta_zero_reduction_is_bitwise_for_both_trainers() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let matrix: Vec<Vec<f64>> = (0..60)
        .map(|_| vec![rng.gen_range(-3.0..3.0), rng.gen_range(0.0..1.0)])
        .collect();
    let labels: Vec<u8> = matrix
        .iter()
        .map(|r| u8::from(r[0] + r[1] > 0.4))
        .collect();
    let data = dataset(matrix, labels);
    let pairs = PairSet::new(
        (0..10).map(|k| ConsistencyPair::unit(2 * k, 2 * k + 1)).collect(),
        "oracle".into(),
    );

    let lr_cfg = TrainConfig {
        eta: 0.0,
        epochs: 80,
        ..TrainConfig::default()
    };
    let (with_pairs, _) = train_logreg(&data, &pairs, &lr_cfg).unwrap();
    let (without, _) = train_logreg(&data, &PairSet::empty(), &lr_cfg).unwrap();
    assert_eq!(with_pairs.weights, without.weights);
    assert_eq!(with_pairs.bias.to_bits(), without.bias.to_bits());

    let tree_cfg = TreeConfig {
        eta: 0.0,
        max_depth: 4,
        min_leaf: 2,
        ..TreeConfig::default()
    };
    let a = train_tree(&data, &pairs, &tree_cfg).unwrap();
    let b = train_tree(&data, &PairSet::empty(), &tree_cfg).unwrap();
    // identical structure and leaves; split diagnostics (pairs at node,
    // intact fraction) legitimately differ, so compare the decision shape
    fn shape(nodes: &[Node]) -> Vec<(Option<(usize, u64, usize, usize)>, Option<[usize; 2]>)> {
        nodes
            .iter()
            .map(|n| match n {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => (Some((*feature, threshold.to_bits(), *left, *right)), None),
                Node::Leaf { counts, .. } => (None, Some(*counts)),
            })
            .collect()
    }
    assert_eq!(shape(&a.nodes), shape(&b.nodes));
}

/// Re-enumerates every legal (feature, threshold) candidate at each split node
/// and checks the recorded split is optimal under the documented tie-break
/// (first by combined score, then lower feature index, then lower threshold).
#[test]
fn tree_splits_are_per_node_optimal() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let matrix: Vec<Vec<f64>> = (0..150)
        .map(|_| {
            vec![
                rng.gen_range(0.0..10.0),
                f64::from(rng.gen_range(0..3)),
                f64::from(rng.gen_range(0..2)),
            ]
        })
        .collect();
    let labels: Vec<u8> = matrix
        .iter()
        .map(|r| u8::from(r[0] > 4.0 && r[1] < 2.0))
        .collect();
    let data = dataset(matrix, labels);
    let pairs = PairSet::new(
        (0..20)
            .map(|k| ConsistencyPair::unit(2 * k, 2 * k + 1))
            .collect(),
        "oracle".into(),
    );
    let cfg = TreeConfig {
        eta: 0.7,
        max_depth: 3,
        min_leaf: 5,
        ..TreeConfig::default()
    };
    let tree = train_tree(&data, &pairs, &cfg).unwrap();

    fn gini(pos: usize, n: usize) -> f64 {
        if n == 0 {
            return 0.0;
        }
        let p = pos as f64 / n as f64;
        2.0 * p * (1.0 - p)
    }

    // walk the tree re-deriving the rows and live pairs at each node
    fn check(
        tree: &DecisionTree,
        data: &EncodedDataset,
        cfg: &TreeConfig,
        node: usize,
        rows: Vec<usize>,
        pairs: Vec<(usize, usize)>,
    ) {
        let Node::Split {
            feature: got_f,
            threshold: got_t,
            left,
            right,
            score,
        } = &tree.nodes[node]
        else {
            return;
        };
        let n = rows.len();
        let pos: usize = rows.iter().map(|&i| data.labels[i] as usize).sum();
        let node_gini = gini(pos, n);
        let mut best: Option<(f64, usize, f64)> = None;
        for f in 0..data.n_features {
            let mut vals: Vec<f64> = rows.iter().map(|&i| data.value(i, f)).collect();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            vals.dedup();
            for w in vals.windows(2) {
                let t = (w[0] + w[1]) / 2.0;
                let left_rows: Vec<usize> = rows
                    .iter()
                    .copied()
                    .filter(|&i| data.value(i, f) < t)
                    .collect();
                let (nl, nr) = (left_rows.len(), n - left_rows.len());
                if nl < cfg.min_leaf || nr < cfg.min_leaf {
                    continue;
                }
                let pl: usize = left_rows.iter().map(|&i| data.labels[i] as usize).sum();
                let pr = pos - pl;
                let gain = node_gini
                    - (nl as f64 / n as f64) * gini(pl, nl)
                    - (nr as f64 / n as f64) * gini(pr, nr);
                let intact = if pairs.is_empty() {
                    1.0
                } else {
                    pairs
                        .iter()
                        .filter(|&&(i, j)| (data.value(i, f) < t) == (data.value(j, f) < t))
                        .count() as f64
                        / pairs.len() as f64
                };
                let combined = gain + cfg.eta * intact;
                if best.map_or(true, |(b, _, _)| combined > b) {
                    best = Some((combined, f, t));
                }
            }
        }
        let (want_c, want_f, want_t) = best.expect("split node must have a candidate");
        assert_eq!((*got_f, *got_t), (want_f, want_t), "node {node}");
        assert!((score.combined - want_c).abs() < 1e-12);

        let (lr, rr): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&i| data.value(i, *got_f) < *got_t);
        let mut lp = Vec::new();
        let mut rp = Vec::new();
        for &(i, j) in &pairs {
            let (a, b) = (data.value(i, *got_f) < *got_t, data.value(j, *got_f) < *got_t);
            if a && b {
                lp.push((i, j));
            } else if !a && !b {
                rp.push((i, j));
            }
        }
        check(tree, data, cfg, *left, lr, lp);
        check(tree, data, cfg, *right, rr, rp);
    }

    check(
        &tree,
        &data,
        &cfg,
        0,
        (0..data.n_rows).collect(),
        pairs.pairs.iter().map(|p| (p.i, p.j)).collect(),
    );
}

#[test]
fn tree_routing_matches_hand_walk() {
    let data = dataset(
        vec![
            vec![1.0, 10.0],
            vec![2.0, 20.0],
            vec![3.0, 10.0],
            vec![4.0, 20.0],
            vec![5.0, 10.0],
            vec![6.0, 20.0],
        ],
        vec![0, 0, 0, 1, 1, 1],
    );
    let cfg = TreeConfig {
        max_depth: 2,
        min_leaf: 1,
        ..TreeConfig::default()
    };
    let tree = train_tree(&data, &PairSet::empty(), &cfg).unwrap();
    // the best first split is f0 < 3.5 (perfect separation)
    let Node::Split {
        feature, threshold, ..
    } = &tree.nodes[0]
    else {
        panic!("expected a split at the root");
    };
    assert_eq!(*feature, 0);
    assert_eq!(*threshold, 3.5);
    let preds = predict_tree(&tree, &data).unwrap();
    assert_eq!(preds.labels_hat, vec![0, 0, 0, 1, 1, 1]);
}

/// At convergence, increasing eta cannot buy lower CE or higher pair loss.
#[test]
fn tradeoff_is_monotone_at_convergence() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let matrix: Vec<Vec<f64>> = (0..80)
        .map(|_| vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)])
        .collect();
    let labels: Vec<u8> = matrix
        .iter()
        .map(|r| u8::from(r[0] - 0.5 * r[1] + 0.2 > 0.0))
        .collect();
    let data = dataset(matrix, labels);
    let pairs = PairSet::new(
        (0..15).map(|k| ConsistencyPair::unit(2 * k, 2 * k + 1)).collect(),
        "oracle".into(),
    );
    let mut last_ce = f64::NEG_INFINITY;
    let mut last_pair = f64::INFINITY;
    for eta in [0.0, 0.3, 1.0, 3.0] {
        let cfg = TrainConfig {
            eta,
            epochs: 4000,
            l2: 0.0,
            ..TrainConfig::default()
        };
        let (_, trace) = train_logreg(&data, &pairs, &cfg).unwrap();
        let fin = trace.rows.last().unwrap();
        assert!(fin.ce_loss >= last_ce - 1e-6, "CE decreased at eta={eta}");
        assert!(
            fin.pair_loss <= last_pair + 1e-6,
            "pair loss increased at eta={eta}"
        );
        last_ce = fin.ce_loss;
        last_pair = fin.pair_loss;
    }
}

/// Every report field on a small fixture against values computed by hand.
#[test]
fn report_matches_hand_computation() {
    struct Fixed(Vec<u8>);
    impl Classifier for Fixed {
        fn predict(&self, _: &EncodedDataset) -> fairpairs::Result<Predictions> {
            Ok(Predictions {
                scores: self.0.iter().map(|&l| l as f64).collect(),
                labels_hat: self.0.clone(),
                threshold: 0.5,
            })
        }
        fn kind(&self) -> &'static str {
            "fixed"
        }
    }

    // 10 rows; groups: first 5 unprivileged (d=0), last 5 privileged (d=1)
    let truth = vec![1, 1, 0, 0, 0, 1, 1, 1, 0, 0];
    let yhat = vec![1, 0, 0, 0, 1, 1, 1, 1, 1, 0];
    let data = dataset((0..10).map(|i| vec![i as f64]).collect(), truth.clone());
    let groups = GroupAssignment {
        d: vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1],
    };
    // pairs (0,5) agree (1,1); (1,6) disagree (0,1); (2,7) disagree (0,1)
    let pairs = PairSet::new(
        vec![
            ConsistencyPair::unit(0, 5),
            ConsistencyPair::unit(1, 6),
            ConsistencyPair::unit(2, 7),
        ],
        "hand".into(),
    );
    let model = Fixed(yhat.clone());
    let report = evaluate(&model, &data, &pairs, &groups, &ReportConfig::default()).unwrap();

    // paired consistency: 1 of 3 pairs agree
    assert!((report.paired_consistency - 1.0 / 3.0).abs() < 1e-15);
    // regression variant: squared gaps 0,1,1 -> 1 - 2/3
    assert!((report.paired_consistency_reg - (1.0 - 2.0 / 3.0)).abs() < 1e-15);
    // accuracy: predictions 1,0,0,0,1,1,1,1,1,0 vs truth -> 7/10 correct
    assert_eq!(report.accuracy, 0.7);
    // tp=4 (rows 0,5,6,7), fp=2 (rows 4,8) -> precision 4/6; fn=1 (row 1)
    assert_eq!(report.precision, Some(4.0 / 6.0));
    assert_eq!(report.recall, Some(4.0 / 5.0));
    // prc = 3 / (1/p + 1/r + 1/c) = 3 / (1.5 + 1.25 + 3)
    let want_prc = 3.0 / (1.5 + 1.25 + 3.0);
    assert!((report.prc - want_prc).abs() < 1e-15);
    // positive rates: unprivileged 2/5, privileged 4/5
    assert!((report.statistical_parity_difference.unwrap() - (-0.4)).abs() < 1e-15);
    assert!((report.disparate_impact.unwrap() - 0.5).abs() < 1e-15);
    // TPR: d=0 -> 1/2, d=1 -> 3/3; FPR: d=0 -> 1/3, d=1 -> 1/2
    let want_aod = 0.5 * ((1.0 / 3.0 - 0.5) + (0.5 - 1.0));
    assert!((report.average_odds_difference.unwrap() - want_aod).abs() < 1e-15);
    assert!((report.equal_opportunity_difference.unwrap() - (-0.5)).abs() < 1e-15);
    // prejudice index from the 2x2 joint: p(1,0)=.2 p(1,1)=.4 p(0,0)=.3 p(0,1)=.1
    let terms: [(f64, f64, f64); 4] = [
        (0.3, 0.4, 0.5),
        (0.1, 0.4, 0.5),
        (0.2, 0.6, 0.5),
        (0.4, 0.6, 0.5),
    ];
    let want_pi: f64 = terms
        .iter()
        .map(|(p, py, pd)| p * (p / (py * pd)).ln())
        .sum();
    assert!((report.prejudice_index.unwrap() - want_pi).abs() < 1e-12);
    assert!(report.knn_consistency.is_some());
}

#[test]
fn model_kind_parses() {
    assert_eq!("logreg".parse::<ModelKind>().unwrap(), ModelKind::Logreg);
    assert_eq!("tree".parse::<ModelKind>().unwrap(), ModelKind::Tree);
    assert!("forest".parse::<ModelKind>().is_err());
}
