mod common;

use boostforest::boosttree::{
    find_best_split, fit_node_model, grow, grow_on_rows, BoostTree, NodeKind, NodeParams, ParameterPool, TreeConfig,
    TreeNode,
};
use boostforest::data::{Dataset, Task};
use boostforest::linalg::Matrix;
use boostforest::losses::grad_hess;
use boostforest::node_models::NodeModel;
use common::{loss_oracle, rng};

fn step_binary(n: usize) -> (Matrix, Vec<f64>) {
    let x = Matrix::new(n, 1, (0..n).map(|i| i as f64 / n as f64).collect()).unwrap();
    let y = (0..n).map(|i| if i >= n / 2 { 1.0 } else { 0.0 }).collect();
    (x, y)
}

fn narrow_pool() -> ParameterPool {
    ParameterPool {
        min_samples_leaf: vec![5],
        lambda: vec![0.0001],
        ..ParameterPool::default()
    }
}

/// Gain written out from the sums of `g = p − y` and `h = p(1 − p)`.
fn oracle_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64) -> f64 {
    let (g, h) = (gl + gr, hl + hr);
    0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - g * g / (h + 0.0001))
}

#[test]
fn best_split_matches_exhaustive_scan() {
    let (x, y) = step_binary(40);
    let rows: Vec<usize> = (0..40).collect();
    let gh = grad_hess(Task::Binary, &y, &[0.0; 40]).unwrap();
    let cand = find_best_split(&x, &rows, &gh, &narrow_pool(), NodeKind::Ridge, true, &mut rng(1)).unwrap();

    let mut best = (f64::NEG_INFINITY, 0.0);
    for cut in 5..=35 {
        let s = x.get(cut - 1, 0);
        let (mut gl, mut hl, mut gr, mut hr) = (0.0, 0.0, 0.0, 0.0);
        for (i, yi) in y.iter().enumerate() {
            let g = 0.5 - yi;
            if x.get(i, 0) <= s {
                gl += g;
                hl += 0.25;
            } else {
                gr += g;
                hr += 0.25;
            }
        }
        let gain = oracle_gain(gl, hl, gr, hr, 0.0001);
        if gain > best.0 {
            best = (gain, s);
        }
    }
    assert_eq!(cand.threshold, best.1);
    assert_eq!(cand.threshold, x.get(19, 0));
    assert!((cand.gain - best.0).abs() < 1e-10, "{} vs {}", cand.gain, best.0);
    assert_eq!((cand.n_left, cand.n_right), (20, 20));
}

#[test]
fn binary_node_slope_follows_the_labels() {
    let (x, y) = step_binary(40);
    let rows: Vec<usize> = (0..40).collect();
    let m = fit_node_model(
        Task::Binary,
        NodeKind::Ridge,
        &x,
        &rows,
        &y,
        &[0.0; 40],
        NodeParams::ridge(0.01),
        true,
        &mut rng(0),
    )
    .unwrap();
    match m {
        NodeModel::Linear(l) => assert!(l.weights[0] > 0.0),
        other => panic!("unexpected model {other:?}"),
    }
}

#[test]
fn multiclass_node_outputs_sum_to_zero() {
    let ds = common::three_sectors(90, &mut rng(4));
    let rows: Vec<usize> = (0..90).collect();
    let m = fit_node_model(
        ds.task(),
        NodeKind::Ridge,
        ds.features(),
        &rows,
        ds.labels(),
        &vec![0.0; 270],
        NodeParams::ridge(0.01),
        true,
        &mut rng(0),
    )
    .unwrap();
    let NodeModel::PerClass(ms) = &m else {
        panic!("expected per-class model")
    };
    assert_eq!(ms.len(), 3);
    for i in 0..90 {
        let mut out = [0.0; 3];
        m.add_output(ds.features().row(i), &mut out);
        assert!(out.iter().sum::<f64>().abs() < 1e-10);
    }
}

#[test]
fn step_regression_with_two_leaves_splits_at_the_step() {
    let n = 60;
    let x = Matrix::new(n, 1, (0..n).map(|i| i as f64 / n as f64).collect()).unwrap();
    let y: Vec<f64> = (0..n).map(|i| if i >= 30 { 1.0 } else { -1.0 }).collect();
    let ds = Dataset::new(x, y, Task::Regression).unwrap();
    let mut config = TreeConfig::new(NodeKind::Ridge);
    config.max_num_leaf = Some(2);
    let tree = grow(&ds, &narrow_pool(), &config, &mut rng(2)).unwrap();
    assert_eq!(tree.num_leaf, 2);
    let split = tree.root.split.as_ref().unwrap();
    assert_eq!(split.threshold, 29.0 / 60.0);
    for i in 0..n {
        let p = tree.predict(ds.features().row(i)).unwrap()[0];
        assert!((p - ds.labels()[i]).abs() < 0.01, "sample {i}: {p}");
    }
}

/// Independent path walk summing every node model from root to leaf.
fn walk(node: &TreeNode, x: &[f64], out: &mut [f64]) -> usize {
    node.model.add_output(x, out);
    match &node.split {
        None => 0,
        Some(s) => {
            let side = usize::from(x[s.feature] > s.threshold);
            1 + walk(&s.children[side], x, out)
        }
    }
}

fn leaf_counts(node: &TreeNode, x: &Matrix, rows: &[usize], out: &mut Vec<usize>) {
    match &node.split {
        None => out.push(rows.len()),
        Some(s) => {
            let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x.get(i, s.feature) <= s.threshold);
            leaf_counts(&s.children[0], x, &l, out);
            leaf_counts(&s.children[1], x, &r, out);
        }
    }
}

fn datasets() -> Vec<(Dataset, NodeKind)> {
    vec![
        (common::friedman(200, 1.0, &mut rng(10)), NodeKind::Ridge),
        (common::friedman(200, 1.0, &mut rng(11)), NodeKind::Elm),
        (common::friedman(200, 1.0, &mut rng(12)), NodeKind::Svr),
        (common::binary_blobs(200, 4, &mut rng(13)), NodeKind::Ridge),
        (common::three_sectors(200, &mut rng(14)), NodeKind::Ridge),
    ]
}

#[test]
fn prediction_matches_path_walk_and_tracked_outputs() {
    for (ds, kind) in datasets() {
        let pool = ParameterPool::for_kind(kind);
        let rows: Vec<usize> = (0..ds.n_samples()).collect();
        let (tree, trace) = grow_on_rows(
            ds.features(),
            ds.labels(),
            ds.task(),
            &rows,
            &pool,
            &TreeConfig::new(kind),
            &mut rng(3),
        )
        .unwrap();
        let k = ds.task().n_outputs();
        assert!(tree.num_leaf > 1, "{kind:?} grew no splits");
        for i in 0..ds.n_samples() {
            let x = ds.features().row(i);
            let mut walked = vec![0.0; k];
            walk(&tree.root, x, &mut walked);
            let pred = tree.predict(x).unwrap();
            for c in 0..k {
                assert_eq!(pred[c], walked[c]);
                assert!((pred[c] - trace.training_outputs[i * k + c]).abs() < 1e-9);
            }
        }
        let final_loss: f64 = (0..ds.n_samples())
            .map(|i| loss_oracle(ds.task(), ds.labels()[i], &trace.training_outputs[i * k..(i + 1) * k]))
            .sum();
        let recorded = *trace.loss_history.last().unwrap();
        assert!((final_loss - recorded).abs() <= 1e-9 * recorded.max(1.0));
    }
}

#[test]
fn regression_objective_never_increases() {
    for kind in [NodeKind::Ridge, NodeKind::Elm] {
        for seed in 0..5 {
            let ds = common::friedman(150, 2.0, &mut rng(100 + seed));
            let rows: Vec<usize> = (0..150).collect();
            let (_, trace) = grow_on_rows(
                ds.features(),
                ds.labels(),
                ds.task(),
                &rows,
                &ParameterPool::for_kind(kind),
                &TreeConfig::new(kind),
                &mut rng(seed),
            )
            .unwrap();
            let objective: Vec<f64> = trace
                .loss_history
                .iter()
                .zip(&trace.penalty_history)
                .map(|(l, p)| l + p)
                .collect();
            for w in objective.windows(2) {
                assert!(w[1] <= w[0] + 1e-9, "{kind:?}: {} -> {}", w[0], w[1]);
            }
            assert!(trace.accepted_gains.iter().all(|&g| g > 0.0));
        }
    }
}

#[test]
fn leaves_respect_minimum_size() {
    for (ds, kind) in datasets() {
        let pool = ParameterPool {
            min_samples_leaf: vec![8, 12],
            ..ParameterPool::for_kind(kind)
        };
        let tree = grow(&ds, &pool, &TreeConfig::new(kind), &mut rng(5)).unwrap();
        let mut counts = Vec::new();
        let rows: Vec<usize> = (0..ds.n_samples()).collect();
        leaf_counts(&tree.root, ds.features(), &rows, &mut counts);
        assert_eq!(counts.len(), tree.num_leaf);
        assert!(counts.iter().all(|&c| c >= 8), "{counts:?}");
    }
}

#[test]
fn growth_is_deterministic_and_bounded() {
    for (ds, kind) in datasets() {
        let pool = ParameterPool::for_kind(kind);
        for limit in [1, 2, 3, 7] {
            let mut config = TreeConfig::new(kind);
            config.max_num_leaf = Some(limit);
            let a: BoostTree = grow(&ds, &pool, &config, &mut rng(9)).unwrap();
            let b = grow(&ds, &pool, &config, &mut rng(9)).unwrap();
            assert_eq!(a, b);
            assert!(a.num_leaf <= limit);
            assert_eq!(a.root.count_leaves(), a.num_leaf);
        }
    }
}

#[test]
fn bootstrap_rows_with_repeats_are_tracked_per_position() {
    let ds = common::friedman(80, 1.0, &mut rng(21));
    let rows: Vec<usize> = (0..80).map(|i| (i * 7) % 40).collect();
    let (tree, trace) = grow_on_rows(
        ds.features(),
        ds.labels(),
        ds.task(),
        &rows,
        &ParameterPool::default(),
        &TreeConfig::new(NodeKind::Ridge),
        &mut rng(1),
    )
    .unwrap();
    for (p, &r) in rows.iter().enumerate() {
        let pred = tree.predict(ds.features().row(r)).unwrap()[0];
        assert!((pred - trace.training_outputs[p]).abs() < 1e-9);
    }
}
