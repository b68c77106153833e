mod common;

use boostforest::data::{apply_preprocess, bootstrap_indices, fit_preprocess, Dataset, Task};
use boostforest::eval::{make_cv_plan, rank_algorithms};
use boostforest::linalg::Matrix;
use boostforest::losses::{
    center_multiclass, percentile, sigmoid, softmax, working_set_binary, working_set_multiclass, Y_MAX,
};
use boostforest::node_models::LinearModel;
use proptest::prelude::*;

proptest! {
    #[test]
    fn softmax_is_a_distribution(logits in prop::collection::vec(-500.0f64..500.0, 3..8)) {
        let p = softmax(&logits);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
        let shifted: Vec<f64> = logits.iter().map(|v| v + 123.0).collect();
        for (a, b) in p.iter().zip(softmax(&shifted)) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn sigmoid_is_bounded_and_symmetric(v in -800.0f64..800.0) {
        let s = sigmoid(v);
        prop_assert!((0.0..=1.0).contains(&s) && s.is_finite());
        prop_assert!((s + sigmoid(-v) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn binary_working_set_is_clipped_and_filtered(
        data in prop::collection::vec((-40.0f64..40.0, prop::bool::ANY), 1..80),
        filter in prop::bool::ANY,
    ) {
        let outputs: Vec<f64> = data.iter().map(|d| d.0).collect();
        let labels: Vec<f64> = data.iter().map(|d| f64::from(u8::from(d.1))).collect();
        let ws = working_set_binary(&labels, &outputs, filter);
        prop_assert!(!ws.is_empty());
        prop_assert!(ws.z.iter().all(|z| z.abs() <= Y_MAX));
        prop_assert!(ws.weights.iter().all(|&w| w > 0.0 && w <= 0.25));
        prop_assert!(ws.indices.windows(2).all(|w| w[0] < w[1]));
        let all_w: Vec<f64> = outputs.iter().map(|&f| { let p = sigmoid(f); (p * (1.0 - p)).max(2.0 * f64::EPSILON) }).collect();
        if filter {
            let q = percentile(&all_w, 0.05);
            let strictly_above = all_w.iter().filter(|&&w| w > q).count();
            if strictly_above > 0 {
                prop_assert_eq!(ws.len(), strictly_above);
                prop_assert!(ws.weights.iter().all(|&w| w > q));
            } else {
                prop_assert_eq!(ws.len(), outputs.len());
            }
        } else {
            prop_assert_eq!(ws.len(), outputs.len());
        }
    }

    #[test]
    fn distinct_weights_drop_about_five_percent(n in 40usize..200) {
        // Distinct logits give distinct weights, so only the bottom 5% go.
        let outputs: Vec<f64> = (0..n).map(|i| i as f64 * 0.05).collect();
        let labels = vec![1.0; n];
        let ws = working_set_binary(&labels, &outputs, true);
        let dropped = n - ws.len();
        let expect = (0.05 * (n - 1) as f64).floor() as usize + 1;
        prop_assert!(dropped <= expect && dropped + 1 >= expect, "n {} dropped {}", n, dropped);
    }

    #[test]
    fn multiclass_working_sets_have_one_per_class(
        rows in prop::collection::vec((prop::collection::vec(-10.0f64..10.0, 4), 0usize..4), 1..50),
    ) {
        let outputs: Vec<f64> = rows.iter().flat_map(|r| r.0.clone()).collect();
        let labels: Vec<f64> = rows.iter().map(|r| r.1 as f64).collect();
        let sets = working_set_multiclass(&labels, &outputs, 4, true);
        prop_assert_eq!(sets.len(), 4);
        for ws in &sets {
            prop_assert!(!ws.is_empty());
            prop_assert!(ws.z.iter().all(|z| z.abs() <= Y_MAX));
        }
    }

    #[test]
    fn centering_sums_to_zero_and_scales(
        ms in prop::collection::vec((prop::collection::vec(-5.0f64..5.0, 3), -5.0f64..5.0), 3..7),
        x in prop::collection::vec(-2.0f64..2.0, 3),
    ) {
        let models: Vec<LinearModel> = ms.iter().map(|(w, b)| LinearModel { weights: w.clone(), intercept: *b }).collect();
        let centered = center_multiclass(&models).unwrap();
        let j = models.len() as f64;
        let raw: Vec<f64> = models.iter().map(|m| m.eval(&x)).collect();
        let mean = raw.iter().sum::<f64>() / j;
        let out: Vec<f64> = centered.iter().map(|m| m.eval(&x)).collect();
        prop_assert!(out.iter().sum::<f64>().abs() < 1e-9);
        for (o, r) in out.iter().zip(&raw) {
            prop_assert!((o - (j - 1.0) / j * (r - mean)).abs() < 1e-9);
        }
    }

    #[test]
    fn cv_plan_partitions_every_repeat(n in 4usize..120, folds in 2usize..5, repeats in 1usize..4, seed in any::<u64>()) {
        prop_assume!(n >= folds);
        let plan = make_cv_plan(n, repeats, folds, seed, None).unwrap();
        for r in 0..repeats {
            let mut seen = vec![0usize; n];
            for f in 0..folds {
                let (train, test) = plan.split(r, f);
                prop_assert_eq!(train.len() + test.len(), n);
                for &i in &test { seen[i] += 1; }
                prop_assert!(train.iter().all(|i| !test.contains(i)));
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
            let sizes = plan.fold_sizes(r);
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }
    }

    #[test]
    fn stratified_folds_balance_classes(labels in prop::collection::vec(0usize..3, 12..90), seed in any::<u64>()) {
        let plan = make_cv_plan(labels.len(), 2, 2, seed, Some(&labels)).unwrap();
        for r in 0..2 {
            let (_, test) = plan.split(r, 0);
            for c in 0..3 {
                let total = labels.iter().filter(|&&l| l == c).count() as isize;
                let in_test = test.iter().filter(|&&i| labels[i] == c).count() as isize;
                prop_assert!((2 * in_test - total).abs() <= 1);
            }
        }
    }

    #[test]
    fn ranks_sum_to_triangular_number(scores in prop::collection::vec(0.0f64..1.0, 1..9), higher in prop::bool::ANY) {
        let k = scores.len() as f64;
        let ranks = rank_algorithms(&scores, higher);
        prop_assert!((ranks.iter().sum::<f64>() - k * (k + 1.0) / 2.0).abs() < 1e-9);
        prop_assert!(ranks.iter().all(|&r| r >= 1.0 && r <= k));
    }

    #[test]
    fn label_scaling_round_trips(y in prop::collection::vec(-1e4f64..1e4, 2..60)) {
        prop_assume!(y.iter().any(|&v| v != y[0]));
        let n = y.len();
        let ds = Dataset::new(Matrix::zeros(n, 1), y.clone(), Task::Regression).unwrap();
        let state = fit_preprocess(&ds).unwrap();
        let z: Vec<f64> = y.iter().map(|&v| state.scale_label(v)).collect();
        let mean = z.iter().sum::<f64>() / n as f64;
        let var = z.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        prop_assert!(mean.abs() < 1e-9);
        prop_assert!((var - 1.0).abs() < 1e-9);
        for (a, b) in y.iter().zip(&z) {
            prop_assert!((state.unscale_label(*b) - a).abs() <= 1e-9 * a.abs().max(1.0));
        }
    }

    #[test]
    fn one_hot_rows_have_a_single_one(codes in prop::collection::vec(0usize..4, 2..40), other in prop::collection::vec(-3.0f64..3.0, 40)) {
        prop_assume!(codes.iter().any(|&c| c != codes[0]));
        let n = codes.len();
        let mut data = Vec::with_capacity(n * 2);
        for i in 0..n {
            data.push(other[i]);
            data.push(codes[i] as f64);
        }
        let levels: Vec<String> = (0..4).map(|i| format!("L{i}")).collect();
        let ds = Dataset::new(Matrix::new(n, 2, data).unwrap(), vec![0.0; n], Task::Binary)
            .unwrap()
            .with_categories(vec![None, Some(levels)])
            .unwrap();
        let state = fit_preprocess(&ds).unwrap();
        let ranges = state.one_hot_ranges();
        prop_assert_eq!(ranges.len(), 1);
        let (col, range) = ranges[0].clone();
        prop_assert_eq!(col, 1);
        let processed = apply_preprocess(&state, &ds).unwrap();
        for i in 0..n {
            let row = processed.features().row(i);
            let hot = &row[range.clone()];
            prop_assert_eq!(hot.iter().filter(|&&v| v == 1.0).count(), 1);
            prop_assert_eq!(hot.iter().sum::<f64>(), 1.0);
            prop_assert!((0.0..=1.0).contains(&row[0]));
        }
    }

    #[test]
    fn bootstrap_draws_n_indices_in_range(n in 1usize..500, seed in any::<u64>()) {
        let idx = bootstrap_indices(n, &mut common::rng(seed));
        prop_assert_eq!(idx.len(), n);
        prop_assert!(idx.iter().all(|&i| i < n));
    }

    #[test]
    fn percentile_is_between_extremes(v in prop::collection::vec(-1e3f64..1e3, 1..50), q in 0.0f64..=1.0) {
        let p = percentile(&v, q);
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(p >= lo && p <= hi);
    }
}

#[test]
fn percentile_matches_linear_interpolation() {
    assert_eq!(percentile(&[4.0, 1.0, 3.0, 2.0], 0.5), 2.5);
    assert!((percentile(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.05) - 1.2).abs() < 1e-12);
}
