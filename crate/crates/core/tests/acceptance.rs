//! Release gate. Each test pins one end-to-end guarantee of the classifier
//! and prints a `criterion N: pass` line on success, so
//! `cargo test --test acceptance -- --nocapture` reads as a checklist.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xem_core::gbt::best_split;
use xem_core::*;

/// The reference fit: ten cascade trees of depth one.
fn reference_params(win_pct: f64) -> XEMParams {
    XEMParams::new(win_pct, LCEParams { n_trees: 10, max_depth: 1, ..LCEParams::default() })
}

fn correct_count(explanations: &[Explanation], data: &MTSDataset) -> usize {
    explanations
        .iter()
        .zip(&data.series)
        .filter(|(e, s)| e.predicted_class == s.label.unwrap())
        .count()
}

#[test]
fn criterion_01_square_dataset_is_classified_and_explained() {
    let started = Instant::now();
    let data = generate_synthetic(&SyntheticConfig::new(10, 100, 60, 20, 1, None, 1)).unwrap();
    let (train, test) = split_train_test(&data).unwrap();
    let model = fit_xem(&train, &reference_params(20.0), 1).unwrap();
    let explanations = model.predict(&test).unwrap();

    assert_eq!(correct_count(&explanations, &test), test.series.len());
    for (e, s) in explanations.iter().zip(&test.series) {
        if s.label == Some(1) {
            assert!(
                e.window_start < 80 && e.window_end > 60,
                "series {}: explanation [{}, {}) does not overlap the square [60, 80)",
                s.id,
                e.window_start,
                e.window_end
            );
            assert!(
                e.confidence >= 0.99,
                "series {}: confidence {} below 0.99",
                s.id,
                e.confidence
            );
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(60), "took {elapsed:?}, budget 60 s");
    println!(
        "criterion 1 (square dataset: 100% accuracy, explanations on the square, \
         confidence >= 0.99, {elapsed:.1?}): pass"
    );
}

#[test]
fn criterion_02_two_sample_window_still_localizes_the_square() {
    let started = Instant::now();
    let data = generate_synthetic(&SyntheticConfig::new(10, 100, 60, 20, 1, None, 1)).unwrap();
    let (train, test) = split_train_test(&data).unwrap();
    let model = fit_xem(&train, &reference_params(2.0), 1).unwrap();
    assert_eq!(model.w, 2);
    let explanations = model.predict(&test).unwrap();

    assert_eq!(correct_count(&explanations, &test), test.series.len());
    for (e, s) in explanations.iter().zip(&test.series) {
        if s.label == Some(1) {
            assert!(
                e.window_start >= 59 && e.window_end <= 81,
                "series {}: explanation [{}, {}) outside the square's neighborhood [59, 81)",
                s.id,
                e.window_start,
                e.window_end
            );
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(60), "took {elapsed:?}, budget 60 s");
    println!(
        "criterion 2 (window of two samples: 100% accuracy, explanations inside [59, 81), \
         {elapsed:.1?}): pass"
    );
}

#[test]
fn criterion_03_two_squares_are_separable_only_by_the_wide_window() {
    // Both classes carry identical-looking squares; only the co-occurrence of
    // the two (63 samples apart) is discriminative, and only a window of 80
    // can contain it.
    let data = generate_synthetic(&SyntheticConfig::new(10, 100, 9, 12, 2, Some(72), 11)).unwrap();
    let (train, test) = split_train_test(&data).unwrap();
    let lce = LCEParams {
        n_trees: 10,
        max_depth: 0,
        gbt: GBTParams { max_depth: 2, ..GBTParams::default() },
    };

    let mut report = Vec::new();
    for win_pct in [20.0, 40.0, 60.0, 80.0] {
        let params = XEMParams::new(win_pct, lce.clone());
        let model = fit_xem(&train, &params, 42).unwrap();
        let explanations = model.predict(&test).unwrap();
        report.push((win_pct, correct_count(&explanations, &test)));
    }

    let (_, at_80) = report[3];
    assert_eq!(at_80, test.series.len(), "win_pct 80 must classify every series: {report:?}");
    for &(win_pct, correct) in &report[..3] {
        assert!(
            correct as f64 / test.series.len() as f64 <= 0.6,
            "win_pct {win_pct} reached {correct}/{}; narrow windows must stay at chance",
            test.series.len()
        );
    }
    println!("criterion 3 (two squares need win_pct 80; accuracies {report:?}): pass");
}

#[test]
fn criterion_04_window_count_law_holds_on_random_datasets() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..200 {
        let n_series = rng.random_range(1..=5);
        let n_dims = rng.random_range(1..=3);
        let mut series = Vec::new();
        let mut t_max = 1usize;
        for id in 0..n_series {
            let t = rng.random_range(1..=30);
            t_max = t_max.max(t);
            let values = (0..n_dims)
                .map(|_| (0..t).map(|_| rng.random::<f64>()).collect())
                .collect();
            series.push(Series { id: id as i64, values, label: Some(id % 2) });
        }
        let data =
            MTSDataset::new(series, vec!["a".to_string(), "b".to_string()], n_dims).unwrap();

        let w = rng.random_range(1..=2 * t_max);
        let table = transform_windows(&data, w).unwrap();
        let expected: usize = data
            .series
            .iter()
            .map(|s| if s.len() >= w { s.len() - w + 1 } else { 1 })
            .sum();
        assert_eq!(table.table.n_rows(), expected);
        assert_eq!(table.table.n_cols(), n_dims * w);
    }
    println!("criterion 4 (window count = sum of max(1, T - w + 1) on 200 random datasets): pass");
}

// ----- criterion 5: brute-force split oracles -----

fn oracle_best_split(
    table: &Matrix,
    grads: &[f64],
    hess: &[f64],
    params: &GBTParams,
) -> Option<SplitDecision> {
    let n = table.n_rows();
    if n < 2 {
        return None;
    }
    let score = |g: f64, h: f64| {
        let denom = h + params.lambda;
        if denom <= 0.0 {
            0.0
        } else {
            g * g / denom
        }
    };

    let mut best: Option<SplitDecision> = None;
    for feature in 0..table.n_cols() {
        let column = table.column(feature);
        let mut present: Vec<f64> = column.iter().copied().filter(|v| !is_missing(*v)).collect();
        if present.is_empty() {
            continue;
        }
        let n_miss = n - present.len();
        present.sort_by(|a, b| a.partial_cmp(b).unwrap());
        present.dedup();

        let mut candidates: Vec<f64> = present.windows(2).map(|p| (p[0] + p[1]) / 2.0).collect();
        if n_miss > 0 {
            candidates.push(present.last().unwrap() + 1.0);
        }

        for threshold in candidates {
            for missing in [Direction::Left, Direction::Right] {
                let (mut g_l, mut h_l, mut n_l) = (0.0, 0.0, 0usize);
                let (mut g_r, mut h_r, mut n_r) = (0.0, 0.0, 0usize);
                for i in 0..n {
                    let v = column[i];
                    let goes_left =
                        if is_missing(v) { missing == Direction::Left } else { v < threshold };
                    if goes_left {
                        g_l += grads[i];
                        h_l += hess[i];
                        n_l += 1;
                    } else {
                        g_r += grads[i];
                        h_r += hess[i];
                        n_r += 1;
                    }
                }
                if n_l == 0 || n_r == 0 {
                    continue;
                }
                if h_l < params.min_child_weight || h_r < params.min_child_weight {
                    continue;
                }
                let gain =
                    0.5 * (score(g_l, h_l) + score(g_r, h_r) - score(g_l + g_r, h_l + h_r));
                if !gain.is_finite() {
                    continue;
                }
                let better = match &best {
                    None => true,
                    Some(b) => gain > b.gain,
                };
                if better {
                    best = Some(SplitDecision { feature, threshold, gain, missing });
                }
            }
        }
    }
    best.filter(|b| b.gain > params.gamma)
}

fn oracle_gini_split(table: &Matrix, labels: &[usize], n_classes: usize) -> Option<GiniDecision> {
    let n = table.n_rows();
    if n < 2 {
        return None;
    }
    let gini = |counts: &[usize], m: usize| {
        if m == 0 {
            return 0.0;
        }
        let mut sum_sq = 0.0;
        for &c in counts {
            let p = c as f64 / m as f64;
            sum_sq += p * p;
        }
        1.0 - sum_sq
    };
    let mut parent_counts = vec![0usize; n_classes];
    for &l in labels {
        parent_counts[l] += 1;
    }
    let parent = gini(&parent_counts, n);

    let mut best: Option<GiniDecision> = None;
    for feature in 0..table.n_cols() {
        let column = table.column(feature);
        let present: Vec<f64> = column.iter().copied().filter(|v| !is_missing(*v)).collect();
        if present.len() < 2 {
            continue;
        }
        let mut distinct = present.clone();
        distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
        distinct.dedup();

        for pair in distinct.windows(2) {
            let threshold = (pair[0] + pair[1]) / 2.0;
            let split_counts = |miss_left: bool| {
                let mut left = vec![0usize; n_classes];
                let mut right = vec![0usize; n_classes];
                for i in 0..n {
                    let v = column[i];
                    let goes_left = if is_missing(v) { miss_left } else { v < threshold };
                    if goes_left {
                        left[labels[i]] += 1;
                    } else {
                        right[labels[i]] += 1;
                    }
                }
                let majority =
                    left.iter().max().copied().unwrap() + right.iter().max().copied().unwrap();
                (left, right, majority)
            };

            // Missing rows move as one block to the side where the two
            // children's combined majority-class accuracy is higher
            // (ties keep them left).
            let with_left = split_counts(true);
            let has_missing = present.len() < n;
            let (left, right, missing) = if has_missing {
                let with_right = split_counts(false);
                if with_right.2 > with_left.2 {
                    (with_right.0, with_right.1, Direction::Right)
                } else {
                    (with_left.0, with_left.1, Direction::Left)
                }
            } else {
                (with_left.0, with_left.1, Direction::Left)
            };

            let n_l: usize = left.iter().sum();
            let n_r = n - n_l;
            let weighted = n_l as f64 / n as f64 * gini(&left, n_l)
                + n_r as f64 / n as f64 * gini(&right, n_r);
            let decrease = parent - weighted;
            let better = match &best {
                None => true,
                Some(b) => decrease > b.decrease,
            };
            if better {
                best = Some(GiniDecision { feature, threshold, missing, decrease });
            }
        }
    }
    best.filter(|b| b.decrease > 0.0)
}

#[test]
fn criterion_05_split_searches_match_brute_force() {
    // Dyadic values make every gradient/hessian sum exact, so the oracle and
    // the implementation must agree bit for bit, tie-breaks included.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let params = GBTParams { min_child_weight: 0.0, ..GBTParams::default() };

    for case in 0..500 {
        let n = rng.random_range(2..=8);
        let n_features = rng.random_range(1..=3);
        let n_classes = rng.random_range(2..=4);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..n_features)
                    .map(|_| {
                        if rng.random::<f64>() < 0.2 {
                            f64::NAN
                        } else {
                            rng.random_range(-8..=8) as f64 / 4.0
                        }
                    })
                    .collect()
            })
            .collect();
        let table = Matrix::from_rows(&rows);
        let grads: Vec<f64> = (0..n).map(|_| rng.random_range(-8..=8) as f64 / 8.0).collect();
        let hess: Vec<f64> = (0..n).map(|_| rng.random_range(1..=8) as f64 / 8.0).collect();
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..n_classes)).collect();

        let all_rows: Vec<usize> = (0..n).collect();
        let got = best_split(&table, &all_rows, &grads, &hess, &params);
        let want = oracle_best_split(&table, &grads, &hess, &params);
        match (&got, &want) {
            (None, None) => {}
            (Some(a), Some(b)) => {
                assert_eq!(
                    (a.feature, a.threshold, a.missing),
                    (b.feature, b.threshold, b.missing),
                    "case {case}: gain split disagrees"
                );
                assert_eq!(a.gain, b.gain, "case {case}: gain differs");
            }
            _ => panic!("case {case}: gain split {got:?} but oracle says {want:?}"),
        }

        let got = gini_split(&table, &labels, n_classes);
        let want = oracle_gini_split(&table, &labels, n_classes);
        match (&got, &want) {
            (None, None) => {}
            (Some(a), Some(b)) => {
                assert_eq!(
                    (a.feature, a.threshold, a.missing),
                    (b.feature, b.threshold, b.missing),
                    "case {case}: gini split disagrees"
                );
                assert_eq!(a.decrease, b.decrease, "case {case}: decrease differs");
            }
            _ => panic!("case {case}: gini split {got:?} but oracle says {want:?}"),
        }
    }
    println!("criterion 5 (split searches match brute-force enumeration on 500 datasets): pass");
}

#[test]
fn criterion_06_boosting_loss_never_increases() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for case in 0..50 {
        let n = rng.random_range(4..=20);
        let n_features = rng.random_range(1..=4);
        let n_classes = rng.random_range(2..=3);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n_features).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect())
            .collect();
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..n_classes)).collect();
        let table = Matrix::from_rows(&rows);

        let params = GBTParams { n_rounds: 8, gamma: 0.0, ..GBTParams::default() };
        let model = fit_gbt(&table, &labels, n_classes, &params, 0).unwrap();

        let mut previous = f64::INFINITY;
        for round in 0..=params.n_rounds {
            let probs = model.predict_proba_with_rounds(&table, round).unwrap();
            let mut loss = 0.0;
            for i in 0..n {
                let row = probs.row(i);
                let total: f64 = row.iter().sum();
                assert!(
                    (total - 1.0).abs() <= 1e-9,
                    "case {case}: probabilities sum to {total}"
                );
                loss -= probs.get(i, labels[i]).max(1e-15).ln();
            }
            loss /= n as f64;
            assert!(
                loss <= previous + 1e-9,
                "case {case}: log-loss rose from {previous} to {loss} at round {round}"
            );
            previous = loss;
        }
    }
    println!("criterion 6 (training log-loss non-increasing over 50 random fits): pass");
}

#[test]
fn criterion_07_missing_half_the_values_degrades_gracefully() {
    let started = Instant::now();
    let data = generate_synthetic(&SyntheticConfig::new(10, 100, 60, 20, 1, None, 1)).unwrap();
    let (train, test) = split_train_test(&data).unwrap();
    // Depth 0 keeps every tree's output a smooth probability; see the
    // cascade-depth discussion on `LCEParams`.
    let params =
        XEMParams::new(20.0, LCEParams { n_trees: 10, max_depth: 0, ..LCEParams::default() });

    let rows = missing_data_experiment(&train, &test, &params, &[0.0, 0.5], 10, 1).unwrap();
    let degradation = rows[1].mean_error - rows[0].mean_error;
    assert!(
        degradation <= 0.10,
        "error grew by {degradation:.3} (clean {:.3}, at 0.5 missing {:.3})",
        rows[0].mean_error,
        rows[1].mean_error
    );
    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(600), "took {elapsed:?}, budget 10 min");
    println!(
        "criterion 7 (mean error +{degradation:.3} at 50% missing over 10 replications, \
         {elapsed:.1?}): pass"
    );
}

#[test]
fn criterion_08_predictions_are_invariant_to_square_position() {
    let data = generate_synthetic(&SyntheticConfig::new(10, 100, 60, 20, 1, None, 1)).unwrap();
    let shifted = generate_synthetic(&SyntheticConfig::new(10, 100, 10, 20, 1, None, 1)).unwrap();
    let (train, test) = split_train_test(&data).unwrap();
    let (_, shifted_test) = split_train_test(&shifted).unwrap();

    let model = fit_xem(&train, &reference_params(20.0), 1).unwrap();
    let original: Vec<usize> =
        model.predict(&test).unwrap().iter().map(|e| e.predicted_class).collect();
    let moved: Vec<usize> =
        model.predict(&shifted_test).unwrap().iter().map(|e| e.predicted_class).collect();
    assert_eq!(original, moved, "moving the square to [10, 30) changed predictions");
    println!("criterion 8 (predictions unchanged when the square moves to [10, 30)): pass");
}

#[test]
fn criterion_09_seeded_fits_are_byte_identical_and_reload_exactly() {
    let data = generate_synthetic(&SyntheticConfig::new(6, 50, 30, 10, 1, None, 2)).unwrap();
    let (train, _) = split_train_test(&data).unwrap();
    let params = XEMParams::new(
        20.0,
        LCEParams {
            n_trees: 3,
            max_depth: 1,
            gbt: GBTParams { n_rounds: 8, ..GBTParams::default() },
        },
    );

    let first = fit_xem(&train, &params, 7).unwrap();
    let second = fit_xem(&train, &params, 7).unwrap();
    let json_first = ModelFile::new(&first, 7, None).to_json().unwrap();
    let json_second = ModelFile::new(&second, 7, None).to_json().unwrap();
    assert_eq!(json_first, json_second, "same-seed fits serialized differently");

    let (reloaded, seed) = ModelFile::from_json(&json_first).unwrap().into_model();
    assert_eq!(seed, 7);

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let series: Vec<Series> = (0..100)
        .map(|id| Series {
            id,
            values: (0..2)
                .map(|_| (0..50).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect())
                .collect(),
            label: None,
        })
        .collect();
    let fresh = MTSDataset::new(series, first.class_names.clone(), 2).unwrap();
    assert_eq!(
        first.predict(&fresh).unwrap(),
        reloaded.predict(&fresh).unwrap(),
        "reloaded model predicts differently"
    );
    println!("criterion 9 (byte-identical model files, exact reload on 100 random series): pass");
}

#[test]
fn criterion_10_aggregation_picks_the_maximal_cell() {
    let probs = Matrix::from_rows(&[
        vec![0.6, 0.4],
        vec![0.7, 0.3],
        vec![0.05, 0.95],
        vec![0.55, 0.45],
    ]);
    let ids = vec![1, 1, 1, 1];
    let starts = vec![1, 2, 3, 4];
    let result = aggregate(&probs, &ids, &starts).unwrap();
    assert_eq!(result, vec![(1, 1, 0.95, 3)]);
    println!("criterion 10 (aggregation returns class 1 at 0.95 from the window at 3): pass");
}
