//! Invariants over randomly generated inputs.

mod support;

use driftshift::io::{parse_config, read_dataset, write_dataset, Stamp};
use driftshift::metrics::{adjusted_rand, match_and_score, rand_index, segment_labels};
use driftshift::pelt::{pelt_detect, PeltOptions};
use driftshift::pipeline::{detect, DetectOptions};
use driftshift::sim::Design;
use driftshift::solver::path::lambda_grid;
use driftshift::{DlmConfig, GroupSpec};
use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng;
use support::*;

/// A sorted subset of `order..n` and a superset of it.
fn nested_sets(seed: u64, n: usize, order: usize) -> (Vec<usize>, Vec<usize>) {
    let mut r = rng(seed);
    let large: Vec<usize> = (order..n).filter(|_| r.random_bool(0.3)).collect();
    let small: Vec<usize> = large
        .iter()
        .copied()
        .filter(|_| r.random_bool(0.5))
        .collect();
    (small, large)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn projection_is_idempotent_with_monotone_residuals(
        series in prop::collection::vec(-10.0f64..10.0, 4..60),
        seed in any::<u64>(),
        order in 1usize..=2,
    ) {
        let (small, large) = nested_sets(seed, series.len(), order);
        prop_assert_eq!(check_projection(&series, &small, &large, order), Ok(()));
    }

    #[test]
    fn r2_is_bounded_with_exact_trivial_cases(seed in any::<u64>(), n in 6usize..40, p in 1usize..=3, order in 1usize..=2) {
        let mut r = rng(seed);
        let beta = Array2::from_shape_fn((n, p), |_| r.random_range(-4.0..4.0));
        let x = Array2::from_shape_fn((n, p), |_| r.random_range(-2.0..2.0));
        let weights: Vec<f64> = (0..n).map(|_| r.random_range(0.1..3.0)).collect();
        let eta: Vec<Vec<usize>> = (0..p).map(|j| nested_sets(seed ^ j as u64, n, order).1).collect();
        prop_assert_eq!(check_r2(&beta, &x, &weights, &eta, order), Ok(()));
    }

    #[test]
    fn partition_scores_are_symmetric_and_bounded(
        a in prop::collection::vec(1usize..=60, 0..8),
        b in prop::collection::vec(1usize..=60, 0..8),
        n in 1usize..60,
    ) {
        let ri = rand_index(&a, &b, n);
        prop_assert!((0.0..=1.0).contains(&ri));
        prop_assert_eq!(ri, rand_index(&b, &a, n));
        prop_assert!(adjusted_rand(&a, &b, n) <= 1.0 + 1e-12);
        prop_assert_eq!(rand_index(&a, &a, n), 1.0);
        prop_assert_eq!(adjusted_rand(&a, &a, n), 1.0);
        let labels = segment_labels(&a, n);
        prop_assert_eq!(labels.len(), n);
        prop_assert!(labels.windows(2).all(|w| w[1] == w[0] || w[1] == w[0] + 1));
        let m = match_and_score(&a, &b, 3);
        prop_assert!((0.0..=1.0).contains(&m.f1));
        prop_assert!(m.true_positives <= m.n_pred.min(m.n_true));
    }

    #[test]
    fn pelt_changepoints_are_valid(seed in any::<u64>(), n in 4usize..150, min_seg in 1usize..4) {
        let y = random_segmented_series(&mut rng(seed), n);
        let cps = pelt_detect(&y, &PeltOptions { min_seg, ..Default::default() }).unwrap();
        let mut bounds = vec![1];
        bounds.extend(&cps);
        bounds.push(n + 1);
        prop_assert!(bounds.windows(2).all(|w| w[1] >= w[0] + min_seg), "{bounds:?}");
    }

    #[test]
    fn lambda_grid_is_decreasing_from_its_maximum(lmax in 1e-3f64..1e3, count in 2usize..200, ratio in 1e-6f64..0.5) {
        let g = lambda_grid(lmax, count, ratio);
        prop_assert_eq!(g.len(), count);
        prop_assert!((g[0] - lmax).abs() <= 1e-12 * lmax);
        prop_assert!((g[count - 1] - ratio * lmax).abs() <= 1e-9 * lmax);
        prop_assert!(g.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn config_survives_a_json_round_trip(n_burn in 0usize..10_000, n_save in 100usize..10_000, seed in any::<u64>(), order in 1usize..=2, sv in any::<bool>()) {
        let cfg = DlmConfig { n_burn, n_save, seed, order, sv_noise: sv, ..DlmConfig::default() };
        let text = serde_json::to_string(&cfg).unwrap();
        prop_assert_eq!(parse_config(&text).unwrap(), cfg);
    }

    #[test]
    fn datasets_survive_a_csv_round_trip(seed in any::<u64>(), design_idx in 0usize..7) {
        let design = Design::ALL[design_idx];
        let sim = design.generate(design.magnitude_grid()[0], seed).unwrap();
        let mut buf = Vec::new();
        write_dataset(&mut buf, &sim.dataset, &Stamp::new(seed, &design)).unwrap();
        let back = read_dataset(buf.as_slice()).unwrap();
        prop_assert_eq!(back.y, sim.dataset.y);
        prop_assert_eq!(back.x, sim.dataset.x);
        prop_assert_eq!(back.covariates, sim.dataset.covariates);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn every_path_solution_is_certified(seed in any::<u64>(), n in 8usize..60, p in 1usize..=3, order in 1usize..=2, joint in any::<bool>()) {
        let (dataset, draws) = synthetic_posterior(&mut rng(seed), n, p, 20);
        let groups = if joint { GroupSpec::joint(p) } else { GroupSpec::singletons(p) };
        prop_assert_eq!(check_path_kkt(&dataset, &draws, order, &groups, 1e-6), Ok(()));
    }

    #[test]
    fn lazy_detection_matches_the_full_path(seed in any::<u64>(), n in 20usize..80, p in 1usize..=2) {
        let (dataset, draws) = synthetic_posterior(&mut rng(seed), n, p, 30);
        let lazy = detect(&draws, &dataset, 1, &DetectOptions::default()).unwrap();
        let full = detect(&draws, &dataset, 1, &DetectOptions { initial_active_cap: None, ..Default::default() }).unwrap();
        prop_assert_eq!(lazy.report.changepoints, full.report.changepoints);
        prop_assert_eq!(lazy.report.selected_count, full.report.selected_count);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn sampling_is_seed_deterministic(seed in any::<u64>()) {
        let sim = Design::MeanGaussian.generate(1.0, seed).unwrap();
        prop_assert_eq!(check_seed_determinism(&sim.dataset, seed), Ok(()));
    }
}
