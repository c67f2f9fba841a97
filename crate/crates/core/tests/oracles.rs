//! Library results against independent reference computations.

mod support;

use driftshift::metrics::{adjusted_rand, greedy_match_count, optimal_match_count, rand_index};
use driftshift::pelt::{noise_scale, pelt_detect, PeltOptions};
use proptest::prelude::*;
use support::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn state_conditional_mean_matches_dense_gls(seed in any::<u64>(), n in 4usize..=12, p in 1usize..=3, order in 1usize..=2) {
        let case = random_gls_case(&mut rng(seed), n, p, order);
        let err = gls_discrepancy(&case);
        prop_assert!(err <= 1e-8, "relative discrepancy {err:e}");
    }

    #[test]
    fn single_changepoint_solutions_match_two_segment_search(seed in any::<u64>(), n in 6usize..=12) {
        let out = single_jump_case(&mut rng(seed), n);
        prop_assert!(out.compared > 0, "no single-changepoint solution on the path");
        prop_assert!(out.lambda_max_error <= 1e-6, "lambda_max off by {:e}", out.lambda_max_error);
        prop_assert!(out.max_fit_error <= 1e-6, "fit off by {:e}", out.max_fit_error);
        prop_assert!(out.max_objective_error <= 1e-6, "objective off by {:e}", out.max_objective_error);
    }

    #[test]
    fn rand_scores_match_pair_enumeration(
        seed in any::<u64>(),
        n in 1usize..=30,
    ) {
        let mut r = rng(seed);
        let a = random_changepoints(&mut r, n, 6);
        let b = random_changepoints(&mut r, n, 6);
        prop_assert_eq!(rand_index(&a, &b, n), rand_brute(&a, &b, n));
        prop_assert_eq!(rand_index(&a, &b, n), rand_index(&b, &a, n));
        let (ours, brute) = (adjusted_rand(&a, &b, n), adjusted_rand_brute(&a, &b, n));
        prop_assert!((ours - brute).abs() <= 1e-12, "{ours} vs {brute}");
        prop_assert!((ours - adjusted_rand(&b, &a, n)).abs() <= 1e-12);
    }

    #[test]
    fn matching_is_maximum(
        truth in prop::collection::vec(1usize..60, 0..=6),
        pred in prop::collection::vec(1usize..60, 0..=6),
        tol in 0usize..8,
    ) {
        let best = matching_brute(&truth, &pred, tol);
        prop_assert_eq!(optimal_match_count(&truth, &pred, tol), best);
        prop_assert!(greedy_match_count(&truth, &pred, tol) <= best);
    }

    #[test]
    fn pelt_is_shift_invariant(seed in any::<u64>(), shift in -50.0f64..50.0) {
        let y = random_segmented_series(&mut rng(seed), 80);
        let shifted: Vec<f64> = y.iter().map(|v| v + shift).collect();
        let opts = PeltOptions { sigma: Some(noise_scale(&y)), ..Default::default() };
        prop_assert_eq!(pelt_detect(&y, &opts).unwrap(), pelt_detect(&shifted, &opts).unwrap());
    }
}

#[test]
fn pelt_matches_quadratic_recursion_on_200_series() {
    let mut r = rng(2024);
    for case in 0..200 {
        let n = 20 + case % 150;
        let y = random_segmented_series(&mut r, n);
        let min_seg = 1 + case % 3;
        let sigma = noise_scale(&y);
        let penalty = 2.0 * (n as f64).ln();
        let opts = PeltOptions {
            penalty: Some(penalty),
            min_seg,
            sigma: Some(sigma),
        };
        assert_eq!(
            pelt_detect(&y, &opts).unwrap(),
            segmentation_dp(&y, penalty, min_seg, sigma),
            "case {case}"
        );
    }
}

#[test]
fn two_segment_oracle_recovers_a_clean_step() {
    let target = [0.0, 0.0, 0.0, 2.0, 2.0, 2.0];
    let w = [1.0; 6];
    let psi = [0.0, 1.0, 1.0, 1.0, 1.0, 1.0];
    let fit = best_single_jump(&target, &w, &psi, 0.0);
    assert_eq!(fit.start, 3);
    assert!(fit.objective.abs() < 1e-12);
    // Penalizing the jump by 1.5 shrinks it by 1.5 / (sum of centered squares = 1.5).
    let shrunk = best_single_jump(&target, &w, &psi, 1.5);
    assert!((shrunk.fit[5] - shrunk.fit[0] - 1.0).abs() < 1e-12);
}
