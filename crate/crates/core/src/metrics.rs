//! Segmentation and detection scores.
//!
//! Changepoints are 1-based: a changepoint at `t` starts a new segment at time
//! `t`, so valid locations are `2..=n`. Locations outside that range are ignored
//! and duplicates collapse.

use serde::{Deserialize, Serialize};

use crate::model::MetricBlock;

/// Segment label of every time point (0-based index into the output).
pub fn segment_labels(cps: &[usize], n: usize) -> Vec<usize> {
    let mut c: Vec<usize> = cps.iter().copied().filter(|&t| t >= 2 && t <= n).collect();
    c.sort_unstable();
    c.dedup();
    let mut labels = Vec::with_capacity(n);
    let mut seg = 0;
    let mut next = c.iter().peekable();
    for t in 1..=n {
        if next.peek() == Some(&&t) {
            seg += 1;
            next.next();
        }
        labels.push(seg);
    }
    labels
}

fn pairs(m: u64) -> f64 {
    (m * m.saturating_sub(1) / 2) as f64
}

/// Pair counts of the contingency table of two segmentations.
struct PairCounts {
    total: f64,
    joint: f64,
    rows: f64,
    cols: f64,
}

fn pair_counts(a: &[usize], b: &[usize]) -> PairCounts {
    let n = a.len();
    let ra = a.last().map_or(0, |v| v + 1);
    let rb = b.last().map_or(0, |v| v + 1);
    let mut table = vec![0u64; ra * rb];
    let mut row = vec![0u64; ra];
    let mut col = vec![0u64; rb];
    for (&i, &j) in a.iter().zip(b) {
        table[i * rb + j] += 1;
        row[i] += 1;
        col[j] += 1;
    }
    PairCounts {
        total: pairs(n as u64),
        joint: table.iter().map(|&m| pairs(m)).sum(),
        rows: row.iter().map(|&m| pairs(m)).sum(),
        cols: col.iter().map(|&m| pairs(m)).sum(),
    }
}

/// Fraction of index pairs on which both segmentations agree. Fewer than two
/// points give 1.
pub fn rand_index(true_cps: &[usize], pred_cps: &[usize], n: usize) -> f64 {
    if n < 2 {
        return 1.0;
    }
    let c = pair_counts(&segment_labels(true_cps, n), &segment_labels(pred_cps, n));
    (c.total + 2.0 * c.joint - c.rows - c.cols) / c.total
}

/// Chance-corrected Rand index under the permutation model. When the expected
/// index equals its maximum the partitions are either identical (1) or the
/// adjustment is undefined (0).
pub fn adjusted_rand(true_cps: &[usize], pred_cps: &[usize], n: usize) -> f64 {
    let a = segment_labels(true_cps, n);
    let b = segment_labels(pred_cps, n);
    if n < 2 {
        return 1.0;
    }
    let c = pair_counts(&a, &b);
    let expected = c.rows * c.cols / c.total;
    let max = 0.5 * (c.rows + c.cols);
    if max - expected == 0.0 {
        return if a == b { 1.0 } else { 0.0 };
    }
    (c.joint - expected) / (max - expected)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchScore {
    pub true_positives: usize,
    pub n_pred: usize,
    pub n_true: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl MatchScore {
    /// Scores from counts; also used to pool counts across replicates.
    pub fn from_counts(true_positives: usize, n_pred: usize, n_true: usize) -> Self {
        let (precision, recall, f1) = if n_pred == 0 && n_true == 0 {
            (1.0, 1.0, 1.0)
        } else {
            let precision = if n_pred == 0 {
                0.0
            } else {
                true_positives as f64 / n_pred as f64
            };
            let recall = if n_true == 0 {
                1.0
            } else {
                true_positives as f64 / n_true as f64
            };
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            (precision, recall, f1)
        };
        Self {
            true_positives,
            n_pred,
            n_true,
            precision,
            recall,
            f1,
        }
    }
}

fn dedup_sorted(v: &[usize]) -> Vec<usize> {
    let mut v = v.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

/// Maximum one-to-one matching of predictions to truths within `tolerance`,
/// by augmenting paths.
pub fn optimal_match_count(true_cps: &[usize], pred_cps: &[usize], tolerance: usize) -> usize {
    let truth = dedup_sorted(true_cps);
    let pred = dedup_sorted(pred_cps);
    let mut owner: Vec<Option<usize>> = vec![None; truth.len()];

    fn augment(
        i: usize,
        pred: &[usize],
        truth: &[usize],
        tol: usize,
        seen: &mut [bool],
        owner: &mut [Option<usize>],
    ) -> bool {
        for (j, &t) in truth.iter().enumerate() {
            if seen[j] || pred[i].abs_diff(t) > tol {
                continue;
            }
            seen[j] = true;
            if owner[j].is_none_or(|o| augment(o, pred, truth, tol, seen, owner)) {
                owner[j] = Some(i);
                return true;
            }
        }
        false
    }

    let mut matched = 0;
    for i in 0..pred.len() {
        let mut seen = vec![false; truth.len()];
        if augment(i, &pred, &truth, tolerance, &mut seen, &mut owner) {
            matched += 1;
        }
    }
    matched
}

/// Greedy matching: candidate pairs by increasing distance, ties to the
/// leftmost prediction then the leftmost truth. Cross-check for the optimum.
pub fn greedy_match_count(true_cps: &[usize], pred_cps: &[usize], tolerance: usize) -> usize {
    let truth = dedup_sorted(true_cps);
    let pred = dedup_sorted(pred_cps);
    let mut cands: Vec<(usize, usize, usize)> = Vec::new();
    for (i, &p) in pred.iter().enumerate() {
        for (j, &t) in truth.iter().enumerate() {
            let d = p.abs_diff(t);
            if d <= tolerance {
                cands.push((d, i, j));
            }
        }
    }
    cands.sort_unstable();
    let mut used_p = vec![false; pred.len()];
    let mut used_t = vec![false; truth.len()];
    let mut matched = 0;
    for (_, i, j) in cands {
        if !used_p[i] && !used_t[j] {
            used_p[i] = true;
            used_t[j] = true;
            matched += 1;
        }
    }
    matched
}

/// Precision, recall and F1 under the optimal one-to-one matching.
pub fn match_and_score(true_cps: &[usize], pred_cps: &[usize], tolerance: usize) -> MatchScore {
    let tp = optimal_match_count(true_cps, pred_cps, tolerance);
    MatchScore::from_counts(
        tp,
        dedup_sorted(pred_cps).len(),
        dedup_sorted(true_cps).len(),
    )
}

/// Every score for one prediction.
pub fn score_all(
    true_cps: &[usize],
    pred_cps: &[usize],
    n: usize,
    tolerance: usize,
) -> MetricBlock {
    let m = match_and_score(true_cps, pred_cps, tolerance);
    MetricBlock {
        rand: rand_index(true_cps, pred_cps, n),
        adjusted_rand: adjusted_rand(true_cps, pred_cps, n),
        precision: m.precision,
        recall: m.recall,
        f1: m.f1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_follow_boundary_convention() {
        assert_eq!(segment_labels(&[3], 4), vec![0, 0, 1, 1]);
        assert_eq!(segment_labels(&[1, 9, 4, 4], 5), vec![0, 0, 0, 1, 1]);
    }

    #[test]
    fn rand_examples() {
        assert_eq!(rand_index(&[50, 120], &[50, 120], 200), 1.0);
        assert!((rand_index(&[3], &[4], 4) - 0.5).abs() < 1e-15);
        // 2 * C(100, 2) agreeing pairs out of C(200, 2).
        let expect = 2.0 * 4950.0 / 19900.0;
        assert!((rand_index(&[101], &[], 200) - expect).abs() < 1e-15);
        assert!((expect - 0.497).abs() < 1e-3);
    }

    #[test]
    fn adjusted_rand_examples() {
        assert_eq!(adjusted_rand(&[7], &[7], 20), 1.0);
        assert_eq!(adjusted_rand(&[], &[], 20), 1.0);
        // Contingency {2,0 / 1,1}: joint 1, rows 2, cols 3, total 6.
        let expected = 2.0 * 3.0 / 6.0;
        let ari = (1.0 - expected) / (2.5 - expected);
        assert!((adjusted_rand(&[3], &[4], 4) - ari).abs() < 1e-15);
        assert_eq!(ari, 0.0);
    }

    #[test]
    fn matching_examples() {
        let s = match_and_score(&[100], &[103], 5);
        assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
        let s = match_and_score(&[100], &[98, 103], 5);
        assert_eq!((s.precision, s.recall), (0.5, 1.0));
        assert!((s.f1 - 2.0 / 3.0).abs() < 1e-15);
        let s = match_and_score(&[100], &[110], 5);
        assert_eq!((s.precision, s.recall, s.f1), (0.0, 0.0, 0.0));
        let s = match_and_score(&[], &[], 5);
        assert_eq!(s.f1, 1.0);
        let s = match_and_score(&[50], &[], 5);
        assert_eq!((s.precision, s.f1), (0.0, 0.0));
    }

    #[test]
    fn greedy_can_lose_a_match_that_the_optimum_keeps() {
        // The closest pair (102, 100) leaves 97 without a free truth.
        assert_eq!(greedy_match_count(&[100, 105], &[102, 97], 5), 1);
        assert_eq!(optimal_match_count(&[100, 105], &[102, 97], 5), 2);
    }
}
