//! Penalized mean-change segmentation by pruned exact optimal partitioning.
//!
//! Segment cost is the Gaussian mean-change cost with a known variance,
//! `sum (y - segment mean)^2 / sigma^2`, where `sigma` is estimated once from
//! the median absolute first difference. A new segment costs `penalty`.

use crate::error::{Error, Result};

/// Robust noise scale: `MAD(diff(y)) / sqrt(2)`, with the normal consistency
/// constant. Falls back to the standard deviation of the differences, then to 1,
/// when the series is piecewise constant.
pub fn noise_scale(y: &[f64]) -> f64 {
    if y.len() < 2 {
        return 1.0;
    }
    let d: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();
    let mut v = d.clone();
    let med = median(&mut v);
    let mut dev: Vec<f64> = d.iter().map(|x| (x - med).abs()).collect();
    let mad = 1.482_602_218_505_602 * median(&mut dev) / std::f64::consts::SQRT_2;
    if mad > 0.0 {
        return mad;
    }
    let m = d.iter().sum::<f64>() / d.len() as f64;
    let sd = (d.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / d.len() as f64).sqrt()
        / std::f64::consts::SQRT_2;
    if sd > 0.0 {
        sd
    } else {
        1.0
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Scaled segment costs from prefix sums of the centered series.
#[derive(Debug, Clone)]
pub struct MeanCost {
    s1: Vec<f64>,
    s2: Vec<f64>,
    inv_var: f64,
}

impl MeanCost {
    pub fn new(y: &[f64], sigma: f64) -> Self {
        let mean = y.iter().sum::<f64>() / y.len().max(1) as f64;
        let mut s1 = vec![0.0; y.len() + 1];
        let mut s2 = vec![0.0; y.len() + 1];
        for (t, v) in y.iter().enumerate() {
            let c = v - mean;
            s1[t + 1] = s1[t] + c;
            s2[t + 1] = s2[t] + c * c;
        }
        Self {
            s1,
            s2,
            inv_var: 1.0 / (sigma * sigma),
        }
    }

    /// Cost of the segment `y[a..b]` (0-based, half-open).
    #[inline]
    pub fn cost(&self, a: usize, b: usize) -> f64 {
        let m = (b - a) as f64;
        let s = self.s1[b] - self.s1[a];
        ((self.s2[b] - self.s2[a]) - s * s / m).max(0.0) * self.inv_var
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeltOptions {
    /// `None` uses `2 log n`.
    pub penalty: Option<f64>,
    pub min_seg: usize,
    /// `None` estimates the noise scale with [`noise_scale`].
    pub sigma: Option<f64>,
}

impl Default for PeltOptions {
    fn default() -> Self {
        Self {
            penalty: None,
            min_seg: 2,
            sigma: None,
        }
    }
}

/// 1-based changepoints of the penalized optimal segmentation.
pub fn pelt_detect(y: &[f64], opts: &PeltOptions) -> Result<Vec<usize>> {
    let n = y.len();
    if opts.min_seg == 0 {
        return Err(Error::Validation("min_seg must be at least 1".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation(
            "series contains non-finite values".into(),
        ));
    }
    if n < opts.min_seg {
        return Ok(Vec::new());
    }
    let penalty = opts.penalty.unwrap_or(2.0 * (n as f64).ln());
    let sigma = opts.sigma.unwrap_or_else(|| noise_scale(y));
    if !(sigma > 0.0 && sigma.is_finite() && penalty.is_finite() && penalty >= 0.0) {
        return Err(Error::Validation(
            "sigma must be positive and the penalty non-negative".into(),
        ));
    }
    let cost = MeanCost::new(y, sigma);
    let m = opts.min_seg;

    let mut f = vec![f64::INFINITY; n + 1];
    let mut last = vec![0usize; n + 1];
    f[0] = -penalty;
    // Candidates in increasing order; a candidate pruned at time t is removed only
    // once t itself becomes a valid candidate, at t + min_seg.
    let mut cands: Vec<usize> = vec![0];
    let mut pending: Vec<Vec<usize>> = vec![Vec::new(); n + 1];
    for t in m..=n {
        if !pending[t - m].is_empty() {
            let drop = std::mem::take(&mut pending[t - m]);
            cands.retain(|c| !drop.contains(c));
        }
        if t >= 2 * m {
            // Segment start t - m becomes valid once a full segment fits after it.
            let s = t - m;
            if f[s].is_finite() {
                let pos = cands.partition_point(|&c| c < s);
                cands.insert(pos, s);
            }
        }
        let mut best = f64::INFINITY;
        let mut arg = 0;
        let mut vals = Vec::with_capacity(cands.len());
        for &s in &cands {
            let v = f[s] + cost.cost(s, t) + penalty;
            vals.push(v);
            if v < best {
                best = v;
                arg = s;
            }
        }
        f[t] = best;
        last[t] = arg;
        let drop: Vec<usize> = cands
            .iter()
            .zip(&vals)
            .filter(|(_, v)| **v - penalty > best)
            .map(|(s, _)| *s)
            .collect();
        if !drop.is_empty() && t + m <= n {
            pending[t].extend(drop);
        }
    }
    Ok(backtrack(&last, n))
}

fn backtrack(last: &[usize], n: usize) -> Vec<usize> {
    let mut cps = Vec::new();
    let mut t = n;
    while t > 0 {
        let s = last[t];
        if s > 0 {
            cps.push(s + 1);
        }
        t = s;
    }
    cps.reverse();
    cps
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dp(y: &[f64], penalty: f64, m: usize, sigma: f64) -> Vec<usize> {
        let n = y.len();
        let cost = MeanCost::new(y, sigma);
        let mut f = vec![f64::INFINITY; n + 1];
        let mut last = vec![0; n + 1];
        f[0] = -penalty;
        for t in m..=n {
            for s in 0..=t - m {
                if s != 0 && s < m {
                    continue;
                }
                let v = f[s] + cost.cost(s, t) + penalty;
                if v < f[t] {
                    f[t] = v;
                    last[t] = s;
                }
            }
        }
        backtrack(&last, n)
    }

    #[test]
    fn noiseless_step_is_found_exactly() {
        let y: Vec<f64> = (0..200).map(|t| if t < 100 { 0.0 } else { 5.0 }).collect();
        assert_eq!(pelt_detect(&y, &PeltOptions::default()).unwrap(), vec![101]);
    }

    #[test]
    fn constant_series_has_no_changepoints() {
        assert!(pelt_detect(&[2.5; 50], &PeltOptions::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn matches_unpruned_recursion() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for case in 0..40 {
            let n = rng.random_range(5..80);
            let y: Vec<f64> = (0..n)
                .map(|t| if (t / 15) % 2 == 0 { 0.0 } else { 2.0 } + rng.random::<f64>() - 0.5)
                .collect();
            let m = 1 + case % 4;
            let sigma = noise_scale(&y);
            let opts = PeltOptions {
                penalty: Some(3.0),
                min_seg: m,
                sigma: Some(sigma),
            };
            assert_eq!(
                pelt_detect(&y, &opts).unwrap(),
                dp(&y, 3.0, m, sigma),
                "case {case}"
            );
        }
    }
}
