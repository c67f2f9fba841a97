//! Shared machinery for AR(1) log-variance processes observed through
//! `log(r_t^2 + c)`: the 10-component mixture approximation of `log chi^2_1`,
//! indicator sampling and the joint Gaussian draw of the log-variance path.

use rand::Rng;

use super::dist::{open_unit, std_normal};
use crate::error::{Error, Result};
use crate::linalg::BandedSpd;

/// Offset added to squared observation residuals before taking logs.
pub const LOG_OFFSET: f64 = 1.0e-6;

/// Mixture weights, means and variances approximating `log chi^2_1`.
pub const MIX_PROB: [f64; 10] = [
    0.00609, 0.04775, 0.13057, 0.20674, 0.22715, 0.18842, 0.12047, 0.05591, 0.01575, 0.00115,
];
pub const MIX_MEAN: [f64; 10] = [
    1.92677, 1.34744, 0.73504, 0.02266, -0.85173, -1.97278, -3.46788, -5.55246, -8.68384, -14.65000,
];
pub const MIX_VAR: [f64; 10] = [
    0.11265, 0.17788, 0.26768, 0.40611, 0.62699, 0.98583, 1.57469, 2.54498, 4.16591, 7.33342,
];

/// `log(r^2 + c)` for each residual.
pub fn log_squares(residuals: &[f64]) -> Vec<f64> {
    log_squares_with(residuals, LOG_OFFSET)
}

pub fn log_squares_with(residuals: &[f64], offset: f64) -> Vec<f64> {
    residuals.iter().map(|r| (r * r + offset).ln()).collect()
}

/// Offset for coefficient increments, whose scale can sit far below any fixed
/// guard: zero unless some increment is numerically zero, then
/// `max(1e-8, MAD / 1e6)`. A fixed offset comparable to the squared increments
/// biases the log-variances upward, and the coefficient draw feeds that bias back.
pub fn increment_offset(increments: &[f64]) -> f64 {
    if increments.iter().all(|w| w * w >= 1e-16) {
        return 0.0;
    }
    let mut v = increments.to_vec();
    let med = median(&mut v);
    let mut dev: Vec<f64> = increments.iter().map(|w| (w - med).abs()).collect();
    (1.482_602_218_505_602 * median(&mut dev) / 1e6).max(1e-8)
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Draws a mixture component for every observation given the current log-variances.
pub fn sample_indicators<R: Rng + ?Sized>(rng: &mut R, ystar: &[f64], h: &[f64]) -> Vec<usize> {
    let log_norm: [f64; 10] = std::array::from_fn(|k| MIX_PROB[k].ln() - 0.5 * MIX_VAR[k].ln());
    ystar
        .iter()
        .zip(h)
        .map(|(&y, &ht)| {
            let d = y - ht;
            let mut lw = [0.0; 10];
            let mut mx = f64::NEG_INFINITY;
            for k in 0..10 {
                let e = d - MIX_MEAN[k];
                lw[k] = log_norm[k] - 0.5 * e * e / MIX_VAR[k];
                mx = mx.max(lw[k]);
            }
            let mut cum = [0.0; 10];
            let mut total = 0.0;
            for k in 0..10 {
                total += (lw[k] - mx).exp();
                cum[k] = total;
            }
            let u = open_unit(rng) * total;
            cum.iter().position(|&c| u <= c).unwrap_or(9)
        })
        .collect()
}

/// Parameters of the AR(1) prior `h_0 - mu ~ N(0, var0)`,
/// `h_t - mu = phi (h_{t-1} - mu) + e_t`, `e_t ~ N(0, evo_var[t])` (entry 0 unused).
pub struct Ar1Prior<'a> {
    pub mu: f64,
    pub phi: f64,
    pub var0: f64,
    pub evo_var: &'a [f64],
}

/// Joint draw of `h` given mixture indicators: `ystar_t - m_{s_t} = h_t + N(0, v_{s_t})`.
pub fn sample_path<R: Rng + ?Sized>(
    rng: &mut R,
    ystar: &[f64],
    indicators: &[usize],
    prior: &Ar1Prior<'_>,
) -> Result<Vec<f64>> {
    let m = ystar.len();
    let mut q = BandedSpd::zeros(m, 1);
    let mut b = vec![0.0; m];
    for t in 0..m {
        let s = indicators[t];
        q.add(t, t, 1.0 / MIX_VAR[s]);
        b[t] += (ystar[t] - MIX_MEAN[s]) / MIX_VAR[s];
    }
    let (mu, phi) = (prior.mu, prior.phi);
    q.add(0, 0, 1.0 / prior.var0);
    b[0] += mu / prior.var0;
    let drift = mu * (1.0 - phi);
    for t in 1..m {
        let prec = 1.0 / prior.evo_var[t];
        q.add(t, t, prec);
        q.add(t - 1, t - 1, phi * phi * prec);
        q.add(t, t - 1, -phi * prec);
        b[t] += prec * drift;
        b[t - 1] -= phi * prec * drift;
    }
    let chol = q.cholesky()?;
    let z: Vec<f64> = (0..m).map(|_| std_normal(rng)).collect();
    let h = chol.sample(&b, &z);
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite log-variance draw".into()));
    }
    Ok(h)
}

/// Conjugate Gaussian draw of the AR(1) level `mu` under a `N(mean, var)` prior.
pub fn sample_level<R: Rng + ?Sized>(
    rng: &mut R,
    h: &[f64],
    phi: f64,
    var0: f64,
    evo_var: &[f64],
    prior_mean: f64,
    prior_var: f64,
) -> f64 {
    let mut prec = 1.0 / prior_var + 1.0 / var0;
    let mut lin = prior_mean / prior_var + h[0] / var0;
    let k = 1.0 - phi;
    for t in 1..h.len() {
        prec += k * k / evo_var[t];
        lin += k * (h[t] - phi * h[t - 1]) / evo_var[t];
    }
    lin / prec + std_normal(rng) / prec.sqrt()
}

/// Sufficient statistics of `sum_t (a_t - phi b_t)^2 / v_t` with `a_t = h_t - mu`,
/// `b_t = h_{t-1} - mu`.
#[derive(Debug, Clone, Copy)]
pub struct ArStats {
    pub aa: f64,
    pub ab: f64,
    pub bb: f64,
}

impl ArStats {
    pub fn new(h: &[f64], mu: f64, evo_var: &[f64]) -> Self {
        let mut s = ArStats {
            aa: 0.0,
            ab: 0.0,
            bb: 0.0,
        };
        for t in 1..h.len() {
            let (a, b, w) = (h[t] - mu, h[t - 1] - mu, 1.0 / evo_var[t]);
            s.aa += w * a * a;
            s.ab += w * a * b;
            s.bb += w * b * b;
        }
        s
    }

    /// `-0.5 * sum (a - phi b)^2 / v`.
    #[inline]
    pub fn log_lik(&self, phi: f64) -> f64 {
        -0.5 * (self.aa - 2.0 * phi * self.ab + phi * phi * self.bb)
    }
}
