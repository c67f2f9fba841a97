//! Evolution-variance blocks for the coefficient increments `omega_t = Delta^D beta_t`.
//!
//! Dynamic shrinkage: `log var(omega_t) = h_t` with
//! `h_t = mu + phi (h_{t-1} - mu) + xi_t`, `xi_t ~ Z(1/2, 1/2, 0, 1)`. The
//! Z-innovations are a Polya-Gamma scale mixture of normals,
//! `xi_t | pg_t ~ N(0, 1 / pg_t)`, `pg_t ~ PG(1, 0)`, which makes every block
//! conditionally Gaussian or one-dimensional.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dist::{beta_log_kernel, inv_gamma, slice_bounded};
use super::logvol::{
    increment_offset, log_squares_with, sample_indicators, sample_level, sample_path, Ar1Prior,
    ArStats,
};
use super::polya_gamma::try_sample_pg1;
use crate::error::{Error, Result};
use crate::model::{DspConfig, Shrinkage};

/// Per-series evolution-variance state over the `n - D` increments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShrinkageState {
    /// Log-variances of the increments.
    pub h: Vec<f64>,
    /// AR(1) level and persistence (dynamic shrinkage only).
    pub mu: f64,
    pub phi: f64,
    /// Polya-Gamma precisions of the AR(1) innovations (dynamic shrinkage only).
    pub pg: Vec<f64>,
    /// Parameter-expansion auxiliary of the half-Cauchy prior (random walk only).
    pub aux: f64,
}

impl ShrinkageState {
    /// Starting state at the prior means.
    pub fn initial(kind: Shrinkage, m: usize, n: usize, cfg: &DspConfig) -> Self {
        match kind {
            Shrinkage::DynamicShrinkage => {
                let mu = level_prior_mean(cfg, n);
                let (a, b) = cfg.ar_persistence_prior;
                Self {
                    h: vec![mu; m],
                    mu,
                    phi: 2.0 * a / (a + b) - 1.0,
                    pg: vec![0.25; m],
                    aux: 1.0,
                }
            }
            Shrinkage::RandomWalkConstantVariance => Self {
                h: vec![0.0; m],
                mu: 0.0,
                phi: 0.0,
                pg: Vec::new(),
                aux: 1.0,
            },
        }
    }

    /// Increment variance at increment index `k`.
    #[inline]
    pub fn variance(&self, k: usize) -> f64 {
        self.h[k].exp()
    }
}

fn level_prior_mean(cfg: &DspConfig, n: usize) -> f64 {
    cfg.ar_mean_prior_mean
        .unwrap_or_else(|| (1.0 / n as f64).ln())
}

/// One sweep of the dynamic shrinkage block for one series. `n` is the series
/// length, used for the default level prior.
pub fn sample_dynamic_shrinkage<R: Rng + ?Sized>(
    rng: &mut R,
    increments: &[f64],
    state: &mut ShrinkageState,
    cfg: &DspConfig,
    n: usize,
) -> Result<()> {
    let m = increments.len();
    if state.h.len() != m || state.pg.len() != m {
        return Err(Error::Validation(format!(
            "shrinkage state length {} != {m}",
            state.h.len()
        )));
    }
    if increments.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite coefficient increment".into()));
    }
    let ystar = log_squares_with(increments, increment_offset(increments));
    let s = sample_indicators(rng, &ystar, &state.h);
    let evo: Vec<f64> = state.pg.iter().map(|w| 1.0 / w).collect();
    state.h = sample_path(
        rng,
        &ystar,
        &s,
        &Ar1Prior {
            mu: state.mu,
            phi: state.phi,
            var0: evo[0],
            evo_var: &evo,
        },
    )?;

    state.mu = sample_level(
        rng,
        &state.h,
        state.phi,
        evo[0],
        &evo,
        level_prior_mean(cfg, n),
        cfg.ar_mean_prior_var,
    );

    // (phi + 1) / 2 ~ Beta(a, b); the Jacobian is constant.
    let stats = ArStats::new(&state.h, state.mu, &evo);
    let (a, b) = cfg.ar_persistence_prior;
    state.phi = slice_bounded(rng, state.phi, -1.0, 1.0, |phi| {
        beta_log_kernel(0.5 * (phi + 1.0), a, b) + stats.log_lik(phi)
    });

    let mu = state.mu;
    for t in 0..m {
        let xi = if t == 0 {
            state.h[0] - mu
        } else {
            (state.h[t] - mu) - state.phi * (state.h[t - 1] - mu)
        };
        state.pg[t] = try_sample_pg1(rng, xi).ok_or_else(|| {
            Error::Numeric(format!(
                "Polya-Gamma sampler failed to converge for innovation {xi:e}"
            ))
        })?;
    }
    Ok(())
}

/// Constant increment variance with a half-Cauchy(`scale`) prior on its square
/// root, via `sigma^2 | nu ~ IG(1/2, 1/nu)`, `nu ~ IG(1/2, 1/scale^2)`.
pub fn sample_rw_variance<R: Rng + ?Sized>(
    rng: &mut R,
    increments: &[f64],
    state: &mut ShrinkageState,
    scale: f64,
) -> Result<()> {
    let m = increments.len();
    if state.h.len() != m {
        return Err(Error::Validation(format!(
            "shrinkage state length {} != {m}",
            state.h.len()
        )));
    }
    let ss: f64 = increments.iter().map(|w| w * w).sum();
    if !ss.is_finite() {
        return Err(Error::Numeric("non-finite coefficient increment".into()));
    }
    let var = inv_gamma(rng, 0.5 * m as f64 + 0.5, 0.5 * ss + 1.0 / state.aux);
    state.aux = inv_gamma(rng, 1.0, 1.0 / (scale * scale) + 1.0 / var);
    let lv = var.ln();
    state.h.iter_mut().for_each(|h| *h = lv);
    Ok(())
}
