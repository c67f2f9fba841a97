//! Additive outlier component `zeta_t ~ N(0, lambda_t^2)` with a horseshoe+ prior:
//! `lambda_t ~ C+(0, tau eta_t)`, `eta_t ~ C+(0, 1)`, `tau ~ C+(0, global_scale)`.
//! Every half-Cauchy is written as an inverse-gamma pair, so all updates are conjugate.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dist::{inv_gamma, std_normal};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierState {
    pub zeta: Vec<f64>,
    /// Local variances `lambda_t^2` and their auxiliaries.
    pub lambda2: Vec<f64>,
    pub lambda_aux: Vec<f64>,
    /// Squared horseshoe+ mixing scales `eta_t^2` and their auxiliaries.
    pub eta2: Vec<f64>,
    pub eta_aux: Vec<f64>,
    pub tau2: f64,
    pub tau_aux: f64,
    pub global_scale: f64,
}

impl OutlierState {
    pub fn new(n: usize, global_scale: f64) -> Self {
        let s2 = global_scale * global_scale;
        Self {
            zeta: vec![0.0; n],
            lambda2: vec![s2; n],
            lambda_aux: vec![s2; n],
            eta2: vec![1.0; n],
            eta_aux: vec![1.0; n],
            tau2: s2,
            tau_aux: s2,
            global_scale,
        }
    }
}

/// Draws `zeta` given partial residuals `r_t = y_t - x_t' beta_t - z_t' alpha`
/// and noise variances, then refreshes the horseshoe+ ladder.
pub fn sample_outlier<R: Rng + ?Sized>(
    rng: &mut R,
    residuals: &[f64],
    obs_var: &[f64],
    state: &mut OutlierState,
) -> Result<()> {
    let n = residuals.len();
    if obs_var.len() != n || state.zeta.len() != n {
        return Err(Error::Validation(
            "outlier inputs have inconsistent dimensions".into(),
        ));
    }
    // Floors keep the inverse-gamma rates away from 0 and infinity.
    const FLOOR: f64 = 1e-300;
    let mut global_rate = 0.0;
    for t in 0..n {
        let prec = 1.0 / obs_var[t] + 1.0 / state.lambda2[t];
        let mean = residuals[t] / obs_var[t] / prec;
        let z = mean + std_normal(rng) / prec.sqrt();
        state.zeta[t] = z;
        let l2 = inv_gamma(rng, 1.0, 1.0 / state.lambda_aux[t] + 0.5 * z * z).max(FLOOR);
        state.lambda2[t] = l2;
        let nu = inv_gamma(rng, 1.0, 1.0 / l2 + 1.0 / (state.tau2 * state.eta2[t])).max(FLOOR);
        state.lambda_aux[t] = nu;
        let e2 = inv_gamma(rng, 1.0, 1.0 / state.eta_aux[t] + 1.0 / (state.tau2 * nu)).max(FLOOR);
        state.eta2[t] = e2;
        state.eta_aux[t] = inv_gamma(rng, 1.0, 1.0 + 1.0 / e2).max(FLOOR);
        global_rate += 1.0 / (e2 * nu);
    }
    let s2 = state.global_scale * state.global_scale;
    state.tau2 = inv_gamma(
        rng,
        0.5 * (n as f64 + 1.0),
        1.0 / state.tau_aux + global_rate,
    )
    .max(FLOOR);
    state.tau_aux = inv_gamma(rng, 1.0, 1.0 / s2 + 1.0 / state.tau2).max(FLOOR);
    if state.zeta.iter().any(|v| !v.is_finite()) || !state.tau2.is_finite() {
        return Err(Error::Numeric("non-finite outlier draw".into()));
    }
    Ok(())
}
