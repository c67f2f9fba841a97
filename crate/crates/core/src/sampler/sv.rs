//! SV(1) observation-noise block.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dist::{beta_log_kernel, inv_gamma, open_unit, slice_bounded};
use super::logvol::{log_squares, sample_indicators, sample_level, sample_path, Ar1Prior, ArStats};
use crate::error::{Error, Result};
use crate::model::SvPriors;

/// Parameters of `log sigma^2_t = mu + phi (log sigma^2_{t-1} - mu) + eta_t`,
/// `eta_t ~ N(0, sigma2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvParams {
    pub mu: f64,
    pub phi: f64,
    pub sigma2: f64,
}

impl SvParams {
    /// Prior means.
    pub fn from_priors(p: &SvPriors) -> Self {
        Self {
            mu: p.mu_mean,
            phi: p.phi_a / (p.phi_a + p.phi_b),
            sigma2: p.sigma2_shape / p.sigma2_rate,
        }
    }

    fn stationary_var(&self) -> f64 {
        self.sigma2 / (1.0 - self.phi * self.phi)
    }
}

/// One sweep of the mixture-approximation sampler for the SV(1) model: draws the
/// log-variance path `h` and then `mu`, `phi` and `sigma2` given it.
pub fn sample_stochastic_volatility<R: Rng + ?Sized>(
    rng: &mut R,
    residuals: &[f64],
    h: &mut [f64],
    params: &mut SvParams,
    priors: &SvPriors,
) -> Result<()> {
    let n = residuals.len();
    if h.len() != n {
        return Err(Error::Validation(format!(
            "log-variance path length {} != {n}",
            h.len()
        )));
    }
    let ystar = log_squares(residuals);
    let s = sample_indicators(rng, &ystar, h);
    let evo = vec![params.sigma2; n];
    let path = sample_path(
        rng,
        &ystar,
        &s,
        &Ar1Prior {
            mu: params.mu,
            phi: params.phi,
            var0: params.stationary_var(),
            evo_var: &evo,
        },
    )?;
    h.copy_from_slice(&path);

    params.mu = sample_level(
        rng,
        h,
        params.phi,
        params.stationary_var(),
        &evo,
        priors.mu_mean,
        priors.mu_var,
    );

    // Persistence: Beta prior on (0, 1) plus the stationary initial density.
    let stats = ArStats::new(h, params.mu, &evo);
    let (h0, sigma2) = (h[0] - params.mu, params.sigma2);
    params.phi = slice_bounded(rng, params.phi, 0.0, 1.0, |phi| {
        let one_m = 1.0 - phi * phi;
        beta_log_kernel(phi, priors.phi_a, priors.phi_b) + stats.log_lik(phi) + 0.5 * one_m.ln()
            - 0.5 * one_m * h0 * h0 / sigma2
    });

    // Innovation variance: independence Metropolis-Hastings with the
    // inverse-gamma part of the conditional as proposal.
    let one_m = 1.0 - params.phi * params.phi;
    let mut ss = one_m * h0 * h0;
    for t in 1..n {
        let e = (h[t] - params.mu) - params.phi * (h[t - 1] - params.mu);
        ss += e * e;
    }
    let shape = 0.5 * n as f64 - priors.sigma2_shape;
    let proposal = inv_gamma(rng, shape, 0.5 * ss);
    let log_accept = -priors.sigma2_rate * (proposal - params.sigma2);
    if open_unit(rng).ln() < log_accept && proposal.is_finite() && proposal > 0.0 {
        params.sigma2 = proposal;
    }
    Ok(())
}

/// Constant-variance alternative: `sigma^2 | r ~ InvGamma(n/2, sum r^2 / 2)` under
/// the Jeffreys prior. Fills `h` with `log sigma^2`.
pub fn sample_constant_variance<R: Rng + ?Sized>(rng: &mut R, residuals: &[f64], h: &mut [f64]) {
    let ss: f64 = residuals.iter().map(|r| r * r).sum::<f64>().max(1e-300);
    let s2 = inv_gamma(rng, 0.5 * residuals.len() as f64, 0.5 * ss);
    h.iter_mut().for_each(|v| *v = s2.ln());
}
