//! Gibbs sampler for the Bayesian DLM
//! `y_t = x_t' beta_t + z_t' alpha + zeta_t + eps_t`, `Delta^D beta_t = omega_t`,
//! with SV(1) or constant observation noise and dynamic-shrinkage or constant
//! random-walk evolution variances.

pub mod dist;
pub mod dsp;
pub mod logvol;
pub mod outlier;
pub mod polya_gamma;
pub mod states;
pub mod sv;

use ndarray::{Array1, Array2, Array3, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use dsp::{sample_dynamic_shrinkage, sample_rw_variance, ShrinkageState};
pub use outlier::{sample_outlier, OutlierState};
pub use states::{conditional_mean, ffbs_draw, sample_alpha, StateSpace};
pub use sv::{sample_constant_variance, sample_stochastic_volatility, SvParams};

use crate::error::{Error, Result};
use crate::model::{validate, Dataset, DlmConfig, PosteriorDraws, Shrinkage, Validated};
use crate::solver::difference::difference;

/// Full state of one Gibbs chain.
#[derive(Debug, Clone)]
pub struct SamplerState {
    pub beta: Array2<f64>,
    /// Log observation-noise variances.
    pub h_eps: Vec<f64>,
    pub sv: SvParams,
    /// One evolution-variance state per predictor series.
    pub shrinkage: Vec<ShrinkageState>,
    pub alpha: Array1<f64>,
    pub outlier: Option<OutlierState>,
    pub rng: ChaCha8Rng,
}

impl SamplerState {
    /// Starting state: `beta` is the smoothing fit with unit variances, every
    /// variance process sits at its prior mean and `alpha = 0`.
    pub fn initial(v: Validated<'_>) -> Result<Self> {
        let (ds, cfg) = (v.dataset, v.config);
        let (n, p) = (ds.n(), ds.p());
        let d = cfg.order;
        let mut state_var = Array2::ones((n, p));
        state_var
            .slice_mut(ndarray::s![..d, ..])
            .fill(cfg.initial_state_var);
        let y = ds.y.to_vec();
        let ones = vec![1.0; n];
        let beta = conditional_mean(&StateSpace {
            x: ds.x.view(),
            target: &y,
            obs_var: &ones,
            state_var: state_var.view(),
            order: d,
        })?;
        let sv = SvParams::from_priors(&cfg.sv_priors);
        let h0 = if cfg.sv_noise { sv.mu } else { 0.0 };
        let shrinkage = (0..p)
            .map(|_| ShrinkageState::initial(cfg.shrinkage, n - d, n, &cfg.dsp))
            .collect();
        let outlier = cfg
            .outlier_term
            .then(|| OutlierState::new(n, cfg.outlier_global_scale.unwrap_or(1.0 / n as f64)));
        Ok(Self {
            beta,
            h_eps: vec![h0; n],
            sv,
            shrinkage,
            alpha: Array1::zeros(ds.l()),
            outlier,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        })
    }

    /// One full sweep: beta, zeta, alpha, observation noise, evolution variances.
    pub fn sweep(&mut self, ds: &Dataset, cfg: &DlmConfig) -> Result<()> {
        let (n, p) = (ds.n(), ds.p());
        let d = cfg.order;
        let obs_var: Vec<f64> = self.h_eps.iter().map(|h| h.exp()).collect();
        let cov_fit: Vec<f64> = if ds.l() > 0 {
            ds.covariates.dot(&self.alpha).to_vec()
        } else {
            vec![0.0; n]
        };
        let zeta = |o: &Option<OutlierState>, t: usize| o.as_ref().map_or(0.0, |o| o.zeta[t]);

        let target: Vec<f64> = (0..n)
            .map(|t| ds.y[t] - cov_fit[t] - zeta(&self.outlier, t))
            .collect();
        let mut state_var = Array2::zeros((n, p));
        for t in 0..n {
            for j in 0..p {
                state_var[[t, j]] = if t < d {
                    cfg.initial_state_var
                } else {
                    self.shrinkage[j].variance(t - d)
                };
            }
        }
        self.beta = ffbs_draw(
            &mut self.rng,
            &StateSpace {
                x: ds.x.view(),
                target: &target,
                obs_var: &obs_var,
                state_var: state_var.view(),
                order: d,
            },
        )?;
        let fit: Vec<f64> = (0..n).map(|t| ds.x.row(t).dot(&self.beta.row(t))).collect();

        if let Some(o) = self.outlier.as_mut() {
            let r: Vec<f64> = (0..n).map(|t| ds.y[t] - fit[t] - cov_fit[t]).collect();
            sample_outlier(&mut self.rng, &r, &obs_var, o)?;
        }

        if ds.l() > 0 {
            let r: Vec<f64> = (0..n)
                .map(|t| ds.y[t] - fit[t] - zeta(&self.outlier, t))
                .collect();
            self.alpha = sample_alpha(
                &mut self.rng,
                ds.covariates.view(),
                &r,
                &obs_var,
                cfg.alpha_prior_var,
            )?;
        }
        let cov_fit: Vec<f64> = if ds.l() > 0 {
            ds.covariates.dot(&self.alpha).to_vec()
        } else {
            vec![0.0; n]
        };

        let resid: Vec<f64> = (0..n)
            .map(|t| ds.y[t] - fit[t] - cov_fit[t] - zeta(&self.outlier, t))
            .collect();
        if cfg.sv_noise {
            sample_stochastic_volatility(
                &mut self.rng,
                &resid,
                &mut self.h_eps,
                &mut self.sv,
                &cfg.sv_priors,
            )?;
        } else {
            sample_constant_variance(&mut self.rng, &resid, &mut self.h_eps);
        }
        if self
            .h_eps
            .iter()
            .any(|h| !h.exp().is_finite() || h.exp() <= 0.0)
        {
            return Err(Error::Numeric("observation variance left (0, inf)".into()));
        }

        for j in 0..p {
            let col = self.beta.column(j).to_vec();
            let inc = &difference(d, &col)[d..];
            match cfg.shrinkage {
                Shrinkage::DynamicShrinkage => sample_dynamic_shrinkage(
                    &mut self.rng,
                    inc,
                    &mut self.shrinkage[j],
                    &cfg.dsp,
                    n,
                )?,
                Shrinkage::RandomWalkConstantVariance => {
                    sample_rw_variance(&mut self.rng, inc, &mut self.shrinkage[j], cfg.rw_scale)?
                }
            }
        }
        Ok(())
    }
}

/// Runs `n_burn` discarded and `n_save` retained sweeps.
pub fn run_gibbs(dataset: &Dataset, config: &DlmConfig) -> Result<PosteriorDraws> {
    let v = validate(dataset, config)?;
    let (n, p, l) = (dataset.n(), dataset.p(), dataset.l());
    let d = config.order;
    let s = config.n_save;
    let mut state = SamplerState::initial(v)?;

    let mut beta = Array3::zeros((s, n, p));
    let mut sigma2 = Array2::zeros((s, n));
    let mut alpha = Array2::zeros((s, l));
    let mut zeta = config.outlier_term.then(|| Array2::zeros((s, n)));
    let mut h = (config.shrinkage == Shrinkage::DynamicShrinkage).then(|| Array3::zeros((s, n, p)));

    for sweep in 0..config.n_burn + s {
        state.sweep(dataset, config).map_err(|e| Error::Sweep {
            sweep,
            source: Box::new(e),
        })?;
        let Some(i) = sweep.checked_sub(config.n_burn) else {
            continue;
        };
        beta.index_axis_mut(Axis(0), i).assign(&state.beta);
        for t in 0..n {
            sigma2[[i, t]] = state.h_eps[t].exp();
        }
        alpha.row_mut(i).assign(&state.alpha);
        if let (Some(z), Some(o)) = (zeta.as_mut(), state.outlier.as_ref()) {
            z.row_mut(i).assign(&ndarray::ArrayView1::from(&o.zeta));
        }
        if let Some(h) = h.as_mut() {
            for j in 0..p {
                for t in d..n {
                    h[[i, t, j]] = state.shrinkage[j].h[t - d];
                }
            }
        }
    }
    let draws = PosteriorDraws {
        beta,
        sigma2_eps: sigma2,
        alpha,
        zeta,
        h,
    };
    draws.check()?;
    Ok(draws)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::dist::std_normal;
    use ndarray::Array1;

    fn step_data(seed: u64) -> (Dataset, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth: Vec<f64> = (0..200).map(|t| if t < 100 { 0.0 } else { 1.0 }).collect();
        let y: Array1<f64> = truth.iter().map(|m| m + std_normal(&mut rng)).collect();
        (Dataset::mean_change(y).unwrap(), truth)
    }

    fn small_config(seed: u64) -> DlmConfig {
        DlmConfig {
            n_burn: 300,
            n_save: 300,
            seed,
            ..DlmConfig::default()
        }
    }

    #[test]
    fn same_seed_gives_identical_draws() {
        let (ds, _) = step_data(1);
        let cfg = DlmConfig {
            n_burn: 20,
            n_save: 100,
            outlier_term: true,
            ..small_config(5)
        };
        assert_eq!(run_gibbs(&ds, &cfg).unwrap(), run_gibbs(&ds, &cfg).unwrap());
    }

    #[test]
    fn zero_saved_draws_is_rejected() {
        let (ds, _) = step_data(1);
        let cfg = DlmConfig {
            n_save: 0,
            ..small_config(0)
        };
        assert!(matches!(run_gibbs(&ds, &cfg), Err(Error::Validation(_))));
    }

    #[test]
    fn posterior_mean_tracks_the_step() {
        let (ds, truth) = step_data(2);
        let draws = run_gibbs(
            &ds,
            &DlmConfig {
                n_burn: 1000,
                n_save: 1000,
                ..small_config(3)
            },
        )
        .unwrap();
        let mean = draws.beta_mean();
        let close = (0..200)
            .filter(|&t| (mean[[t, 0]] - truth[t]).abs() <= 0.3)
            .count();
        assert!(close >= 180, "{close} of 200 within 0.3");
        assert!(draws.sigma2_eps.iter().all(|v| *v > 0.0 && v.is_finite()));
    }

    #[test]
    fn disabled_outlier_term_stores_no_zeta() {
        let (ds, _) = step_data(3);
        let draws = run_gibbs(
            &ds,
            &DlmConfig {
                n_burn: 10,
                n_save: 100,
                ..small_config(1)
            },
        )
        .unwrap();
        assert!(draws.zeta.is_none());
    }

    #[test]
    fn constant_variance_random_walk_has_time_constant_state_variance() {
        let (ds, _) = step_data(4);
        let cfg = DlmConfig {
            shrinkage: Shrinkage::RandomWalkConstantVariance,
            sv_noise: false,
            n_burn: 10,
            n_save: 100,
            ..small_config(2)
        };
        let v = validate(&ds, &cfg).unwrap();
        let mut st = SamplerState::initial(v).unwrap();
        for _ in 0..50 {
            st.sweep(&ds, &cfg).unwrap();
            let h = &st.shrinkage[0].h;
            assert!(h.iter().all(|x| *x == h[0]));
            assert!(st.h_eps.iter().all(|x| *x == st.h_eps[0]));
        }
    }
}
