//! Domain types shared across the pipeline: input data, sampler configuration,
//! posterior draws, group structure, solution paths and reports.
//!
//! Time indices are stored 0-based. Reports convert to 1-based positions, where a
//! changepoint at `t` means the segment boundary sits between `t - 1` and `t`.

use ndarray::{Array1, Array2, Array3, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Response series with its time-varying predictors and static covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    /// Response `y_t`, length `n`.
    pub y: Array1<f64>,
    /// Predictor series, `n x p`; column `j` is series `j`.
    pub x: Array2<f64>,
    /// Static covariates, `n x l` (possibly `l = 0`).
    pub covariates: Array2<f64>,
    /// Optional labels for each time step, used in reports.
    pub time_labels: Option<Vec<String>>,
}

impl Dataset {
    /// Builds a dataset, rejecting dimension mismatches and non-finite values.
    pub fn new(
        y: Array1<f64>,
        x: Array2<f64>,
        covariates: Array2<f64>,
        time_labels: Option<Vec<String>>,
    ) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::Validation("empty response series".into()));
        }
        if x.nrows() != n {
            return Err(Error::Validation(format!(
                "predictor matrix has {} rows, response has {n}",
                x.nrows()
            )));
        }
        if x.ncols() == 0 {
            return Err(Error::Validation(
                "at least one predictor series is required".into(),
            ));
        }
        if covariates.nrows() != n {
            return Err(Error::Validation(format!(
                "covariate matrix has {} rows, response has {n}",
                covariates.nrows()
            )));
        }
        if let Some(labels) = &time_labels {
            if labels.len() != n {
                return Err(Error::Validation(format!(
                    "{} time labels for {n} observations",
                    labels.len()
                )));
            }
        }
        if let Some(t) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::MissingValue {
                column: "y".into(),
                t: t + 1,
            });
        }
        for (j, col) in x.axis_iter(Axis(1)).enumerate() {
            if let Some(t) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::MissingValue {
                    column: format!("x{}", j + 1),
                    t: t + 1,
                });
            }
        }
        for (j, col) in covariates.axis_iter(Axis(1)).enumerate() {
            if let Some(t) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::MissingValue {
                    column: format!("z{}", j + 1),
                    t: t + 1,
                });
            }
        }
        Ok(Self {
            y,
            x,
            covariates,
            time_labels,
        })
    }

    /// Change-in-mean dataset: a single all-ones predictor and no covariates.
    pub fn mean_change(y: Array1<f64>) -> Result<Self> {
        let n = y.len();
        Self::new(y, Array2::ones((n, 1)), Array2::zeros((n, 0)), None)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn l(&self) -> usize {
        self.covariates.ncols()
    }

    /// 1-based label for time index `t` (0-based): the supplied label if any.
    pub fn label(&self, t: usize) -> String {
        match &self.time_labels {
            Some(labels) => labels[t].clone(),
            None => (t + 1).to_string(),
        }
    }
}

/// Evolution model for the `D`-th differences of the coefficient paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shrinkage {
    /// Gaussian increments with one (time-constant) variance per series.
    RandomWalkConstantVariance,
    /// Dynamic shrinkage process on the log increment variances.
    DynamicShrinkage,
}

/// Priors for the SV(1) log-variance process of the observation noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvPriors {
    pub mu_mean: f64,
    pub mu_var: f64,
    /// `phi ~ Beta(phi_a, phi_b)` on `(0, 1)`.
    pub phi_a: f64,
    pub phi_b: f64,
    /// `sigma_eta^2 ~ Gamma(shape, rate)`.
    pub sigma2_shape: f64,
    pub sigma2_rate: f64,
}

impl Default for SvPriors {
    fn default() -> Self {
        Self {
            mu_mean: 0.0,
            mu_var: 100.0,
            phi_a: 5.0,
            phi_b: 1.5,
            sigma2_shape: 0.5,
            sigma2_rate: 0.5,
        }
    }
}

/// Hyperparameters of the dynamic shrinkage process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DspConfig {
    /// Parameters `(a, b, mu, sigma)` of the Z-distributed innovations. Only
    /// `(0.5, 0.5, 0, 1)` is supported by the Polya-Gamma augmentation.
    pub z_params: [f64; 4],
    /// Prior mean of the AR(1) level; `None` means `log(1 / n)`.
    pub ar_mean_prior_mean: Option<f64>,
    pub ar_mean_prior_var: f64,
    /// `(phi + 1) / 2 ~ Beta(a, b)`.
    pub ar_persistence_prior: (f64, f64),
}

impl Default for DspConfig {
    fn default() -> Self {
        Self {
            z_params: [0.5, 0.5, 0.0, 1.0],
            ar_mean_prior_mean: None,
            ar_mean_prior_var: 10.0,
            ar_persistence_prior: (10.0, 2.0),
        }
    }
}

/// Full configuration of the Bayesian DLM and its Gibbs sampler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DlmConfig {
    /// Difference order `D` of the coefficient evolution (1 or 2).
    pub order: usize,
    pub shrinkage: Shrinkage,
    /// SV(1) observation noise; constant variance when false.
    pub sv_noise: bool,
    /// Additive outlier component with a horseshoe+ variance.
    pub outlier_term: bool,
    pub n_burn: usize,
    pub n_save: usize,
    pub seed: u64,
    pub sv_priors: SvPriors,
    /// Prior variance of each covariate coefficient.
    pub alpha_prior_var: f64,
    pub dsp: DspConfig,
    /// Prior variance of the first `D` coefficient states.
    pub initial_state_var: f64,
    /// Half-Cauchy scale for the constant random-walk standard deviation.
    pub rw_scale: f64,
    /// Half-Cauchy scale of the outlier component's global scale; `None` means `1 / n`.
    pub outlier_global_scale: Option<f64>,
}

impl Default for DlmConfig {
    fn default() -> Self {
        Self {
            order: 1,
            shrinkage: Shrinkage::DynamicShrinkage,
            sv_noise: true,
            outlier_term: false,
            n_burn: 5000,
            n_save: 5000,
            seed: 0,
            sv_priors: SvPriors::default(),
            alpha_prior_var: 1000.0 * 1000.0,
            dsp: DspConfig::default(),
            initial_state_var: 1.0e6,
            rw_scale: 1.0,
            outlier_global_scale: None,
        }
    }
}

impl DlmConfig {
    /// Checks the configuration's own invariants.
    pub fn check(&self) -> Result<()> {
        if !(1..=2).contains(&self.order) {
            return Err(Error::Validation(format!(
                "difference order must be 1 or 2, got {}",
                self.order
            )));
        }
        if self.n_save < MIN_SAVED_DRAWS {
            return Err(Error::Validation(format!(
                "n_save must be at least {MIN_SAVED_DRAWS}, got {}",
                self.n_save
            )));
        }
        let p = &self.sv_priors;
        let positive = [
            ("sv_priors.mu_var", p.mu_var),
            ("sv_priors.phi_a", p.phi_a),
            ("sv_priors.phi_b", p.phi_b),
            ("sv_priors.sigma2_shape", p.sigma2_shape),
            ("sv_priors.sigma2_rate", p.sigma2_rate),
            ("alpha_prior_var", self.alpha_prior_var),
            ("dsp.ar_mean_prior_var", self.dsp.ar_mean_prior_var),
            (
                "dsp.ar_persistence_prior.0",
                self.dsp.ar_persistence_prior.0,
            ),
            (
                "dsp.ar_persistence_prior.1",
                self.dsp.ar_persistence_prior.1,
            ),
            ("initial_state_var", self.initial_state_var),
            ("rw_scale", self.rw_scale),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Validation(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if let Some(s) = self.outlier_global_scale {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::Validation(format!(
                    "outlier_global_scale must be positive and finite, got {s}"
                )));
            }
        }
        if let Some(m) = self.dsp.ar_mean_prior_mean {
            if !m.is_finite() {
                return Err(Error::Validation(
                    "dsp.ar_mean_prior_mean must be finite".into(),
                ));
            }
        }
        if self.dsp.z_params != [0.5, 0.5, 0.0, 1.0] {
            return Err(Error::Validation(format!(
                "only Z(0.5, 0.5, 0, 1) innovations are supported, got {:?}",
                self.dsp.z_params
            )));
        }
        Ok(())
    }
}

/// Smallest retained draw count accepted by [`DlmConfig::check`].
pub const MIN_SAVED_DRAWS: usize = 100;

/// Minimum series length for difference order `order`.
pub fn min_length(order: usize) -> usize {
    2 * order + 2
}

/// Proof that a dataset and configuration passed [`validate`].
#[derive(Debug, Clone, Copy)]
pub struct Validated<'a> {
    pub dataset: &'a Dataset,
    pub config: &'a DlmConfig,
}

/// Checks every type invariant of the inputs to the sampler.
pub fn validate<'a>(dataset: &'a Dataset, config: &'a DlmConfig) -> Result<Validated<'a>> {
    config.check()?;
    // Re-run the dataset checks; fields are public and may have been mutated.
    Dataset::new(
        dataset.y.clone(),
        dataset.x.clone(),
        dataset.covariates.clone(),
        dataset.time_labels.clone(),
    )?;
    let n = dataset.n();
    let min = min_length(config.order);
    if n < min {
        return Err(Error::SeriesTooShort {
            n,
            order: config.order,
            min,
        });
    }
    Ok(Validated { dataset, config })
}

/// Retained MCMC output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraws {
    /// Coefficient paths, `draws x n x p`.
    pub beta: Array3<f64>,
    /// Observation noise variances, `draws x n`.
    pub sigma2_eps: Array2<f64>,
    /// Covariate coefficients, `draws x l`.
    pub alpha: Array2<f64>,
    /// Outlier component, `draws x n`, when enabled.
    pub zeta: Option<Array2<f64>>,
    /// Log-variances of the coefficient increments, `draws x n x p`, for the
    /// dynamic shrinkage model (entries `t < D` are unused and set to 0).
    pub h: Option<Array3<f64>>,
}

impl PosteriorDraws {
    pub fn n_draws(&self) -> usize {
        self.beta.len_of(Axis(0))
    }

    pub fn n(&self) -> usize {
        self.beta.len_of(Axis(1))
    }

    pub fn p(&self) -> usize {
        self.beta.len_of(Axis(2))
    }

    /// Checks dimensional consistency and strict positivity of the variances.
    pub fn check(&self) -> Result<()> {
        let (s, n, p) = self.beta.dim();
        if s == 0 {
            return Err(Error::Validation("posterior has no draws".into()));
        }
        if self.sigma2_eps.dim() != (s, n) {
            return Err(Error::Validation(
                "sigma2_eps dimensions disagree with beta".into(),
            ));
        }
        if self.alpha.nrows() != s {
            return Err(Error::Validation(
                "alpha draw count disagrees with beta".into(),
            ));
        }
        if let Some(z) = &self.zeta {
            if z.dim() != (s, n) {
                return Err(Error::Validation(
                    "zeta dimensions disagree with beta".into(),
                ));
            }
        }
        if let Some(h) = &self.h {
            if h.dim() != (s, n, p) {
                return Err(Error::Validation("h dimensions disagree with beta".into()));
            }
        }
        if self.sigma2_eps.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Validation(
                "sigma2_eps must be strictly positive and finite".into(),
            ));
        }
        Ok(())
    }

    /// Posterior mean of the coefficient paths, `n x p`.
    pub fn beta_mean(&self) -> Array2<f64> {
        self.beta.mean_axis(Axis(0)).expect("at least one draw")
    }

    /// Posterior mean of the covariate coefficients, length `l`.
    pub fn alpha_mean(&self) -> Array1<f64> {
        if self.alpha.ncols() == 0 {
            return Array1::zeros(0);
        }
        self.alpha.mean_axis(Axis(0)).expect("at least one draw")
    }
}

/// Partition of the predictor indices `0..p` into groups sharing changepoints.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSpec {
    groups: Vec<Vec<usize>>,
    p: usize,
}

impl GroupSpec {
    /// Validates that `groups` partitions `0..p` into nonempty disjoint sets.
    pub fn new(groups: Vec<Vec<usize>>, p: usize) -> Result<Self> {
        let mut seen = vec![false; p];
        for g in &groups {
            if g.is_empty() {
                return Err(Error::Validation("empty predictor group".into()));
            }
            for &j in g {
                if j >= p {
                    return Err(Error::Validation(format!(
                        "group member {j} out of range for p={p}"
                    )));
                }
                if seen[j] {
                    return Err(Error::Validation(format!(
                        "predictor {j} appears in two groups"
                    )));
                }
                seen[j] = true;
            }
        }
        if let Some(j) = seen.iter().position(|s| !s) {
            return Err(Error::Validation(format!(
                "predictor {j} is not in any group"
            )));
        }
        Ok(Self { groups, p })
    }

    /// Every predictor in its own group.
    pub fn singletons(p: usize) -> Self {
        Self {
            groups: (0..p).map(|j| vec![j]).collect(),
            p,
        }
    }

    /// All predictors in one group (joint changepoints).
    pub fn joint(p: usize) -> Self {
        Self {
            groups: vec![(0..p).collect()],
            p,
        }
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Group index of predictor `j`.
    pub fn group_of(&self, j: usize) -> usize {
        self.groups
            .iter()
            .position(|g| g.contains(&j))
            .expect("validated partition")
    }
}

/// A nonzero `D`-th difference block: time `t` (0-based, `t >= D`) in group `group`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ActiveBlock {
    pub t: usize,
    pub group: usize,
}

/// Penalized fits over a decreasing grid of penalty values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionPath {
    pub order: usize,
    pub groups: GroupSpec,
    /// Decreasing penalty grid.
    pub lambdas: Vec<f64>,
    /// Fitted coefficient paths per penalty value, each `n x p`.
    pub fits: Vec<Array2<f64>>,
    /// Fitted covariate coefficients per penalty value, each length `l`.
    pub alpha_fits: Vec<Array1<f64>>,
    /// Active difference blocks per penalty value, sorted.
    pub active_sets: Vec<Vec<ActiveBlock>>,
    /// Objective value per penalty value.
    pub objective: Vec<f64>,
    /// Per-time weights `w_t`.
    pub weights: Array1<f64>,
    /// Posterior mean `D`-th differences, `n x p` (rows `t < D` are zero).
    pub psi: Array2<f64>,
    /// Floored group normalizers, `n x G`.
    pub group_psi: Array2<f64>,
}

impl SolutionPath {
    /// Number of active blocks at path position `k`.
    pub fn count(&self, k: usize) -> usize {
        self.active_sets[k].len()
    }
}

/// Projection of every posterior draw onto a changepoint configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectedSummary {
    /// Changepoints per series (0-based `t >= D`), sorted.
    pub eta: Vec<Vec<usize>>,
    /// Projected coefficient paths, `draws x n x p`.
    pub projected: Array3<f64>,
    /// `R^2_eta` per draw.
    pub r2_samples: Vec<f64>,
    /// Quantiles of `R^2_eta` at 0.05, 0.5 and 0.95.
    pub r2_quantiles: [f64; 3],
    /// Time-mean of each draw, `draws x p`.
    pub draw_means: Array2<f64>,
}

/// One row of the per-count `R^2` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct R2Row {
    pub count: usize,
    pub lambda: f64,
    pub q05: f64,
    pub median: f64,
    pub q95: f64,
    /// Upper end of the central `ci_level` credible interval.
    pub upper: f64,
}

/// Detection scores against a known truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricBlock {
    pub rand: f64,
    pub adjusted_rand: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Final output of changepoint selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangepointReport {
    pub selected_count: usize,
    /// Selected changepoints per group, 1-based.
    pub selected_eta: Vec<Vec<usize>>,
    /// Union of all groups' changepoints, 1-based, sorted.
    pub changepoints: Vec<usize>,
    /// Labels of `changepoints` when the dataset carries time labels.
    pub changepoint_labels: Vec<String>,
    pub selected_lambda: f64,
    pub threshold: f64,
    pub ci_level: f64,
    /// Set when no count reached the threshold and the largest was returned.
    pub threshold_not_reached: bool,
    pub r2_table: Vec<R2Row>,
    /// Mean of the selected projected posterior, `n x p`.
    pub projected_mean: Array2<f64>,
    /// Lower and upper central `ci_level` band of the projected posterior.
    pub band_lower: Array2<f64>,
    pub band_upper: Array2<f64>,
    pub metrics: Option<MetricBlock>,
}
