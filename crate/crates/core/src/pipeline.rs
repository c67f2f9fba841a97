//! End-to-end detection: posterior draws, weighted penalized path, count selection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    ChangepointReport, Dataset, DlmConfig, GroupSpec, PosteriorDraws, Shrinkage, SolutionPath,
};
use crate::par::Exec;
use crate::projection::{select_changepoints, SelectOptions};
use crate::sampler::run_gibbs;
use crate::solver::{compute_weights, fit_path, solve_with_covariates, PathOptions};

/// How predictor series share changepoints.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupChoice {
    /// Every series changes on its own.
    Singletons,
    /// All series change together.
    Joint,
    /// Explicit 0-based series indices per group.
    Custom(Vec<Vec<usize>>),
}

impl GroupChoice {
    pub fn resolve(&self, p: usize) -> Result<GroupSpec> {
        match self {
            GroupChoice::Singletons => Ok(GroupSpec::singletons(p)),
            GroupChoice::Joint => Ok(GroupSpec::joint(p)),
            GroupChoice::Custom(g) => GroupSpec::new(g.clone(), p),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectOptions {
    pub groups: GroupChoice,
    pub path: PathOptions,
    pub select: SelectOptions,
    /// Include covariates as unpenalized columns when the dataset has any.
    pub use_covariates: bool,
    /// Starting active-set cap for lazy path evaluation. The path is a warm-started
    /// sequence, so a capped path is a prefix of the full one; the cap doubles
    /// until the selection and its lookahead are settled. Ignored when
    /// `path.max_active` is set.
    pub initial_active_cap: Option<usize>,
}

impl Default for DetectOptions {
    fn default() -> Self {
        Self {
            groups: GroupChoice::Joint,
            path: PathOptions::default(),
            select: SelectOptions::default(),
            use_covariates: true,
            initial_active_cap: Some(16),
        }
    }
}

impl DetectOptions {
    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.select.exec = exec;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub path: SolutionPath,
    pub report: ChangepointReport,
}

/// Path and selection for existing posterior draws. `order` is the difference
/// order of the changepoint basis.
pub fn detect(
    draws: &PosteriorDraws,
    dataset: &Dataset,
    order: usize,
    opts: &DetectOptions,
) -> Result<Detection> {
    let groups = opts.groups.resolve(dataset.p())?;
    let weights = compute_weights(draws)?;
    let mut cap = if opts.path.max_active.is_some() {
        None
    } else {
        opts.initial_active_cap
    };
    loop {
        let path_opts = PathOptions {
            max_active: opts.path.max_active.or(cap),
            ..opts.path.clone()
        };
        let path = if opts.use_covariates && dataset.l() > 0 {
            solve_with_covariates(draws, dataset, order, &groups, &weights, &path_opts)?
        } else {
            fit_path(draws, dataset, order, &groups, &weights, &path_opts)?
        };
        let report = select_changepoints(&path, draws, dataset, &opts.select)?;
        // The path stops right after the first solution exceeding the cap.
        let truncated = |c: &usize| path.active_sets.last().is_some_and(|a| a.len() > *c);
        let Some(c) = cap.filter(truncated) else {
            return Ok(Detection { path, report });
        };
        let after = report
            .r2_table
            .iter()
            .filter(|r| r.count > report.selected_count)
            .count();
        let settled =
            !report.threshold_not_reached && opts.select.lookahead.is_some_and(|a| after >= a);
        if settled {
            return Ok(Detection { path, report });
        }
        cap = Some(c.saturating_mul(2));
    }
}

/// Samples the posterior, then detects.
pub fn fit_and_detect(
    dataset: &Dataset,
    config: &DlmConfig,
    opts: &DetectOptions,
) -> Result<(PosteriorDraws, Detection)> {
    let draws = run_gibbs(dataset, config)?;
    let det = detect(&draws, dataset, config.order, opts)?;
    Ok((draws, det))
}

/// Detection methods compared in the benchmarks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    /// Decoupled detection on a dynamic-shrinkage DLM.
    #[serde(rename = "DC-DS")]
    DcDs,
    /// Decoupled detection on a constant-variance random-walk DLM.
    #[serde(rename = "DC-RW")]
    DcRw,
    /// Penalized mean-change segmentation of the raw series.
    #[serde(rename = "PELT")]
    Pelt,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::DcDs, Method::DcRw, Method::Pelt];

    pub fn name(self) -> &'static str {
        match self {
            Method::DcDs => "DC-DS",
            Method::DcRw => "DC-RW",
            Method::Pelt => "PELT",
        }
    }

    /// DLM configuration for a decoupled method. The outlier component is
    /// enabled for pure mean-change data (one all-ones predictor, no covariates).
    pub fn dlm_config(self, base: &DlmConfig, dataset: &Dataset) -> Option<DlmConfig> {
        let shrinkage = match self {
            Method::DcDs => Shrinkage::DynamicShrinkage,
            Method::DcRw => Shrinkage::RandomWalkConstantVariance,
            Method::Pelt => return None,
        };
        let mean_change =
            dataset.p() == 1 && dataset.l() == 0 && dataset.x.iter().all(|v| *v == 1.0);
        Some(DlmConfig {
            shrinkage,
            outlier_term: mean_change,
            ..base.clone()
        })
    }

    /// 1-based changepoints found by the method.
    pub fn run(
        self,
        dataset: &Dataset,
        base: &DlmConfig,
        opts: &DetectOptions,
    ) -> Result<Vec<usize>> {
        match self.dlm_config(base, dataset) {
            Some(cfg) => Ok(fit_and_detect(dataset, &cfg, opts)?.1.report.changepoints),
            None => {
                if dataset.p() != 1 || dataset.l() != 0 || dataset.x.iter().any(|v| *v != 1.0) {
                    return Err(Error::Validation(
                        "PELT applies to mean-change series only".into(),
                    ));
                }
                crate::pelt::pelt_detect(
                    dataset.y.as_slice().expect("contiguous"),
                    &Default::default(),
                )
            }
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Validation(format!("unknown method '{s}'")))
    }
}
