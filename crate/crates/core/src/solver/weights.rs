//! Per-time weights and adaptive penalty normalizers computed from the posterior.

use ndarray::{Array1, Array2, Axis};

use super::difference::difference;
use crate::error::{Error, Result};
use crate::model::{GroupSpec, PosteriorDraws};

/// `w_t = (posterior mean of sigma^2_t)^(-1/2)`.
pub fn compute_weights(draws: &PosteriorDraws) -> Result<Array1<f64>> {
    if draws.n_draws() == 0 {
        return Err(Error::Validation("posterior has no draws".into()));
    }
    let mean = draws.sigma2_eps.mean_axis(Axis(0)).expect("nonempty");
    if mean.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::Numeric(
            "posterior mean noise variance must be positive and finite".into(),
        ));
    }
    Ok(mean.mapv(|v| 1.0 / v.sqrt()))
}

/// Posterior-mean differences and the floored group normalizers.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizers {
    /// `psi[t, j]`: posterior mean of `Delta^D beta_{t,j}`; rows `t < D` are 0.
    pub psi: Array2<f64>,
    /// `group_psi[t, g]`: mean of `|psi[t, j]|` over `j` in group `g`, floored;
    /// rows `t < D` are 0.
    pub group_psi: Array2<f64>,
    /// Floor applied to `group_psi`.
    pub floor: f64,
}

/// Relative floor on the group normalizers.
pub const PSI_FLOOR_RATIO: f64 = 1e-8;

/// Computes `psi` and the grouped normalizers. Differencing is linear, so the
/// posterior mean of the differences is the difference of the posterior mean.
pub fn compute_psi(
    draws: &PosteriorDraws,
    order: usize,
    groups: &GroupSpec,
) -> Result<Normalizers> {
    let (n, p) = (draws.n(), draws.p());
    if groups.p() != p {
        return Err(Error::Validation(format!(
            "group spec covers {} predictors, draws have {p}",
            groups.p()
        )));
    }
    if n <= order {
        return Err(Error::SeriesTooShort {
            n,
            order,
            min: order + 1,
        });
    }
    let mean = draws.beta_mean();
    let mut psi = Array2::zeros((n, p));
    for j in 0..p {
        let d = difference(order, &mean.column(j).to_vec());
        for t in order..n {
            psi[[t, j]] = d[t];
        }
    }
    Ok(group_normalizers(psi, order, groups))
}

/// Group means of `|psi|` with the relative floor.
pub fn group_normalizers(psi: Array2<f64>, order: usize, groups: &GroupSpec) -> Normalizers {
    let n = psi.nrows();
    let max = psi.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let floor = if max > 0.0 {
        PSI_FLOOR_RATIO * max
    } else {
        PSI_FLOOR_RATIO
    };
    let mut group_psi = Array2::zeros((n, groups.len()));
    for (g, members) in groups.groups().iter().enumerate() {
        for t in order..n {
            let m = members.iter().map(|&j| psi[[t, j]].abs()).sum::<f64>() / members.len() as f64;
            group_psi[[t, g]] = m.max(floor);
        }
    }
    Normalizers {
        psi,
        group_psi,
        floor,
    }
}
