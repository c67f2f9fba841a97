//! Projected posterior and changepoint-count selection.
//!
//! Each posterior draw of a coefficient series is projected, by unweighted least
//! squares, onto the span of the first `D` inverse-difference columns plus the
//! columns at the candidate changepoints. The weighted share of the draw's
//! variation that survives the projection, `R^2`, summarizes how well a
//! changepoint set explains the posterior; the selected count is the smallest one
//! whose credible upper bound on `R^2` clears a threshold.

use ndarray::{Array2, Array3, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::linalg::HouseholderQr;
use crate::model::{
    ActiveBlock, ChangepointReport, Dataset, GroupSpec, PosteriorDraws, ProjectedSummary, R2Row,
    SolutionPath,
};
use crate::par::{map_indexed, Exec};
use crate::solver::difference::basis_column;

/// Projects one series onto columns `{0..D-1} ∪ eta` of the inverse difference matrix.
pub fn project_series(
    series: ArrayView1<'_, f64>,
    eta: &[usize],
    order: usize,
) -> Result<Vec<f64>> {
    let n = series.len();
    let mut cols: Vec<usize> = (0..order).collect();
    for &k in eta {
        if k < order || k >= n {
            return Err(Error::Validation(format!(
                "changepoint index {k} outside {order}..{n}"
            )));
        }
        cols.push(k);
    }
    cols.sort_unstable();
    cols.dedup();
    if order == 1 {
        // Piecewise-constant fit: segment means.
        let mut out = vec![0.0; n];
        let mut bounds = cols.clone();
        bounds.push(n);
        for w in bounds.windows(2) {
            let seg = series.slice(ndarray::s![w[0]..w[1]]);
            let m = seg.sum() / seg.len() as f64;
            out[w[0]..w[1]].iter_mut().for_each(|v| *v = m);
        }
        return Ok(out);
    }
    let mut a = Vec::with_capacity(n * cols.len());
    for &k in &cols {
        let c = basis_column(order, k);
        a.extend((0..n).map(|t| c.at(t)));
    }
    let qr = HouseholderQr::new(a, n, cols.len())?;
    Ok(qr.project(&series.to_vec()))
}

/// Projects an `n x p` draw; `eta[j]` holds the changepoints of series `j`.
pub fn project_draw(
    beta: ArrayView2<'_, f64>,
    eta: &[Vec<usize>],
    order: usize,
) -> Result<Array2<f64>> {
    let (n, p) = beta.dim();
    if eta.len() != p {
        return Err(Error::Validation(format!(
            "{} changepoint sets for {p} series",
            eta.len()
        )));
    }
    let mut out = Array2::zeros((n, p));
    for j in 0..p {
        let proj = project_series(beta.column(j), &eta[j], order)?;
        out.column_mut(j).assign(&ArrayView1::from(&proj));
    }
    Ok(out)
}

/// Per-series changepoint sets implied by group-level sets.
pub fn series_eta(eta_groups: &[Vec<usize>], groups: &GroupSpec) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); groups.p()];
    for (g, members) in groups.groups().iter().enumerate() {
        for &j in members {
            out[j] = eta_groups[g].clone();
        }
    }
    out
}

/// Group-level changepoint sets of an active set.
pub fn eta_of_active(active: &[ActiveBlock], n_groups: usize) -> Vec<Vec<usize>> {
    let mut eta = vec![Vec::new(); n_groups];
    for b in active {
        eta[b.group].push(b.t);
    }
    eta.iter_mut().for_each(|e| e.sort_unstable());
    eta
}

/// `R^2 = 1 - sum w (f - f_eta)^2 / sum w (f - f_mu)^2` with `f = x' beta`,
/// `f_eta = x' beta_eta`, `f_mu = x' mu` and `mu` the per-series time mean of
/// the draw. A zero denominator yields 1.
pub fn r2_value(
    x: ArrayView2<'_, f64>,
    beta: ArrayView2<'_, f64>,
    projected: ArrayView2<'_, f64>,
    weights: &[f64],
) -> f64 {
    let (n, p) = beta.dim();
    let mu = beta.mean_axis(Axis(0)).expect("nonempty");
    let (mut num, mut den) = (0.0, 0.0);
    for t in 0..n {
        let (mut e, mut c) = (0.0, 0.0);
        for j in 0..p {
            e += x[[t, j]] * (beta[[t, j]] - projected[[t, j]]);
            c += x[[t, j]] * (beta[[t, j]] - mu[j]);
        }
        num += weights[t] * e * e;
        den += weights[t] * c * c;
    }
    if den == 0.0 {
        1.0
    } else {
        1.0 - num / den
    }
}

/// `R^2` of every draw for a fixed changepoint configuration, without storing
/// the projections.
pub fn r2_distribution(
    draws: &PosteriorDraws,
    x: ArrayView2<'_, f64>,
    weights: &[f64],
    eta: &[Vec<usize>],
    order: usize,
    exec: Exec,
) -> Result<Vec<f64>> {
    let out = map_indexed(exec, draws.n_draws(), |i| {
        let b = draws.beta.index_axis(Axis(0), i);
        project_draw(b, eta, order).map(|pr| r2_value(x, b, pr.view(), weights))
    });
    out.into_iter().collect()
}

/// Stores every projected draw together with its `R^2`.
pub fn project_posterior(
    draws: &PosteriorDraws,
    x: ArrayView2<'_, f64>,
    weights: &[f64],
    eta: &[Vec<usize>],
    order: usize,
    exec: Exec,
) -> Result<ProjectedSummary> {
    let (s, n, p) = draws.beta.dim();
    let per: Vec<Result<(Array2<f64>, f64)>> = map_indexed(exec, s, |i| {
        let b = draws.beta.index_axis(Axis(0), i);
        let pr = project_draw(b, eta, order)?;
        let r2 = r2_value(x, b, pr.view(), weights);
        Ok((pr, r2))
    });
    let mut projected = Array3::zeros((s, n, p));
    let mut r2 = Vec::with_capacity(s);
    for (i, r) in per.into_iter().enumerate() {
        let (pr, v) = r?;
        projected.index_axis_mut(Axis(0), i).assign(&pr);
        r2.push(v);
    }
    let draw_means = draws.beta.mean_axis(Axis(1)).expect("nonempty");
    let r2_quantiles = [quantile(&r2, 0.05), quantile(&r2, 0.5), quantile(&r2, 0.95)];
    Ok(ProjectedSummary {
        eta: eta.to_vec(),
        projected,
        r2_samples: r2,
        r2_quantiles,
        draw_means,
    })
}

/// Type-7 sample quantile (linear interpolation between order statistics).
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, q)
}

pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "quantile of an empty sample");
    let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectOptions {
    pub threshold: f64,
    /// Central credible level; the criterion uses the interval's upper end.
    pub ci_level: f64,
    /// Counts evaluated beyond the selected one (for the `R^2` table); `None`
    /// evaluates every distinct count on the path.
    pub lookahead: Option<usize>,
    pub exec: Exec,
}

impl Default for SelectOptions {
    fn default() -> Self {
        Self {
            threshold: 0.9,
            ci_level: 0.9,
            lookahead: Some(5),
            exec: Exec::Parallel,
        }
    }
}

/// Path positions of the distinct changepoint counts, in increasing count order;
/// each count keeps its largest penalty.
pub fn distinct_counts(path: &SolutionPath) -> Vec<(usize, usize)> {
    let mut seen: Vec<(usize, usize)> = Vec::new();
    for k in 0..path.lambdas.len() {
        let c = path.count(k);
        if !seen.iter().any(|(cc, _)| *cc == c) {
            seen.push((c, k));
        }
    }
    seen.sort_unstable();
    seen
}

/// Picks the smallest changepoint count whose upper credible `R^2` bound exceeds
/// the threshold and summarizes its projected posterior.
pub fn select_changepoints(
    path: &SolutionPath,
    draws: &PosteriorDraws,
    dataset: &Dataset,
    opts: &SelectOptions,
) -> Result<ChangepointReport> {
    if path.lambdas.is_empty() {
        return Err(Error::Validation("empty solution path".into()));
    }
    if draws.n() != dataset.n() || draws.p() != dataset.p() || path.groups.p() != dataset.p() {
        return Err(Error::Validation(
            "solution path, draws and dataset disagree".into(),
        ));
    }
    if !(opts.ci_level > 0.0 && opts.ci_level < 1.0) {
        return Err(Error::Validation(format!(
            "ci_level must lie in (0, 1), got {}",
            opts.ci_level
        )));
    }
    let lower_q = 0.5 * (1.0 - opts.ci_level);
    let upper_q = 1.0 - lower_q;
    let w = path.weights.to_vec();
    let x = dataset.x.view();

    let mut table = Vec::new();
    let mut selected: Option<usize> = None;
    let counts = distinct_counts(path);
    for (pos, &(count, k)) in counts.iter().enumerate() {
        if let (Some(s), Some(extra)) = (selected, opts.lookahead) {
            if pos > s + extra {
                break;
            }
        }
        let eta = series_eta(
            &eta_of_active(&path.active_sets[k], path.groups.len()),
            &path.groups,
        );
        let mut r2 = r2_distribution(draws, x, &w, &eta, path.order, opts.exec)?;
        r2.sort_by(f64::total_cmp);
        let row = R2Row {
            count,
            lambda: path.lambdas[k],
            q05: quantile_sorted(&r2, 0.05),
            median: quantile_sorted(&r2, 0.5),
            q95: quantile_sorted(&r2, 0.95),
            upper: quantile_sorted(&r2, upper_q),
        };
        if selected.is_none() && row.upper > opts.threshold {
            selected = Some(pos);
        }
        table.push(row);
    }
    let not_reached = selected.is_none();
    let pos = selected.unwrap_or(counts.len() - 1);
    let (count, k) = counts[pos];
    if not_reached && table.last().map(|r| r.count) != Some(count) {
        // Unreachable with lookahead: every count was evaluated without success.
        return Err(Error::Numeric("selection table is incomplete".into()));
    }

    let eta_groups = eta_of_active(&path.active_sets[k], path.groups.len());
    let eta = series_eta(&eta_groups, &path.groups);
    let summary = project_posterior(draws, x, &w, &eta, path.order, opts.exec)?;
    let (n, p) = (dataset.n(), dataset.p());
    let mut mean = Array2::zeros((n, p));
    let mut lo = Array2::zeros((n, p));
    let mut hi = Array2::zeros((n, p));
    let mut buf = vec![0.0; draws.n_draws()];
    for t in 0..n {
        for j in 0..p {
            for (i, b) in buf.iter_mut().enumerate() {
                *b = summary.projected[[i, t, j]];
            }
            mean[[t, j]] = buf.iter().sum::<f64>() / buf.len() as f64;
            buf.sort_by(f64::total_cmp);
            lo[[t, j]] = quantile_sorted(&buf, lower_q);
            hi[[t, j]] = quantile_sorted(&buf, upper_q);
        }
    }

    let mut changepoints: Vec<usize> = eta_groups.iter().flatten().copied().collect();
    changepoints.sort_unstable();
    changepoints.dedup();
    Ok(ChangepointReport {
        selected_count: count,
        selected_eta: eta_groups
            .iter()
            .map(|e| e.iter().map(|t| t + 1).collect())
            .collect(),
        changepoint_labels: changepoints.iter().map(|&t| dataset.label(t)).collect(),
        changepoints: changepoints.iter().map(|t| t + 1).collect(),
        selected_lambda: path.lambdas[k],
        threshold: opts.threshold,
        ci_level: opts.ci_level,
        threshold_not_reached: not_reached,
        r2_table: table,
        projected_mean: mean,
        band_lower: lo,
        band_upper: hi,
        metrics: None,
    })
}
