//! Solution path of the decoupled loss
//! `0.5 ||W (yhat - A theta)||^2 + lambda sum_b ||theta_b||_2 / psi_b`
//! by cyclic block coordinate descent with warm starts.
//!
//! Each coordinate update uses the maintained gradient `c - G theta` (covariance
//! updates). Coordinate descent in the difference basis is slow to converge on
//! its own because neighbouring columns are nearly collinear, so whenever the
//! support settles an active-set Newton refinement solves the stationarity
//! conditions on the support exactly; the refined point is kept only when it
//! passes the full KKT check and does not increase the objective.

use ndarray::{Array1, Array2};

use super::design::{block_norm, Design};
use super::weights::compute_psi;
use crate::error::{Error, Result};
use crate::linalg::{dense_cholesky, dense_solve_lower, dense_solve_upper, spd_solve};
use crate::model::{ActiveBlock, Dataset, GroupSpec, PosteriorDraws, SolutionPath};

#[derive(Debug, Clone, PartialEq)]
pub struct PathOptions {
    /// Grid size when `lambdas` is not given.
    pub n_lambdas: usize,
    /// Smallest grid value as a fraction of `lambda_max`.
    pub min_ratio: f64,
    /// Explicit decreasing grid; overrides the default log-spaced grid.
    pub lambdas: Option<Vec<f64>>,
    /// Stop the path once more than this many blocks are active.
    pub max_active: Option<usize>,
    /// Relative objective change that ends coordinate descent.
    pub tol: f64,
    /// Coordinate-descent sweep budget per path point.
    pub max_sweeps: usize,
}

impl Default for PathOptions {
    fn default() -> Self {
        Self {
            n_lambdas: 100,
            min_ratio: 1e-4,
            lambdas: None,
            max_active: None,
            tol: 1e-8,
            max_sweeps: 10_000,
        }
    }
}

/// KKT residuals of a candidate solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport {
    /// `max(||g_b|| - lambda / psi_b)` over inactive blocks (`<= 0` when satisfied).
    pub inactive_excess: f64,
    /// `max ||g_b - lambda theta_b / (psi_b ||theta_b||)||` over active blocks.
    pub active_residual: f64,
    /// `max |g_i|` over unpenalized coefficients.
    pub unpenalized_residual: f64,
}

impl KktReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.inactive_excess <= tol
            && self.active_residual <= tol
            && self.unpenalized_residual <= tol
    }
}

/// KKT residuals of `theta` at `lambda`; `g = c - G theta` is the negative loss gradient.
pub fn kkt_check(design: &Design, theta: &[f64], lambda: f64) -> KktReport {
    let g = design.gradient(theta);
    kkt_from_gradient(design, theta, &g, lambda)
}

fn kkt_from_gradient(design: &Design, theta: &[f64], g: &[f64], lambda: f64) -> KktReport {
    let mut rep = KktReport {
        inactive_excess: f64::NEG_INFINITY,
        active_residual: 0.0,
        unpenalized_residual: 0.0,
    };
    for &i in &design.unpenalized {
        rep.unpenalized_residual = rep.unpenalized_residual.max(g[i].abs());
    }
    for b in &design.blocks {
        let nrm = block_norm(theta, &b.members);
        if nrm == 0.0 {
            rep.inactive_excess = rep
                .inactive_excess
                .max(block_norm(g, &b.members) - lambda * b.weight);
        } else {
            let r: f64 = b
                .members
                .iter()
                .map(|&i| {
                    let e = g[i] - lambda * b.weight * theta[i] / nrm;
                    e * e
                })
                .sum::<f64>()
                .sqrt();
            rep.active_residual = rep.active_residual.max(r);
        }
    }
    rep
}

/// Coordinate-descent state for one design.
#[derive(Debug, Clone)]
pub struct CdSolver<'a> {
    design: &'a Design,
    pub theta: Vec<f64>,
    /// `c - G theta`.
    grad: Vec<f64>,
    diag: Vec<f64>,
    /// Gershgorin bound on the largest eigenvalue of each block's Gram matrix.
    block_lip: Vec<f64>,
    /// Sweeps spent at the current path point.
    pub sweeps: usize,
}

impl<'a> CdSolver<'a> {
    pub fn new(design: &'a Design) -> Self {
        let dim = design.dim();
        let diag: Vec<f64> = (0..dim).map(|i| design.gram(i, i)).collect();
        let block_lip = design
            .blocks
            .iter()
            .map(|b| {
                b.members
                    .iter()
                    .map(|&i| {
                        b.members
                            .iter()
                            .map(|&j| design.gram(i, j).abs())
                            .sum::<f64>()
                    })
                    .fold(0.0, f64::max)
            })
            .collect();
        Self {
            design,
            theta: vec![0.0; dim],
            grad: (0..dim).map(|i| design.linear(i)).collect(),
            diag,
            block_lip,
            sweeps: 0,
        }
    }

    pub fn set_theta(&mut self, theta: Vec<f64>) {
        self.grad = self.design.gradient(&theta);
        self.theta = theta;
    }

    pub fn objective(&self, lambda: f64) -> f64 {
        self.design.objective(&self.theta, lambda)
    }

    fn shift(&mut self, i: usize, delta: f64) {
        self.theta[i] += delta;
        for m in 0..self.grad.len() {
            self.grad[m] -= self.design.gram(m, i) * delta;
        }
    }

    /// Exact weighted least-squares fit on the unpenalized columns, all blocks zero.
    pub fn fit_unpenalized(&mut self) -> Result<()> {
        let u = &self.design.unpenalized;
        let k = u.len();
        let mut theta = vec![0.0; self.design.dim()];
        if k > 0 {
            let a: Vec<f64> = (0..k * k)
                .map(|r| self.design.gram(u[r / k], u[r % k]))
                .collect();
            let mut b: Vec<f64> = u.iter().map(|&i| self.design.linear(i)).collect();
            spd_solve(a, k, &mut b)
                .map_err(|e| Error::Numeric(format!("unpenalized columns are collinear: {e}")))?;
            for (&i, v) in u.iter().zip(b) {
                theta[i] = v;
            }
        }
        self.set_theta(theta);
        Ok(())
    }

    /// Smallest penalty at which every block is zero, given the unpenalized fit.
    pub fn lambda_max(&self) -> f64 {
        self.design
            .blocks
            .iter()
            .map(|b| block_norm(&self.grad, &b.members) / b.weight)
            .fold(0.0, f64::max)
    }

    /// One cyclic pass over the unpenalized coefficients and then the blocks;
    /// with `active_only`, blocks currently at zero are skipped.
    pub fn sweep(&mut self, lambda: f64, active_only: bool) {
        let design = self.design;
        for &i in &design.unpenalized {
            if self.diag[i] > 0.0 {
                let delta = self.grad[i] / self.diag[i];
                if delta != 0.0 {
                    self.shift(i, delta);
                }
            }
        }
        for (bi, b) in design.blocks.iter().enumerate() {
            if active_only && block_norm(&self.theta, &b.members) == 0.0 {
                continue;
            }
            let thr = lambda * b.weight;
            if let [i] = b.members[..] {
                let h = self.diag[i];
                if h <= 0.0 {
                    continue;
                }
                let z = h * self.theta[i] + self.grad[i];
                let new = if z > thr {
                    (z - thr) / h
                } else if z < -thr {
                    (z + thr) / h
                } else {
                    0.0
                };
                let delta = new - self.theta[i];
                if delta != 0.0 {
                    self.shift(i, delta);
                }
            } else {
                let lip = self.block_lip[bi];
                if lip <= 0.0 {
                    continue;
                }
                let v: Vec<f64> = b
                    .members
                    .iter()
                    .map(|&i| self.theta[i] + self.grad[i] / lip)
                    .collect();
                let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                let scale = if nv > 0.0 {
                    (1.0 - thr / (lip * nv)).max(0.0)
                } else {
                    0.0
                };
                for (&i, vi) in b.members.iter().zip(&v) {
                    let delta = scale * vi - self.theta[i];
                    if delta != 0.0 {
                        self.shift(i, delta);
                    }
                }
            }
        }
        self.sweeps += 1;
    }

    fn support(&self) -> Vec<bool> {
        self.design
            .blocks
            .iter()
            .map(|b| block_norm(&self.theta, &b.members) > 0.0)
            .collect()
    }

    /// Solves the problem at `lambda` starting from the current coefficients.
    pub fn solve(&mut self, lambda: f64, opts: &PathOptions, lambda_index: usize) -> Result<()> {
        self.sweeps = 0;
        let mut obj = self.objective(lambda);
        if self.try_polish(lambda, &mut obj) {
            return Ok(());
        }
        let converged =
            |prev: f64, obj: f64| (prev - obj).abs() <= opts.tol * obj.abs().max(f64::MIN_POSITIVE);
        loop {
            self.sweep(lambda, false);
            obj = self.objective(lambda);
            loop {
                let prev = obj;
                self.sweep(lambda, true);
                obj = self.objective(lambda);
                if converged(prev, obj) {
                    break;
                }
                if self.sweeps >= opts.max_sweeps {
                    return Err(Error::NoConvergence {
                        lambda_index,
                        iterations: self.sweeps,
                    });
                }
            }
            if self.try_polish(lambda, &mut obj) {
                return Ok(());
            }
            let before = self.support();
            let prev = obj;
            self.sweep(lambda, false);
            obj = self.objective(lambda);
            if before == self.support() && converged(prev, obj) {
                return Ok(());
            }
            if self.sweeps >= opts.max_sweeps {
                return Err(Error::NoConvergence {
                    lambda_index,
                    iterations: self.sweeps,
                });
            }
        }
    }

    fn try_polish(&mut self, lambda: f64, obj: &mut f64) -> bool {
        let Some(theta) = self.polish(lambda) else {
            return false;
        };
        let new = self.design.objective(&theta, lambda);
        if new <= *obj + 1e-12 * obj.abs().max(1.0) {
            self.set_theta(theta);
            *obj = new;
            true
        } else {
            false
        }
    }

    /// Active-set Newton refinement. Returns a KKT-certified solution or `None`.
    fn polish(&self, lambda: f64) -> Option<Vec<f64>> {
        let d = self.design;
        let blocks = &d.blocks;
        let mut theta = self.theta.clone();
        // Sign memory for active singleton blocks; 0 marks inactive.
        let mut sign = vec![0.0; blocks.len()];
        let mut active: Vec<usize> = Vec::new();
        for (bi, b) in blocks.iter().enumerate() {
            if block_norm(&theta, &b.members) > 0.0 {
                active.push(bi);
                if let [i] = b.members[..] {
                    sign[bi] = theta[i].signum();
                }
            }
        }
        let scale = (0..d.dim()).map(|i| d.linear(i).abs()).fold(1.0, f64::max);
        let tol = 1e-11 * scale;
        let max_rounds = 4 * blocks.len() + 50;

        'outer: for _ in 0..max_rounds {
            let mut vars: Vec<usize> = d.unpenalized.clone();
            for &bi in &active {
                vars.extend(&blocks[bi].members);
            }
            let k = vars.len();
            let has_group = active.iter().any(|&bi| blocks[bi].members.len() > 1);
            let gram: Vec<f64> = (0..k * k)
                .map(|r| d.gram(vars[r / k], vars[r % k]))
                .collect();
            // Position of each active block's members inside `vars`.
            let mut offsets = Vec::with_capacity(active.len());
            let mut off = d.unpenalized.len();
            for &bi in &active {
                offsets.push(off);
                off += blocks[bi].members.len();
            }

            let mut last_size = f64::INFINITY;
            let mut damped = false;
            for _ in 0..100 {
                // A group whose block-wise optimum given the rest is zero leaves the support.
                if has_group {
                    for (a, &bi) in active.iter().enumerate() {
                        let b = &blocks[bi];
                        if b.members.len() == 1 {
                            continue;
                        }
                        let o = offsets[a];
                        let m = b.members.len();
                        let g0: f64 = (0..m)
                            .map(|r| {
                                let row = o + r;
                                let gv: f64 = (0..k)
                                    .filter(|c| !(o..o + m).contains(c))
                                    .map(|c| gram[row * k + c] * theta[vars[c]])
                                    .sum();
                                let e = d.linear(vars[row]) - gv;
                                e * e
                            })
                            .sum::<f64>()
                            .sqrt();
                        if g0 <= lambda * b.weight {
                            for &i in &b.members {
                                theta[i] = 0.0;
                            }
                            active.remove(a);
                            continue 'outer;
                        }
                    }
                }
                // Objective gradient and Hessian on the support.
                let mut grad: Vec<f64> = (0..k)
                    .map(|r| {
                        let gv: f64 = (0..k).map(|c| gram[r * k + c] * theta[vars[c]]).sum();
                        gv - d.linear(vars[r])
                    })
                    .collect();
                let mut hess = gram.clone();
                for (a, &bi) in active.iter().enumerate() {
                    let b = &blocks[bi];
                    let o = offsets[a];
                    let lw = lambda * b.weight;
                    if b.members.len() == 1 {
                        grad[o] += lw * sign[bi];
                    } else {
                        let nrm = block_norm(&theta, &b.members);
                        if nrm == 0.0 {
                            return None;
                        }
                        let m = b.members.len();
                        for r in 0..m {
                            let ur = theta[b.members[r]] / nrm;
                            grad[o + r] += lw * ur;
                            for c in 0..m {
                                let uc = theta[b.members[c]] / nrm;
                                let id = if r == c { 1.0 } else { 0.0 };
                                hess[(o + r) * k + o + c] += lw / nrm * (id - ur * uc);
                            }
                        }
                    }
                }
                // A nearly singular support gets a growing ridge; the damped
                // steps then iterate like a proximal-point method.
                let max_diag = (0..k).map(|r| hess[r * k + r]).fold(0.0, f64::max);
                let mut ridge = 0.0;
                let mut factor = hess.clone();
                while dense_cholesky(&mut factor, k).is_err() {
                    ridge = if ridge == 0.0 {
                        1e-10 * max_diag
                    } else {
                        ridge * 100.0
                    };
                    if ridge > 1e-4 * max_diag {
                        return None;
                    }
                    factor.copy_from_slice(&hess);
                    for r in 0..k {
                        factor[r * k + r] += ridge;
                    }
                }
                damped |= ridge > 0.0;
                let hess = factor;
                let mut step: Vec<f64> = grad.iter().map(|g| -g).collect();
                dense_solve_lower(&hess, k, &mut step);
                dense_solve_upper(&hess, k, &mut step);

                // Largest step keeping every singleton on its sign.
                let mut t = 1.0;
                let mut crossing = None;
                for (a, &bi) in active.iter().enumerate() {
                    if blocks[bi].members.len() != 1 {
                        continue;
                    }
                    let (cur, dlt) = (theta[vars[offsets[a]]], step[offsets[a]]);
                    if sign[bi] * (cur + dlt) <= 0.0 {
                        let tb = if cur == 0.0 { 0.0 } else { cur / (cur - dlt) };
                        if tb < t {
                            t = tb;
                            crossing = Some(a);
                        }
                    }
                }
                if has_group {
                    let base = d.objective(&theta, lambda);
                    let slope: f64 = grad.iter().zip(&step).map(|(g, s)| g * s).sum();
                    let mut trial = theta.clone();
                    loop {
                        for r in 0..k {
                            trial[vars[r]] = theta[vars[r]] + t * step[r];
                        }
                        let val = d.objective(&trial, lambda);
                        // Near the optimum the decrease drops below rounding noise.
                        let noise = 1e-14 * base.abs().max(1.0);
                        if val <= base + 1e-4 * t * slope || val <= base + noise || t < 1e-12 {
                            break;
                        }
                        t *= 0.5;
                        crossing = None;
                    }
                    // A collapsing step means some group is being driven into the
                    // kink at zero. Drop the smallest group; the KKT pass below
                    // re-admits it if that was wrong.
                    if t < 1e-6 {
                        let smallest = active
                            .iter()
                            .enumerate()
                            .filter(|(_, &bi)| blocks[bi].members.len() > 1)
                            .map(|(a, &bi)| (block_norm(&theta, &blocks[bi].members), a))
                            .min_by(|x, y| x.0.total_cmp(&y.0));
                        if let Some((_, a)) = smallest {
                            let bi = active.remove(a);
                            for &i in &blocks[bi].members {
                                theta[i] = 0.0;
                            }
                            continue 'outer;
                        }
                    }
                }
                for r in 0..k {
                    theta[vars[r]] += t * step[r];
                }
                if let Some(a) = crossing {
                    let bi = active.remove(a);
                    theta[blocks[bi].members[0]] = 0.0;
                    sign[bi] = 0.0;
                    continue 'outer;
                }
                let size = step.iter().fold(0.0_f64, |m, s| m.max(s.abs())) * t;
                let mag = theta.iter().fold(1.0_f64, |m, s| m.max(s.abs()));
                // Steps that stop shrinking have hit rounding noise.
                let exact = !has_group && !damped;
                if exact || size <= 1e-13 * mag || (size <= 1e-9 * mag && size >= 0.5 * last_size) {
                    break;
                }
                last_size = size;
            }

            let g = d.gradient(&theta);
            let rep = kkt_from_gradient(d, &theta, &g, lambda);
            if rep.active_residual > tol || rep.unpenalized_residual > tol {
                return None;
            }
            // Admit the worst KKT violator among the inactive blocks.
            let mut worst = (tol, None);
            for (bi, b) in blocks.iter().enumerate() {
                if sign[bi] == 0.0 && block_norm(&theta, &b.members) == 0.0 {
                    let excess = block_norm(&g, &b.members) - lambda * b.weight;
                    if excess > worst.0 {
                        worst = (excess, Some(bi));
                    }
                }
            }
            let Some(bi) = worst.1 else {
                return Some(theta);
            };
            let b = &blocks[bi];
            if let [i] = b.members[..] {
                sign[bi] = g[i].signum();
            } else {
                let lip = self.block_lip[bi];
                if lip <= 0.0 {
                    return None;
                }
                let gn = block_norm(&g, &b.members);
                let s = (1.0 - lambda * b.weight / gn) / lip;
                for &i in &b.members {
                    theta[i] = s * g[i];
                }
            }
            active.push(bi);
        }
        None
    }
}

/// Rebuilds the difference coefficients `theta` from a fitted path and its
/// covariate coefficients, zeroing blocks outside `active`.
pub fn theta_from_fit(
    design: &Design,
    fit: &Array2<f64>,
    alpha: &Array1<f64>,
    active: &[ActiveBlock],
) -> Vec<f64> {
    let (n, p, order) = (design.n, design.p, design.order);
    let mut theta = vec![0.0; design.dim()];
    for j in 0..p {
        let d = super::difference::difference(order, &fit.column(j).to_vec());
        for k in 0..n {
            theta[k * p + j] = d[k];
        }
    }
    for b in &design.blocks {
        if !active.iter().any(|a| a.t == b.k && a.group == b.group) {
            for &i in &b.members {
                theta[i] = 0.0;
            }
        }
    }
    theta[n * p..].copy_from_slice(alpha.as_slice().expect("contiguous"));
    theta
}

/// Log-spaced decreasing grid from `lambda_max` to `min_ratio * lambda_max`.
pub fn lambda_grid(lambda_max: f64, count: usize, min_ratio: f64) -> Vec<f64> {
    if count <= 1 || lambda_max <= 0.0 {
        return vec![lambda_max.max(0.0)];
    }
    let step = min_ratio.ln() / (count - 1) as f64;
    (0..count)
        .map(|i| lambda_max * (step * i as f64).exp())
        .collect()
}

/// Path over the trend differences only: target `x_t' beta_bar_t`.
pub fn fit_path(
    draws: &PosteriorDraws,
    dataset: &Dataset,
    order: usize,
    groups: &GroupSpec,
    weights: &Array1<f64>,
    opts: &PathOptions,
) -> Result<SolutionPath> {
    path_impl(draws, dataset, order, groups, weights, opts, false)
}

/// Path with unpenalized covariate columns: target `x_t' beta_bar_t + z_t' alpha_bar`.
pub fn solve_with_covariates(
    draws: &PosteriorDraws,
    dataset: &Dataset,
    order: usize,
    groups: &GroupSpec,
    weights: &Array1<f64>,
    opts: &PathOptions,
) -> Result<SolutionPath> {
    path_impl(draws, dataset, order, groups, weights, opts, true)
}

fn path_impl(
    draws: &PosteriorDraws,
    dataset: &Dataset,
    order: usize,
    groups: &GroupSpec,
    weights: &Array1<f64>,
    opts: &PathOptions,
    with_covariates: bool,
) -> Result<SolutionPath> {
    draws.check()?;
    if draws.n() != dataset.n() || draws.p() != dataset.p() {
        return Err(Error::Validation(
            "posterior draws do not match the dataset".into(),
        ));
    }
    let norm = compute_psi(draws, order, groups)?;
    let beta_bar = draws.beta_mean();
    let alpha_bar = (with_covariates && dataset.l() > 0).then(|| draws.alpha_mean());
    if let Some(a) = &alpha_bar {
        if a.len() != dataset.l() {
            return Err(Error::Validation(
                "posterior covariate draws do not match the dataset".into(),
            ));
        }
    }
    let design = Design::new(
        dataset,
        &beta_bar,
        alpha_bar.as_ref().map(|a| a.view()),
        order,
        groups,
        weights,
        &norm.group_psi,
    )?;
    let mut solver = CdSolver::new(&design);
    solver.fit_unpenalized()?;
    let lambdas = match &opts.lambdas {
        Some(l) => {
            if l.is_empty()
                || l.iter().any(|v| !(v.is_finite() && *v >= 0.0))
                || l.windows(2).any(|w| w[1] > w[0])
            {
                return Err(Error::Validation(
                    "lambda grid must be nonempty, finite, nonnegative and decreasing".into(),
                ));
            }
            l.clone()
        }
        None => lambda_grid(solver.lambda_max(), opts.n_lambdas, opts.min_ratio),
    };

    let mut path = SolutionPath {
        order,
        groups: groups.clone(),
        lambdas: Vec::with_capacity(lambdas.len()),
        fits: Vec::new(),
        alpha_fits: Vec::new(),
        active_sets: Vec::new(),
        objective: Vec::new(),
        weights: weights.clone(),
        psi: norm.psi,
        group_psi: norm.group_psi,
    };
    for (idx, &lambda) in lambdas.iter().enumerate() {
        solver.solve(lambda, opts, idx)?;
        let (fit, alpha) = design.paths(&solver.theta);
        let active: Vec<ActiveBlock> = design
            .blocks
            .iter()
            .filter(|b| block_norm(&solver.theta, &b.members) > 0.0)
            .map(|b| ActiveBlock {
                t: b.k,
                group: b.group,
            })
            .collect();
        let count = active.len();
        path.lambdas.push(lambda);
        path.fits.push(fit);
        path.alpha_fits.push(alpha);
        path.active_sets.push(active);
        path.objective.push(solver.objective(lambda));
        if opts.max_active.is_some_and(|m| count > m) {
            break;
        }
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{Array2, Array3, Axis};

    fn point_posterior(beta: &Array2<f64>, sigma2: &[f64]) -> PosteriorDraws {
        let (n, p) = beta.dim();
        PosteriorDraws {
            beta: beta.clone().insert_axis(Axis(0)),
            sigma2_eps: Array2::from_shape_vec((1, n), sigma2.to_vec()).unwrap(),
            alpha: Array2::zeros((1, 0)),
            zeta: None,
            h: None,
        }
        .tap(|d| assert_eq!(d.beta.dim(), (1, n, p)))
    }

    trait Tap: Sized {
        fn tap(self, f: impl FnOnce(&Self)) -> Self {
            f(&self);
            self
        }
    }
    impl<T> Tap for T {}

    fn noisy_step(n: usize, at: usize) -> Vec<f64> {
        (0..n)
            .map(|t| if t < at { 0.0 } else { 2.0 } + 0.3 * ((t * 7919 % 13) as f64 / 13.0 - 0.5))
            .collect()
    }

    fn weights_of(sigma2: &[f64]) -> Array1<f64> {
        sigma2.iter().map(|s| 1.0 / s.sqrt()).collect()
    }

    #[test]
    fn first_point_is_empty_weighted_mean() {
        let n = 12;
        let b = noisy_step(n, 6);
        let s2: Vec<f64> = (0..n).map(|t| 0.5 + 0.1 * t as f64).collect();
        let draws = point_posterior(&Array2::from_shape_vec((n, 1), b.clone()).unwrap(), &s2);
        let ds = Dataset::mean_change(Array1::from(b.clone())).unwrap();
        let w = weights_of(&s2);
        let path = fit_path(
            &draws,
            &ds,
            1,
            &GroupSpec::singletons(1),
            &w,
            &PathOptions::default(),
        )
        .unwrap();
        assert!(path.active_sets[0].is_empty());
        let wm =
            (0..n).map(|t| w[t] * w[t] * b[t]).sum::<f64>() / w.iter().map(|v| v * v).sum::<f64>();
        for t in 0..n {
            assert!((path.fits[0][[t, 0]] - wm).abs() < 1e-10);
        }
        assert_eq!(path.lambdas.len(), 100);
        assert!(path.lambdas.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn zero_penalty_reproduces_the_target() {
        let n = 15;
        for order in 1..=2 {
            let b: Vec<f64> = (0..n).map(|t| ((t * t) as f64 * 0.37).sin()).collect();
            let s2 = vec![1.0; n];
            let draws = point_posterior(&Array2::from_shape_vec((n, 1), b.clone()).unwrap(), &s2);
            let ds = Dataset::mean_change(Array1::from(b.clone())).unwrap();
            let opts = PathOptions {
                lambdas: Some(vec![0.0]),
                ..PathOptions::default()
            };
            let path = fit_path(
                &draws,
                &ds,
                order,
                &GroupSpec::singletons(1),
                &weights_of(&s2),
                &opts,
            )
            .unwrap();
            for t in 0..n {
                assert!((path.fits[0][[t, 0]] - b[t]).abs() < 1e-6);
            }
            assert_eq!(path.count(0), n - order);
        }
    }

    #[test]
    fn kkt_holds_along_grouped_and_singleton_paths() {
        let n = 30;
        let p = 2;
        let beta = Array2::from_shape_fn((n, p), |(t, j)| {
            (if t >= 10 { 1.0 + j as f64 } else { 0.0 })
                + 0.2 * ((t * 31 + j * 17) % 11) as f64 / 11.0
        });
        let x = Array2::from_shape_fn((n, p), |(t, j)| 1.0 + ((t * 3 + j) % 4) as f64 * 0.5);
        let y: Array1<f64> = (0..n).map(|t| x.row(t).dot(&beta.row(t))).collect();
        let ds = Dataset::new(y, x, Array2::zeros((n, 0)), None).unwrap();
        let s2: Vec<f64> = (0..n).map(|t| 1.0 + (t % 3) as f64).collect();
        let draws = point_posterior(&beta, &s2);
        for groups in [GroupSpec::singletons(p), GroupSpec::joint(p)] {
            for order in 1..=2 {
                let opts = PathOptions {
                    n_lambdas: 30,
                    ..PathOptions::default()
                };
                let path = fit_path(&draws, &ds, order, &groups, &weights_of(&s2), &opts)
                    .unwrap_or_else(|e| panic!("{} groups, order {order}: {e}", groups.len()));
                let design = Design::new(
                    &ds,
                    &draws.beta_mean(),
                    None,
                    order,
                    &groups,
                    &path.weights,
                    &path.group_psi,
                )
                .unwrap();
                for k in 0..path.lambdas.len() {
                    let theta = theta_from_fit(
                        &design,
                        &path.fits[k],
                        &path.alpha_fits[k],
                        &path.active_sets[k],
                    );
                    let rep = kkt_check(&design, &theta, path.lambdas[k]);
                    assert!(rep.holds(1e-6), "order {order} k {k}: {rep:?}");
                }
            }
        }
    }

    #[test]
    fn covariate_path_without_covariates_equals_plain_path() {
        let n = 20;
        let b = noisy_step(n, 9);
        let s2 = vec![1.0; n];
        let draws = point_posterior(&Array2::from_shape_vec((n, 1), b.clone()).unwrap(), &s2);
        let ds = Dataset::mean_change(Array1::from(b)).unwrap();
        let opts = PathOptions {
            n_lambdas: 20,
            ..PathOptions::default()
        };
        let g = GroupSpec::singletons(1);
        let a = fit_path(&draws, &ds, 1, &g, &weights_of(&s2), &opts).unwrap();
        let c = solve_with_covariates(&draws, &ds, 1, &g, &weights_of(&s2), &opts).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn grid_is_log_spaced() {
        let g = lambda_grid(2.0, 100, 1e-4);
        assert_eq!(g[0], 2.0);
        assert!((g[99] - 2e-4).abs() < 1e-15);
        let _ = Array3::<f64>::zeros((1, 1, 1));
    }
}
