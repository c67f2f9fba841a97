//! The weighted design of the decoupled loss in the difference parametrization.
//!
//! Coefficients are `theta[k * p + j]` (the `k`-th `D`-th difference of series
//! `j`) followed by the `l` covariate coefficients. Column `(k, j)` of the design
//! is `w_t x_{t,j} z_k(t)`, where `z_k` is column `k` of the inverse difference
//! matrix: zero before its start and linear in `t` after it. Every Gram entry is
//! therefore a combination of suffix sums of `w_t^2 u_t v_t t^m`, `m <= 2`, and
//! costs `O(1)` after an `O(n (p + l)^2)` precomputation.

use ndarray::{Array1, Array2, ArrayView1};

use super::difference::{basis_column, integrate, BasisColumn};
use crate::error::{Error, Result};
use crate::model::{Dataset, GroupSpec};

/// One penalized block: difference index `k` in group `group`.
#[derive(Debug, Clone)]
pub struct Block {
    pub k: usize,
    pub group: usize,
    /// Coefficient indices in the block.
    pub members: Vec<usize>,
    /// Penalty multiplier `1 / psi_{g,k}`.
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct Design {
    pub n: usize,
    pub p: usize,
    pub l: usize,
    pub order: usize,
    /// Weighted target `w_t * yhat_t`.
    target: Vec<f64>,
    weights: Vec<f64>,
    /// Predictor and covariate series, `n x (p + l)`.
    series: Array2<f64>,
    /// `cross[((e * E + f) * 3 + m) * (n + 1) + s] = sum_{t >= s} w_t^2 u_e u_f t^m`.
    cross: Vec<f64>,
    /// `lin[(e * 3 + m) * (n + 1) + s] = sum_{t >= s} w_t^2 u_e yhat_t t^m`.
    lin: Vec<f64>,
    pub unpenalized: Vec<usize>,
    pub blocks: Vec<Block>,
}

impl Design {
    /// Builds the design for target `yhat_t = x_t' beta_bar_t + z_t' alpha_bar`.
    /// Covariate columns are included when `alpha_bar` is given.
    pub fn new(
        dataset: &Dataset,
        beta_bar: &Array2<f64>,
        alpha_bar: Option<ArrayView1<'_, f64>>,
        order: usize,
        groups: &GroupSpec,
        weights: &Array1<f64>,
        group_psi: &Array2<f64>,
    ) -> Result<Self> {
        let (n, p) = (dataset.n(), dataset.p());
        let l = alpha_bar.map_or(0, |a| a.len());
        if beta_bar.dim() != (n, p) || weights.len() != n || groups.p() != p {
            return Err(Error::Validation(
                "design inputs have inconsistent dimensions".into(),
            ));
        }
        if group_psi.dim() != (n, groups.len()) {
            return Err(Error::Validation(
                "group normalizers have inconsistent dimensions".into(),
            ));
        }
        if l > 0 && dataset.l() != l {
            return Err(Error::Validation(
                "covariate coefficient count disagrees with dataset".into(),
            ));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::Validation(
                "weights must be positive and finite".into(),
            ));
        }
        if !(1..=2).contains(&order) || n <= order {
            return Err(Error::Validation(format!(
                "difference order {order} unsupported for n={n}"
            )));
        }
        let e_count = p + l;
        let mut series = Array2::zeros((n, e_count));
        series.slice_mut(ndarray::s![.., ..p]).assign(&dataset.x);
        if l > 0 {
            series
                .slice_mut(ndarray::s![.., p..])
                .assign(&dataset.covariates);
        }
        let yhat: Vec<f64> = (0..n)
            .map(|t| {
                let mut v = dataset.x.row(t).dot(&beta_bar.row(t));
                if let Some(a) = alpha_bar {
                    v += dataset.covariates.row(t).dot(&a);
                }
                v
            })
            .collect();

        let stride = n + 1;
        let mut cross = vec![0.0; e_count * e_count * 3 * stride];
        let mut lin = vec![0.0; e_count * 3 * stride];
        for e in 0..e_count {
            for f in 0..e_count {
                for m in 0..3 {
                    let base = ((e * e_count + f) * 3 + m) * stride;
                    for t in (0..n).rev() {
                        let w2 = weights[t] * weights[t];
                        cross[base + t] = cross[base + t + 1]
                            + w2 * series[[t, e]] * series[[t, f]] * (t as f64).powi(m as i32);
                    }
                }
            }
            for m in 0..3 {
                let base = (e * 3 + m) * stride;
                for t in (0..n).rev() {
                    let w2 = weights[t] * weights[t];
                    lin[base + t] = lin[base + t + 1]
                        + w2 * series[[t, e]] * yhat[t] * (t as f64).powi(m as i32);
                }
            }
        }

        let mut unpenalized: Vec<usize> = (0..order * p).collect();
        unpenalized.extend(n * p..n * p + l);
        let mut blocks = Vec::with_capacity((n - order) * groups.len());
        for k in order..n {
            for (g, members) in groups.groups().iter().enumerate() {
                blocks.push(Block {
                    k,
                    group: g,
                    members: members.iter().map(|&j| k * p + j).collect(),
                    weight: 1.0 / group_psi[[k, g]],
                });
            }
        }
        Ok(Self {
            n,
            p,
            l,
            order,
            target: (0..n).map(|t| weights[t] * yhat[t]).collect(),
            weights: weights.to_vec(),
            series,
            cross,
            lin,
            unpenalized,
            blocks,
        })
    }

    /// Total number of coefficients.
    pub fn dim(&self) -> usize {
        self.n * self.p + self.l
    }

    #[inline]
    fn column(&self, i: usize) -> (usize, BasisColumn) {
        if i < self.n * self.p {
            (i % self.p, basis_column(self.order, i / self.p))
        } else {
            (
                self.p + i - self.n * self.p,
                BasisColumn {
                    start: 0,
                    c0: 1.0,
                    c1: 0.0,
                },
            )
        }
    }

    /// Gram entry `A_i' A_j`.
    #[inline]
    pub fn gram(&self, i: usize, j: usize) -> f64 {
        let (e, a) = self.column(i);
        let (f, b) = self.column(j);
        let s = a.start.max(b.start);
        if s >= self.n {
            return 0.0;
        }
        let stride = self.n + 1;
        let base = (e * (self.p + self.l) + f) * 3 * stride + s;
        let (s0, s1, s2) = (
            self.cross[base],
            self.cross[base + stride],
            self.cross[base + 2 * stride],
        );
        a.c0 * b.c0 * s0 + (a.c0 * b.c1 + a.c1 * b.c0) * s1 + a.c1 * b.c1 * s2
    }

    /// Linear term `A_i' (w * yhat)`.
    #[inline]
    pub fn linear(&self, i: usize) -> f64 {
        let (e, a) = self.column(i);
        let stride = self.n + 1;
        let base = e * 3 * stride + a.start;
        a.c0 * self.lin[base] + a.c1 * self.lin[base + stride]
    }

    /// Fitted coefficient paths (`n x p`) and covariate coefficients for `theta`.
    pub fn paths(&self, theta: &[f64]) -> (Array2<f64>, Array1<f64>) {
        let (n, p) = (self.n, self.p);
        let mut beta = Array2::zeros((n, p));
        for j in 0..p {
            let col: Vec<f64> = (0..n).map(|k| theta[k * p + j]).collect();
            for (t, v) in integrate(self.order, &col).into_iter().enumerate() {
                beta[[t, j]] = v;
            }
        }
        (beta, Array1::from(theta[n * p..].to_vec()))
    }

    /// `0.5 * || w (yhat - fit) ||^2`, evaluated from the residual.
    pub fn loss(&self, theta: &[f64]) -> f64 {
        let (beta, alpha) = self.paths(theta);
        let (p, l) = (self.p, self.l);
        (0..self.n)
            .map(|t| {
                let mut fit = 0.0;
                for j in 0..p {
                    fit += self.series[[t, j]] * beta[[t, j]];
                }
                for c in 0..l {
                    fit += self.series[[t, p + c]] * alpha[c];
                }
                let r = self.target[t] - self.weights[t] * fit;
                0.5 * r * r
            })
            .sum()
    }

    /// Penalty `sum_b weight_b ||theta_b||_2` (without `lambda`).
    pub fn penalty(&self, theta: &[f64]) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.weight * block_norm(theta, &b.members))
            .sum()
    }

    pub fn objective(&self, theta: &[f64], lambda: f64) -> f64 {
        self.loss(theta) + lambda * self.penalty(theta)
    }

    /// Negative loss gradient `c - G theta`, using only the nonzero coefficients.
    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let nz: Vec<usize> = (0..theta.len()).filter(|&i| theta[i] != 0.0).collect();
        (0..self.dim())
            .map(|i| self.linear(i) - nz.iter().map(|&m| self.gram(i, m) * theta[m]).sum::<f64>())
            .collect()
    }
}

#[inline]
pub fn block_norm(theta: &[f64], members: &[usize]) -> f64 {
    members
        .iter()
        .map(|&i| theta[i] * theta[i])
        .sum::<f64>()
        .sqrt()
}
