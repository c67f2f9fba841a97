//! `D`-th difference matrices and their lower-triangular inverses.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Column `k` of the inverse difference matrix as a function of time:
/// `z(t) = c0 + c1 * t` for `t >= start`, zero before. Times are 0-based.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisColumn {
    pub start: usize,
    pub c0: f64,
    pub c1: f64,
}

impl BasisColumn {
    #[inline]
    pub fn at(&self, t: usize) -> f64 {
        if t >= self.start {
            self.c0 + self.c1 * t as f64
        } else {
            0.0
        }
    }
}

/// Basis column `k` of `Z` for difference order `order` (1 or 2).
pub fn basis_column(order: usize, k: usize) -> BasisColumn {
    match (order, k) {
        (1, k) => BasisColumn {
            start: k,
            c0: 1.0,
            c1: 0.0,
        },
        // First two rows of the order-2 difference matrix are identity rows, so the
        // first two columns of its inverse are the lines 1 - t and t.
        (2, 0) => BasisColumn {
            start: 0,
            c0: 1.0,
            c1: -1.0,
        },
        (2, 1) => BasisColumn {
            start: 0,
            c0: 0.0,
            c1: 1.0,
        },
        (2, k) => BasisColumn {
            start: k,
            c0: 1.0 - k as f64,
            c1: 1.0,
        },
        _ => panic!("unsupported difference order {order}"),
    }
}

/// The `D`-th difference matrix and its inverse `Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceOperator {
    pub order: usize,
    pub n: usize,
    /// Inverse difference matrix, lower triangular.
    pub z: Array2<f64>,
    /// Difference matrix whose first `order` rows are identity rows.
    pub dmat: Array2<f64>,
}

/// Builds `Z` and the difference matrix it inverts.
pub fn build_inverse_difference(order: usize, n: usize) -> Result<DifferenceOperator> {
    if !(1..=2).contains(&order) {
        return Err(Error::Validation(format!(
            "unsupported difference order {order}"
        )));
    }
    if n <= order {
        return Err(Error::SeriesTooShort {
            n,
            order,
            min: order + 1,
        });
    }
    let mut z = Array2::zeros((n, n));
    for k in 0..n {
        let col = basis_column(order, k);
        for t in 0..n {
            z[[t, k]] = col.at(t);
        }
    }
    let mut dmat = Array2::zeros((n, n));
    for t in 0..n {
        if t < order {
            dmat[[t, t]] = 1.0;
        } else if order == 1 {
            dmat[[t, t]] = 1.0;
            dmat[[t, t - 1]] = -1.0;
        } else {
            dmat[[t, t]] = 1.0;
            dmat[[t, t - 1]] = -2.0;
            dmat[[t, t - 2]] = 1.0;
        }
    }
    Ok(DifferenceOperator { order, n, z, dmat })
}

/// Applies the difference matrix: the first `order` entries are copied, the rest
/// are `D`-th differences.
pub fn difference(order: usize, series: &[f64]) -> Vec<f64> {
    let n = series.len();
    (0..n)
        .map(|t| {
            if t < order {
                series[t]
            } else if order == 1 {
                series[t] - series[t - 1]
            } else {
                series[t] - 2.0 * series[t - 1] + series[t - 2]
            }
        })
        .collect()
}

/// Applies `Z`: inverts [`difference`].
pub fn integrate(order: usize, theta: &[f64]) -> Vec<f64> {
    let n = theta.len();
    let mut out = vec![0.0; n];
    for t in 0..n {
        out[t] = if t < order {
            theta[t]
        } else if order == 1 {
            out[t - 1] + theta[t]
        } else {
            2.0 * out[t - 1] - out[t - 2] + theta[t]
        };
    }
    out
}
