//! Small linear algebra kernels: banded and dense Cholesky, Householder least squares.

use crate::error::{Error, Result};

/// Symmetric positive-definite banded matrix, lower band stored row-wise.
///
/// Entry `(i, i - k)` for `k <= bandwidth` lives at `data[i * (bandwidth + 1) + k]`.
#[derive(Debug, Clone)]
pub struct BandedSpd {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedSpd {
    pub fn zeros(n: usize, bandwidth: usize) -> Self {
        Self {
            n,
            bw: bandwidth,
            data: vec![0.0; n * (bandwidth + 1)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + (i - j)
    }

    /// Adds `v` to entry `(i, j)` (and implicitly `(j, i)`); requires `|i - j| <= bandwidth`.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    /// In-place Cholesky factorization `A = L L'`.
    pub fn cholesky(mut self) -> Result<BandedCholesky> {
        let (n, bw) = (self.n, self.bw);
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let mut s = self.data[self.idx(i, j)];
                let k0 = j0.max(j.saturating_sub(bw));
                for k in k0..j {
                    s -= self.data[self.idx(i, k)] * self.data[self.idx(j, k)];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::Numeric(format!(
                            "banded matrix not positive definite at row {i} (pivot {s:e})"
                        )));
                    }
                    let k = self.idx(i, i);
                    self.data[k] = s.sqrt();
                } else {
                    let d = self.data[self.idx(j, j)];
                    let k = self.idx(i, j);
                    self.data[k] = s / d;
                }
            }
        }
        Ok(BandedCholesky { l: self })
    }
}

/// Lower-triangular banded Cholesky factor.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    l: BandedSpd,
}

impl BandedCholesky {
    /// Solves `L x = b` in place.
    pub fn solve_lower(&self, b: &mut [f64]) {
        let l = &self.l;
        for i in 0..l.n {
            let mut s = b[i];
            for k in i.saturating_sub(l.bw)..i {
                s -= l.data[l.idx(i, k)] * b[k];
            }
            b[i] = s / l.data[l.idx(i, i)];
        }
    }

    /// Solves `L' x = b` in place.
    pub fn solve_upper(&self, b: &mut [f64]) {
        let l = &self.l;
        for i in (0..l.n).rev() {
            let mut s = b[i];
            for k in (i + 1)..(i + l.bw + 1).min(l.n) {
                s -= l.data[l.idx(k, i)] * b[k];
            }
            b[i] = s / l.data[l.idx(i, i)];
        }
    }

    /// Solves `A x = b` in place.
    pub fn solve(&self, b: &mut [f64]) {
        self.solve_lower(b);
        self.solve_upper(b);
    }

    /// Given the canonical vector `b` and standard normals `z`, returns a draw from
    /// `N(A^{-1} b, A^{-1})`.
    pub fn sample(&self, b: &[f64], z: &[f64]) -> Vec<f64> {
        let mut mean = b.to_vec();
        self.solve(&mut mean);
        let mut noise = z.to_vec();
        self.solve_upper(&mut noise);
        mean.iter().zip(&noise).map(|(m, e)| m + e).collect()
    }
}

/// Dense symmetric positive-definite solve via Cholesky; `a` is row-major `n x n`
/// and is overwritten with the factor. Returns the factor for reuse.
pub fn dense_cholesky(a: &mut [f64], n: usize) -> Result<()> {
    for j in 0..n {
        let diag = a[j * n + j];
        let mut d = diag;
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        // Pivots lost to cancellation signal numerical rank deficiency.
        if !(d > 1e-13 * diag.abs()) || !d.is_finite() {
            return Err(Error::Numeric(format!(
                "matrix not positive definite at pivot {j} ({d:e})"
            )));
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
        for i in 0..j {
            a[i * n + j] = 0.0;
        }
    }
    Ok(())
}

/// Solves `L x = b` for a dense lower factor from [`dense_cholesky`].
pub fn dense_solve_lower(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Solves `L' x = b` for a dense lower factor from [`dense_cholesky`].
pub fn dense_solve_upper(l: &[f64], n: usize, b: &mut [f64]) {
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Solves the SPD system `a x = b`; `a` is consumed.
pub fn spd_solve(mut a: Vec<f64>, n: usize, b: &mut [f64]) -> Result<()> {
    dense_cholesky(&mut a, n)?;
    dense_solve_lower(&a, n, b);
    dense_solve_upper(&a, n, b);
    Ok(())
}

/// Householder QR of a tall column-major matrix, used for least-squares projections.
#[derive(Debug, Clone)]
pub struct HouseholderQr {
    rows: usize,
    cols: usize,
    /// Column-major storage holding R above the diagonal and the reflectors below.
    qr: Vec<f64>,
    diag: Vec<f64>,
}

impl HouseholderQr {
    /// Factorizes a column-major `rows x cols` matrix (`rows >= cols`).
    pub fn new(mut a: Vec<f64>, rows: usize, cols: usize) -> Result<Self> {
        assert_eq!(a.len(), rows * cols);
        if cols > rows {
            return Err(Error::Numeric(format!(
                "least squares with {cols} columns and {rows} rows"
            )));
        }
        let mut diag = vec![0.0; cols];
        for k in 0..cols {
            let col = &mut a[k * rows..(k + 1) * rows];
            let norm = col[k..].iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(Error::Numeric(format!(
                    "rank-deficient design at column {k}"
                )));
            }
            let alpha = if col[k] > 0.0 { -norm } else { norm };
            col[k] -= alpha;
            let vnorm2 = col[k..].iter().map(|v| v * v).sum::<f64>();
            diag[k] = alpha;
            if vnorm2 > 0.0 {
                let scale = (2.0 / vnorm2).sqrt();
                col[k..].iter_mut().for_each(|v| *v *= scale);
            }
            let (head, tail) = a.split_at_mut((k + 1) * rows);
            let v = &head[k * rows + k..(k + 1) * rows];
            for j in 0..(cols - k - 1) {
                let c = &mut tail[j * rows + k..(j + 1) * rows];
                let dot: f64 = v.iter().zip(c.iter()).map(|(a, b)| a * b).sum();
                c.iter_mut().zip(v).for_each(|(c, v)| *c -= dot * v);
            }
        }
        let rank_tol = 1e-12 * diag.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        if let Some(k) = diag.iter().position(|d| d.abs() <= rank_tol) {
            return Err(Error::Numeric(format!(
                "rank-deficient design at column {k}"
            )));
        }
        Ok(Self {
            rows,
            cols,
            qr: a,
            diag,
        })
    }

    /// Applies `Q'` to `b` in place.
    fn apply_qt(&self, b: &mut [f64]) {
        for k in 0..self.cols {
            let v = &self.qr[k * self.rows + k..(k + 1) * self.rows];
            let dot: f64 = v.iter().zip(&b[k..]).map(|(a, b)| a * b).sum();
            b[k..].iter_mut().zip(v).for_each(|(b, v)| *b -= dot * v);
        }
    }

    /// Applies `Q` to `b` in place.
    fn apply_q(&self, b: &mut [f64]) {
        for k in (0..self.cols).rev() {
            let v = &self.qr[k * self.rows + k..(k + 1) * self.rows];
            let dot: f64 = v.iter().zip(&b[k..]).map(|(a, b)| a * b).sum();
            b[k..].iter_mut().zip(v).for_each(|(b, v)| *b -= dot * v);
        }
    }

    /// Least-squares coefficients minimizing `||A x - b||`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut qtb = b.to_vec();
        self.apply_qt(&mut qtb);
        let mut x = vec![0.0; self.cols];
        for i in (0..self.cols).rev() {
            let mut s = qtb[i];
            for j in (i + 1)..self.cols {
                s -= self.qr[j * self.rows + i] * x[j];
            }
            x[i] = s / self.diag[i];
        }
        x
    }

    /// Orthogonal projection of `b` onto the column space of `A`.
    pub fn project(&self, b: &[f64]) -> Vec<f64> {
        let mut c = b.to_vec();
        self.apply_qt(&mut c);
        c[self.cols..].iter_mut().for_each(|v| *v = 0.0);
        self.apply_q(&mut c);
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn banded_solve_matches_tridiagonal_system() {
        // [4 1 0; 1 4 1; 0 1 4] x = [1 2 3]
        let mut a = BandedSpd::zeros(3, 1);
        for i in 0..3 {
            a.add(i, i, 4.0);
        }
        a.add(1, 0, 1.0);
        a.add(2, 1, 1.0);
        let chol = a.cholesky().unwrap();
        let mut b = vec![1.0, 2.0, 3.0];
        chol.solve(&mut b);
        let expect = [5.0 / 28.0, 2.0 / 7.0, 19.0 / 28.0];
        for (x, e) in b.iter().zip(expect) {
            assert!((x - e).abs() < 1e-14);
        }
    }

    #[test]
    fn banded_rejects_indefinite() {
        let mut a = BandedSpd::zeros(2, 1);
        a.add(0, 0, 1.0);
        a.add(1, 1, 1.0);
        a.add(1, 0, 2.0);
        assert!(a.cholesky().is_err());
    }

    #[test]
    fn qr_projection_onto_constants_is_mean() {
        let b = [1.0, 2.0, 6.0];
        let qr = HouseholderQr::new(vec![1.0; 3], 3, 1).unwrap();
        let p = qr.project(&b);
        for v in p {
            assert!((v - 3.0).abs() < 1e-14);
        }
        assert!((qr.solve(&b)[0] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn qr_detects_collinear_columns() {
        let a = vec![1.0, 1.0, 1.0, 2.0, 2.0, 2.0];
        assert!(HouseholderQr::new(a, 3, 2).is_err());
    }

    #[test]
    fn spd_solve_two_by_two() {
        let mut b = [1.0, 1.0];
        spd_solve(vec![2.0, 1.0, 1.0, 3.0], 2, &mut b).unwrap();
        assert!((b[0] - 0.4).abs() < 1e-14 && (b[1] - 0.2).abs() < 1e-14);
    }
}
