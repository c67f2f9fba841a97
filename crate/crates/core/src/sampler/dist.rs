//! Random variate helpers used by the Gibbs blocks.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

#[inline]
pub fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// `Gamma(shape, rate)` variate.
pub fn gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64, rate: f64) -> f64 {
    let g = Gamma::new(shape, 1.0 / rate).expect("positive gamma parameters");
    g.sample(rng)
}

/// `InverseGamma(shape, rate)` variate: the reciprocal of a `Gamma(shape, rate)`.
pub fn inv_gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64, rate: f64) -> f64 {
    let g = Gamma::new(shape, 1.0).expect("positive gamma shape");
    rate / g.sample(rng)
}

/// Uniform on the open interval `(0, 1)`.
#[inline]
pub fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// One univariate slice-sampling update on the bounded support `(lo, hi)`,
/// shrinking from the full interval.
pub fn slice_bounded<R, F>(rng: &mut R, x0: f64, lo: f64, hi: f64, log_density: F) -> f64
where
    R: Rng + ?Sized,
    F: Fn(f64) -> f64,
{
    let level = log_density(x0) + open_unit(rng).ln();
    let (mut left, mut right) = (lo, hi);
    for _ in 0..200 {
        let x = left + (right - left) * open_unit(rng);
        if x > lo && x < hi && log_density(x) > level {
            return x;
        }
        if x < x0 {
            left = x;
        } else {
            right = x;
        }
    }
    x0
}

/// Log density of `Beta(a, b)` up to a constant.
#[inline]
pub fn beta_log_kernel(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return f64::NEG_INFINITY;
    }
    (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn inverse_gamma_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 200_000;
        let m: f64 = (0..n).map(|_| inv_gamma(&mut rng, 5.0, 8.0)).sum::<f64>() / n as f64;
        // mean = rate / (shape - 1) = 2
        assert!((m - 2.0).abs() < 0.02, "{m}");
    }

    #[test]
    fn slice_sampler_targets_beta() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut x = 0.5;
        let mut acc = 0.0;
        let n = 50_000;
        for _ in 0..n {
            x = slice_bounded(&mut rng, x, 0.0, 1.0, |v| beta_log_kernel(v, 5.0, 1.5));
            acc += x;
        }
        let mean = acc / n as f64;
        assert!((mean - 5.0 / 6.5).abs() < 0.01, "{mean}");
    }
}
