//! Exact `PG(1, c)` sampler (alternating-series rejection, Devroye style).

use std::f64::consts::PI;

use rand::Rng;
use statrs::function::erf::erfc;

use super::dist::{open_unit, std_normal};

const TRUNC: f64 = 0.64;

fn exp1<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    -open_unit(rng).ln()
}

/// Standard normal CDF.
fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Coefficient `a_n(x)` of the alternating series for the `J*(1, z)` density.
fn series_coef(n: usize, x: f64) -> f64 {
    let k = n as f64 + 0.5;
    if x > TRUNC {
        PI * k * (-0.5 * k * k * PI * PI * x).exp()
    } else {
        PI * k * (2.0 / (PI * x)).powf(1.5) * (-2.0 * k * k / x).exp()
    }
}

/// Inverse-Gaussian(mean 1/z, shape 1) truncated to `(0, TRUNC)`.
fn truncated_inv_gauss<R: Rng + ?Sized>(rng: &mut R, z: f64) -> f64 {
    let t = TRUNC;
    if z < 1.0 / t {
        // Mean exceeds the truncation point: propose from the z = 0 (Levy) case.
        loop {
            let e1 = loop {
                let (e1, e2) = (exp1(rng), exp1(rng));
                if e1 * e1 <= 2.0 * e2 / t {
                    break e1;
                }
            };
            let x = t / ((1.0 + t * e1) * (1.0 + t * e1));
            let alpha = (-0.5 * z * z * x).exp();
            if open_unit(rng) <= alpha {
                return x;
            }
        }
    } else {
        let mu = 1.0 / z;
        loop {
            let y = {
                let g = std_normal(rng);
                g * g
            };
            let mut x =
                mu + 0.5 * mu * mu * y - 0.5 * mu * (4.0 * mu * y + (mu * y) * (mu * y)).sqrt();
            if open_unit(rng) > mu / (mu + x) {
                x = mu * mu / x;
            }
            if x < t {
                return x;
            }
        }
    }
}

/// Proposals tried before [`try_sample_pg1`] gives up.
pub const MAX_PROPOSALS: usize = 10_000;

/// Draws one `PG(1, c)` variate.
pub fn sample_pg1<R: Rng + ?Sized>(rng: &mut R, c: f64) -> f64 {
    try_sample_pg1(rng, c).expect("PG(1, c) rejection sampler exhausted its proposals")
}

/// Draws one `PG(1, c)` variate, or `None` if [`MAX_PROPOSALS`] proposals were rejected.
pub fn try_sample_pg1<R: Rng + ?Sized>(rng: &mut R, c: f64) -> Option<f64> {
    if !c.is_finite() {
        return None;
    }
    let z = 0.5 * c.abs();
    let t = TRUNC;
    let k = PI * PI / 8.0 + 0.5 * z * z;
    let p = PI / (2.0 * k) * (-k * t).exp();
    // Mass of the left piece: 2 e^{-z} times the inverse-Gaussian CDF at t.
    let sqrt_t = t.sqrt();
    let a = (t * z - 1.0) / sqrt_t;
    let b = -(t * z + 1.0) / sqrt_t;
    let q = 2.0 * ((-z).exp() * norm_cdf(a) + (z + norm_cdf(b).ln()).exp());
    let ratio = p / (p + q);

    for _ in 0..MAX_PROPOSALS {
        let x = if open_unit(rng) < ratio {
            t + exp1(rng) / k
        } else {
            truncated_inv_gauss(rng, z)
        };
        let mut s = series_coef(0, x);
        let y = open_unit(rng) * s;
        let mut n = 0;
        loop {
            n += 1;
            if n % 2 == 1 {
                s -= series_coef(n, x);
                if y <= s {
                    return Some(0.25 * x);
                }
            } else {
                s += series_coef(n, x);
                if y > s {
                    break;
                }
            }
            if n > 1000 {
                break;
            }
        }
    }
    None
}

/// Mean of `PG(1, c)`.
pub fn pg1_mean(c: f64) -> f64 {
    if c.abs() < 1e-6 {
        0.25 - c * c / 48.0
    } else {
        (0.5 * c).tanh() / (2.0 * c)
    }
}
