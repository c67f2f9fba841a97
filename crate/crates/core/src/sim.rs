//! Seeded generators for the simulation designs. Every generator returns the
//! dataset together with its true changepoints (1-based) and coefficient paths.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Dataset;

/// Observation noise of a simulated series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Noise {
    Gaussian,
    /// Unscaled Student t with 2 degrees of freedom.
    StudentT2,
    /// `e_t = exp(h_t / 2) z_t` with `h_t - level = persistence (h_{t-1} - level) + N(0, innovation_var)`,
    /// started from the stationary law.
    StochasticVolatility {
        level: f64,
        persistence: f64,
        innovation_var: f64,
    },
}

impl Noise {
    pub const SV_MEAN_DESIGN: Noise = Noise::StochasticVolatility {
        level: 0.0,
        persistence: 0.9,
        innovation_var: 0.5,
    };
    pub const SV_REGRESSION_DESIGN: Noise = Noise::StochasticVolatility {
        level: 0.0,
        persistence: 0.9,
        innovation_var: 1.0,
    };

    /// Draws `n` noise values and their variances (infinite for the t noise).
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> (Vec<f64>, Vec<f64>) {
        match *self {
            Noise::Gaussian => (
                (0..n).map(|_| rng.sample(StandardNormal)).collect(),
                vec![1.0; n],
            ),
            Noise::StudentT2 => {
                let t = StudentT::new(2.0).expect("valid degrees of freedom");
                (
                    (0..n).map(|_| t.sample(rng)).collect(),
                    vec![f64::INFINITY; n],
                )
            }
            Noise::StochasticVolatility {
                level,
                persistence,
                innovation_var,
            } => {
                let sd = innovation_var.sqrt();
                let z0: f64 = rng.sample(StandardNormal);
                let mut h = level + z0 * sd / (1.0 - persistence * persistence).sqrt();
                let mut e = Vec::with_capacity(n);
                let mut var = Vec::with_capacity(n);
                for t in 0..n {
                    if t > 0 {
                        let z: f64 = rng.sample(StandardNormal);
                        h = level + persistence * (h - level) + sd * z;
                    }
                    let z: f64 = rng.sample(StandardNormal);
                    e.push((0.5 * h).exp() * z);
                    var.push(h.exp());
                }
                (e, var)
            }
        }
    }
}

/// A simulated series with its ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Simulated {
    pub dataset: Dataset,
    /// True changepoints, 1-based.
    pub truth: Vec<usize>,
    /// True coefficient paths, `n x p`.
    pub beta: Array2<f64>,
    /// True covariate coefficients.
    pub alpha: Array1<f64>,
    /// True noise variances.
    pub noise_var: Array1<f64>,
}

/// Piecewise-constant level: `levels[k]` holds from changepoint `k` (1-based) on.
fn piecewise(n: usize, cps: &[usize], levels: &[f64]) -> Vec<f64> {
    (1..=n)
        .map(|t| levels[cps.iter().filter(|&&c| c <= t).count()])
        .collect()
}

fn check_cps(n: usize, cps: &[usize]) -> Result<()> {
    if cps.windows(2).any(|w| w[0] >= w[1]) || cps.iter().any(|&c| c < 2 || c > n) {
        return Err(Error::Validation(format!(
            "changepoints {cps:?} must be increasing within 2..={n}"
        )));
    }
    Ok(())
}

/// Step in mean from 0 to `magnitude` at each changepoint in turn (alternating
/// 0, magnitude, 0, ...).
pub fn gen_mean_change(
    n: usize,
    cps: &[usize],
    magnitude: f64,
    noise: Noise,
    seed: u64,
) -> Result<Simulated> {
    check_cps(n, cps)?;
    let levels: Vec<f64> = (0..=cps.len())
        .map(|k| if k % 2 == 0 { 0.0 } else { magnitude })
        .collect();
    gen_levels(n, cps, &levels, noise, seed)
}

/// Piecewise-constant mean with explicit segment levels.
pub fn gen_levels(
    n: usize,
    cps: &[usize],
    levels: &[f64],
    noise: Noise,
    seed: u64,
) -> Result<Simulated> {
    check_cps(n, cps)?;
    if levels.len() != cps.len() + 1 {
        return Err(Error::Validation("need one level per segment".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mean = piecewise(n, cps, levels);
    let (e, var) = noise.draw(&mut rng, n);
    let y: Array1<f64> = mean.iter().zip(&e).map(|(m, e)| m + e).collect();
    Ok(Simulated {
        dataset: Dataset::mean_change(y)?,
        truth: cps.to_vec(),
        beta: Array2::from_shape_vec((n, 1), mean).expect("shape"),
        alpha: Array1::zeros(0),
        noise_var: Array1::from(var),
    })
}

/// `p` standard-normal predictors whose coefficients all switch jointly between
/// 0 and `magnitude` at each changepoint.
pub fn gen_regression(
    n: usize,
    cps: &[usize],
    p: usize,
    magnitude: f64,
    noise: Noise,
    seed: u64,
) -> Result<Simulated> {
    check_cps(n, cps)?;
    if p == 0 {
        return Err(Error::Validation(
            "at least one predictor is required".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let levels: Vec<f64> = (0..=cps.len())
        .map(|k| if k % 2 == 0 { 0.0 } else { magnitude })
        .collect();
    let coef = piecewise(n, cps, &levels);
    let x = Array2::from_shape_simple_fn((n, p), || rng.sample::<f64, _>(StandardNormal));
    let (e, var) = noise.draw(&mut rng, n);
    let beta = Array2::from_shape_fn((n, p), |(t, _)| coef[t]);
    let y: Array1<f64> = (0..n).map(|t| x.row(t).dot(&beta.row(t)) + e[t]).collect();
    Ok(Simulated {
        dataset: Dataset::new(y, x, Array2::zeros((n, 0)), None)?,
        truth: cps.to_vec(),
        beta,
        alpha: Array1::zeros(0),
        noise_var: Array1::from(var),
    })
}

/// One standard-normal predictor switching 0 to `magnitude` at the changepoint,
/// plus two Bernoulli(0.5) covariates with constant coefficients.
pub fn gen_regression_with_covariates(
    n: usize,
    cp: usize,
    magnitude: f64,
    seed: u64,
) -> Result<Simulated> {
    const ALPHA: [f64; 2] = [0.3, 0.1];
    check_cps(n, &[cp])?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coef = piecewise(n, &[cp], &[0.0, magnitude]);
    let x = Array2::from_shape_simple_fn((n, 1), || rng.sample::<f64, _>(StandardNormal));
    let bern = Bernoulli::new(0.5).expect("valid probability");
    let z = Array2::from_shape_simple_fn((n, 2), || if bern.sample(&mut rng) { 1.0 } else { 0.0 });
    let (e, var) = Noise::Gaussian.draw(&mut rng, n);
    let y: Array1<f64> = (0..n)
        .map(|t| coef[t] * x[[t, 0]] + ALPHA[0] * z[[t, 0]] + ALPHA[1] * z[[t, 1]] + e[t])
        .collect();
    Ok(Simulated {
        dataset: Dataset::new(y, x, z, None)?,
        truth: vec![cp],
        beta: Array2::from_shape_vec((n, 1), coef).expect("shape"),
        alpha: Array1::from(ALPHA.to_vec()),
        noise_var: Array1::from(var),
    })
}

/// Named simulation designs with their default sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Design {
    /// n = 200, step at 100, Gaussian noise.
    MeanGaussian,
    /// n = 200, step at 100, t(2) noise.
    MeanT2,
    /// n = 200, step at 100, SV(1) noise with innovation variance 0.5.
    MeanSv,
    /// n = 300, three predictors, joint changes at 75 and 225, Gaussian noise.
    Reg,
    /// As `Reg` with SV(1) noise of innovation variance 1.
    RegSv,
    /// n = 300, one predictor changing at 150, two Bernoulli covariates.
    RegCov,
    /// n = 300, mean levels 0, magnitude, magnitude / 3 with changes at 101 and 201.
    TwoStep,
}

impl Design {
    pub const ALL: [Design; 7] = [
        Design::MeanGaussian,
        Design::MeanT2,
        Design::MeanSv,
        Design::Reg,
        Design::RegSv,
        Design::RegCov,
        Design::TwoStep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Design::MeanGaussian => "mean-gaussian",
            Design::MeanT2 => "mean-t2",
            Design::MeanSv => "mean-sv",
            Design::Reg => "reg",
            Design::RegSv => "reg-sv",
            Design::RegCov => "reg-cov",
            Design::TwoStep => "two-step",
        }
    }

    /// Magnitudes of the published grids.
    pub fn magnitude_grid(self) -> &'static [f64] {
        match self {
            Design::MeanGaussian => &[1.0, 0.75, 0.5, 0.25],
            Design::MeanT2 | Design::MeanSv => &[2.0, 1.5, 1.0, 0.5],
            Design::Reg | Design::RegSv | Design::RegCov => &[2.0, 1.0, 0.5],
            Design::TwoStep => &[3.0],
        }
    }

    /// True for designs whose response is a mean-change series (PELT applies).
    pub fn is_mean_change(self) -> bool {
        matches!(
            self,
            Design::MeanGaussian | Design::MeanT2 | Design::MeanSv | Design::TwoStep
        )
    }

    pub fn generate(self, magnitude: f64, seed: u64) -> Result<Simulated> {
        if !(magnitude.is_finite() && magnitude >= 0.0) {
            return Err(Error::Validation(format!(
                "magnitude must be non-negative, got {magnitude}"
            )));
        }
        match self {
            Design::MeanGaussian => gen_mean_change(200, &[100], magnitude, Noise::Gaussian, seed),
            Design::MeanT2 => gen_mean_change(200, &[100], magnitude, Noise::StudentT2, seed),
            Design::MeanSv => gen_mean_change(200, &[100], magnitude, Noise::SV_MEAN_DESIGN, seed),
            Design::Reg => gen_regression(300, &[75, 225], 3, magnitude, Noise::Gaussian, seed),
            Design::RegSv => gen_regression(
                300,
                &[75, 225],
                3,
                magnitude,
                Noise::SV_REGRESSION_DESIGN,
                seed,
            ),
            Design::RegCov => gen_regression_with_covariates(300, 150, magnitude, seed),
            Design::TwoStep => gen_levels(
                300,
                &[101, 201],
                &[0.0, magnitude, magnitude / 3.0],
                Noise::Gaussian,
                seed,
            ),
        }
    }
}

impl fmt::Display for Design {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Design {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Design::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::Validation(format!("unknown design '{s}'")))
    }
}
