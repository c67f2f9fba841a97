//! Replicate-level benchmark runner over the simulation designs.
//!
//! Every replicate owns its seeds, derived from the sweep seed, the magnitude
//! index and the replicate index, so results do not depend on scheduling. All
//! methods see the same simulated series within a replicate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{match_and_score, score_all, MatchScore};
use crate::model::{DlmConfig, MetricBlock};
use crate::par::{map_indexed, Exec};
use crate::pipeline::{DetectOptions, Method};
use crate::sim::Design;

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub design: Design,
    pub magnitudes: Vec<f64>,
    pub n_reps: usize,
    pub methods: Vec<Method>,
    pub seed: u64,
    /// Sampler settings shared by the decoupled methods; the seed is replaced per replicate.
    pub dlm: DlmConfig,
    pub detect: DetectOptions,
    /// Matching window for precision and recall.
    pub tolerance: usize,
    /// Scheduling of replicates.
    pub exec: Exec,
}

impl BenchConfig {
    /// Desk-scale defaults: 30 replicates of every applicable method over the design's grid.
    pub fn new(design: Design) -> Self {
        Self {
            design,
            magnitudes: design.magnitude_grid().to_vec(),
            n_reps: 30,
            methods: Method::ALL.to_vec(),
            seed: 1,
            dlm: DlmConfig::default(),
            detect: DetectOptions::default(),
            tolerance: 5,
            exec: Exec::default(),
        }
    }

    /// Methods that apply to the design; the mean-change baseline needs a mean-change series.
    pub fn applicable_methods(&self) -> Vec<Method> {
        let mut out: Vec<Method> = Vec::new();
        for &m in &self.methods {
            if (m != Method::Pelt || self.design.is_mean_change()) && !out.contains(&m) {
                out.push(m);
            }
        }
        out
    }
}

/// Seed of the simulated series for one replicate.
pub fn replicate_seed(seed: u64, magnitude_index: usize, replicate: usize) -> u64 {
    splitmix(
        splitmix(seed ^ 0x5eed_0000_0000_0000).wrapping_add(magnitude_index as u64)
            ^ (replicate as u64) << 20,
    )
}

/// Sampler seed used for a replicate whose data seed is `data_seed`.
pub fn sampler_seed(data_seed: u64) -> u64 {
    splitmix(data_seed)
}

fn splitmix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub design: Design,
    pub magnitude: f64,
    pub method: Method,
    pub replicate: usize,
    pub seed: u64,
    pub truth: Vec<usize>,
    /// Detected changepoints (1-based); empty when the replicate failed.
    pub changepoints: Vec<usize>,
    pub metrics: Option<MetricBlock>,
    pub matches: Option<MatchScore>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub design: Design,
    pub magnitude: f64,
    pub method: Method,
    pub n_ok: usize,
    pub n_failed: usize,
    pub rand_mean: f64,
    /// Standard error of the mean over replicates; 0 with fewer than two.
    pub rand_se: f64,
    pub adjusted_rand_mean: f64,
    pub adjusted_rand_se: f64,
    /// Precision, recall and F1 from match counts pooled over replicates.
    pub pooled: MatchScore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub rows: Vec<SummaryRow>,
    pub replicates: Vec<ReplicateResult>,
}

impl BenchResult {
    pub fn row(&self, magnitude: f64, method: Method) -> Option<&SummaryRow> {
        self.rows
            .iter()
            .find(|r| r.magnitude == magnitude && r.method == method)
    }

    /// Long format: one record per (design, magnitude, method, metric).
    pub fn long_rows(&self) -> Vec<LongRow> {
        let mut out = Vec::with_capacity(self.rows.len() * 5);
        for r in &self.rows {
            let base = |metric: &str, value: f64, se: Option<f64>| LongRow {
                design: r.design.name().to_string(),
                magnitude: r.magnitude,
                method: r.method.name().to_string(),
                metric: metric.to_string(),
                value,
                se,
                n_ok: r.n_ok,
                n_failed: r.n_failed,
            };
            out.push(base("rand", r.rand_mean, Some(r.rand_se)));
            out.push(base(
                "adjusted_rand",
                r.adjusted_rand_mean,
                Some(r.adjusted_rand_se),
            ));
            out.push(base("precision", r.pooled.precision, None));
            out.push(base("recall", r.pooled.recall, None));
            out.push(base("f1", r.pooled.f1, None));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongRow {
    pub design: String,
    pub magnitude: f64,
    pub method: String,
    pub metric: String,
    pub value: f64,
    pub se: Option<f64>,
    pub n_ok: usize,
    pub n_failed: usize,
}

/// Mean and standard error of the mean.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let k = values.len();
    if k == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / k as f64;
    if k < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
    (mean, (var / k as f64).sqrt())
}

/// Runs every (magnitude, replicate, method) cell. Failed replicates are
/// recorded and excluded from the averages; they never abort the sweep.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchResult> {
    if cfg.n_reps == 0 {
        return Err(Error::Validation("n_reps must be positive".into()));
    }
    if cfg.magnitudes.iter().any(|m| !m.is_finite() || *m < 0.0) {
        return Err(Error::Validation(
            "magnitudes must be finite and non-negative".into(),
        ));
    }
    let methods = cfg.applicable_methods();
    if methods.is_empty() {
        return Err(Error::Validation(format!(
            "no applicable method for design {}",
            cfg.design
        )));
    }
    let cells = cfg.magnitudes.len() * cfg.n_reps;
    let per_cell: Vec<Vec<ReplicateResult>> = map_indexed(cfg.exec, cells, |i| {
        run_cell(cfg, &methods, i / cfg.n_reps, i % cfg.n_reps)
    });
    let replicates: Vec<ReplicateResult> = per_cell.into_iter().flatten().collect();

    let mut rows = Vec::new();
    for &magnitude in &cfg.magnitudes {
        for &method in &methods {
            let reps: Vec<&ReplicateResult> = replicates
                .iter()
                .filter(|r| r.magnitude == magnitude && r.method == method)
                .collect();
            rows.push(summarize(cfg.design, magnitude, method, &reps));
        }
    }
    Ok(BenchResult { rows, replicates })
}

fn run_cell(cfg: &BenchConfig, methods: &[Method], mi: usize, rep: usize) -> Vec<ReplicateResult> {
    let magnitude = cfg.magnitudes[mi];
    let seed = replicate_seed(cfg.seed, mi, rep);
    let result = |method, truth: Vec<usize>, out: Result<Vec<usize>>, n: usize| {
        let (changepoints, metrics, matches, error) = match out {
            Ok(cps) => {
                let m = score_all(&truth, &cps, n, cfg.tolerance);
                let s = match_and_score(&truth, &cps, cfg.tolerance);
                (cps, Some(m), Some(s), None)
            }
            Err(e) => (Vec::new(), None, None, Some(e.to_string())),
        };
        ReplicateResult {
            design: cfg.design,
            magnitude,
            method,
            replicate: rep,
            seed,
            truth,
            changepoints,
            metrics,
            matches,
            error,
        }
    };
    let sim = match cfg.design.generate(magnitude, seed) {
        Ok(s) => s,
        Err(e) => {
            let msg = e.to_string();
            return methods
                .iter()
                .map(|&m| result(m, Vec::new(), Err(Error::Validation(msg.clone())), 0))
                .collect();
        }
    };
    let n = sim.dataset.n();
    // The outer sweep already saturates the pool; inner stages run sequentially.
    let inner = if cfg.exec.is_parallel() {
        Exec::Sequential
    } else {
        cfg.detect.select.exec
    };
    let detect = cfg.detect.clone().with_exec(inner);
    let dlm = DlmConfig {
        seed: sampler_seed(seed),
        ..cfg.dlm.clone()
    };
    methods
        .iter()
        .map(|&m| result(m, sim.truth.clone(), m.run(&sim.dataset, &dlm, &detect), n))
        .collect()
}

fn summarize(
    design: Design,
    magnitude: f64,
    method: Method,
    reps: &[&ReplicateResult],
) -> SummaryRow {
    let ok: Vec<&ReplicateResult> = reps.iter().copied().filter(|r| r.error.is_none()).collect();
    let rand: Vec<f64> = ok
        .iter()
        .filter_map(|r| r.metrics.map(|m| m.rand))
        .collect();
    let ari: Vec<f64> = ok
        .iter()
        .filter_map(|r| r.metrics.map(|m| m.adjusted_rand))
        .collect();
    let (tp, np, nt) = ok
        .iter()
        .filter_map(|r| r.matches)
        .fold((0, 0, 0), |(a, b, c), s| {
            (a + s.true_positives, b + s.n_pred, c + s.n_true)
        });
    let (rand_mean, rand_se) = mean_se(&rand);
    let (adjusted_rand_mean, adjusted_rand_se) = mean_se(&ari);
    SummaryRow {
        design,
        magnitude,
        method,
        n_ok: ok.len(),
        n_failed: reps.len() - ok.len(),
        rand_mean,
        rand_se,
        adjusted_rand_mean,
        adjusted_rand_se,
        pooled: MatchScore::from_counts(tp, np, nt),
    }
}
