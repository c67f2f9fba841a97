//! File formats: dataset CSVs, JSON configuration, posterior artifacts, reports
//! and plot tables.
//!
//! Every emitted file carries the tool version, the seed and a SHA-256 hash of
//! the configuration that produced it. No timestamps are written, so reruns with
//! identical inputs are byte-identical. CSV files carry the stamp as a leading
//! `#` comment line, which the readers skip.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bench::{BenchConfig, BenchResult};
use crate::error::{Error, Result};
use crate::model::{ChangepointReport, Dataset, DlmConfig, PosteriorDraws, SolutionPath};
use crate::pipeline::{DetectOptions, GroupChoice};

pub const TOOL: &str = "driftshift";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
/// Version of the posterior artifact layout.
pub const ARTIFACT_VERSION: u32 = 1;
/// Retained draws beyond this are thinned before writing an artifact.
pub const MAX_ARTIFACT_DRAWS: usize = 5000;

/// Hex SHA-256 of the compact JSON encoding of `value`.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("configuration serializes");
    Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Identifies the tool build, seed and settings behind an output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stamp {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub config_hash: String,
}

impl Stamp {
    pub fn new<T: Serialize>(seed: u64, config: &T) -> Self {
        Self {
            tool: TOOL.into(),
            version: VERSION.into(),
            seed,
            config_hash: config_hash(config),
        }
    }

    fn comment(&self) -> String {
        format!(
            "# {} {} seed={} config={}\n",
            self.tool, self.version, self.seed, self.config_hash
        )
    }
}

// ---------------------------------------------------------------------------
// Datasets

fn indexed_columns(headers: &[String], prefix: char) -> Result<Vec<usize>> {
    let mut found: Vec<(usize, usize)> = Vec::new();
    for (c, h) in headers.iter().enumerate() {
        if let Some(k) = h.strip_prefix(prefix).and_then(|s| s.parse::<usize>().ok()) {
            found.push((k, c));
        }
    }
    found.sort_unstable();
    for (i, (k, _)) in found.iter().enumerate() {
        if *k != i + 1 {
            return Err(Error::Validation(format!(
                "columns {prefix}1..{prefix}{} must be numbered consecutively from 1",
                found.len()
            )));
        }
    }
    Ok(found.into_iter().map(|(_, c)| c).collect())
}

/// Parses a dataset CSV. Required column `y`; optional `t` (time labels),
/// `x1..xp` (predictors; an all-ones column when absent) and `z1..zl`
/// (covariates). Errors name the 1-based data row.
pub fn read_dataset<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let y_col = headers
        .iter()
        .position(|h| h == "y")
        .ok_or_else(|| Error::Validation("missing required column `y`".into()))?;
    let t_col = headers.iter().position(|h| h == "t");
    let x_cols = indexed_columns(&headers, 'x')?;
    let z_cols = indexed_columns(&headers, 'z')?;
    let known = 1 + usize::from(t_col.is_some()) + x_cols.len() + z_cols.len();
    if known != headers.len() {
        let extra: Vec<&String> = headers
            .iter()
            .enumerate()
            .filter(|(c, _)| {
                *c != y_col && Some(*c) != t_col && !x_cols.contains(c) && !z_cols.contains(c)
            })
            .map(|(_, h)| h)
            .collect();
        return Err(Error::Validation(format!("unrecognized columns {extra:?}")));
    }

    let mut y = Vec::new();
    let mut x = Vec::new();
    let mut z = Vec::new();
    let mut labels = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        if rec.len() != headers.len() {
            return Err(Error::Parse {
                row,
                message: format!("expected {} fields, found {}", headers.len(), rec.len()),
            });
        }
        let num = |c: usize| -> Result<f64> {
            let s = &rec[c];
            s.parse::<f64>().map_err(|_| Error::Parse {
                row,
                message: format!("column `{}`: cannot parse {s:?} as a number", headers[c]),
            })
        };
        y.push(num(y_col)?);
        for &c in &x_cols {
            x.push(num(c)?);
        }
        for &c in &z_cols {
            z.push(num(c)?);
        }
        if let Some(c) = t_col {
            labels.push(rec[c].to_string());
        }
    }
    let n = y.len();
    if n == 0 {
        return Err(Error::Validation("dataset has no rows".into()));
    }
    let x = if x_cols.is_empty() {
        Array2::ones((n, 1))
    } else {
        Array2::from_shape_vec((n, x_cols.len()), x).expect("row-major fill")
    };
    let z = Array2::from_shape_vec((n, z_cols.len()), z).expect("row-major fill");
    Dataset::new(Array1::from(y), x, z, t_col.map(|_| labels))
}

pub fn read_dataset_file(path: &Path) -> Result<Dataset> {
    read_dataset(std::fs::File::open(path)?)
}

/// Writes `t, y, x1.., z1..`. The predictor columns are omitted for a pure
/// mean-change dataset, which reads back identically.
pub fn write_dataset<W: Write>(mut out: W, ds: &Dataset, stamp: &Stamp) -> Result<()> {
    out.write_all(stamp.comment().as_bytes())?;
    let ones = ds.p() == 1 && ds.x.iter().all(|v| *v == 1.0);
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string(), "y".to_string()];
    if !ones {
        header.extend((1..=ds.p()).map(|j| format!("x{j}")));
    }
    header.extend((1..=ds.l()).map(|j| format!("z{j}")));
    w.write_record(&header)?;
    for t in 0..ds.n() {
        let mut rec = vec![ds.label(t), fmt(ds.y[t])];
        if !ones {
            rec.extend(ds.x.row(t).iter().map(|v| fmt(*v)));
        }
        rec.extend(ds.covariates.row(t).iter().map(|v| fmt(*v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Shortest decimal that round-trips, switching to exponent form for very
/// large or small magnitudes.
fn fmt(v: f64) -> String {
    format!("{v:?}")
}

// ---------------------------------------------------------------------------
// Configuration

/// Rejects keys of `value` that `template` does not have, recursively, so that a
/// misspelled field is reported instead of silently falling back to a default.
fn check_keys(value: &serde_json::Value, template: &serde_json::Value, path: &str) -> Result<()> {
    if let (Some(obj), Some(tpl)) = (value.as_object(), template.as_object()) {
        for (k, v) in obj {
            let full = if path.is_empty() {
                k.clone()
            } else {
                format!("{path}.{k}")
            };
            match tpl.get(k) {
                None => {
                    return Err(Error::Validation(format!(
                        "unknown configuration key `{full}`"
                    )))
                }
                Some(t) => check_keys(v, t, &full)?,
            }
        }
    }
    Ok(())
}

fn parse_strict<T: Serialize + DeserializeOwned + Default>(text: &str) -> Result<T> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    if !value.is_object() {
        return Err(Error::Validation(
            "configuration must be a JSON object".into(),
        ));
    }
    check_keys(&value, &serde_json::to_value(T::default())?, "")?;
    Ok(serde_json::from_value(value)?)
}

/// Parses a sampler configuration. Missing keys take their defaults; unknown
/// keys are errors. The result is validated.
pub fn parse_config(text: &str) -> Result<DlmConfig> {
    let cfg: DlmConfig = parse_strict(text)?;
    cfg.check()?;
    Ok(cfg)
}

pub fn read_config_file(path: &Path) -> Result<DlmConfig> {
    parse_config(&std::fs::read_to_string(path)?)
}

/// Detection settings as stored in reports and configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectSettings {
    /// Difference order of the changepoint basis; `None` uses the model's order.
    pub order: Option<usize>,
    pub groups: GroupChoice,
    pub threshold: f64,
    pub ci_level: f64,
    pub lookahead: Option<usize>,
    pub n_lambdas: usize,
    pub min_ratio: f64,
    pub use_covariates: bool,
}

impl Default for DetectSettings {
    fn default() -> Self {
        let d = DetectOptions::default();
        Self {
            order: None,
            groups: d.groups,
            threshold: d.select.threshold,
            ci_level: d.select.ci_level,
            lookahead: d.select.lookahead,
            n_lambdas: d.path.n_lambdas,
            min_ratio: d.path.min_ratio,
            use_covariates: d.use_covariates,
        }
    }
}

impl DetectSettings {
    pub fn parse(text: &str) -> Result<Self> {
        parse_strict(text)
    }

    pub fn options(&self) -> Result<DetectOptions> {
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(Error::Validation(format!(
                "ci_level must be in (0, 1), got {}",
                self.ci_level
            )));
        }
        if !self.threshold.is_finite() {
            return Err(Error::Validation("threshold must be finite".into()));
        }
        if self.n_lambdas == 0 || !(self.min_ratio > 0.0 && self.min_ratio < 1.0) {
            return Err(Error::Validation(
                "n_lambdas must be positive and min_ratio in (0, 1)".into(),
            ));
        }
        let mut o = DetectOptions {
            groups: self.groups.clone(),
            use_covariates: self.use_covariates,
            ..Default::default()
        };
        o.select.threshold = self.threshold;
        o.select.ci_level = self.ci_level;
        o.select.lookahead = self.lookahead;
        o.path.n_lambdas = self.n_lambdas;
        o.path.min_ratio = self.min_ratio;
        Ok(o)
    }
}

// ---------------------------------------------------------------------------
// Posterior artifacts

/// Per-time posterior means stored alongside the draws for quick inspection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawSummary {
    pub beta_mean: Array2<f64>,
    pub sigma2_mean: Array1<f64>,
    pub alpha_mean: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorArtifact {
    pub artifact_version: u32,
    pub stamp: Stamp,
    pub config: DlmConfig,
    pub dataset: Dataset,
    /// Every `thin`-th retained draw is stored.
    pub thin: usize,
    pub summary: DrawSummary,
    pub draws: PosteriorDraws,
}

/// Keeps every `k`-th draw with `k = ceil(n_draws / max_draws)`; returns `k`.
pub fn thin_draws(draws: &PosteriorDraws, max_draws: usize) -> (PosteriorDraws, usize) {
    let s = draws.n_draws();
    let k = s.div_ceil(max_draws.max(1)).max(1);
    if k == 1 {
        return (draws.clone(), 1);
    }
    let idx: Vec<usize> = (0..s).step_by(k).collect();
    let thinned = PosteriorDraws {
        beta: draws.beta.select(Axis(0), &idx),
        sigma2_eps: draws.sigma2_eps.select(Axis(0), &idx),
        alpha: draws.alpha.select(Axis(0), &idx),
        zeta: draws.zeta.as_ref().map(|z| z.select(Axis(0), &idx)),
        h: draws.h.as_ref().map(|h| h.select(Axis(0), &idx)),
    };
    (thinned, k)
}

impl PosteriorArtifact {
    pub fn new(config: &DlmConfig, dataset: &Dataset, draws: &PosteriorDraws) -> Self {
        let summary = DrawSummary {
            beta_mean: draws.beta_mean(),
            sigma2_mean: draws.sigma2_eps.mean_axis(Axis(0)).expect("draws present"),
            alpha_mean: draws.alpha_mean(),
        };
        let (draws, thin) = thin_draws(draws, MAX_ARTIFACT_DRAWS);
        Self {
            artifact_version: ARTIFACT_VERSION,
            stamp: Stamp::new(config.seed, config),
            config: config.clone(),
            dataset: dataset.clone(),
            thin,
            summary,
            draws,
        }
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer(out, self)?;
        Ok(())
    }

    /// Reads an artifact, checking the layout version before anything else.
    pub fn read<R: Read>(reader: R) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_reader(reader)?;
        let found = value
            .get("artifact_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| {
                Error::Validation("not a posterior artifact: missing artifact_version".into())
            })?;
        if found != u64::from(ARTIFACT_VERSION) {
            return Err(Error::ArtifactVersion {
                found: found as u32,
                expected: ARTIFACT_VERSION,
            });
        }
        let art: Self = serde_json::from_value(value)?;
        art.draws.check()?;
        if art.draws.n() != art.dataset.n() || art.draws.p() != art.dataset.p() {
            return Err(Error::Validation(
                "artifact draws do not match its dataset".into(),
            ));
        }
        Ok(art)
    }
}

// ---------------------------------------------------------------------------
// Reports

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub lambda: f64,
    pub count: usize,
    pub objective: f64,
}

pub fn path_summary(path: &SolutionPath) -> Vec<PathPoint> {
    (0..path.lambdas.len())
        .map(|k| PathPoint {
            lambda: path.lambdas[k],
            count: path.count(k),
            objective: path.objective[k],
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub stamp: Stamp,
    /// Hash of the model configuration that produced the posterior.
    pub model_config_hash: String,
    pub settings: DetectSettings,
    /// Retained draws per stored draw in the posterior artifact.
    pub thin: usize,
    pub report: ChangepointReport,
    pub path: Vec<PathPoint>,
}

fn write_stamped_csv<W: Write>(
    mut out: W,
    stamp: &Stamp,
    header: &[String],
    rows: &[Vec<String>],
) -> Result<()> {
    out.write_all(stamp.comment().as_bytes())?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

/// Per-count `R^2` quantiles.
pub fn write_r2_table<W: Write>(out: W, stamp: &Stamp, report: &ChangepointReport) -> Result<()> {
    let rows: Vec<Vec<String>> = report
        .r2_table
        .iter()
        .map(|r| {
            vec![
                r.count.to_string(),
                fmt(r.lambda),
                fmt(r.q05),
                fmt(r.median),
                fmt(r.q95),
                fmt(r.upper),
            ]
        })
        .collect();
    write_stamped_csv(
        out,
        stamp,
        &strings(&["count", "lambda", "q05", "median", "q95", "upper"]),
        &rows,
    )
}

/// Long table per time step and series: response, posterior mean, projected
/// mean and its band.
pub fn write_projection_table<W: Write>(
    out: W,
    stamp: &Stamp,
    dataset: &Dataset,
    posterior_mean: &Array2<f64>,
    report: &ChangepointReport,
) -> Result<()> {
    let mut rows = Vec::new();
    for t in 0..dataset.n() {
        for j in 0..dataset.p() {
            rows.push(vec![
                (t + 1).to_string(),
                dataset.label(t),
                (j + 1).to_string(),
                fmt(dataset.y[t]),
                fmt(posterior_mean[[t, j]]),
                fmt(report.projected_mean[[t, j]]),
                fmt(report.band_lower[[t, j]]),
                fmt(report.band_upper[[t, j]]),
            ]);
        }
    }
    let header = strings(&[
        "t",
        "label",
        "series",
        "y",
        "posterior_mean",
        "projected_mean",
        "band_lower",
        "band_upper",
    ]);
    write_stamped_csv(out, stamp, &header, &rows)
}

pub fn write_path_table<W: Write>(out: W, stamp: &Stamp, path: &[PathPoint]) -> Result<()> {
    let rows: Vec<Vec<String>> = path
        .iter()
        .map(|p| vec![fmt(p.lambda), p.count.to_string(), fmt(p.objective)])
        .collect();
    write_stamped_csv(
        out,
        stamp,
        &strings(&["lambda", "count", "objective"]),
        &rows,
    )
}

// ---------------------------------------------------------------------------
// Benchmarks

/// Benchmark settings in a serializable form, used for the stamp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSettings {
    pub design: String,
    pub magnitudes: Vec<f64>,
    pub n_reps: usize,
    pub methods: Vec<String>,
    pub seed: u64,
    pub dlm: DlmConfig,
    pub detect: DetectSettings,
    pub tolerance: usize,
}

impl BenchSettings {
    pub fn describe(cfg: &BenchConfig, detect: &DetectSettings) -> Self {
        Self {
            design: cfg.design.name().into(),
            magnitudes: cfg.magnitudes.clone(),
            n_reps: cfg.n_reps,
            methods: cfg
                .applicable_methods()
                .iter()
                .map(|m| m.name().to_string())
                .collect(),
            seed: cfg.seed,
            dlm: cfg.dlm.clone(),
            detect: detect.clone(),
            tolerance: cfg.tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchFile {
    pub stamp: Stamp,
    pub settings: BenchSettings,
    pub result: BenchResult,
}

/// Long-format CSV: one row per (design, magnitude, method, metric).
pub fn write_bench_table<W: Write>(out: W, stamp: &Stamp, result: &BenchResult) -> Result<()> {
    let rows: Vec<Vec<String>> = result
        .long_rows()
        .into_iter()
        .map(|r| {
            vec![
                r.design,
                fmt(r.magnitude),
                r.method,
                r.metric,
                fmt(r.value),
                r.se.map(fmt).unwrap_or_default(),
                r.n_ok.to_string(),
                r.n_failed.to_string(),
            ]
        })
        .collect();
    let header = strings(&[
        "design",
        "magnitude",
        "method",
        "metric",
        "value",
        "se",
        "n_ok",
        "n_failed",
    ]);
    write_stamped_csv(out, stamp, &header, &rows)
}

// ---------------------------------------------------------------------------

/// Parses a comma-separated list of 1-based changepoints (empty input is the empty set).
pub fn parse_changepoints(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<usize>()
                .map_err(|_| Error::Validation(format!("invalid changepoint {s:?}")))
        })
        .collect()
}

/// Simulation truth written next to a simulated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub stamp: Stamp,
    pub design: String,
    pub magnitude: f64,
    pub changepoints: Vec<usize>,
    /// Extra fields, e.g. covariate coefficients.
    pub extra: BTreeMap<String, Vec<f64>>,
}

/// Pretty JSON with a trailing newline.
pub fn write_json<W: Write, T: Serialize>(mut out: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(std::io::BufReader::new(
        std::fs::File::open(path)?,
    ))?)
}
