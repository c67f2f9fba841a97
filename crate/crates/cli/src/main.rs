//! `driftshift` command-line tool.
//!
//! Exit status: 0 on success, 2 for invalid input (arguments, files, schema),
//! 3 when the numerics fail.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use driftshift::bench::{run_benchmark, BenchConfig};
use driftshift::io::{
    self as dio, DetectSettings, PosteriorArtifact, ReportFile, Stamp, TruthFile,
};
use driftshift::metrics::{match_and_score, score_all};
use driftshift::par::Exec;
use driftshift::pipeline::{detect, GroupChoice, Method};
use driftshift::sampler::run_gibbs;
use driftshift::sim::Design;
use driftshift::{DlmConfig, Error, Result, Shrinkage};

#[derive(Parser)]
#[command(
    name = "driftshift",
    version,
    about = "Changepoint detection from dynamic linear model posteriors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset from a simulation design.
    Simulate(SimulateArgs),
    /// Sample the model posterior for a dataset CSV and write an artifact.
    Fit(FitArgs),
    /// Read changepoints off a posterior artifact.
    Detect(DetectArgs),
    /// Run a replicated simulation benchmark.
    Bench(BenchArgs),
    /// Compare two changepoint lists.
    Score(ScoreArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Design name, e.g. mean-gaussian, mean-t2, mean-sv, reg, reg-sv, reg-cov, two-step.
    #[arg(long)]
    design: Design,
    /// Change magnitude; defaults to the largest value on the design's grid.
    #[arg(long)]
    magnitude: Option<f64>,
    /// Simulation seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Dataset CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the true changepoints as JSON.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ShrinkageArg {
    /// Dynamic shrinkage process on the increment variances.
    Dsp,
    /// Random walk with a constant increment variance.
    Rw,
}

/// Sampler settings given on the command line; each overrides the config file.
#[derive(Args)]
struct ModelFlags {
    /// JSON file with sampler settings (missing keys take defaults).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Difference order of the coefficient evolution (1 or 2).
    #[arg(long)]
    order: Option<usize>,
    #[arg(long, value_enum)]
    shrinkage: Option<ShrinkageArg>,
    /// Stochastic-volatility observation noise.
    #[arg(long)]
    sv_noise: Option<bool>,
    /// Sparse outlier component.
    #[arg(long)]
    outlier_term: Option<bool>,
    /// Discarded warm-up sweeps.
    #[arg(long)]
    burn: Option<usize>,
    /// Retained sweeps; artifacts keep at most 5000 after thinning.
    #[arg(long)]
    save: Option<usize>,
    /// Sampler seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl ModelFlags {
    fn resolve(&self) -> Result<DlmConfig> {
        let mut cfg = match &self.config {
            Some(p) => dio::read_config_file(p)?,
            None => DlmConfig::default(),
        };
        if let Some(v) = self.order {
            cfg.order = v;
        }
        if let Some(v) = self.shrinkage {
            cfg.shrinkage = match v {
                ShrinkageArg::Dsp => Shrinkage::DynamicShrinkage,
                ShrinkageArg::Rw => Shrinkage::RandomWalkConstantVariance,
            };
        }
        if let Some(v) = self.sv_noise {
            cfg.sv_noise = v;
        }
        if let Some(v) = self.outlier_term {
            cfg.outlier_term = v;
        }
        if let Some(v) = self.burn {
            cfg.n_burn = v;
        }
        if let Some(v) = self.save {
            cfg.n_save = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        cfg.check()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct FitArgs {
    /// Dataset CSV with column `y` and optional `t`, `x1..xp`, `z1..zl`.
    data: PathBuf,
    #[command(flatten)]
    model: ModelFlags,
    /// Posterior artifact (JSON).
    #[arg(long)]
    out: PathBuf,
}

/// Detection settings given on the command line; each overrides the settings file.
#[derive(Args)]
struct DetectFlags {
    /// JSON file with detection settings.
    #[arg(long)]
    detect_config: Option<PathBuf>,
    /// Difference order of the changepoint basis; defaults to the model's order.
    #[arg(long)]
    order: Option<usize>,
    /// `joint`, `singletons`, or explicit 1-based groups such as `1,2;3`.
    #[arg(long)]
    groups: Option<String>,
    /// Required upper credible bound of R^2.
    #[arg(long)]
    threshold: Option<f64>,
    /// Level of the central credible interval used for selection and bands.
    #[arg(long)]
    ci_level: Option<f64>,
    /// Extra changepoint counts to trace past the selected one.
    #[arg(long)]
    lookahead: Option<usize>,
}

fn parse_groups(text: &str) -> Result<GroupChoice> {
    match text.trim() {
        "joint" => Ok(GroupChoice::Joint),
        "singletons" => Ok(GroupChoice::Singletons),
        spec => spec
            .split(';')
            .map(|g| {
                g.split(',')
                    .map(|s| match s.trim().parse::<usize>() {
                        Ok(k) if k >= 1 => Ok(k - 1),
                        _ => Err(Error::Validation(format!(
                            "invalid series index {s:?} in groups"
                        ))),
                    })
                    .collect()
            })
            .collect::<Result<Vec<Vec<usize>>>>()
            .map(GroupChoice::Custom),
    }
}

impl DetectFlags {
    fn resolve(&self) -> Result<DetectSettings> {
        let mut s = match &self.detect_config {
            Some(p) => DetectSettings::parse(&fs::read_to_string(p)?)?,
            None => DetectSettings::default(),
        };
        if self.order.is_some() {
            s.order = self.order;
        }
        if let Some(g) = &self.groups {
            s.groups = parse_groups(g)?;
        }
        if let Some(v) = self.threshold {
            s.threshold = v;
        }
        if let Some(v) = self.ci_level {
            s.ci_level = v;
        }
        if self.lookahead.is_some() {
            s.lookahead = self.lookahead;
        }
        s.options()?;
        Ok(s)
    }
}

#[derive(Args)]
struct DetectArgs {
    /// Posterior artifact written by `fit`.
    posterior: PathBuf,
    #[command(flatten)]
    detect: DetectFlags,
    /// Known changepoints (1-based, comma separated) to score the result against.
    #[arg(long)]
    truth: Option<String>,
    #[arg(long, default_value_t = 5)]
    tolerance: usize,
    /// Directory for report.json, r2.csv, projection.csv and path.csv.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Design name, as for `simulate`.
    #[arg(long)]
    design: Design,
    /// Magnitudes (comma separated); defaults to the design's grid.
    #[arg(long, value_delimiter = ',')]
    magnitude: Vec<f64>,
    /// Replicates per magnitude.
    #[arg(long, default_value_t = 30)]
    reps: usize,
    /// Use 100 replicates.
    #[arg(long, conflicts_with = "reps")]
    full: bool,
    /// Methods (comma separated) among DC-DS, DC-RW, PELT; defaults to all that apply.
    #[arg(long, value_delimiter = ',')]
    methods: Vec<Method>,
    /// Sweep seed; every replicate derives its own data and sampler seeds from it.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Discarded warm-up sweeps per fit.
    #[arg(long)]
    burn: Option<usize>,
    /// Retained sweeps per fit.
    #[arg(long)]
    save: Option<usize>,
    /// Matching tolerance in time steps.
    #[arg(long, default_value_t = 5)]
    tolerance: usize,
    /// Run replicates one at a time.
    #[arg(long)]
    sequential: bool,
    /// Directory for bench.csv and bench.json; the CSV goes to stdout when omitted.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    /// True changepoints, 1-based and comma separated.
    #[arg(long, allow_hyphen_values = true)]
    truth: String,
    /// Predicted changepoints.
    #[arg(long, allow_hyphen_values = true)]
    pred: String,
    /// Series length.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 5)]
    tolerance: usize,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn simulate(a: &SimulateArgs) -> Result<()> {
    let magnitude = a.magnitude.unwrap_or(a.design.magnitude_grid()[0]);
    let sim = a.design.generate(magnitude, a.seed)?;
    let settings = serde_json::json!({ "design": a.design.name(), "magnitude": magnitude });
    let stamp = Stamp::new(a.seed, &settings);
    match &a.out {
        Some(p) => dio::write_dataset(create(p)?, &sim.dataset, &stamp)?,
        None => dio::write_dataset(io::stdout().lock(), &sim.dataset, &stamp)?,
    }
    if let Some(p) = &a.truth {
        let mut extra = std::collections::BTreeMap::new();
        if !sim.alpha.is_empty() {
            extra.insert("covariate_coefficients".to_string(), sim.alpha.to_vec());
        }
        let truth = TruthFile {
            stamp,
            design: a.design.name().into(),
            magnitude,
            changepoints: sim.truth.clone(),
            extra,
        };
        dio::write_json(create(p)?, &truth)?;
    }
    Ok(())
}

fn fit(a: &FitArgs) -> Result<()> {
    let dataset = dio::read_dataset_file(&a.data)?;
    let cfg = a.model.resolve()?;
    let draws = run_gibbs(&dataset, &cfg)?;
    let artifact = PosteriorArtifact::new(&cfg, &dataset, &draws);
    let mut out = create(&a.out)?;
    artifact.write(&mut out)?;
    out.flush()?;
    eprintln!(
        "wrote {} draws (thin {}) to {}",
        artifact.draws.n_draws(),
        artifact.thin,
        a.out.display()
    );
    Ok(())
}

fn run_detect(a: &DetectArgs) -> Result<()> {
    let art = PosteriorArtifact::read(io::BufReader::new(File::open(&a.posterior)?))?;
    let settings = a.detect.resolve()?;
    let order = settings.order.unwrap_or(art.config.order);
    let det = detect(&art.draws, &art.dataset, order, &settings.options()?)?;
    let mut report = det.report;
    if let Some(t) = &a.truth {
        let truth = dio::parse_changepoints(t)?;
        report.metrics = Some(score_all(
            &truth,
            &report.changepoints,
            art.dataset.n(),
            a.tolerance,
        ));
    }
    if report.threshold_not_reached {
        eprintln!(
            "warning: no changepoint count reaches R^2 upper bound {}; reporting the largest count on the path ({})",
            settings.threshold, report.selected_count
        );
    }
    let stamp = Stamp::new(
        art.config.seed,
        &(&art.stamp.config_hash, &settings, a.tolerance),
    );
    let path = dio::path_summary(&det.path);
    fs::create_dir_all(&a.out_dir)?;
    dio::write_r2_table(create(&a.out_dir.join("r2.csv"))?, &stamp, &report)?;
    dio::write_projection_table(
        create(&a.out_dir.join("projection.csv"))?,
        &stamp,
        &art.dataset,
        &art.draws.beta_mean(),
        &report,
    )?;
    dio::write_path_table(create(&a.out_dir.join("path.csv"))?, &stamp, &path)?;
    let file = ReportFile {
        stamp,
        model_config_hash: art.stamp.config_hash.clone(),
        settings,
        thin: art.thin,
        report,
        path,
    };
    dio::write_json(create(&a.out_dir.join("report.json"))?, &file)?;
    println!("{}", file.report.changepoint_labels.join(","));
    Ok(())
}

fn bench(a: &BenchArgs) -> Result<()> {
    let mut cfg = BenchConfig::new(a.design);
    if !a.magnitude.is_empty() {
        cfg.magnitudes = a.magnitude.clone();
    }
    cfg.n_reps = if a.full { 100 } else { a.reps };
    if !a.methods.is_empty() {
        cfg.methods = a.methods.clone();
    }
    cfg.seed = a.seed;
    if let Some(v) = a.burn {
        cfg.dlm.n_burn = v;
    }
    if let Some(v) = a.save {
        cfg.dlm.n_save = v;
    }
    cfg.dlm.check()?;
    cfg.tolerance = a.tolerance;
    cfg.exec = if a.sequential {
        Exec::Sequential
    } else {
        Exec::Parallel
    };
    let detect = DetectSettings::default();
    cfg.detect = detect.options()?;

    let result = run_benchmark(&cfg)?;
    let settings = dio::BenchSettings::describe(&cfg, &detect);
    let stamp = Stamp::new(cfg.seed, &settings);
    let failed: usize = result.rows.iter().map(|r| r.n_failed).sum();
    if failed > 0 {
        eprintln!("warning: {failed} replicate fits failed; see bench.json for messages");
    }
    match &a.out_dir {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            dio::write_bench_table(create(&dir.join("bench.csv"))?, &stamp, &result)?;
            dio::write_json(
                create(&dir.join("bench.json"))?,
                &dio::BenchFile {
                    stamp,
                    settings,
                    result,
                },
            )?;
        }
        None => dio::write_bench_table(io::stdout().lock(), &stamp, &result)?,
    }
    Ok(())
}

fn score(a: &ScoreArgs) -> Result<()> {
    let truth = dio::parse_changepoints(&a.truth)?;
    let pred = dio::parse_changepoints(&a.pred)?;
    if a.n == 0 {
        return Err(Error::Validation("n must be positive".into()));
    }
    let metrics = score_all(&truth, &pred, a.n, a.tolerance);
    let matches = match_and_score(&truth, &pred, a.tolerance);
    let out = serde_json::json!({
        "n": a.n,
        "tolerance": a.tolerance,
        "metrics": metrics,
        "true_positives": matches.true_positives,
    });
    dio::write_json(io::stdout().lock(), &out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a),
        Command::Detect(a) => run_detect(a),
        Command::Bench(a) => bench(a),
        Command::Score(a) => score(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() || matches!(e, Error::Io(_)) {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
