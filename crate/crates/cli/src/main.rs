//! tabci: per-feature conformal confidence intervals from the command line.
//!
//! Subcommands cover the full workflow: `fit` trains and serializes the
//! interval pipeline, `intervals` emits per-feature bounds for a test CSV,
//! `stratify` ranks test rows and writes a 2-D projection, `metrics`
//! scores interval quality, and `synth-bench` / `lambda-sweep` run the
//! built-in correlated-Gaussian benchmark.
//!
//! Configuration comes from an optional JSON file (`--config`) that plain
//! flags override. The seed is mandatory: there are no wall-clock
//! defaults, so identical configuration yields byte-identical artifacts.
//! Artifact names embed the first eight hex digits of the SHA-256 of the
//! resolved configuration plus the seed, and files are written to a
//! temporary name and renamed so readers never observe a partial file.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical
//! failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use tabci_core::data::{encode_onehot, load_csv, TabularDataset};
use tabci_core::metrics::interval_quality;
use tabci_core::pipeline::{
    default_lambda_grid, fit_pipeline, lambda_sweep, run_bench, AugmentationMode, BenchConfig,
    PipelineParams,
};
use tabci_core::stratify::project_2d;
use tabci_core::Error as CoreError;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "tabci", version, about = "Per-feature conformal confidence intervals for tabular data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Fit the interval pipeline on a training CSV and save the model.
    Fit,
    /// Fit on train, then write per-feature intervals for every test row.
    Intervals,
    /// Fit on train, then rank test rows and write the stratification.
    Stratify,
    /// Fit on train, then score interval quality on the test rows.
    Metrics,
    /// Run the synthetic downstream benchmark and report its figures.
    SynthBench,
    /// Sweep the inconsistency threshold over the synthetic benchmark.
    LambdaSweep,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Fit => "fit",
            Command::Intervals => "intervals",
            Command::Stratify => "stratify",
            Command::Metrics => "metrics",
            Command::SynthBench => "synth-bench",
            Command::LambdaSweep => "lambda-sweep",
        }
    }

    fn needs_train(self) -> bool {
        matches!(self, Command::Fit | Command::Intervals | Command::Stratify | Command::Metrics)
    }

    fn needs_test(self) -> bool {
        matches!(self, Command::Intervals | Command::Stratify | Command::Metrics)
    }
}

/// Flags that override config-file keys. All optional here; required
/// values are checked after merging.
#[derive(Args, Debug, Clone)]
struct Overrides {
    /// JSON configuration file; every flag below overrides its key.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Training CSV (header row; non-numeric columns are one-hot encoded).
    #[arg(long, global = true)]
    train: Option<PathBuf>,
    /// Test CSV with the training schema.
    #[arg(long, global = true)]
    test: Option<PathBuf>,
    /// Output directory for artifacts (default ".").
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Miscoverage level of the intervals, in (0, 1).
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Inconsistency threshold, in [0, 1].
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// Fraction of the augmented set used as proper training rows.
    #[arg(long, global = true)]
    proper_fraction: Option<f64>,
    /// Vine depth cap (omit to fit all trees).
    #[arg(long, global = true)]
    truncation: Option<usize>,
    /// Whether synthetic rows extend or replace the training data.
    #[arg(long, global = true, value_enum)]
    augmentation: Option<AugmentationChoice>,
    /// Synthetic rows to sample (default: one per training row).
    #[arg(long, global = true)]
    synthetic_count: Option<usize>,
    /// Reorder vine variables along a greedy max-dependence chain.
    #[arg(long, global = true)]
    reorder_by_dependence: Option<bool>,
    /// RNG seed. Required: runs are reproducible or they do not happen.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Benchmark: training rows.
    #[arg(long, global = true)]
    n_train: Option<usize>,
    /// Benchmark: test rows.
    #[arg(long, global = true)]
    n_test: Option<usize>,
    /// Benchmark: fraction of test rows perturbed.
    #[arg(long, global = true)]
    perturb_fraction: Option<f64>,
    /// Benchmark: standard deviation of the perturbation noise.
    #[arg(long, global = true)]
    noise_scale: Option<f64>,
    /// Benchmark: size of the most-certain group.
    #[arg(long, global = true)]
    certain_count: Option<usize>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum AugmentationChoice {
    Union,
    SyntheticOnly,
}

impl From<AugmentationChoice> for AugmentationMode {
    fn from(c: AugmentationChoice) -> Self {
        match c {
            AugmentationChoice::Union => AugmentationMode::Union,
            AugmentationChoice::SyntheticOnly => AugmentationMode::SyntheticOnly,
        }
    }
}

/// Config-file schema. Unknown keys are rejected so typos surface as
/// usage errors instead of silently using defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    train: Option<PathBuf>,
    test: Option<PathBuf>,
    out_dir: Option<PathBuf>,
    alpha: Option<f64>,
    lambda: Option<f64>,
    proper_fraction: Option<f64>,
    truncation: Option<usize>,
    augmentation: Option<AugmentationChoice>,
    synthetic_count: Option<usize>,
    reorder_by_dependence: Option<bool>,
    seed: Option<u64>,
    n_train: Option<usize>,
    n_test: Option<usize>,
    perturb_fraction: Option<f64>,
    noise_scale: Option<f64>,
    certain_count: Option<usize>,
}

/// Fully merged configuration. Serialized (in this field order) into the
/// run report and hashed into every artifact name.
#[derive(Debug, Clone, Serialize)]
struct Resolved {
    command: String,
    train: Option<String>,
    test: Option<String>,
    out_dir: String,
    alpha: f64,
    lambda: f64,
    proper_fraction: f64,
    truncation: Option<usize>,
    augmentation: AugmentationChoice,
    synthetic_count: Option<usize>,
    reorder_by_dependence: bool,
    seed: u64,
    n_train: usize,
    n_test: usize,
    perturb_fraction: f64,
    noise_scale: f64,
    certain_count: usize,
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    CoreError::Config(msg.into()).into()
}

fn resolve(command: Command, o: &Overrides) -> anyhow::Result<Resolved> {
    let file: FileConfig = match &o.config {
        None => FileConfig::default(),
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| usage(format!("config {}: {e}", path.display())))?
        }
    };
    let seed = o
        .seed
        .or(file.seed)
        .ok_or_else(|| usage("a seed is required (--seed or config key \"seed\")"))?;
    let pick = |flag: Option<PathBuf>, key: Option<PathBuf>| flag.or(key);
    let resolved = Resolved {
        command: command.name().to_string(),
        train: pick(o.train.clone(), file.train).map(|p| p.display().to_string()),
        test: pick(o.test.clone(), file.test).map(|p| p.display().to_string()),
        out_dir: pick(o.out_dir.clone(), file.out_dir)
            .unwrap_or_else(|| PathBuf::from("."))
            .display()
            .to_string(),
        alpha: o.alpha.or(file.alpha).unwrap_or(0.05),
        lambda: o.lambda.or(file.lambda).unwrap_or(0.5),
        proper_fraction: o.proper_fraction.or(file.proper_fraction).unwrap_or(2.0 / 3.0),
        truncation: o.truncation.or(file.truncation),
        augmentation: o.augmentation.or(file.augmentation).unwrap_or(AugmentationChoice::Union),
        synthetic_count: o.synthetic_count.or(file.synthetic_count),
        reorder_by_dependence: o
            .reorder_by_dependence
            .or(file.reorder_by_dependence)
            .unwrap_or(false),
        seed,
        n_train: o.n_train.or(file.n_train).unwrap_or(1000),
        n_test: o.n_test.or(file.n_test).unwrap_or(1000),
        perturb_fraction: o.perturb_fraction.or(file.perturb_fraction).unwrap_or(0.5),
        noise_scale: o.noise_scale.or(file.noise_scale).unwrap_or(2.0),
        certain_count: o.certain_count.or(file.certain_count).unwrap_or(100),
    };
    if !(resolved.alpha > 0.0 && resolved.alpha < 1.0) {
        return Err(usage(format!("alpha must lie in (0, 1), got {}", resolved.alpha)));
    }
    if !(0.0..=1.0).contains(&resolved.lambda) {
        return Err(usage(format!("lambda must lie in [0, 1], got {}", resolved.lambda)));
    }
    if command.needs_train() && resolved.train.is_none() {
        return Err(usage(format!("`{}` needs --train (or config key \"train\")", command.name())));
    }
    if command.needs_test() && resolved.test.is_none() {
        return Err(usage(format!("`{}` needs --test (or config key \"test\")", command.name())));
    }
    Ok(resolved)
}

impl Resolved {
    fn hash8(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().take(4).map(|b| format!("{b:02x}")).collect()
    }

    fn pipeline_params(&self) -> PipelineParams {
        let mut params = PipelineParams {
            proper_fraction: self.proper_fraction,
            truncation: self.truncation,
            reorder_by_dependence: self.reorder_by_dependence,
            augmentation: self.augmentation.into(),
            synthetic_count: self.synthetic_count,
            seed: self.seed,
            ..PipelineParams::default()
        };
        params.conformal.alpha = self.alpha;
        params
    }

    fn bench_config(&self) -> BenchConfig {
        BenchConfig {
            n_train: self.n_train,
            n_test: self.n_test,
            perturb_fraction: self.perturb_fraction,
            noise_scale: self.noise_scale,
            lambda: self.lambda,
            certain_count: self.certain_count,
            pipeline: self.pipeline_params(),
            seed: self.seed,
            ..BenchConfig::default()
        }
    }
}

/// Writes bytes to `dir/name` atomically: a temporary file in the same
/// directory is renamed over the final path, so a crash never leaves a
/// partial artifact under the real name.
fn write_artifact(dir: &Path, name: &str, bytes: &[u8]) -> anyhow::Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let tmp = dir.join(format!("{name}.tmp"));
    let path = dir.join(name);
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, &path).with_context(|| format!("renaming to {}", path.display()))?;
    Ok(path)
}

fn json_bytes<T: Serialize>(value: &T) -> anyhow::Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Loads a CSV and one-hot encodes any categorical columns. With a
/// `template` (the encoded training schema) the encoding reuses the
/// training levels so the test matrix lines up column for column.
fn load_dataset(
    path: &str,
    template: Option<&TabularDataset>,
) -> anyhow::Result<TabularDataset> {
    let ds = load_csv(Path::new(path), None)?;
    let (encoded, report) = encode_onehot(&ds, template.map(|t| t.columns.as_slice()))?;
    if report.unseen_total() > 0 {
        eprintln!(
            "note: {} cells in {path} hold categorical levels unseen in training",
            report.unseen_total()
        );
    }
    Ok(encoded)
}

struct Run {
    resolved: Resolved,
    hash: String,
    artifacts: Vec<String>,
}

impl Run {
    fn new(resolved: Resolved) -> Self {
        let hash = resolved.hash8();
        Run { resolved, hash, artifacts: Vec::new() }
    }

    fn artifact_name(&self, stem: &str, ext: &str) -> String {
        format!("{stem}-{}-seed{}.{ext}", self.hash, self.resolved.seed)
    }

    fn emit(&mut self, stem: &str, ext: &str, bytes: &[u8]) -> anyhow::Result<PathBuf> {
        let name = self.artifact_name(stem, ext);
        let path = write_artifact(Path::new(&self.resolved.out_dir), &name, bytes)?;
        self.artifacts.push(name);
        Ok(path)
    }

    /// Writes the run report naming every artifact this invocation
    /// produced, with the resolved configuration embedded.
    fn finish(mut self) -> anyhow::Result<()> {
        #[derive(Serialize)]
        struct Report<'a> {
            config_hash: &'a str,
            config: &'a Resolved,
            artifacts: &'a [String],
        }
        let name = self.artifact_name("report", "json");
        let body = json_bytes(&Report {
            config_hash: &self.hash,
            config: &self.resolved,
            artifacts: &self.artifacts,
        })?;
        write_artifact(Path::new(&self.resolved.out_dir), &name, &body)?;
        self.artifacts.push(name);
        for a in &self.artifacts {
            println!("{}", Path::new(&self.resolved.out_dir).join(a).display());
        }
        Ok(())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<CoreError>() {
        Some(CoreError::Config(_)) => EXIT_USAGE,
        Some(CoreError::Numeric(_)) => EXIT_NUMERIC,
        Some(_) => EXIT_DATA,
        None => {
            if e.downcast_ref::<std::io::Error>().is_some() {
                EXIT_DATA
            } else {
                EXIT_USAGE
            }
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let resolved = resolve(cli.command, &cli.overrides)?;
    let mut run = Run::new(resolved);
    match cli.command {
        Command::Fit => cmd_fit(&mut run)?,
        Command::Intervals => cmd_intervals(&mut run)?,
        Command::Stratify => cmd_stratify(&mut run)?,
        Command::Metrics => cmd_metrics(&mut run)?,
        Command::SynthBench => cmd_synth_bench(&mut run)?,
        Command::LambdaSweep => cmd_lambda_sweep(&mut run)?,
    }
    run.finish()
}

fn fit_on_train(run: &Run) -> anyhow::Result<(TabularDataset, tabci_core::pipeline::FittedPipeline)> {
    let train_path = run.resolved.train.as_deref().expect("checked in resolve");
    let train = load_dataset(train_path, None)?;
    let pipeline = fit_pipeline(&train, &run.resolved.pipeline_params())?;
    Ok((train, pipeline))
}

fn load_test(run: &Run, train: &TabularDataset) -> anyhow::Result<TabularDataset> {
    let test_path = run.resolved.test.as_deref().expect("checked in resolve");
    load_dataset(test_path, Some(train))
}

fn cmd_fit(run: &mut Run) -> anyhow::Result<()> {
    let (_, pipeline) = fit_on_train(run)?;
    run.emit("model", "json", &json_bytes(&pipeline)?)?;
    Ok(())
}

fn cmd_intervals(run: &mut Run) -> anyhow::Result<()> {
    let (train, pipeline) = fit_on_train(run)?;
    let test = load_test(run, &train)?;
    let intervals = pipeline.intervals(&test)?;

    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["row".to_string()];
    for column in &test.columns {
        for part in ["lower", "upper", "observed"] {
            header.push(format!("{}_{part}", column.name));
        }
    }
    writer.write_record(&header)?;
    for r in 0..intervals.rows() {
        let mut record = vec![r.to_string()];
        for i in 0..intervals.dims() {
            record.push(intervals.lower.get(r, i).to_string());
            record.push(intervals.upper.get(r, i).to_string());
            record.push(intervals.observed.get(r, i).to_string());
        }
        writer.write_record(&record)?;
    }
    run.emit("intervals", "csv", &writer.into_inner()?)?;
    Ok(())
}

fn cmd_stratify(run: &mut Run) -> anyhow::Result<()> {
    let (train, pipeline) = fit_on_train(run)?;
    let test = load_test(run, &train)?;
    let (_, report) = pipeline.stratified(&test, run.resolved.lambda)?;
    run.emit("stratification", "json", &json_bytes(&report)?)?;

    // 2-D projection for plotting: latent coordinates plus the per-row
    // scores the groups are built from.
    let coords = project_2d(&test, Some(&pipeline.model.representer))?;
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["row", "x", "y", "nu", "delta", "inconsistent"])?;
    for r in 0..test.rows() {
        writer.write_record(&[
            r.to_string(),
            coords.get(r, 0).to_string(),
            coords.get(r, 1).to_string(),
            report.nu[r].to_string(),
            report.delta[r].to_string(),
            (report.inconsistent[r] as u8).to_string(),
        ])?;
    }
    run.emit("projection", "csv", &writer.into_inner()?)?;
    Ok(())
}

fn cmd_metrics(run: &mut Run) -> anyhow::Result<()> {
    let (train, pipeline) = fit_on_train(run)?;
    let test = load_test(run, &train)?;
    let intervals = pipeline.intervals(&test)?;
    let quality = interval_quality(&intervals)?;

    #[derive(Serialize)]
    struct MetricsReport<'a> {
        alpha: f64,
        quality: &'a tabci_core::metrics::IntervalQuality,
        epsilons: Vec<f64>,
        any_epsilon_unbounded: bool,
    }
    run.emit(
        "metrics",
        "json",
        &json_bytes(&MetricsReport {
            alpha: intervals.alpha,
            quality: &quality,
            epsilons: intervals.epsilons.clone(),
            any_epsilon_unbounded: pipeline.model.any_epsilon_unbounded(),
        })?,
    )?;
    Ok(())
}

fn cmd_synth_bench(run: &mut Run) -> anyhow::Result<()> {
    let bench = run_bench(&run.resolved.bench_config())?;
    run.emit("bench", "json", &json_bytes(&bench.outcome)?)?;
    Ok(())
}

fn cmd_lambda_sweep(run: &mut Run) -> anyhow::Result<()> {
    let bench = run_bench(&run.resolved.bench_config())?;
    let points = lambda_sweep(&bench, &default_lambda_grid())?;
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["lambda", "flagged_count", "mse_unflagged"])?;
    for p in &points {
        writer.write_record(&[
            p.lambda.to_string(),
            p.flagged.to_string(),
            p.mse_unflagged.map(|m| m.to_string()).unwrap_or_default(),
        ])?;
    }
    run.emit("lambda-sweep", "csv", &writer.into_inner()?)?;
    Ok(())
}
