//! The `elp` command line: extract, search, classify, sweep, visualize, bench.
//!
//! `--config FILE` reads flat `key = value` lines whose keys are flag names
//! without the leading dashes (`window = 10`, `grid = 3x3`, `resize = true`).
//! They are applied before the command-line flags, so flags win.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::corpus::{csv_field, extract_all, LabeledCorpus};
use crate::dataset::{ingest, synthetic_faces, to_hex, FaceImageSet, IngestOptions, EXPECTED_DIMS};
use crate::descriptor::DescriptorParams;
use crate::elp::{elp_code_image, ElpParams, HistogramMode};
use crate::error::{Error, Result};
use crate::eval::{search, subimage_sweep, DistanceMode};
use crate::imaging::{window_grid_dims, GrayImage, SubImageGrid};
use crate::lbp::LbpParams;
use crate::radon::{AnchorMode, AngleSet};
use crate::svm::{
    default_c_grid, default_gamma_grid, grid_search, ovo_fit, GridSearchOptions, SvcParams,
};

#[derive(Debug, Parser, Serialize)]
#[command(name = "elp", version, about = "ELP and LBP face descriptors with retrieval and SVM evaluation")]
pub struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Flat key = value file of default flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    #[serde(flatten)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Command {
    /// Describe every image of a dataset tree into a corpus file.
    Extract(ExtractArgs),
    /// Leave-one-out k-NN retrieval accuracy of a corpus.
    Search(SearchArgs),
    /// RBF SVM grid search on a seeded train/test split.
    Classify(ClassifyArgs),
    /// Retrieval accuracy across sub-image grids.
    Sweep(SweepArgs),
    /// Render ELP code images of one picture.
    Visualize(VisualizeArgs),
    /// Extraction throughput.
    Bench(BenchArgs),
}

impl Command {
    pub const NAMES: [&'static str; 6] = ["extract", "search", "classify", "sweep", "visualize", "bench"];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Elp,
    Lbp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Merged,
    Detached,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnchorArg {
    MaxAmplitude,
    GradientIntegral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OffsetsArg {
    /// {0, 45, 90, 125}
    Paper,
    /// {0, 45, 90, 135}
    Symmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceArg {
    Paper,
    Classic,
}

impl From<DistanceArg> for DistanceMode {
    fn from(d: DistanceArg) -> Self {
        match d {
            DistanceArg::Paper => DistanceMode::Paper,
            DistanceArg::Classic => DistanceMode::Classic,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ElpArgs {
    /// ELP window side in pixels.
    #[arg(long, default_value_t = 10)]
    pub window: usize,
    /// Window stride in pixels.
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    /// Window overlap; sets stride = window - overlap.
    #[arg(long)]
    pub overlap: Option<usize>,
    /// Homogeneity threshold; windows at or above it are skipped.
    #[arg(long, default_value_t = 0.95)]
    pub threshold: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Detached)]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value_t = AnchorArg::MaxAmplitude)]
    pub anchor_mode: AnchorArg,
    #[arg(long, value_enum, default_value_t = OffsetsArg::Paper)]
    pub offsets: OffsetsArg,
}

impl ElpArgs {
    pub fn to_params(&self) -> Result<ElpParams> {
        let stride = match self.overlap {
            Some(o) if o >= self.window => {
                return Err(Error::Config(format!(
                    "overlap {o} must be smaller than the window {}",
                    self.window
                )))
            }
            Some(o) => self.window - o,
            None => self.stride,
        };
        let params = ElpParams {
            window_side: self.window,
            stride,
            homogeneity_threshold: self.threshold,
            angle_set: match self.offsets {
                OffsetsArg::Paper => AngleSet::default(),
                OffsetsArg::Symmetric => AngleSet::symmetric(),
            },
            histogram_mode: match self.mode {
                ModeArg::Merged => HistogramMode::Merged,
                ModeArg::Detached => HistogramMode::Detached,
            },
            anchor_mode: match self.anchor_mode {
                AnchorArg::MaxAmplitude => AnchorMode::MaxAmplitude,
                AnchorArg::GradientIntegral => AnchorMode::GradientIntegral,
            },
        };
        params.validate().map_err(config_error)?;
        Ok(params)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DescriptorArgs {
    #[arg(long, value_enum, default_value_t = MethodArg::Elp)]
    pub method: MethodArg,
    #[command(flatten)]
    pub elp: ElpArgs,
    /// LBP sampling points.
    #[arg(long, default_value_t = 8)]
    pub points: usize,
    /// LBP radius in pixels.
    #[arg(long, default_value_t = 1)]
    pub radius: u32,
}

impl DescriptorArgs {
    pub fn to_params(&self) -> Result<DescriptorParams> {
        Ok(match self.method {
            MethodArg::Elp => self.elp.to_params()?.into(),
            MethodArg::Lbp => LbpParams::new(self.points, self.radius).map_err(config_error)?.into(),
        })
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DatasetArgs {
    /// Root of a `<identity>/<image>` tree.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Keep identities with strictly more images than this.
    #[arg(long, default_value_t = 100)]
    pub min_images: usize,
    /// Resize mismatched images to 84x112 instead of failing.
    #[arg(long)]
    pub resize: bool,
    /// Accept any uniform image size.
    #[arg(long)]
    pub any_size: bool,
}

impl DatasetArgs {
    fn options(&self) -> IngestOptions {
        IngestOptions {
            min_images_exclusive: self.min_images,
            expected_dims: if self.any_size { None } else { Some(EXPECTED_DIMS) },
            resize: self.resize,
        }
    }

    fn load(&self) -> Result<(FaceImageSet, serde_json::Value)> {
        let root = self
            .dataset
            .as_ref()
            .ok_or_else(|| Error::Config("--dataset is required".into()))?;
        if !root.is_dir() {
            return Err(Error::Config(format!("dataset root {} does not exist", root.display())));
        }
        let (set, manifest) = ingest(root, &self.options())?;
        let manifest = serde_json::to_value(&manifest).map_err(|e| Error::Format(e.to_string()))?;
        Ok((set, manifest))
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub dataset: DatasetArgs,
    #[command(flatten)]
    pub descriptor: DescriptorArgs,
    /// Sub-image grid, e.g. 3x3.
    #[arg(long, default_value = "1x1")]
    pub grid: SubImageGrid,
    /// Output corpus file.
    #[arg(long, default_value = "corpus.elpc")]
    pub out: PathBuf,
    /// Also write the corpus as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Manifest JSON path (default: <out>.manifest.json).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SearchArgs {
    /// Corpus file from `extract`.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Neighbors per query.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    pub k: u64,
    #[arg(long, value_enum, default_value_t = DistanceArg::Paper)]
    pub distance: DistanceArg,
    #[arg(long, default_value = "search-out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Comma-separated C values or a decade range like 1e-7..1e7.
    #[arg(long)]
    pub c_grid: Option<String>,
    /// Comma-separated gamma values or a decade range like 1e-5..1e3.
    #[arg(long)]
    pub gamma_grid: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
    /// Split each identity separately.
    #[arg(long)]
    pub stratified: bool,
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub max_iter: usize,
    #[arg(long, default_value = "classify-out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    pub dataset: DatasetArgs,
    #[command(flatten)]
    pub descriptor: DescriptorArgs,
    /// Comma-separated grids (default 1x1..12x12 for LBP, 1x1..3x3 for ELP).
    #[arg(long)]
    pub grids: Option<String>,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    pub k: u64,
    #[arg(long, value_enum, default_value_t = DistanceArg::Paper)]
    pub distance: DistanceArg,
    #[arg(long, default_value = "sweep.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VisualizeArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[command(flatten)]
    pub elp: ElpArgs,
    /// Adjunct projection indices to render (0 = anchor, 2 = anchor + 90).
    #[arg(long, value_delimiter = ',', default_values_t = [0u8, 2], value_parser = clap::value_parser!(u8).range(0..4))]
    pub offset_index: Vec<u8>,
    #[arg(long, default_value = "codes")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BenchArgs {
    #[command(flatten)]
    pub dataset: DatasetArgs,
    /// Benchmark on this many synthetic 84x112 faces instead of a dataset.
    #[arg(long)]
    pub synthetic: Option<usize>,
    #[command(flatten)]
    pub descriptor: DescriptorArgs,
    #[arg(long, default_value = "1x1")]
    pub grid: SubImageGrid,
    /// Output JSON report (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn config_error(e: Error) -> Error {
    match e {
        Error::Argument(m) => Error::Config(m),
        other => other,
    }
}

/// Turns a flat `key = value` file into flag tokens.
pub fn config_tokens(text: &str) -> Result<Vec<OsString>> {
    let mut tokens = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("config line {} is not `key = value`", n + 1)))?;
        let key = key.trim().trim_start_matches("--");
        let value = value.trim();
        if key.is_empty() {
            return Err(Error::Config(format!("config line {} has an empty key", n + 1)));
        }
        match value {
            "true" => tokens.push(format!("--{key}").into()),
            "false" => {}
            v => {
                tokens.push(format!("--{key}").into());
                tokens.push(v.into());
            }
        }
    }
    Ok(tokens)
}

/// Splices `--config` file tokens in right after the subcommand name.
fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut config_path = None;
    for (i, a) in args.iter().enumerate() {
        let s = a.to_string_lossy();
        if s == "--config" {
            config_path = args.get(i + 1).map(PathBuf::from);
        } else if let Some(p) = s.strip_prefix("--config=") {
            config_path = Some(PathBuf::from(p));
        }
    }
    let Some(path) = config_path else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    let tokens = config_tokens(&text)?;
    let Some(pos) = args
        .iter()
        .position(|a| Command::NAMES.contains(&a.to_string_lossy().as_ref()))
    else {
        return Ok(args);
    };
    let mut out = args[..=pos].to_vec();
    out.extend(tokens);
    out.extend_from_slice(&args[pos + 1..]);
    Ok(out)
}

fn command() -> clap::Command {
    use clap::CommandFactory;
    fn override_self(cmd: clap::Command) -> clap::Command {
        let cmd = cmd.args_override_self(true);
        let names: Vec<String> = cmd.get_subcommands().map(|s| s.get_name().to_string()).collect();
        names
            .into_iter()
            .fold(cmd, |cmd, name| cmd.mut_subcommand(name, override_self))
    }
    override_self(Cli::command())
}

/// Parses arguments (including any `--config` file) into a [`Cli`].
pub fn parse_from(args: Vec<OsString>) -> std::result::Result<Cli, ParseFailure> {
    use clap::FromArgMatches;
    let args = expand_config(args).map_err(ParseFailure::Config)?;
    let matches = command().try_get_matches_from(args).map_err(ParseFailure::Clap)?;
    Cli::from_arg_matches(&matches).map_err(ParseFailure::Clap)
}

#[derive(Debug)]
pub enum ParseFailure {
    Clap(clap::Error),
    Config(Error),
}

/// Entry point used by the `elp` binary.
pub fn main() -> ExitCode {
    let cli = match parse_from(std::env::args_os().collect()) {
        Ok(cli) => cli,
        Err(ParseFailure::Clap(e)) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
        Err(ParseFailure::Config(e)) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 2 for usage and configuration problems, 1 otherwise.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Argument(_) => 2,
        _ => 1,
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        // a pool may already exist when embedding; the cap then stays as it was
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let config = serde_json::to_value(cli).map_err(|e| Error::Format(e.to_string()))?;
    match &cli.command {
        Command::Extract(a) => cmd_extract(a, &config),
        Command::Search(a) => cmd_search(a, &config),
        Command::Classify(a) => cmd_classify(a, &config),
        Command::Sweep(a) => cmd_sweep(a, &config),
        Command::Visualize(a) => cmd_visualize(a, &config),
        Command::Bench(a) => cmd_bench(a, &config),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(to_hex(&Sha256::digest(&bytes)))
}

/// SHA-256 of descriptor values as little-endian f64 in corpus order.
pub fn descriptor_checksum(vectors: &[Vec<f64>]) -> String {
    let mut hasher = Sha256::new();
    for v in vectors.iter().flatten() {
        hasher.update(v.to_le_bytes());
    }
    to_hex(&hasher.finalize())
}

fn provenance_line(config: &serde_json::Value, corpus_sha256: &str) -> String {
    format!(
        "# provenance: {}\n",
        json!({"config": config, "corpus_sha256": corpus_sha256})
    )
}

pub fn cmd_extract(args: &ExtractArgs, config: &serde_json::Value) -> Result<()> {
    let params = args.descriptor.to_params()?;
    let (set, manifest) = args.dataset.load()?;
    let vectors = extract_all(&set.images, &params, args.grid)?;
    let corpus = LabeledCorpus::new(params, args.grid, vectors, set.labels.clone(), set.names.clone(), set.paths.clone())?;
    let provenance = json!({
        "config": config,
        "corpus_sha256": manifest["content_sha256"],
    });
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    corpus.save(&args.out, &provenance)?;
    if let Some(csv) = &args.csv {
        let mut buf = Vec::new();
        corpus.write_csv(&mut buf, &provenance)?;
        write_file(csv, &buf)?;
    }
    let manifest_path = args.manifest.clone().unwrap_or_else(|| {
        let mut p = args.out.clone().into_os_string();
        p.push(".manifest.json");
        PathBuf::from(p)
    });
    write_json(
        &manifest_path,
        &json!({
            "provenance": provenance,
            "manifest": manifest,
            "descriptor": corpus.params().label(),
            "grid": corpus.grid().to_string(),
            "items": corpus.len(),
            "dim": corpus.dim(),
        }),
    )?;
    eprintln!(
        "wrote {} descriptors of length {} to {}",
        corpus.len(),
        corpus.dim(),
        args.out.display()
    );
    Ok(())
}

pub fn cmd_search(args: &SearchArgs, config: &serde_json::Value) -> Result<()> {
    let (corpus, _) = LabeledCorpus::load(&args.corpus)?;
    let corpus_sha256 = file_sha256(&args.corpus)?;
    let k = args.k as usize;
    if k >= corpus.len() {
        return Err(Error::Config(format!("k = {k} needs more than {k} corpus items")));
    }
    let report = search(&corpus, k, args.distance.into())?;
    create_dir(&args.out_dir)?;

    let mut per_class = Vec::new();
    for (label, name) in corpus.names().iter().enumerate() {
        let queries: Vec<_> = report.queries.iter().filter(|q| q.true_label == label).collect();
        let correct = queries.iter().filter(|q| q.predicted == label).count();
        per_class.push(json!({
            "name": name,
            "queries": queries.len(),
            "correct": correct,
            "accuracy": if queries.is_empty() { 0.0 } else { correct as f64 / queries.len() as f64 },
        }));
    }
    write_json(
        &args.out_dir.join("search_summary.json"),
        &json!({
            "config": config,
            "corpus_sha256": corpus_sha256,
            "descriptor": corpus.params().label(),
            "grid": corpus.grid().to_string(),
            "k": k,
            "queries": corpus.len(),
            "correct": report.correct,
            "accuracy": report.accuracy,
            "per_identity": per_class,
        }),
    )?;

    let mut csv = provenance_line(config, &corpus_sha256);
    csv.push_str("query,path,true_label,predicted_label,correct,neighbors,distances\n");
    for q in &report.queries {
        let neighbors: Vec<String> = q.neighbors.iter().map(|(j, _)| j.to_string()).collect();
        let distances: Vec<String> = q.neighbors.iter().map(|(_, d)| d.to_string()).collect();
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            q.index,
            csv_field(&corpus.paths()[q.index]),
            csv_field(&corpus.names()[q.true_label]),
            csv_field(&corpus.names()[q.predicted]),
            q.predicted == q.true_label,
            neighbors.join(";"),
            distances.join(";"),
        ));
    }
    write_file(&args.out_dir.join("search_queries.csv"), csv.as_bytes())?;
    println!("{} k={} accuracy {:.4}", corpus.params().label(), k, report.accuracy);
    Ok(())
}

/// Parses `a,b,c` or a decade range `1e-7..1e7`.
pub fn parse_value_grid(spec: &str) -> Result<Vec<f64>> {
    let spec = spec.trim();
    if let Some((lo, hi)) = spec.split_once("..") {
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad grid bound `{s}`")))
        };
        let (lo, hi) = (parse(lo)?, parse(hi)?);
        if !(lo > 0.0 && hi >= lo) {
            return Err(Error::Config(format!("bad decade range `{spec}`")));
        }
        let (a, b) = (lo.log10().round() as i32, hi.log10().round() as i32);
        return Ok(crate::svm::decade_grid(a, b));
    }
    let values: Vec<f64> = spec
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad grid value `{s}`")))
        })
        .collect::<Result<_>>()?;
    if values.is_empty() {
        return Err(Error::Config("empty value grid".into()));
    }
    Ok(values)
}

pub fn cmd_classify(args: &ClassifyArgs, config: &serde_json::Value) -> Result<()> {
    let (corpus, _) = LabeledCorpus::load(&args.corpus)?;
    let corpus_sha256 = file_sha256(&args.corpus)?;
    let c_grid = match &args.c_grid {
        Some(s) => parse_value_grid(s)?,
        None => default_c_grid(),
    };
    let gamma_grid = match &args.gamma_grid {
        Some(s) => parse_value_grid(s)?,
        None => default_gamma_grid(),
    };
    let options = GridSearchOptions {
        train_fraction: args.train_fraction,
        seed: args.seed,
        stratified: args.stratified,
        tol: args.tol,
        max_iter: args.max_iter,
    };
    let result = grid_search(&corpus, &c_grid, &gamma_grid, &options).map_err(config_error)?;
    create_dir(&args.out_dir)?;

    let mut csv = provenance_line(config, &corpus_sha256);
    csv.push_str("c,gamma,accuracy,converged\n");
    for cell in &result.table {
        csv.push_str(&format!("{:e},{:e},{},{}\n", cell.c, cell.gamma, cell.accuracy, cell.converged));
    }
    write_file(&args.out_dir.join("grid.csv"), csv.as_bytes())?;

    let params = SvcParams {
        c: result.best_c,
        gamma: result.best_gamma,
        tol: args.tol,
        max_iter: args.max_iter,
    };
    let model = ovo_fit(&corpus.select(&result.train_indices), &params)?;
    model.save(args.out_dir.join("model.svm"))?;
    let model_correct = result
        .test_indices
        .iter()
        .map(|&i| model.predict(&corpus.vectors()[i]).map(|p| p == corpus.labels()[i]))
        .collect::<Result<Vec<bool>>>()?
        .into_iter()
        .filter(|&ok| ok)
        .count();

    write_json(
        &args.out_dir.join("classify_summary.json"),
        &json!({
            "config": config,
            "corpus_sha256": corpus_sha256,
            "descriptor": corpus.params().label(),
            "grid": corpus.grid().to_string(),
            "best_c": result.best_c,
            "best_gamma": result.best_gamma,
            "test_accuracy": result.best_accuracy,
            "model_test_accuracy": if result.test_indices.is_empty() { 0.0 } else {
                model_correct as f64 / result.test_indices.len() as f64
            },
            "model_converged": model.converged(),
            "train_size": result.train_indices.len(),
            "test_size": result.test_indices.len(),
            "test_indices": result.test_indices,
            "grid_cells": result.table.len(),
        }),
    )?;
    println!(
        "{} best C={:e} gamma={:e} test accuracy {:.4}",
        corpus.params().label(),
        result.best_c,
        result.best_gamma,
        result.best_accuracy
    );
    Ok(())
}

fn parse_grids(spec: &str) -> Result<Vec<SubImageGrid>> {
    let grids: Vec<SubImageGrid> = spec
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.parse::<SubImageGrid>().map_err(config_error))
        .collect::<Result<_>>()?;
    if grids.is_empty() {
        return Err(Error::Config("the grid list is empty".into()));
    }
    Ok(grids)
}

pub fn cmd_sweep(args: &SweepArgs, config: &serde_json::Value) -> Result<()> {
    let params = args.descriptor.to_params()?;
    let grids = match &args.grids {
        Some(s) => parse_grids(s)?,
        None => {
            let max = match params {
                DescriptorParams::Elp(_) => 3,
                DescriptorParams::Lbp(_) => 12,
            };
            (1..=max).map(SubImageGrid::square).collect::<Result<_>>()?
        }
    };
    let (set, manifest) = args.dataset.load()?;
    let rows = subimage_sweep(
        &set.images,
        &set.labels,
        &set.names,
        &params,
        &grids,
        args.k as usize,
        args.distance.into(),
    )?;
    let sha = manifest["content_sha256"].as_str().unwrap_or_default().to_string();
    let mut csv = provenance_line(config, &sha);
    csv.push_str("grid,length,accuracy\n");
    for row in &rows {
        csv.push_str(&format!("{},{},{}\n", row.grid, row.length, row.accuracy));
        println!("{} {:>5} {:>6} {:.4}", params.label(), row.grid.to_string(), row.length, row.accuracy);
    }
    write_file(&args.out, csv.as_bytes())
}

pub fn cmd_visualize(args: &VisualizeArgs, _config: &serde_json::Value) -> Result<()> {
    let params = args.elp.to_params()?;
    if !args.image.is_file() {
        return Err(Error::Config(format!("image {} does not exist", args.image.display())));
    }
    let img = GrayImage::open(&args.image)?;
    create_dir(&args.out_dir)?;
    let stem = args
        .image
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "image".into());
    for &idx in &args.offset_index {
        let codes = elp_code_image(&img, &params, idx as usize).map_err(config_error)?;
        let out = args.out_dir.join(format!("{stem}_offset{idx}.png"));
        codes.save_png(&out)?;
        eprintln!("wrote {}", out.display());
    }
    Ok(())
}

pub fn cmd_bench(args: &BenchArgs, config: &serde_json::Value) -> Result<()> {
    let params = args.descriptor.to_params()?;
    let start = Instant::now();
    let set = match (args.synthetic, &args.dataset.dataset) {
        (Some(n), _) => {
            let per = n.div_ceil(5).max(1);
            let mut set = synthetic_faces(5, per, EXPECTED_DIMS.0, EXPECTED_DIMS.1, 0);
            set.images.truncate(n);
            set.labels.truncate(n);
            set.paths.truncate(n);
            set
        }
        (None, Some(_)) => args.dataset.load()?.0,
        (None, None) => return Err(Error::Config("bench needs --dataset or --synthetic N".into())),
    };
    let load_seconds = start.elapsed().as_secs_f64();
    let extract_start = Instant::now();
    let vectors = extract_all(&set.images, &params, args.grid)?;
    let extract_seconds = extract_start.elapsed().as_secs_f64();

    let windows: usize = match &params {
        DescriptorParams::Elp(p) => set
            .images
            .iter()
            .map(|img| {
                let cells = crate::imaging::split_subimages(img, args.grid)?;
                cells
                    .iter()
                    .map(|c| window_grid_dims(c.height(), c.width(), p.window_side, p.stride).map(|(r, c)| r * c))
                    .sum::<Result<usize>>()
            })
            .sum::<Result<usize>>()?,
        DescriptorParams::Lbp(_) => set.images.iter().map(|i| i.width() * i.height()).sum(),
    };
    let report = json!({
        "config": config,
        "corpus_sha256": set.content_hash(),
        "descriptor": params.label(),
        "grid": args.grid.to_string(),
        "threads": rayon::current_num_threads(),
        "images": set.len(),
        "windows_per_image": if set.is_empty() { 0 } else { windows / set.len() },
        "total_windows": windows,
        "descriptor_sha256": descriptor_checksum(&vectors),
        "timing": {
            "wall_seconds": load_seconds + extract_seconds,
            "load_seconds": load_seconds,
            "extract_seconds": extract_seconds,
            "images_per_second": set.len() as f64 / extract_seconds.max(1e-12),
            "windows_per_second": windows as f64 / extract_seconds.max(1e-12),
        },
    });
    match &args.out {
        Some(path) => write_json(path, &report)?,
        None => {
            let mut out = std::io::stdout().lock();
            writeln!(out, "{}", serde_json::to_string_pretty(&report).unwrap()).map_err(|e| Error::io("<stdout>", e))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(s: &str) -> Vec<OsString> {
        s.split_whitespace().map(OsString::from).collect()
    }

    #[test]
    fn config_tokens_mirror_flags() {
        let tokens = config_tokens("# comment\nwindow = 8\nresize = true\nstratified = false\n\ngrid=3x3\n").unwrap();
        assert_eq!(tokens, args("--window 8 --resize --grid 3x3"));
        assert!(config_tokens("nonsense").is_err());
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        std::fs::write(&cfg, "window = 8\ngrid = 2x2\nmethod = lbp\n").unwrap();
        let mut argv = args("elp extract --dataset d --window 11 --config");
        argv.push(cfg.clone().into());
        let cli = parse_from(argv).unwrap();
        let Command::Extract(a) = cli.command else { panic!() };
        assert_eq!(a.descriptor.elp.window, 11);
        assert_eq!(a.grid, SubImageGrid::square(2).unwrap());
        assert_eq!(a.descriptor.method, MethodArg::Lbp);
    }

    #[test]
    fn usage_errors() {
        assert!(matches!(parse_from(args("elp search --corpus c --k 0")), Err(ParseFailure::Clap(_))));
        assert!(matches!(
            parse_from(args("elp visualize --image x.png --offset-index 5")),
            Err(ParseFailure::Clap(_))
        ));
        assert!(parse_grids(" , ").is_err());
    }

    #[test]
    fn overlap_sets_stride() {
        let cli = parse_from(args("elp visualize --image x.png --overlap 2")).unwrap();
        let Command::Visualize(a) = cli.command else { panic!() };
        assert_eq!(a.elp.to_params().unwrap().stride, 8);
        assert_eq!(a.offset_index, vec![0, 2]);
    }

    #[test]
    fn value_grids() {
        assert_eq!(parse_value_grid("1e-7..1e7").unwrap().len(), 15);
        assert_eq!(parse_value_grid("0.1, 1,10").unwrap(), vec![0.1, 1.0, 10.0]);
        assert!(parse_value_grid("").is_err());
        assert!(parse_value_grid("x").is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(exit_code(&Error::Format("x".into())), 1);
    }
}
