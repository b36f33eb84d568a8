//! The `apkmm` command line.
//!
//! Exit codes: 0 success, 1 partial or runtime failure, 2 usage or configuration error.
//!
//! Machine outputs are line-delimited:
//! - `convert` writes `<out>/images/*.png` and `<out>/convert-index.jsonl`
//! - `extract-text` writes `<out>/evidence/<id>.json`, `<out>/prompts/<id>.{benign,malware}.txt`,
//!   `<out>/annotations/<image stem>.txt` and `<out>/extract-index.jsonl`
//! - `dataset` writes a dataset manifest (see [`crate::dataset`])
//! - `train-baseline` writes a text model (see [`crate::baseline::LinearModel::to_text`])
//! - `predict` writes `sample_id,true,pred,score` CSV

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::apk::{open_apk, CodeSource};
use crate::axml::{decode_axml, ManifestModel, XmlElement};
use crate::baseline::{featurize_decoded, train, LinearModel, Optimizer, TrainConfig, DEFAULT_POOL_SIDE};
use crate::dataset::{build_manifest, read_labels_file, DatasetManifest, DatasetRecord, Split, SplitFractions};
use crate::image::{convert_apk, image_file_name, read_png, sha256_hex, ImageSpec, Resample};
use crate::label::Label;
use crate::metrics::{read_predictions_file, report, write_predictions, PredictionRecord};
use crate::text::{
    build_prompt, extract_evidence, Annotator, AnnotatorConfig, AnnotatorMode, EvidenceConfig, DEFAULT_MAX_INPUT_TOKENS,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARTIAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

pub const CONVERT_INDEX: &str = "convert-index.jsonl";
pub const EXTRACT_INDEX: &str = "extract-index.jsonl";

#[derive(Debug, Parser)]
#[command(
    name = "apkmm",
    version,
    about = "APK bytecode images, text evidence, datasets and metrics"
)]
pub struct Cli {
    /// Seed for every random choice (splits, training order).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render APK code bytes as PNG images.
    Convert(ConvertArgs),
    /// Extract text evidence, write both prompts and optionally annotate.
    ExtractText(ExtractArgs),
    /// Pair images, annotations and labels into a split dataset manifest.
    Dataset(DatasetArgs),
    /// Train the logistic-regression baseline on a manifest's train split.
    TrainBaseline(TrainArgs),
    /// Score one split of a manifest with a trained baseline.
    Predict(PredictArgs),
    /// Print the metric table for a predictions file.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SourceArg {
    DexOnly,
    WholeFile,
}

impl From<SourceArg> for CodeSource {
    fn from(s: SourceArg) -> Self {
        match s {
            SourceArg::DexOnly => CodeSource::DexOnly,
            SourceArg::WholeFile => CodeSource::WholeFile,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ResampleArg {
    Nearest,
    Bilinear,
}

impl From<ResampleArg> for Resample {
    fn from(r: ResampleArg) -> Self {
        match r {
            ResampleArg::Nearest => Resample::NearestNeighbor,
            ResampleArg::Bilinear => Resample::Bilinear,
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct ConvertArgs {
    /// APK files or directories searched recursively for `*.apk`.
    #[arg(long, required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// `all` or a comma-separated list such as `grayscale-128,rgb-512`.
    #[arg(long, default_value = "all")]
    pub spec: String,
    #[arg(long, value_enum, default_value = "dex-only")]
    pub source: SourceArg,
    #[arg(long, value_enum, default_value = "nearest")]
    pub resample: ResampleArg,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, clap::Args)]
pub struct ExtractArgs {
    #[arg(long, required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// `sample_id,label` CSV; picks the prompt hypothesis for annotation (malware when absent).
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Spec whose image stem names the annotation file.
    #[arg(long, default_value = "grayscale-128")]
    pub spec: ImageSpec,
    /// Stub annotation corpus (`<prompt sha256>.txt`); implies stub mode unless ANNOTATOR_MODE is set.
    #[arg(long)]
    pub stub_dir: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_MAX_INPUT_TOKENS)]
    pub max_input_tokens: usize,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub top_p: Option<f64>,
    #[arg(long)]
    pub max_tokens: Option<u32>,
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, clap::Args)]
pub struct DatasetArgs {
    #[arg(long)]
    pub images: PathBuf,
    /// Annotation directory holding `<image stem>.txt`.
    #[arg(long)]
    pub texts: Option<PathBuf>,
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long, default_value = "grayscale-128")]
    pub spec: ImageSpec,
    #[arg(long, default_value = "0.8,0.1,0.1")]
    pub fractions: SplitFractions,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, clap::Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_POOL_SIDE)]
    pub pool_side: usize,
    #[arg(long, default_value_t = TrainConfig::default().learning_rate)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    pub epochs: usize,
    #[arg(long, default_value_t = TrainConfig::default().l2)]
    pub l2: f64,
    #[arg(long, default_value_t = TrainConfig::default().batch_size)]
    pub batch_size: usize,
    #[arg(long, default_value_t = TrainConfig::default().patience)]
    pub patience: usize,
    #[arg(long, default_value = "sgd")]
    pub optimizer: Optimizer,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SplitArg {
    Train,
    Val,
    Test,
    All,
}

#[derive(Debug, clap::Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitArg,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, clap::Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub predictions: PathBuf,
    /// Also write the report as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

/// Why a command stopped early.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

/// Parses `args` (including the program name) and runs the command. Returns the exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            EXIT_PARTIAL
        }
    }
}

pub fn run(cli: Cli) -> Result<i32, Failure> {
    match cli.command {
        Command::Convert(a) => cmd_convert(&a),
        Command::ExtractText(a) => cmd_extract_text(&a),
        Command::Dataset(a) => cmd_dataset(&a, cli.seed),
        Command::TrainBaseline(a) => cmd_train_baseline(&a, cli.seed),
        Command::Predict(a) => cmd_predict(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
    }
}

/// `all` or comma-separated specs.
pub fn parse_specs(s: &str) -> Result<Vec<ImageSpec>, String> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(ImageSpec::matrix());
    }
    let mut specs: Vec<ImageSpec> = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let spec: ImageSpec = part.parse().map_err(|e| format!("{e}"))?;
        if !specs.contains(&spec) {
            specs.push(spec);
        }
    }
    if specs.is_empty() {
        return Err(format!("no image spec in {s:?}"));
    }
    Ok(specs)
}

/// `*.apk` files under the inputs, sorted and de-duplicated.
pub fn collect_apks(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, Failure> {
    let mut out = Vec::new();
    for input in inputs {
        if input.is_file() {
            out.push(input.clone());
        } else if input.is_dir() {
            for entry in WalkDir::new(input).follow_links(true) {
                let entry = entry.map_err(|e| Failure::Runtime(e.into()))?;
                let is_apk = entry.path().extension().is_some_and(|e| e.eq_ignore_ascii_case("apk"));
                if entry.file_type().is_file() && is_apk {
                    out.push(entry.into_path());
                }
            }
        } else {
            return Err(usage(format!("input {} does not exist", input.display())));
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool, Failure> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Failure::Runtime(e.into()))
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> anyhow::Result<()> {
    let mut text = String::new();
    for row in rows {
        text.push_str(&serde_json::to_string(row)?);
        text.push('\n');
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// One line of `convert-index.jsonl`: a written image, or a failed APK.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvertIndexLine {
    pub apk: PathBuf,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<ImageSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn cmd_convert(args: &ConvertArgs) -> Result<i32, Failure> {
    let specs: Vec<ImageSpec> = parse_specs(&args.spec)
        .map_err(usage)?
        .into_iter()
        .map(|s| s.with_resample(args.resample.into()))
        .collect();
    let apks = collect_apks(&args.input)?;
    if apks.is_empty() {
        return Err(usage("no .apk files found in the input"));
    }
    let images = args.out.join("images");
    fs::create_dir_all(&images).with_context(|| format!("creating {}", images.display()))?;
    let source: CodeSource = args.source.into();

    let results: Vec<_> = thread_pool(args.jobs)?.install(|| {
        apks.par_iter()
            .map(|apk| (apk, convert_apk(apk, &specs, source, &images)))
            .collect()
    });

    let mut index = Vec::new();
    let mut failed = 0;
    for (apk, result) in results {
        match result {
            Ok((sample_id, written)) => {
                for (spec, path) in written {
                    index.push(ConvertIndexLine {
                        apk: apk.clone(),
                        status: "ok".into(),
                        sample_id: Some(sample_id.clone()),
                        spec: Some(spec),
                        image_path: Some(path),
                        error: None,
                    });
                }
            }
            Err(e) => {
                failed += 1;
                warn!("{}: {e}", apk.display());
                index.push(ConvertIndexLine {
                    apk: apk.clone(),
                    status: "error".into(),
                    sample_id: None,
                    spec: None,
                    image_path: None,
                    error: Some(e.to_string()),
                });
            }
        }
    }
    write_jsonl(&args.out.join(CONVERT_INDEX), &index)?;
    let images_written = index.iter().filter(|l| l.status == "ok").count();
    eprintln!(
        "converted {}/{} APKs, {images_written} images, {failed} failed",
        apks.len() - failed,
        apks.len()
    );
    Ok(if failed > 0 { EXIT_PARTIAL } else { EXIT_OK })
}

/// One line of `extract-index.jsonl`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExtractIndexLine {
    pub apk: PathBuf,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub prompt_paths: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotation_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotation_error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

struct ExtractContext<'a> {
    out: &'a Path,
    labels: BTreeMap<String, Label>,
    spec: ImageSpec,
    max_input_tokens: usize,
    annotator: Option<Box<dyn Annotator>>,
    evidence_config: EvidenceConfig,
}

fn extract_one(ctx: &ExtractContext<'_>, apk: &Path) -> ExtractIndexLine {
    let mut line = ExtractIndexLine {
        apk: apk.to_path_buf(),
        ..Default::default()
    };
    match extract_inner(ctx, apk, &mut line) {
        Ok(()) => {
            line.status = if line.annotation_error.is_some() {
                "annotation-failed"
            } else {
                "ok"
            }
            .into()
        }
        Err(e) => {
            line.status = "error".into();
            line.error = Some(format!("{e:#}"));
        }
    }
    line
}

fn extract_inner(ctx: &ExtractContext<'_>, apk: &Path, line: &mut ExtractIndexLine) -> anyhow::Result<()> {
    let archive = open_apk(apk)?;
    let sample_id = sha256_hex(archive.raw_bytes());
    line.sample_id = Some(sample_id.clone());
    let manifest = archive
        .read_entry("AndroidManifest.xml")
        .map_err(anyhow::Error::from)
        .and_then(|bytes| decode_axml(&bytes).map_err(anyhow::Error::from))
        .unwrap_or_else(|e| {
            warn!("{}: manifest unavailable, using an empty one: {e:#}", apk.display());
            ManifestModel::from_document(XmlElement::new("manifest"))
        });
    let evidence = extract_evidence(&archive, &manifest, &ctx.evidence_config);

    let evidence_path = ctx.out.join("evidence").join(format!("{sample_id}.json"));
    fs::write(&evidence_path, serde_json::to_string(&evidence)? + "\n")?;
    line.evidence_path = Some(evidence_path);

    let mut prompts = Vec::new();
    for label in Label::ALL {
        let prompt = build_prompt(&evidence, label, ctx.max_input_tokens);
        let path = ctx.out.join("prompts").join(format!("{sample_id}.{label}.txt"));
        fs::write(&path, prompt.render())?;
        line.prompt_paths.push(path);
        prompts.push(prompt);
    }

    if let Some(annotator) = &ctx.annotator {
        let hypothesis = ctx.labels.get(&sample_id).copied().unwrap_or(Label::Malware);
        let prompt = prompts
            .iter()
            .find(|p| p.label_hypothesis == hypothesis)
            .expect("one prompt per label");
        match annotator.annotate(prompt) {
            Ok(annotation) => {
                let stem = image_file_name(&sample_id, &ctx.spec);
                let path = ctx.out.join("annotations").join(Path::new(&stem).with_extension("txt"));
                fs::write(&path, annotation.text + "\n")?;
                line.annotation_path = Some(path);
            }
            Err(e) => {
                warn!("{}: annotation failed: {e}", apk.display());
                line.annotation_error = Some(e.to_string());
            }
        }
    }
    Ok(())
}

pub fn cmd_extract_text(args: &ExtractArgs) -> Result<i32, Failure> {
    let mut config = AnnotatorConfig::from_env().map_err(|e| usage(e.to_string()))?;
    if let Some(dir) = &args.stub_dir {
        config.stub_dir = Some(dir.clone());
        config.mode.get_or_insert(AnnotatorMode::Stub);
    }
    config.params.temperature = args.temperature;
    config.params.top_p = args.top_p;
    config.params.max_tokens = args.max_tokens;
    let annotator = config.build().map_err(|e| usage(e.to_string()))?;
    let labels = match &args.labels {
        Some(path) => read_labels_file(path)
            .map_err(|e| usage(format!("{}: {e}", path.display())))?
            .into_iter()
            .map(|(id, entry)| (id, entry.label))
            .collect(),
        None => BTreeMap::new(),
    };

    let apks = collect_apks(&args.input)?;
    if apks.is_empty() {
        return Err(usage("no .apk files found in the input"));
    }
    for sub in ["evidence", "prompts", "annotations"] {
        let dir = args.out.join(sub);
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let ctx = ExtractContext {
        out: &args.out,
        labels,
        spec: args.spec,
        max_input_tokens: args.max_input_tokens,
        annotator,
        evidence_config: EvidenceConfig::default(),
    };
    let lines: Vec<ExtractIndexLine> =
        thread_pool(args.jobs)?.install(|| apks.par_iter().map(|apk| extract_one(&ctx, apk)).collect());
    write_jsonl(&args.out.join(EXTRACT_INDEX), &lines)?;
    let failed = lines.iter().filter(|l| l.status != "ok").count();
    let annotated = lines.iter().filter(|l| l.annotation_path.is_some()).count();
    eprintln!(
        "extracted {} APKs, {annotated} annotated, {failed} with errors",
        lines.len()
    );
    Ok(if failed > 0 { EXIT_PARTIAL } else { EXIT_OK })
}

pub fn cmd_dataset(args: &DatasetArgs, seed: u64) -> Result<i32, Failure> {
    let labels = read_labels_file(&args.labels).map_err(|e| usage(format!("{}: {e}", args.labels.display())))?;
    let manifest = build_manifest(
        &args.images,
        args.texts.as_deref(),
        &labels,
        args.spec,
        seed,
        args.fractions,
    )
    .map_err(anyhow::Error::from)?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    manifest.write(&args.out).map_err(anyhow::Error::from)?;
    for (label, per_split) in &manifest.counts {
        let counts: Vec<String> = per_split.iter().map(|(s, n)| format!("{s}={n}")).collect();
        eprintln!("{label}: {}", counts.join(" "));
    }
    eprintln!(
        "{} records: train={} val={} test={}",
        manifest.records.len(),
        manifest.split_len(Split::Train),
        manifest.split_len(Split::Val),
        manifest.split_len(Split::Test)
    );
    Ok(EXIT_OK)
}

fn load_features(records: &[&DatasetRecord], pool_side: usize) -> anyhow::Result<Vec<Vec<f64>>> {
    records
        .par_iter()
        .map(|r| {
            let image = read_png(&r.image_path).with_context(|| format!("reading {}", r.image_path.display()))?;
            Ok(featurize_decoded(&image, pool_side))
        })
        .collect()
}

pub fn cmd_train_baseline(args: &TrainArgs, seed: u64) -> Result<i32, Failure> {
    if args.pool_side == 0 {
        return Err(usage("--pool-side must be positive"));
    }
    let manifest =
        DatasetManifest::read(&args.manifest).map_err(|e| usage(format!("{}: {e}", args.manifest.display())))?;
    let config = TrainConfig {
        learning_rate: args.learning_rate,
        epochs: args.epochs,
        l2: args.l2,
        seed,
        batch_size: args.batch_size,
        patience: args.patience,
        optimizer: args.optimizer,
    };
    let train_records: Vec<&DatasetRecord> = manifest.split(Split::Train).collect();
    let val_records: Vec<&DatasetRecord> = manifest.split(Split::Val).collect();
    let train_x = load_features(&train_records, args.pool_side)?;
    let train_y: Vec<Label> = train_records.iter().map(|r| r.label).collect();
    let val_x = load_features(&val_records, args.pool_side)?;
    let val_y: Vec<Label> = val_records.iter().map(|r| r.label).collect();
    let (model, history) =
        train(&train_x, &train_y, Some((&val_x, &val_y)), args.pool_side, &config).map_err(|e| anyhow!(e))?;
    model.save(&args.out).map_err(|e| anyhow!(e))?;
    info!("validation loss per epoch: {:?}", history.val_loss);
    eprintln!(
        "trained on {} samples ({} validation), {} epochs run, best epoch {}",
        train_x.len(),
        val_x.len(),
        history.train_loss.len(),
        history.best_epoch
    );
    Ok(EXIT_OK)
}

pub fn cmd_predict(args: &PredictArgs) -> Result<i32, Failure> {
    let manifest =
        DatasetManifest::read(&args.manifest).map_err(|e| usage(format!("{}: {e}", args.manifest.display())))?;
    let model = LinearModel::load(&args.model).map_err(|e| usage(format!("{}: {e}", args.model.display())))?;
    let records: Vec<&DatasetRecord> = manifest
        .records
        .iter()
        .filter(|r| match args.split {
            SplitArg::Train => r.split == Split::Train,
            SplitArg::Val => r.split == Split::Val,
            SplitArg::Test => r.split == Split::Test,
            SplitArg::All => true,
        })
        .collect();
    if records.is_empty() {
        return Err(usage("the selected split has no records"));
    }
    let predictions: Vec<PredictionRecord> = thread_pool(args.jobs)?.install(|| {
        records
            .par_iter()
            .map(|r| -> anyhow::Result<PredictionRecord> {
                let image = read_png(&r.image_path).with_context(|| format!("reading {}", r.image_path.display()))?;
                let (label, score) = model.predict(&featurize_decoded(&image, model.pool_side))?;
                Ok(PredictionRecord::new(&r.sample_id, r.label, label, Some(score)))
            })
            .collect::<anyhow::Result<_>>()
    })?;
    let file = fs::File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_predictions(std::io::BufWriter::new(file), &predictions).context("writing predictions")?;
    eprintln!("wrote {} predictions to {}", predictions.len(), args.out.display());
    Ok(EXIT_OK)
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<i32, Failure> {
    let predictions =
        read_predictions_file(&args.predictions).map_err(|e| usage(format!("{}: {e}", args.predictions.display())))?;
    let report = report(&predictions).map_err(|e| anyhow!(e))?;
    print!("{}", report.to_table());
    if let Some(path) = &args.json {
        fs::write(path, report.to_json() + "\n").with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(EXIT_OK)
}
