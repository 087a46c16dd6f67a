//! Command-line front end: `split`, `stats`, `tile`, `train`, `infer` and
//! `evaluate`.
//!
//! Every option can also come from a JSON file given with `--config`; keys
//! are the long flag names with `-` replaced by `_`. Flags win over the
//! file, the file wins over built-in defaults.
//!
//! Exit codes: 0 success, 1 bad data or failed computation, 2 usage error.

use std::collections::HashMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::classifier::{load_predictions, ClassifierHandle};
use crate::error::Error;
use crate::evaluation::{confusion, load_confusion, report, ConfusionMatrix, ReportOptions};
use crate::inference::{aggregate, predict_patches, DecisionThresholds};
use crate::ingest::{
    format_crop_manifest, format_slide_manifest, load_crop_manifest, load_manifest,
    load_slide_manifest, read_image, split_dataset, validate_crops, write_atomic, CropRecord,
    Manifest, SlideRecord, SplitTag,
};
use crate::label::{parse_label, ClassLabel};
use crate::nnet::checkpoint::{self, Checkpoint};
use crate::nnet::{train, ArchConfig, Example, SGDConfig, TrainConfig};
use crate::preprocess::{
    compute_conform_target, compute_stats, fit_color_pca, prepare, AugmentConfig, ConformTarget,
    RotationMode, StatsDocument, DEFAULT_PCA_FRACTION,
};
use crate::random::RandomStream;
use crate::raster::RasterImage;
use crate::tiler::{
    estimate_patch_size, format_tiles, tile, PatchSpec, DEFAULT_OVERLAP, DEFAULT_SUBSET_FRACTION,
};

#[derive(Debug, Parser)]
#[command(name = "polypscope", version, about = "Slide-level colorectal polyp classification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Stratified train/validation split of a slide or crop manifest.
    Split(SplitArgs),
    /// Normalization statistics, color PCA and conform size from training crops.
    Stats(StatsArgs),
    /// Overlapping patch grid for every slide.
    Tile(TileArgs),
    /// Train the residual network on labeled crops.
    Train(TrainArgs),
    /// Slide-level predictions from a model or recorded patch predictions.
    Infer(InferArgs),
    /// Metrics with exact confidence intervals from a confusion matrix.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct CommonArgs {
    /// JSON file with option values; flags take precedence [default: none]
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Seed for every randomized step [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads, 0 for one per core [default: 0]
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    /// Slide or crop manifest to split [default: none]
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Fraction of each class sent to validation [default: 0.15]
    #[arg(long)]
    pub fraction: Option<f64>,
    /// Output directory for train.tsv and validation.tsv [default: none]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct StatsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    /// Slide manifest holding the crops' parent images [default: none]
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Directory that relative image paths resolve against [default: manifest directory]
    #[arg(long)]
    pub images: Option<PathBuf>,
    /// Training crop manifest [default: none]
    #[arg(long)]
    pub crops: Option<PathBuf>,
    /// Fraction of crops sampled for the conform size [default: 0.15]
    #[arg(long)]
    pub subset_fraction: Option<f64>,
    /// Fraction of crops sampled for the color PCA [default: 0.15]
    #[arg(long)]
    pub pca_fraction: Option<f64>,
    /// Output JSON path [default: none]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct PatchArgs {
    /// Patch width in pixels [default: estimated from crops, else the stats conform size]
    #[arg(long)]
    pub patch_width: Option<usize>,
    /// Patch height in pixels [default: same as width]
    #[arg(long)]
    pub patch_height: Option<usize>,
    /// Fractional overlap between neighbouring patches [default: 0.3333]
    #[arg(long)]
    pub overlap: Option<f64>,
    /// Crop manifest used to estimate the patch size [default: none]
    #[arg(long)]
    pub crops: Option<PathBuf>,
    /// Fraction of crops sampled for the patch-size estimate [default: 0.15]
    #[arg(long)]
    pub subset_fraction: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct TileArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub patch: PatchArgs,
    /// Slide manifest [default: none]
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Directory that relative image paths resolve against [default: manifest directory]
    #[arg(long)]
    pub images: Option<PathBuf>,
    /// Output directory, one TSV per slide [default: none]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RotationArg {
    RandomQuarter,
    AllFour,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    /// Slide manifest holding the crops' parent images [default: none]
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Directory that relative image paths resolve against [default: manifest directory]
    #[arg(long)]
    pub images: Option<PathBuf>,
    /// Training crop manifest [default: none]
    #[arg(long)]
    pub crops: Option<PathBuf>,
    /// Validation crop manifest; when given the best-validation model is saved [default: none]
    #[arg(long)]
    pub validation_crops: Option<PathBuf>,
    /// Stats JSON written by `stats` [default: none]
    #[arg(long)]
    pub stats: Option<PathBuf>,
    /// Training epochs [default: 200]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Initial learning rate, divided by 10 every 50 epochs [default: 0.1]
    #[arg(long)]
    pub lr: Option<f64>,
    /// SGD momentum [default: 0.9]
    #[arg(long)]
    pub momentum: Option<f64>,
    /// Mini-batch size [default: 32]
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Apply color jitter, rotations and flips [default: true]
    #[arg(long)]
    pub augment: Option<bool>,
    /// Color jitter standard deviation [default: 0.1]
    #[arg(long)]
    pub jitter_sigma: Option<f64>,
    /// Horizontal flip probability [default: 0.5]
    #[arg(long)]
    pub flip_probability: Option<f64>,
    /// Rotation scheme [default: random-quarter]
    #[arg(long, value_enum)]
    pub rotation_mode: Option<RotationArg>,
    /// Where to write the per-epoch loss history as JSON [default: none]
    #[arg(long)]
    pub history: Option<PathBuf>,
    /// Output checkpoint path [default: none]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Network layout; configuration file only.
    #[arg(skip)]
    pub arch: Option<ArchConfig>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct InferArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub patch: PatchArgs,
    /// Slide manifest [default: none]
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Directory that relative image paths resolve against [default: manifest directory]
    #[arg(long)]
    pub images: Option<PathBuf>,
    /// Only slides with this split tag (train, validation, test, unassigned) [default: all]
    #[arg(long)]
    pub split: Option<String>,
    /// Model checkpoint written by `train` [default: none]
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Stats JSON used with --model [default: none]
    #[arg(long)]
    pub stats: Option<PathBuf>,
    /// Recorded patch predictions TSV, instead of a model [default: none]
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Minimum votes for a polyp class [default: 5]
    #[arg(long)]
    pub min_patches: Option<usize>,
    /// Minimum mean confidence of the winning class [default: 0.70]
    #[arg(long)]
    pub min_confidence: Option<f64>,
    /// Output directory [default: none]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    /// Confusion matrix TSV (predicted rows, reference columns) [default: none]
    #[arg(long)]
    pub confusion: Option<PathBuf>,
    /// summary.tsv written by `infer`, instead of a confusion matrix [default: none]
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Trial count for every interval [default: matrix total]
    #[arg(long)]
    pub cohort_size: Option<u64>,
    /// Use each metric's own denominator for proportion intervals [default: false]
    #[arg(long)]
    pub exact_intervals: Option<bool>,
    /// Output JSON path for the full report [default: none]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Domain(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Domain(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(message: impl Into<String>) -> CliError {
    CliError::Usage(message.into())
}

fn required<T>(value: Option<T>, flag: &str) -> CliResult<T> {
    value.ok_or_else(|| usage(format!("missing required option --{flag}")))
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(CliError::Usage(message)) => {
            eprintln!("error: {message}");
            eprintln!("{}", Cli::command().render_usage());
            2
        }
        Err(CliError::Domain(e)) => {
            eprintln!("error: {}", one_line(&e));
            1
        }
    }
}

fn one_line(e: &Error) -> String {
    e.to_string().replace('\n', " ")
}

/// Overlays flag values on the config file.
fn resolve<T: Serialize + DeserializeOwned + Clone>(flags: &T, config: Option<&Path>) -> CliResult<T> {
    let Some(path) = config else {
        return Ok(flags.clone());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut merged: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| usage(format!("invalid config {}: {e}", path.display())))?;
    let serde_json::Value::Object(base) = &mut merged else {
        return Err(usage(format!("config {} must be a JSON object", path.display())));
    };
    let serde_json::Value::Object(overrides) = to_value(flags)? else {
        unreachable!("argument structs serialize to objects");
    };
    for (k, v) in overrides {
        if !v.is_null() {
            base.insert(k, v);
        }
    }
    serde_json::from_value(merged).map_err(|e| usage(format!("invalid config {}: {e}", path.display())))
}

fn to_value<T: Serialize>(v: &T) -> CliResult<serde_json::Value> {
    serde_json::to_value(v).map_err(|e| usage(e.to_string()))
}

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> CliResult<T> + Send) -> CliResult<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| usage(format!("cannot start {} workers: {e}", jobs.unwrap_or(0))))?;
    pool.install(f)
}

fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Split(a) => {
            let config = a.common.config.clone();
            let a = resolve(&a, config.as_deref())?;
            with_pool(a.common.jobs, || cmd_split(&a))
        }
        Command::Stats(a) => {
            let config = a.common.config.clone();
            let a = resolve(&a, config.as_deref())?;
            with_pool(a.common.jobs, || cmd_stats(&a))
        }
        Command::Tile(a) => {
            let config = a.common.config.clone();
            let a = resolve(&a, config.as_deref())?;
            with_pool(a.common.jobs, || cmd_tile(&a))
        }
        Command::Train(a) => {
            let config = a.common.config.clone();
            let a = resolve(&a, config.as_deref())?;
            with_pool(a.common.jobs, || cmd_train(&a))
        }
        Command::Infer(a) => {
            let config = a.common.config.clone();
            let a = resolve(&a, config.as_deref())?;
            with_pool(a.common.jobs, || cmd_infer(&a))
        }
        Command::Evaluate(a) => {
            let config = a.common.config.clone();
            let a = resolve(&a, config.as_deref())?;
            with_pool(a.common.jobs, || cmd_evaluate(&a))
        }
    }
}

fn seed_of(common: &CommonArgs) -> u64 {
    common.seed.unwrap_or(0)
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::file(parent, e))?;
    }
    Ok(write_atomic(path, text.as_bytes())?)
}

fn create_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path).map_err(|e| CliError::Domain(Error::file(path, e)))
}

fn image_root(manifest: &Path, images: Option<&Path>) -> PathBuf {
    match images {
        Some(dir) => dir.to_path_buf(),
        None => manifest.parent().map(Path::to_path_buf).unwrap_or_default(),
    }
}

fn resolve_image(root: &Path, record: &SlideRecord) -> PathBuf {
    if record.image_path.is_absolute() {
        record.image_path.clone()
    } else {
        root.join(&record.image_path)
    }
}

/// Cuts every crop out of its parent slide. Parents are read once each.
fn load_crop_images(
    slides_path: &Path,
    images: Option<&Path>,
    crops: &[CropRecord],
) -> CliResult<Vec<RasterImage>> {
    let slides = load_slide_manifest(slides_path)?;
    let root = image_root(slides_path, images);
    let by_id: HashMap<&str, &SlideRecord> = slides.iter().map(|s| (s.id.as_str(), s)).collect();
    let mut parents: Vec<&str> = crops.iter().map(|c| c.parent_slide_id.as_str()).collect();
    parents.sort_unstable();
    parents.dedup();
    let loaded: Vec<(String, RasterImage)> = parents
        .par_iter()
        .map(|id| {
            let record = by_id.get(id).ok_or_else(|| {
                Error::Range(format!("crop parent {id:?} is not in {}", slides_path.display()))
            })?;
            Ok((id.to_string(), read_image(resolve_image(&root, record))?))
        })
        .collect::<crate::error::Result<_>>()?;
    let images: HashMap<String, RasterImage> = loaded.into_iter().collect();
    let dims = images.iter().map(|(k, v)| (k.clone(), v.dimensions())).collect();
    validate_crops(crops, &dims)?;
    crops
        .par_iter()
        .map(|c| {
            let b = c.bounds;
            images[&c.parent_slide_id]
                .crop(b.x, b.y, b.width, b.height)
                .map_err(CliError::from)
        })
        .collect()
}

fn cmd_split(a: &SplitArgs) -> CliResult<()> {
    let manifest = required(a.manifest.as_deref(), "manifest")?;
    let out = required(a.out.as_deref(), "out")?;
    let fraction = a.fraction.unwrap_or(0.15);
    let mut rng = RandomStream::new(seed_of(&a.common)).derive("split");
    create_dir(out)?;
    let (train_text, val_text, counts) = match load_manifest(manifest)? {
        Manifest::Slides(records) => {
            let pool: Vec<SlideRecord> = records
                .into_iter()
                .filter(|r| r.split_tag != SplitTag::Test)
                .collect();
            let (mut train, mut val) = split_dataset(&pool, fraction, &mut rng)?;
            train.iter_mut().for_each(|r| r.split_tag = SplitTag::Train);
            val.iter_mut().for_each(|r| r.split_tag = SplitTag::Validation);
            let counts = (train.len(), val.len());
            (format_slide_manifest(&train), format_slide_manifest(&val), counts)
        }
        Manifest::Crops(records) => {
            let (train, val) = split_dataset(&records, fraction, &mut rng)?;
            let counts = (train.len(), val.len());
            (format_crop_manifest(&train), format_crop_manifest(&val), counts)
        }
    };
    write_text(&out.join("train.tsv"), &train_text)?;
    write_text(&out.join("validation.tsv"), &val_text)?;
    eprintln!("split: {} train, {} validation", counts.0, counts.1);
    Ok(())
}

fn cmd_stats(a: &StatsArgs) -> CliResult<()> {
    let slides = required(a.manifest.as_deref(), "manifest")?;
    let crops_path = required(a.crops.as_deref(), "crops")?;
    let out = required(a.out.as_deref(), "out")?;
    let seed = seed_of(&a.common);
    let root = RandomStream::new(seed);
    let crops = load_crop_manifest(crops_path)?;
    let images = load_crop_images(slides, a.images.as_deref(), &crops)?;
    let stats = compute_stats(&images)?;

    let n = images.len();
    let pca_fraction = a.pca_fraction.unwrap_or(DEFAULT_PCA_FRACTION);
    if !(pca_fraction > 0.0 && pca_fraction <= 1.0) {
        return Err(usage(format!("--pca-fraction {pca_fraction} must lie in (0, 1]")));
    }
    let take = ((n as f64 * pca_fraction - 1e-9).ceil() as usize).clamp(1, n);
    let mut picks = root.derive("pca").sample_indices(n, take);
    picks.sort_unstable();
    let pca = fit_color_pca(picks.iter().map(|&i| &images[i]))?;

    let dims: Vec<_> = images.iter().map(RasterImage::dimensions).collect();
    let subset = a.subset_fraction.unwrap_or(DEFAULT_SUBSET_FRACTION);
    let target = compute_conform_target(&dims, subset, &mut root.derive("conform"))?;
    let doc = StatsDocument::new(&stats, &pca, seed, Some(target));
    write_text(out, &doc.to_json())?;
    eprintln!("stats: {n} crops, conform size {}x{}", target.width, target.height);
    Ok(())
}

/// Patch geometry from flags, a crop-size estimate, or a fallback size.
fn patch_spec(p: &PatchArgs, seed: u64, fallback: Option<(usize, usize)>) -> CliResult<PatchSpec> {
    let overlap = p.overlap.unwrap_or(DEFAULT_OVERLAP);
    let (w, h) = match (p.patch_width, p.patch_height) {
        (Some(w), Some(h)) => (w, h),
        (Some(w), None) => (w, w),
        (None, Some(h)) => (h, h),
        (None, None) => match (&p.crops, fallback) {
            (Some(path), _) => {
                let crops = load_crop_manifest(path)?;
                let subset = p.subset_fraction.unwrap_or(DEFAULT_SUBSET_FRACTION);
                estimate_patch_size(&crops, subset, &mut RandomStream::new(seed).derive("patch-size"))?
            }
            (None, Some(dims)) => dims,
            (None, None) => {
                return Err(usage("patch size unknown: give --patch-width/--patch-height or --crops"))
            }
        },
    };
    PatchSpec::new(w, h, overlap).map_err(|e| usage(one_line(&e)))
}

fn cmd_tile(a: &TileArgs) -> CliResult<()> {
    let manifest = required(a.manifest.as_deref(), "manifest")?;
    let out = required(a.out.as_deref(), "out")?;
    let spec = patch_spec(&a.patch, seed_of(&a.common), None)?;
    let slides = load_slide_manifest(manifest)?;
    let root = image_root(manifest, a.images.as_deref());
    create_dir(out)?;
    let counts: Vec<usize> = slides
        .par_iter()
        .map(|s| {
            let img = read_image(resolve_image(&root, s))?;
            let origins = tile(img.width(), img.height(), &spec);
            write_text(&out.join(format!("{}.tsv", s.id)), &format_tiles(&origins, &spec))?;
            Ok(origins.len())
        })
        .collect::<CliResult<_>>()?;
    for (s, n) in slides.iter().zip(counts) {
        eprintln!("tile: {} {n} patches", s.id);
    }
    Ok(())
}

fn examples(
    slides: &Path,
    images: Option<&Path>,
    crops_path: &Path,
    target: ConformTarget,
    doc: &StatsDocument,
) -> CliResult<Vec<Example>> {
    let crops = load_crop_manifest(crops_path)?;
    let raw = load_crop_images(slides, images, &crops)?;
    let stats = doc.stats();
    raw.par_iter()
        .zip(&crops)
        .map(|(img, c)| {
            Ok(Example {
                image: prepare(img, target, &stats)?,
                label: c.reference_label,
            })
        })
        .collect()
}

#[derive(Serialize)]
struct HistoryDocument<'a> {
    loss_history: &'a [f64],
    best_epoch: Option<usize>,
    best_accuracy: Option<f64>,
}

fn cmd_train(a: &TrainArgs) -> CliResult<()> {
    let slides = required(a.manifest.as_deref(), "manifest")?;
    let crops = required(a.crops.as_deref(), "crops")?;
    let stats_path = required(a.stats.as_deref(), "stats")?;
    let out = required(a.out.as_deref(), "out")?;
    let doc = StatsDocument::load(stats_path)?;
    let target = doc
        .conform
        .ok_or_else(|| Error::Range(format!("{} has no conform size", stats_path.display())))?;

    let train_set = examples(slides, a.images.as_deref(), crops, target, &doc)?;
    let val_set = match &a.validation_crops {
        Some(p) => Some(examples(slides, a.images.as_deref(), p, target, &doc)?),
        None => None,
    };

    let sgd = SGDConfig {
        initial_rate: a.lr.unwrap_or(0.1),
        momentum: a.momentum.unwrap_or(0.9),
        epochs: a.epochs.unwrap_or(200),
        batch_size: a.batch_size.unwrap_or(32),
        seed: seed_of(&a.common),
        ..SGDConfig::default()
    };
    sgd.validate().map_err(|e| usage(one_line(&e)))?;
    let augment = if a.augment.unwrap_or(true) {
        let cfg = AugmentConfig {
            jitter_sigma: a.jitter_sigma.unwrap_or(0.1),
            flip_probability: a.flip_probability.unwrap_or(0.5),
            rotation_mode: match a.rotation_mode.unwrap_or(RotationArg::RandomQuarter) {
                RotationArg::RandomQuarter => RotationMode::RandomQuarter,
                RotationArg::AllFour => RotationMode::AllFour,
            },
        };
        cfg.validate().map_err(|e| usage(one_line(&e)))?;
        Some((cfg, doc.pca()))
    } else {
        None
    };
    let config = TrainConfig {
        arch: a.arch.clone().unwrap_or_default(),
        sgd,
        augment,
    };
    let outcome = train(&train_set, val_set.as_deref(), &config)?;
    for (epoch, loss) in outcome.loss_history.iter().enumerate() {
        if epoch % 10 == 0 || epoch + 1 == outcome.loss_history.len() {
            eprintln!("train: epoch {epoch} loss {loss:.6}");
        }
    }
    let model = match &outcome.best {
        Some(best) => {
            eprintln!("train: best validation accuracy {:.4} at epoch {}", best.accuracy, best.epoch);
            best.model.clone()
        }
        None => outcome.model.clone(),
    };
    if let Some(path) = &a.history {
        let doc = HistoryDocument {
            loss_history: &outcome.loss_history,
            best_epoch: outcome.best.as_ref().map(|b| b.epoch),
            best_accuracy: outcome.best.as_ref().map(|b| b.accuracy),
        };
        let mut text = serde_json::to_string_pretty(&doc).map_err(Error::from)?;
        text.push('\n');
        write_text(path, &text)?;
    }
    let bytes = checkpoint::encode(&Checkpoint {
        model,
        input_size: Some((target.width, target.height)),
    })?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_atomic(out, &bytes)?;
    Ok(())
}

fn cmd_infer(a: &InferArgs) -> CliResult<()> {
    let manifest = required(a.manifest.as_deref(), "manifest")?;
    let out = required(a.out.as_deref(), "out")?;
    let thresholds = DecisionThresholds::new(a.min_patches.unwrap_or(5), a.min_confidence.unwrap_or(0.70))
        .map_err(|e| usage(one_line(&e)))?;
    let split = a
        .split
        .as_deref()
        .filter(|s| !s.eq_ignore_ascii_case("all"))
        .map(|s| s.parse::<SplitTag>().map_err(usage))
        .transpose()?;

    let (handle, fallback) = match (&a.model, &a.predictions) {
        (Some(model), None) => {
            let stats_path = required(a.stats.as_deref(), "stats")?;
            let doc = StatsDocument::load(stats_path)?;
            let ckpt = checkpoint::load(model)?;
            let target = match (doc.conform, ckpt.input_size) {
                (Some(t), _) => t,
                (None, Some((w, h))) => ConformTarget::new(w, h)?,
                (None, None) => {
                    return Err(Error::Range("neither stats nor model records an input size".into()).into())
                }
            };
            let fallback = Some((target.width, target.height));
            (ClassifierHandle::network(ckpt.model, doc.stats(), target), fallback)
        }
        (None, Some(p)) => (ClassifierHandle::recorded(load_predictions(p)?)?, None),
        _ => return Err(usage("give exactly one of --model or --predictions")),
    };
    let spec = patch_spec(&a.patch, seed_of(&a.common), fallback)?;

    let slides: Vec<SlideRecord> = load_slide_manifest(manifest)?
        .into_iter()
        .filter(|s| split.is_none_or(|t| s.split_tag == t))
        .collect();
    if slides.is_empty() {
        return Err(Error::EmptyDataset.into());
    }
    let root = image_root(manifest, a.images.as_deref());
    create_dir(&out.join("slides"))?;

    let decisions = slides
        .par_iter()
        .map(|s| {
            let img = read_image(resolve_image(&root, s))?;
            let preds = predict_patches(&img, &handle, &spec, Some(&s.id))?;
            let decision = aggregate(&preds, &thresholds);
            let mut json = serde_json::to_string_pretty(&decision.report(&s.id)).map_err(Error::from)?;
            json.push('\n');
            write_text(&out.join("slides").join(format!("{}.json", s.id)), &json)?;
            Ok(decision)
        })
        .collect::<CliResult<Vec<_>>>()?;

    let mut summary = String::from("slide_id\treference\tpredicted\ttotal_patches\n");
    let mut pairs = Vec::with_capacity(slides.len());
    for (s, d) in slides.iter().zip(&decisions) {
        eprintln!("infer: {} -> {} ({} patches)", s.id, d.predicted, d.total_patches);
        summary.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            s.id,
            s.reference_label.code(),
            d.predicted.code(),
            d.total_patches
        ));
        pairs.push((d.predicted, s.reference_label));
    }
    write_text(&out.join("summary.tsv"), &summary)?;
    write_text(&out.join("confusion.tsv"), &confusion(&pairs)?.to_tsv())?;
    let hits = pairs.iter().filter(|(p, r)| p == r).count();
    eprintln!("infer: {hits}/{} slides correct", pairs.len());
    Ok(())
}

/// Reads `infer`'s summary table into (predicted, reference) pairs.
fn load_summary(path: &Path) -> CliResult<Vec<(ClassLabel, ClassLabel)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() < 3 {
            return Err(Error::Parse {
                line: i + 1,
                message: "expected slide_id, reference and predicted".into(),
            }
            .into());
        }
        let reference = parse_label(f[1]).map_err(|e| Error::at_line(i + 1, e))?;
        let predicted = parse_label(f[2]).map_err(|e| Error::at_line(i + 1, e))?;
        pairs.push((predicted, reference));
    }
    Ok(pairs)
}

fn cmd_evaluate(a: &EvaluateArgs) -> CliResult<()> {
    let matrix: ConfusionMatrix = match (&a.confusion, &a.summary) {
        (Some(p), None) => load_confusion(p)?,
        (None, Some(p)) => confusion(&load_summary(p)?)?,
        _ => return Err(usage("give exactly one of --confusion or --summary")),
    };
    if matrix.total() == 0 {
        return Err(Error::EmptyDataset.into());
    }
    let options = ReportOptions {
        cohort_size: a.cohort_size,
        exact_intervals: a.exact_intervals.unwrap_or(false),
    };
    let rep = report(&matrix, &options)?;
    print!("{}", rep.to_table());
    if let Some(out) = &a.out {
        let mut json = serde_json::to_string_pretty(&rep).map_err(Error::from)?;
        json.push('\n');
        write_text(out, &json)?;
    }
    Ok(())
}
