//! The `inscript` command-line interface.
//!
//! Subcommands: `binarize`, `slice`, `train`, `recognize`, `eval`, `synth`.
//! Every value flag can also come from an optional JSON config file passed
//! with `--config` (an object keyed by the long flag name); explicit flags
//! win. Each run writes its effective configuration next to its primary
//! output as `*.config.json`, so reruns are reproducible.
//!
//! Exit codes: 0 success (bridge failures are warnings), 1 user or input
//! error, 2 internal invariant violation.

use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use crate::binarize::{binarize, BinarizeError, Polarity};
use crate::corpus::{
    augment_corpus, load_manifest, render_page, synth_corpus_family, AugmentSpec, Corpus,
    CorpusError, Family,
};
use crate::evalkit::{
    emit_report, format_table, score_sample, CombinedReport, EvalError, SampleReport,
};
use crate::glyphnet::{
    load_checkpoint, save_checkpoint, train, GlyphnetError, TrainConfig, TrainMode,
};
use crate::raster::{read_image, write_pgm, RasterError};
use crate::recognize::{
    build_prototypes, run_pipeline, EngineBridge, PipelineOptions, PrototypeSet, RecognizeError,
};
use crate::segment::{export_blocks, slice, GridSpec, SegmentError};

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Msg(String),
    #[error("config file: {0}")]
    Config(String),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Binarize(#[from] BinarizeError),
    #[error(transparent)]
    Segment(#[from] SegmentError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Glyphnet(#[from] GlyphnetError),
    #[error(transparent)]
    Recognize(#[from] RecognizeError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

fn user_error(msg: impl Into<String>) -> CliError {
    CliError::Msg(msg.into())
}

#[derive(Parser)]
#[command(
    name = "inscript",
    version,
    about = "Batch OCR pipeline for inscription and printed-script images"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Otsu-binarize an image and write the result as PGM.
    Binarize(BinarizeArgs),
    /// Slice a page into a grid of 28x28 letter blocks exported as PGM.
    Slice(SliceArgs),
    /// Train the network on a manifest or synthetic corpus.
    Train(TrainArgs),
    /// Recognize a page with a trained model; optionally double-validate
    /// with an external OCR command and speak via a TTS command.
    Recognize(RecognizeArgs),
    /// Score prediction files against truth files and report efficiencies.
    Eval(EvalArgs),
    /// Generate a synthetic glyph corpus (and optionally a test page).
    Synth(SynthArgs),
}

/// JSON config overlay: same keys as the long flags, explicit flags win.
struct Overlay(serde_json::Map<String, serde_json::Value>);

impl Overlay {
    fn load(path: Option<&PathBuf>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self(serde_json::Map::new()));
        };
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let value: serde_json::Value = serde_json::from_slice(&bytes)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        match value {
            serde_json::Value::Object(map) => Ok(Self(map)),
            _ => Err(CliError::Config(format!(
                "{}: expected a JSON object",
                path.display()
            ))),
        }
    }

    fn string(&self, key: &str) -> Option<String> {
        self.0.get(key).and_then(|v| v.as_str()).map(str::to_owned)
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.string(key).map(PathBuf::from)
    }

    fn f64(&self, key: &str) -> Option<f64> {
        self.0.get(key).and_then(|v| v.as_f64())
    }

    fn u64(&self, key: &str) -> Option<u64> {
        self.0.get(key).and_then(|v| v.as_u64())
    }

    fn bool(&self, key: &str) -> Option<bool> {
        self.0.get(key).and_then(|v| v.as_bool())
    }
}

/// Entry point used by the binary.
pub fn run() -> i32 {
    run_from(std::env::args().collect())
}

/// Testable entry point. Maps user errors to exit 1 and panics (broken
/// internal invariants) to exit 2.
pub fn run_from(args: Vec<String>) -> i32 {
    match std::panic::catch_unwind(|| dispatch(args)) {
        Ok(code) => code,
        Err(_) => {
            eprintln!("inscript: internal error (invariant violated)");
            2
        }
    }
}

fn dispatch(args: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Binarize(args) => cmd_binarize(args),
        Command::Slice(args) => cmd_slice(args),
        Command::Train(args) => cmd_train(args),
        Command::Recognize(args) => cmd_recognize(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Synth(args) => cmd_synth(args),
    };
    match result {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("inscript: {err}");
            1
        }
    }
}

fn write_effective_config<T: Serialize>(target: &Path, config: &T) -> Result<(), CliError> {
    let sidecar = PathBuf::from(format!("{}.config.json", target.display()));
    let mut bytes = serde_json::to_vec_pretty(config).expect("config serializes");
    bytes.push(b'\n');
    std::fs::write(sidecar, bytes)?;
    Ok(())
}

fn parse_polarity(value: &str) -> Result<Polarity, CliError> {
    match value {
        "dark" | "dark_foreground" => Ok(Polarity::DarkForeground),
        "light" | "light_foreground" => Ok(Polarity::LightForeground),
        "auto" => Ok(Polarity::Auto),
        other => Err(user_error(format!(
            "unknown polarity {other:?} (expected dark, light, or auto)"
        ))),
    }
}

fn parse_family(value: &str) -> Result<Family, CliError> {
    match value {
        "modern" => Ok(Family::Modern),
        "ancient" => Ok(Family::Ancient),
        other => Err(user_error(format!(
            "unknown family {other:?} (expected modern or ancient)"
        ))),
    }
}

/// Parse `AxB` shapes such as `--synth 20x50` or `--page 3x4`.
fn parse_pair(value: &str, what: &str) -> Result<(u32, u32), CliError> {
    let mut parts = value.split('x');
    let parse = |s: Option<&str>| -> Option<u32> { s.and_then(|s| s.parse().ok()) };
    match (parse(parts.next()), parse(parts.next()), parts.next()) {
        (Some(a), Some(b), None) if a > 0 && b > 0 => Ok((a, b)),
        _ => Err(user_error(format!(
            "{what} expects the form AxB with positive integers, got {value:?}"
        ))),
    }
}

// ---------------------------------------------------------------------------
// binarize
// ---------------------------------------------------------------------------

#[derive(Args)]
struct BinarizeArgs {
    /// Input image (PNG or binary PGM/PPM).
    input: PathBuf,
    /// Output path for the binarized PGM.
    out: PathBuf,
    /// Foreground selection: dark, light, or auto (minority class wins).
    #[arg(long)]
    polarity: Option<String>,
    /// JSON config overlay (same keys as flags; flags win).
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Serialize)]
struct BinarizeEffective {
    input: String,
    out: String,
    polarity: String,
}

fn cmd_binarize(args: BinarizeArgs) -> Result<(), CliError> {
    let overlay = Overlay::load(args.config.as_ref())?;
    let polarity_name = args
        .polarity
        .or_else(|| overlay.string("polarity"))
        .unwrap_or_else(|| "auto".into());
    let polarity = parse_polarity(&polarity_name)?;

    let gray = read_image(&args.input)?.into_gray();
    let (binary, otsu, resolved) = binarize(&gray, polarity)?;
    if otsu.degenerate {
        eprintln!(
            "warning: degenerate histogram (single intensity {}); output has no foreground split",
            otsu.threshold
        );
    }
    write_pgm(&binary.render_gray(), &args.out)?;
    println!("threshold={} polarity={}", otsu.threshold, resolved);
    write_effective_config(
        &args.out,
        &BinarizeEffective {
            input: args.input.display().to_string(),
            out: args.out.display().to_string(),
            polarity: polarity_name,
        },
    )
}

// ---------------------------------------------------------------------------
// slice
// ---------------------------------------------------------------------------

#[derive(Args)]
struct SliceArgs {
    /// Input page image.
    input: PathBuf,
    /// Grid rows.
    #[arg(long)]
    rows: Option<u32>,
    /// Grid columns.
    #[arg(long)]
    cols: Option<u32>,
    /// Directory for the exported `r{row}_c{col}.pgm` blocks.
    #[arg(long = "out-dir")]
    out_dir: Option<PathBuf>,
    /// JSON config overlay (same keys as flags; flags win).
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Serialize)]
struct SliceEffective {
    input: String,
    rows: u32,
    cols: u32,
    out_dir: String,
}

fn grid_from(rows: Option<u32>, cols: Option<u32>) -> Result<GridSpec, CliError> {
    match (rows, cols) {
        (Some(r), Some(c)) if r >= 1 && c >= 1 => Ok(GridSpec::new(r, c)),
        (Some(_), Some(_)) => Err(user_error("--rows and --cols must be >= 1")),
        _ => Err(user_error("--rows and --cols are required")),
    }
}

fn cmd_slice(args: SliceArgs) -> Result<(), CliError> {
    let overlay = Overlay::load(args.config.as_ref())?;
    let rows = args.rows.or_else(|| overlay.u64("rows").map(|v| v as u32));
    let cols = args.cols.or_else(|| overlay.u64("cols").map(|v| v as u32));
    let grid = grid_from(rows, cols)?;
    let out_dir = args
        .out_dir
        .or_else(|| overlay.path("out-dir"))
        .ok_or_else(|| user_error("--out-dir is required"))?;

    let gray = read_image(&args.input)?.into_gray();
    let (binary, _, _) = binarize(&gray, Polarity::Auto)?;
    let blocks = slice(&binary, grid)?;
    let paths = export_blocks(&blocks, &out_dir)?;
    println!("wrote {} blocks to {}", paths.len(), out_dir.display());
    write_effective_config(
        &out_dir.join("run"),
        &SliceEffective {
            input: args.input.display().to_string(),
            rows: grid.rows,
            cols: grid.cols,
            out_dir: out_dir.display().to_string(),
        },
    )
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

#[derive(Args)]
struct TrainArgs {
    /// Manifest JSON listing labeled crops.
    #[arg(long, conflicts_with = "synth")]
    manifest: Option<PathBuf>,
    /// Generate a synthetic corpus instead, as CLASSESxPER_CLASS (e.g. 20x50).
    #[arg(long)]
    synth: Option<String>,
    /// Family of the synthetic corpus: modern or ancient.
    #[arg(long = "synth-family")]
    synth_family: Option<String>,
    /// Training objective: softmax or contrastive.
    #[arg(long)]
    mode: Option<String>,
    /// Learning rate.
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<u64>,
    /// Batch size; parameters update after every batch.
    #[arg(long)]
    batch: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Checkpoint output path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Warm-start checkpoint.
    #[arg(long)]
    pretrained: Option<PathBuf>,
    /// Keep convolution parameters frozen (requires --pretrained).
    #[arg(long = "freeze-conv")]
    freeze_conv: bool,
    /// Contrastive margin.
    #[arg(long)]
    margin: Option<f64>,
    /// Augmented copies per example (0 disables augmentation).
    #[arg(long = "augment-copies")]
    augment_copies: Option<u64>,
    /// Augmentation rotation range in ± degrees.
    #[arg(long = "augment-rotation")]
    augment_rotation: Option<f64>,
    /// Augmentation translation range in ± pixels.
    #[arg(long = "augment-translate")]
    augment_translate: Option<f64>,
    #[arg(long = "augment-scale-min")]
    augment_scale_min: Option<f64>,
    #[arg(long = "augment-scale-max")]
    augment_scale_max: Option<f64>,
    /// Per-pixel flip probability, below 0.5.
    #[arg(long = "augment-flip-prob")]
    augment_flip_prob: Option<f64>,
    /// JSON config overlay (same keys as flags; flags win).
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Serialize)]
struct TrainEffective {
    manifest: Option<String>,
    synth: Option<String>,
    synth_family: String,
    mode: String,
    lr: f64,
    epochs: u64,
    batch: u64,
    seed: u64,
    out: String,
    pretrained: Option<String>,
    freeze_conv: bool,
    margin: Option<f64>,
    augment_copies: u64,
    augment_rotation: f64,
    augment_translate: f64,
    augment_scale_min: f64,
    augment_scale_max: f64,
    augment_flip_prob: f64,
}

#[derive(Serialize)]
struct TrainLog {
    epoch_mean_loss: Vec<f64>,
}

fn cmd_train(args: TrainArgs) -> Result<(), CliError> {
    let overlay = Overlay::load(args.config.as_ref())?;
    let manifest = args.manifest.or_else(|| overlay.path("manifest"));
    let synth = args.synth.or_else(|| overlay.string("synth"));
    let synth_family_name = args
        .synth_family
        .or_else(|| overlay.string("synth-family"))
        .unwrap_or_else(|| "modern".into());
    let mode_name = args
        .mode
        .or_else(|| overlay.string("mode"))
        .unwrap_or_else(|| "softmax".into());
    let lr = args.lr.or_else(|| overlay.f64("lr")).unwrap_or(0.01);
    let epochs = args.epochs.or_else(|| overlay.u64("epochs")).unwrap_or(10);
    let batch = args.batch.or_else(|| overlay.u64("batch")).unwrap_or(1);
    let seed = args.seed.or_else(|| overlay.u64("seed")).unwrap_or(0);
    let out = args
        .out
        .or_else(|| overlay.path("out"))
        .ok_or_else(|| user_error("--out is required"))?;
    let pretrained_path = args.pretrained.or_else(|| overlay.path("pretrained"));
    let freeze_conv = args.freeze_conv || overlay.bool("freeze-conv").unwrap_or(false);
    let margin = args.margin.or_else(|| overlay.f64("margin"));
    let augment_copies = args
        .augment_copies
        .or_else(|| overlay.u64("augment-copies"))
        .unwrap_or(0);

    if freeze_conv && pretrained_path.is_none() {
        return Err(user_error("--freeze-conv needs --pretrained (nothing to freeze)"));
    }
    if lr <= 0.0 {
        return Err(user_error("--lr must be positive"));
    }
    if epochs < 1 || batch < 1 {
        return Err(user_error("--epochs and --batch must be >= 1"));
    }

    let mode = match mode_name.as_str() {
        "softmax" => {
            if margin.is_some() {
                return Err(user_error("--margin only applies to contrastive mode"));
            }
            TrainMode::Softmax
        }
        "contrastive" => {
            let margin = margin.unwrap_or(1.0);
            if margin <= 0.0 {
                return Err(user_error("--margin must be positive"));
            }
            TrainMode::Contrastive { margin }
        }
        other => {
            return Err(user_error(format!(
                "unknown mode {other:?} (expected softmax or contrastive)"
            )))
        }
    };

    let defaults = AugmentSpec::default();
    let augment_spec = AugmentSpec {
        rotation_degrees: args
            .augment_rotation
            .or_else(|| overlay.f64("augment-rotation"))
            .unwrap_or(defaults.rotation_degrees),
        translate_pixels: args
            .augment_translate
            .or_else(|| overlay.f64("augment-translate"))
            .unwrap_or(defaults.translate_pixels),
        scale: (
            args.augment_scale_min
                .or_else(|| overlay.f64("augment-scale-min"))
                .unwrap_or(defaults.scale.0),
            args.augment_scale_max
                .or_else(|| overlay.f64("augment-scale-max"))
                .unwrap_or(defaults.scale.1),
        ),
        noise_flip_prob: args
            .augment_flip_prob
            .or_else(|| overlay.f64("augment-flip-prob"))
            .unwrap_or(defaults.noise_flip_prob),
        copies_per_example: augment_copies as u32,
        seed,
    };
    if !(0.0..0.5).contains(&augment_spec.noise_flip_prob) {
        return Err(user_error("--augment-flip-prob must lie in [0, 0.5)"));
    }
    if augment_spec.rotation_degrees < 0.0 || augment_spec.translate_pixels < 0.0 {
        return Err(user_error("augmentation ranges must be nonnegative"));
    }
    if !(augment_spec.scale.0 > 0.0 && augment_spec.scale.0 <= augment_spec.scale.1) {
        return Err(user_error(
            "--augment-scale-min must be positive and <= --augment-scale-max",
        ));
    }

    let corpus = load_train_corpus(manifest.as_deref(), synth.as_deref(), &synth_family_name)?;
    let corpus = if augment_copies > 0 {
        augment_corpus(&corpus, &augment_spec)
    } else {
        corpus
    };

    let pretrained = pretrained_path
        .as_ref()
        .map(|p| load_checkpoint(p))
        .transpose()?;
    let config = TrainConfig {
        mode,
        learning_rate: lr,
        epochs: epochs as usize,
        batch_size: batch as usize,
        seed,
        freeze_conv,
        pretrained,
    };
    let report = train(&corpus, &config)?;
    for (i, loss) in report.epoch_mean_loss.iter().enumerate() {
        println!("epoch {}/{} mean_loss={loss:.6}", i + 1, epochs);
    }

    save_checkpoint(&report.checkpoint.network, &report.checkpoint.labels, &out)?;
    let prototypes = build_prototypes(&report.checkpoint, &corpus)?;
    prototypes.save(&PathBuf::from(format!("{}.protos.json", out.display())))?;

    let log = TrainLog {
        epoch_mean_loss: report.epoch_mean_loss.clone(),
    };
    let mut log_bytes = serde_json::to_vec_pretty(&log).expect("log serializes");
    log_bytes.push(b'\n');
    std::fs::write(format!("{}.log.json", out.display()), log_bytes)?;

    println!(
        "trained {} classes on {} examples -> {}",
        corpus.num_classes(),
        corpus.len(),
        out.display()
    );
    write_effective_config(
        &out,
        &TrainEffective {
            manifest: manifest.map(|p| p.display().to_string()),
            synth,
            synth_family: synth_family_name,
            mode: mode_name,
            lr,
            epochs,
            batch,
            seed,
            out: out.display().to_string(),
            pretrained: pretrained_path.map(|p| p.display().to_string()),
            freeze_conv,
            margin: match mode {
                TrainMode::Contrastive { margin } => Some(margin),
                TrainMode::Softmax => None,
            },
            augment_copies,
            augment_rotation: augment_spec.rotation_degrees,
            augment_translate: augment_spec.translate_pixels,
            augment_scale_min: augment_spec.scale.0,
            augment_scale_max: augment_spec.scale.1,
            augment_flip_prob: augment_spec.noise_flip_prob,
        },
    )
}

fn load_train_corpus(
    manifest: Option<&Path>,
    synth: Option<&str>,
    family_name: &str,
) -> Result<Corpus, CliError> {
    match (manifest, synth) {
        (Some(path), None) => Ok(load_manifest(path)?),
        (None, Some(shape)) => {
            let (classes, per_class) = parse_pair(shape, "--synth")?;
            if !(2..=64).contains(&classes) {
                return Err(user_error("--synth supports 2..=64 classes"));
            }
            let family = parse_family(family_name)?;
            Ok(synth_corpus_family(
                classes as usize,
                per_class as usize,
                0,
                family,
            ))
        }
        (None, None) => Err(user_error("one of --manifest or --synth is required")),
        (Some(_), Some(_)) => Err(user_error("--manifest conflicts with --synth")),
    }
}

// ---------------------------------------------------------------------------
// recognize
// ---------------------------------------------------------------------------

#[derive(Args)]
struct RecognizeArgs {
    /// Page image to digitize.
    image: PathBuf,
    /// Trained checkpoint.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    rows: Option<u32>,
    #[arg(long)]
    cols: Option<u32>,
    /// Prototype sidecar; defaults to `<model>.protos.json`.
    #[arg(long)]
    prototypes: Option<PathBuf>,
    /// External OCR command template with `{input}`.
    #[arg(long = "ocr-cmd")]
    ocr_cmd: Option<String>,
    /// External TTS command template with `{input}` and `{output}`.
    #[arg(long = "tts-cmd")]
    tts_cmd: Option<String>,
    /// Audio file the TTS command must create.
    #[arg(long)]
    audio: Option<PathBuf>,
    /// Write the full recognition result as JSON.
    #[arg(long = "out-json")]
    out_json: Option<PathBuf>,
    /// Write the assembled tile as PGM.
    #[arg(long)]
    tile: Option<PathBuf>,
    /// Gutter pixels between tile cells.
    #[arg(long)]
    gutter: Option<u32>,
    /// Bridge timeout in seconds.
    #[arg(long)]
    timeout: Option<u64>,
    /// Keep the per-run scratch directory and print its path.
    #[arg(long = "keep-temp")]
    keep_temp: bool,
    /// JSON config overlay (same keys as flags; flags win).
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Serialize)]
struct RecognizeEffective {
    image: String,
    model: String,
    rows: u32,
    cols: u32,
    prototypes: String,
    ocr_cmd: Option<String>,
    tts_cmd: Option<String>,
    audio: Option<String>,
    gutter: u32,
    timeout_secs: u64,
}

fn cmd_recognize(args: RecognizeArgs) -> Result<(), CliError> {
    let overlay = Overlay::load(args.config.as_ref())?;
    let model_path = args
        .model
        .or_else(|| overlay.path("model"))
        .ok_or_else(|| user_error("--model is required"))?;
    let rows = args.rows.or_else(|| overlay.u64("rows").map(|v| v as u32));
    let cols = args.cols.or_else(|| overlay.u64("cols").map(|v| v as u32));
    let grid = grid_from(rows, cols)?;
    let prototypes_path = args
        .prototypes
        .or_else(|| overlay.path("prototypes"))
        .unwrap_or_else(|| PathBuf::from(format!("{}.protos.json", model_path.display())));
    let ocr_cmd = args.ocr_cmd.or_else(|| overlay.string("ocr-cmd"));
    let tts_cmd = args.tts_cmd.or_else(|| overlay.string("tts-cmd"));
    let audio = args.audio.or_else(|| overlay.path("audio"));
    let gutter = args
        .gutter
        .or_else(|| overlay.u64("gutter").map(|v| v as u32));
    let timeout_secs = args.timeout.or_else(|| overlay.u64("timeout")).unwrap_or(30);
    let keep_temp = args.keep_temp || overlay.bool("keep-temp").unwrap_or(false);

    if tts_cmd.is_some() && audio.is_none() {
        return Err(user_error("--tts-cmd needs --audio for the output file"));
    }

    let model = load_checkpoint(&model_path)?;
    let prototypes = PrototypeSet::load(&prototypes_path)?;
    if prototypes.prototypes().len() != model.num_classes() {
        return Err(user_error(format!(
            "prototype set covers {} classes but the model has {}",
            prototypes.prototypes().len(),
            model.num_classes()
        )));
    }
    let image = read_image(&args.image)?;

    let timeout = Duration::from_secs(timeout_secs);
    let scratch_dir = if keep_temp {
        let dir = tempfile::Builder::new()
            .prefix("inscript-scratch-")
            .tempdir()?
            .keep();
        eprintln!("scratch kept at {}", dir.display());
        Some(dir)
    } else {
        None
    };
    let opts = PipelineOptions {
        gutter,
        ocr: ocr_cmd
            .as_ref()
            .map(|t| EngineBridge::ocr(t.clone()).map(|b| b.with_timeout(timeout)))
            .transpose()?,
        tts: tts_cmd
            .as_ref()
            .map(|t| EngineBridge::tts(t.clone()).map(|b| b.with_timeout(timeout)))
            .transpose()?,
        audio_out: audio.clone(),
        scratch_dir,
    };

    let result = run_pipeline(&image, grid, &model, &prototypes, &opts)?;
    for warning in &result.bridge_warnings {
        eprintln!("warning: {warning}");
    }
    if let Some(path) = &args.tile {
        std::fs::write(path, result.tile.to_pgm())?;
    }
    if let Some(path) = &args.out_json {
        std::fs::write(path, result.to_json_bytes())?;
        write_effective_config(
            path,
            &RecognizeEffective {
                image: args.image.display().to_string(),
                model: model_path.display().to_string(),
                rows: grid.rows,
                cols: grid.cols,
                prototypes: prototypes_path.display().to_string(),
                ocr_cmd,
                tts_cmd,
                audio: audio.map(|p| p.display().to_string()),
                gutter: gutter.unwrap_or(crate::recognize::DEFAULT_GUTTER),
                timeout_secs,
            },
        )?;
    }
    println!("{}", result.final_text);
    Ok(())
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

#[derive(Args)]
struct EvalArgs {
    /// Directory of predicted `.txt` files.
    #[arg(long = "pred-dir")]
    pred_dir: Option<PathBuf>,
    /// Directory of truth `.txt` files, paired by file name.
    #[arg(long = "truth-dir")]
    truth_dir: Option<PathBuf>,
    /// Optional directory of TTS-stage transcripts, paired by file name.
    #[arg(long = "tts-pred-dir")]
    tts_pred_dir: Option<PathBuf>,
    /// Report JSON output path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON config overlay (same keys as flags; flags win).
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Serialize)]
struct EvalEffective {
    pred_dir: String,
    truth_dir: String,
    tts_pred_dir: Option<String>,
    out: String,
}

fn text_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| user_error(format!("{}: {e}", dir.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().map_or(false, |ext| ext == "txt"))
        .collect();
    files.sort();
    Ok(files)
}

fn cmd_eval(args: EvalArgs) -> Result<(), CliError> {
    let overlay = Overlay::load(args.config.as_ref())?;
    let pred_dir = args
        .pred_dir
        .or_else(|| overlay.path("pred-dir"))
        .ok_or_else(|| user_error("--pred-dir is required"))?;
    let truth_dir = args
        .truth_dir
        .or_else(|| overlay.path("truth-dir"))
        .ok_or_else(|| user_error("--truth-dir is required"))?;
    let tts_pred_dir = args.tts_pred_dir.or_else(|| overlay.path("tts-pred-dir"));
    let out = args
        .out
        .or_else(|| overlay.path("out"))
        .ok_or_else(|| user_error("--out is required"))?;

    let preds = text_files(&pred_dir)?;
    let truths = text_files(&truth_dir)?;
    let names = |files: &[PathBuf]| -> Vec<String> {
        files
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect()
    };
    let (pred_names, truth_names) = (names(&preds), names(&truths));
    for name in &pred_names {
        if !truth_names.contains(name) {
            return Err(user_error(format!("prediction {name} has no truth file")));
        }
    }
    for name in &truth_names {
        if !pred_names.contains(name) {
            return Err(user_error(format!("truth {name} has no prediction file")));
        }
    }
    if preds.is_empty() {
        return Err(user_error("no .txt files to score"));
    }

    let mut samples = Vec::with_capacity(preds.len());
    for pred_path in &preds {
        let name = pred_path.file_name().unwrap().to_string_lossy().into_owned();
        let sample_id = pred_path
            .file_stem()
            .unwrap()
            .to_string_lossy()
            .into_owned();
        let predicted = std::fs::read_to_string(pred_path)?;
        let truth = std::fs::read_to_string(truth_dir.join(&name))?;
        let (ocr_correct, total) = score_sample(&predicted, &truth)?;
        let tts_correct = match &tts_pred_dir {
            Some(dir) => {
                let tts_path = dir.join(&name);
                if !tts_path.exists() {
                    return Err(user_error(format!(
                        "tts transcript {name} missing under {}",
                        dir.display()
                    )));
                }
                let transcript = std::fs::read_to_string(tts_path)?;
                Some(score_sample(&transcript, &truth)?.0)
            }
            None => None,
        };
        samples.push(SampleReport::new(sample_id, total, Some(ocr_correct), tts_correct)?);
    }

    let report = CombinedReport::new(samples)?;
    emit_report(&report, &out)?;
    print!("{}", format_table(&report));
    write_effective_config(
        &out,
        &EvalEffective {
            pred_dir: pred_dir.display().to_string(),
            truth_dir: truth_dir.display().to_string(),
            tts_pred_dir: tts_pred_dir.map(|p| p.display().to_string()),
            out: out.display().to_string(),
        },
    )
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

#[derive(Args)]
struct SynthArgs {
    /// Output directory for crops and manifest.json.
    #[arg(long = "out-dir")]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    classes: Option<u64>,
    #[arg(long = "per-class")]
    per_class: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Family style: modern or ancient.
    #[arg(long)]
    family: Option<String>,
    /// Also render a test page as ROWSxCOLS (classes cycle across cells).
    #[arg(long)]
    page: Option<String>,
    /// JSON config overlay (same keys as flags; flags win).
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Serialize)]
struct SynthEffective {
    out_dir: String,
    classes: u64,
    per_class: u64,
    seed: u64,
    family: String,
    page: Option<String>,
}

fn cmd_synth(args: SynthArgs) -> Result<(), CliError> {
    let overlay = Overlay::load(args.config.as_ref())?;
    let out_dir = args
        .out_dir
        .or_else(|| overlay.path("out-dir"))
        .ok_or_else(|| user_error("--out-dir is required"))?;
    let classes = args.classes.or_else(|| overlay.u64("classes")).unwrap_or(8);
    let per_class = args
        .per_class
        .or_else(|| overlay.u64("per-class"))
        .unwrap_or(20);
    let seed = args.seed.or_else(|| overlay.u64("seed")).unwrap_or(1);
    let family_name = args
        .family
        .or_else(|| overlay.string("family"))
        .unwrap_or_else(|| "modern".into());
    let family = parse_family(&family_name)?;
    let page = args.page.or_else(|| overlay.string("page"));
    if !(2..=64).contains(&classes) {
        return Err(user_error("--classes must lie in 2..=64"));
    }
    if per_class == 0 {
        return Err(user_error("--per-class must be >= 1"));
    }

    let corpus = synth_corpus_family(classes as usize, per_class as usize, seed, family);
    std::fs::create_dir_all(&out_dir)?;
    let mut records = Vec::with_capacity(corpus.len());
    let mut per_class_seen = vec![0usize; corpus.num_classes()];
    for ex in &corpus.examples {
        let index = per_class_seen[ex.class_id];
        per_class_seen[ex.class_id] += 1;
        let name = format!("c{:02}_e{:03}.pgm", ex.class_id, index);
        write_pgm(&ex.block.render_gray(), &out_dir.join(&name))?;
        records.push(serde_json::json!({
            "image": name,
            "label": corpus.labels.glyph_of(ex.class_id).unwrap(),
            "family": family_name,
        }));
    }
    let mut manifest = serde_json::to_vec_pretty(&records).expect("records serialize");
    manifest.push(b'\n');
    std::fs::write(out_dir.join("manifest.json"), manifest)?;
    println!(
        "wrote {} crops over {classes} classes to {}",
        corpus.len(),
        out_dir.display()
    );

    if let Some(shape) = &page {
        let (rows, cols) = parse_pair(shape, "--page")?;
        let grid = GridSpec::new(rows, cols);
        let ids: Vec<usize> = (0..grid.cells()).map(|i| i % classes as usize).collect();
        let image = render_page(&ids, grid, family, seed);
        write_pgm(&image, &out_dir.join("page.pgm"))?;
        let glyphs: Vec<char> = ids
            .iter()
            .map(|&id| {
                corpus
                    .labels
                    .glyph_of(id)
                    .and_then(|g| g.chars().next())
                    .unwrap_or('?')
            })
            .collect();
        let mut truth = String::new();
        for row in glyphs.chunks(cols as usize) {
            truth.extend(row.iter());
            truth.push('\n');
        }
        std::fs::write(out_dir.join("page.txt"), truth)?;
        println!("wrote page.pgm and page.txt ({rows}x{cols})");
    }
    write_effective_config(
        &out_dir.join("run"),
        &SynthEffective {
            out_dir: out_dir.display().to_string(),
            classes,
            per_class,
            seed,
            family: family_name,
            page,
        },
    )
}
