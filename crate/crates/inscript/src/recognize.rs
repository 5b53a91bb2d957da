//! Page recognition: Euclidean nearest-prototype matching of letter blocks,
//! tile reassembly, and the external OCR / text-to-speech command bridges.
//!
//! Bridges are shell command templates with `{input}` (and `{output}` for
//! TTS) placeholders, run via `sh -c`. The external OCR engine re-reads the
//! assembled tile and its nonempty stdout becomes the authoritative
//! `final_text`; the per-block network predictions and agreement flags are
//! always reported alongside. A failing bridge is recorded as a warning and
//! never corrupts the network's own text.

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::binarize::{binarize, BinarizeError, Polarity};
use crate::corpus::Corpus;
use crate::glyphnet::{GlyphnetError, ModelCheckpoint};
use crate::raster::Decoded;
use crate::segment::{assemble_tile, slice, GlyphBlock, GridSpec, SegmentError, Tile};

/// Default time budget for one bridge invocation.
pub const DEFAULT_BRIDGE_TIMEOUT: Duration = Duration::from_secs(30);
/// Default gutter between tile cells, in pixels. One pixel keeps adjacent
/// glyphs from merging in the external validator.
pub const DEFAULT_GUTTER: u32 = 1;

#[derive(Debug, Error)]
pub enum RecognizeError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("class {class_id} has no examples to build a prototype from")]
    UncoveredClass { class_id: usize },
    #[error("{kind} bridge template must contain {placeholder}")]
    InvalidTemplate {
        kind: &'static str,
        placeholder: &'static str,
    },
    #[error("a tts bridge needs an audio output path")]
    AudioPathRequired,
    #[error("prototype file: {0}")]
    PrototypeFile(String),
    #[error(transparent)]
    Glyphnet(#[from] GlyphnetError),
    #[error(transparent)]
    Segment(#[from] SegmentError),
    #[error(transparent)]
    Binarize(#[from] BinarizeError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Euclidean distance between two equal-length vectors.
pub fn euclidean_distance(a: &[f64], b: &[f64]) -> Result<f64, RecognizeError> {
    if a.len() != b.len() {
        return Err(RecognizeError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

/// Per-class mean embedding.
#[derive(Clone, Debug, Serialize, serde::Deserialize)]
pub struct Prototype {
    pub class_id: usize,
    pub count: usize,
    pub embedding: Vec<f64>,
}

/// One prototype per class, indexed by class id.
#[derive(Clone, Debug, Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct PrototypeSet {
    prototypes: Vec<Prototype>,
}

impl PrototypeSet {
    pub fn prototypes(&self) -> &[Prototype] {
        &self.prototypes
    }

    pub fn embedding(&self, class_id: usize) -> &[f64] {
        &self.prototypes[class_id].embedding
    }

    pub fn save(&self, path: &Path) -> Result<(), RecognizeError> {
        let json = serde_json::to_vec(self).expect("prototypes serialize");
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, RecognizeError> {
        let bytes = std::fs::read(path)?;
        let set: PrototypeSet = serde_json::from_slice(&bytes)
            .map_err(|e| RecognizeError::PrototypeFile(e.to_string()))?;
        for (i, p) in set.prototypes.iter().enumerate() {
            if p.class_id != i {
                return Err(RecognizeError::PrototypeFile(format!(
                    "prototype {i} carries class id {}",
                    p.class_id
                )));
            }
            if p.embedding.iter().any(|v| !v.is_finite()) {
                return Err(RecognizeError::PrototypeFile(format!(
                    "prototype {i} has non-finite values"
                )));
            }
        }
        Ok(set)
    }
}

/// Mean embedding of every class in the corpus under the given model. Every
/// class in the model's label map must appear at least once.
pub fn build_prototypes(
    model: &ModelCheckpoint,
    corpus: &Corpus,
) -> Result<PrototypeSet, RecognizeError> {
    let k = model.num_classes();
    let dim = model.network.embedding_dim();
    let mut sums = vec![vec![0.0f64; dim]; k];
    let mut counts = vec![0usize; k];
    for ex in &corpus.examples {
        if ex.class_id >= k {
            return Err(GlyphnetError::BadClassId {
                class_id: ex.class_id,
                num_classes: k,
            }
            .into());
        }
        let fwd = model.network.forward_block(&ex.block)?;
        for (acc, v) in sums[ex.class_id].iter_mut().zip(fwd.embedding()) {
            *acc += v;
        }
        counts[ex.class_id] += 1;
    }
    let mut prototypes = Vec::with_capacity(k);
    for (class_id, (mut sum, count)) in sums.into_iter().zip(counts).enumerate() {
        if count == 0 {
            return Err(RecognizeError::UncoveredClass { class_id });
        }
        for v in sum.iter_mut() {
            *v /= count as f64;
        }
        prototypes.push(Prototype {
            class_id,
            count,
            embedding: sum,
        });
    }
    Ok(PrototypeSet { prototypes })
}

/// Classification of one letter block.
#[derive(Clone, Debug, Serialize)]
pub struct BlockPrediction {
    pub origin: (u32, u32),
    pub class_id: usize,
    pub glyph: String,
    /// Euclidean distance to the winning prototype.
    pub distance: f64,
    /// Softmax probability of the winning class.
    pub prob: f64,
    /// Set after OCR double-validation; absent without a bridge.
    pub agreed_with_ocr: Option<bool>,
}

/// Nearest-prototype classification; ties break toward the lowest class id.
pub fn classify_block(
    model: &ModelCheckpoint,
    prototypes: &PrototypeSet,
    block: &GlyphBlock,
) -> Result<BlockPrediction, RecognizeError> {
    let fwd = model.network.forward_block(block)?;
    let embedding = fwd.embedding();
    let mut best = 0usize;
    let mut best_d = f64::INFINITY;
    for p in &prototypes.prototypes {
        let d = euclidean_distance(embedding, &p.embedding)?;
        if d < best_d {
            best_d = d;
            best = p.class_id;
        }
    }
    Ok(BlockPrediction {
        origin: block.origin(),
        class_id: best,
        glyph: model
            .labels
            .glyph_of(best)
            .unwrap_or("\u{FFFD}")
            .to_string(),
        distance: best_d,
        prob: fwd.probs.data()[best],
        agreed_with_ocr: None,
    })
}

/// What kind of engine a bridge drives.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BridgeKind {
    Ocr,
    Tts,
}

/// External engine launched as a shell command with path placeholders.
#[derive(Clone, Debug)]
pub struct EngineBridge {
    template: String,
    timeout: Duration,
    kind: BridgeKind,
}

impl EngineBridge {
    /// OCR bridge: `{input}` is replaced with the tile image path; the
    /// engine prints UTF-8 text to stdout and exits 0 on success.
    pub fn ocr(template: impl Into<String>) -> Result<Self, RecognizeError> {
        let template = template.into();
        if !template.contains("{input}") {
            return Err(RecognizeError::InvalidTemplate {
                kind: "ocr",
                placeholder: "{input}",
            });
        }
        Ok(Self {
            template,
            timeout: DEFAULT_BRIDGE_TIMEOUT,
            kind: BridgeKind::Ocr,
        })
    }

    /// TTS bridge: `{input}` is a UTF-8 text file, `{output}` the audio file
    /// the command must create; exit 0 plus a nonempty output means success.
    pub fn tts(template: impl Into<String>) -> Result<Self, RecognizeError> {
        let template = template.into();
        for placeholder in ["{input}", "{output}"] {
            if !template.contains(placeholder) {
                return Err(RecognizeError::InvalidTemplate {
                    kind: "tts",
                    placeholder: if placeholder == "{input}" {
                        "{input}"
                    } else {
                        "{output}"
                    },
                });
            }
        }
        Ok(Self {
            template,
            timeout: DEFAULT_BRIDGE_TIMEOUT,
            kind: BridgeKind::Tts,
        })
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn kind(&self) -> BridgeKind {
        self.kind
    }

    /// Run the command; Ok carries captured stdout, Err a warning line.
    fn run(&self, input: &Path, output: Option<&Path>) -> Result<Vec<u8>, String> {
        let mut cmd = self.template.replace("{input}", &input.display().to_string());
        if let Some(out) = output {
            cmd = cmd.replace("{output}", &out.display().to_string());
        }
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&cmd)
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| format!("failed to spawn `{cmd}`: {e}"))?;

        let mut stdout_pipe = child.stdout.take().expect("stdout piped");
        let mut stderr_pipe = child.stderr.take().expect("stderr piped");
        let out_reader = std::thread::spawn(move || {
            let mut buf = Vec::new();
            let _ = stdout_pipe.read_to_end(&mut buf);
            buf
        });
        let err_reader = std::thread::spawn(move || {
            let mut buf = Vec::new();
            let _ = stderr_pipe.read_to_end(&mut buf);
            buf
        });

        let deadline = Instant::now() + self.timeout;
        let status = loop {
            match child.try_wait() {
                Ok(Some(status)) => break status,
                Ok(None) => {
                    if Instant::now() >= deadline {
                        let _ = child.kill();
                        let _ = child.wait();
                        let _ = out_reader.join();
                        let _ = err_reader.join();
                        return Err(format!(
                            "`{cmd}` timed out after {}s",
                            self.timeout.as_secs_f64()
                        ));
                    }
                    std::thread::sleep(Duration::from_millis(5));
                }
                Err(e) => return Err(format!("waiting on `{cmd}`: {e}")),
            }
        };
        let stdout = out_reader.join().unwrap_or_default();
        let stderr = err_reader.join().unwrap_or_default();
        if !status.success() {
            let mut msg = format!("`{cmd}` exited with {status}");
            let trail = String::from_utf8_lossy(&stderr);
            let trail = trail.trim();
            if !trail.is_empty() {
                msg.push_str(": ");
                msg.push_str(&trail.chars().take(200).collect::<String>());
            }
            return Err(msg);
        }
        Ok(stdout)
    }
}

/// Knobs for one pipeline run.
#[derive(Clone, Debug, Default)]
pub struct PipelineOptions {
    /// Gutter between tile cells; defaults to [`DEFAULT_GUTTER`].
    pub gutter: Option<u32>,
    pub ocr: Option<EngineBridge>,
    pub tts: Option<EngineBridge>,
    /// Where the TTS bridge must create its audio; required with `tts`.
    pub audio_out: Option<PathBuf>,
    /// Directory for intermediate files. When unset a temp directory is
    /// used and removed afterwards; when set the files are kept.
    pub scratch_dir: Option<PathBuf>,
}

/// Everything one page run produces.
#[derive(Clone, Debug, Serialize)]
pub struct RecognitionResult {
    pub predictions: Vec<BlockPrediction>,
    /// Row-major network reading, one line per grid row.
    pub net_text: String,
    /// Raw text the OCR bridge printed, when it ran and succeeded.
    pub ocr_text: Option<String>,
    /// OCR text when nonempty, otherwise the network reading.
    pub final_text: String,
    pub tile: Tile,
    /// Bridge failures; never fatal to recognition.
    pub bridge_warnings: Vec<String>,
}

impl RecognitionResult {
    pub fn to_json_bytes(&self) -> Vec<u8> {
        let mut bytes = serde_json::to_vec_pretty(self).expect("result serializes");
        bytes.push(b'\n');
        bytes
    }
}

enum Scratch {
    Temp(tempfile::TempDir),
    Kept(PathBuf),
}

impl Scratch {
    fn path(&self) -> &Path {
        match self {
            Scratch::Temp(dir) => dir.path(),
            Scratch::Kept(path) => path,
        }
    }
}

/// Run the full pipeline on a decoded page image: grayscale, Otsu with auto
/// polarity, grid slicing, per-block classification, tile assembly, and the
/// optional OCR / TTS bridges.
pub fn run_pipeline(
    image: &Decoded,
    grid: GridSpec,
    model: &ModelCheckpoint,
    prototypes: &PrototypeSet,
    opts: &PipelineOptions,
) -> Result<RecognitionResult, RecognizeError> {
    if opts.tts.is_some() && opts.audio_out.is_none() {
        return Err(RecognizeError::AudioPathRequired);
    }
    let gray = image.clone().into_gray();
    let (binary, _otsu, _polarity) = binarize(&gray, Polarity::Auto)?;
    let blocks = slice(&binary, grid)?;

    let mut predictions = Vec::with_capacity(blocks.len());
    for block in &blocks {
        predictions.push(classify_block(model, prototypes, block)?);
    }
    let net_text = render_net_text(&predictions, grid);
    let tile = assemble_tile(&blocks, grid, opts.gutter.unwrap_or(DEFAULT_GUTTER))?;

    let mut warnings = Vec::new();
    let mut ocr_text: Option<String> = None;
    let needs_scratch = opts.ocr.is_some() || opts.tts.is_some();
    let scratch = if needs_scratch {
        Some(match &opts.scratch_dir {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                Scratch::Kept(dir.clone())
            }
            None => Scratch::Temp(tempfile::tempdir()?),
        })
    } else {
        None
    };

    if let Some(bridge) = &opts.ocr {
        let scratch = scratch.as_ref().expect("scratch exists for bridges");
        let tile_path = scratch.path().join("tile.pgm");
        std::fs::write(&tile_path, tile.to_pgm())?;
        match bridge.run(&tile_path, None) {
            Ok(stdout) => {
                let text = String::from_utf8_lossy(&stdout).trim_end().to_string();
                mark_agreement(&mut predictions, &net_text, &text);
                ocr_text = Some(text);
            }
            Err(warning) => warnings.push(format!("ocr bridge: {warning}")),
        }
    }

    let final_text = match &ocr_text {
        Some(text) if !text.is_empty() => text.clone(),
        _ => net_text.clone(),
    };

    if let Some(bridge) = &opts.tts {
        let scratch = scratch.as_ref().expect("scratch exists for bridges");
        let audio_out = opts.audio_out.as_ref().expect("checked above");
        let text_path = scratch.path().join("final_text.txt");
        std::fs::write(&text_path, final_text.as_bytes())?;
        match bridge.run(&text_path, Some(audio_out)) {
            Ok(_) => {
                let produced = std::fs::metadata(audio_out)
                    .map(|m| m.len() > 0)
                    .unwrap_or(false);
                if !produced {
                    warnings.push(format!(
                        "tts bridge: no audio produced at {}",
                        audio_out.display()
                    ));
                }
            }
            Err(warning) => warnings.push(format!("tts bridge: {warning}")),
        }
    }

    Ok(RecognitionResult {
        predictions,
        net_text,
        ocr_text,
        final_text,
        tile,
        bridge_warnings: warnings,
    })
}

fn render_net_text(predictions: &[BlockPrediction], grid: GridSpec) -> String {
    let cols = grid.cols as usize;
    let mut lines = Vec::with_capacity(grid.rows as usize);
    for row in predictions.chunks(cols) {
        lines.push(row.iter().map(|p| p.glyph.as_str()).collect::<String>());
    }
    lines.join("\n")
}

/// Position-wise agreement between the OCR reading and the network reading,
/// whitespace stripped and left-aligned. A block agrees when every character
/// of its glyph span matches; the unmatched tail disagrees.
fn mark_agreement(predictions: &mut [BlockPrediction], net_text: &str, ocr_text: &str) {
    let ocr: Vec<char> = ocr_text.chars().filter(|c| !c.is_whitespace()).collect();
    let mut start = 0usize;
    for prediction in predictions.iter_mut() {
        let span = prediction.glyph.chars().count();
        let agreed = start + span <= ocr.len()
            && prediction
                .glyph
                .chars()
                .zip(&ocr[start..start + span])
                .all(|(a, &b)| a == b);
        prediction.agreed_with_ocr = Some(agreed);
        start += span;
    }
    debug_assert_eq!(
        start,
        net_text.chars().filter(|c| !c.is_whitespace()).count()
    );
}
