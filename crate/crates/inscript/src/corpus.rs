//! Dataset manifests, label maps, deterministic augmentation, and a
//! procedural glyph generator that stands in for inscription crops in CI.
//!
//! A manifest is a UTF-8 JSON file, either a bare array of records
//! `{"image": "rel/path.pgm", "label": "க", "family": "modern"}` (the label
//! map is derived from first appearance) or an object
//! `{"labels": [...], "records": [...]}` with an explicit label map, which
//! pins class ids across corpora (needed when fine-tuning on a second
//! family). Class ids identify the glyph text; the same glyph in both
//! families shares one id.
//!
//! Manifest images are expected dark-ink-on-light-background; pixel `p`
//! becomes block value `(255 - p) / 255`, so ink is 1.0 just like blocks
//! sliced from a binarized page.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{read_image, GrayImage, RasterError};
use crate::seeds;
use crate::segment::{resample_to_block, GlyphBlock, GridSpec, BLOCK_LEN, BLOCK_SIDE};

/// Glyph texts assigned to synthetic classes (one ASCII char per class).
const SYNTH_GLYPHS: &[u8; 64] =
    b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("manifest parse error: {0}")]
    ManifestParse(String),
    #[error("missing image: {path}")]
    MissingImage { path: String },
    #[error("unknown label {label:?} ({family}) not present in the label map")]
    UnknownLabel { label: String, family: Family },
    #[error("invalid label map: {0}")]
    InvalidLabelMap(String),
    #[error("label maps disagree on glyph {glyph:?}")]
    LabelConflict { glyph: String },
    #[error(transparent)]
    Raster(#[from] RasterError),
}

/// Provenance of a glyph rendering.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Modern,
    Ancient,
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Family::Modern => f.write_str("modern"),
            Family::Ancient => f.write_str("ancient"),
        }
    }
}

impl Family {
    fn tag(self) -> u64 {
        match self {
            Family::Modern => 0,
            Family::Ancient => 1,
        }
    }
}

/// One (class id, glyph text, family) row of the label map.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelEntry {
    pub class_id: usize,
    pub glyph: String,
    pub family: Family,
}

/// Ordered label map. Class ids are contiguous `0..K-1` and keyed by glyph
/// text; a glyph present in both families appears as two entries sharing one
/// id.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelMap {
    entries: Vec<LabelEntry>,
}

impl LabelMap {
    pub fn from_entries(entries: Vec<LabelEntry>) -> Result<Self, CorpusError> {
        let map = Self { entries };
        map.validate()?;
        Ok(map)
    }

    fn validate(&self) -> Result<(), CorpusError> {
        if self.entries.is_empty() {
            return Err(CorpusError::InvalidLabelMap("no entries".into()));
        }
        let k = self.num_classes();
        let mut covered = vec![false; k];
        for entry in &self.entries {
            if entry.class_id >= k {
                return Err(CorpusError::InvalidLabelMap(format!(
                    "class id {} out of range 0..{k}",
                    entry.class_id
                )));
            }
            covered[entry.class_id] = true;
        }
        if let Some(hole) = covered.iter().position(|&c| !c) {
            return Err(CorpusError::InvalidLabelMap(format!(
                "class ids are not contiguous: {hole} is unused"
            )));
        }
        for (i, a) in self.entries.iter().enumerate() {
            for b in &self.entries[i + 1..] {
                if a.glyph == b.glyph {
                    if a.family == b.family {
                        return Err(CorpusError::InvalidLabelMap(format!(
                            "glyph {:?} repeated within family {}",
                            a.glyph, a.family
                        )));
                    }
                    if a.class_id != b.class_id {
                        return Err(CorpusError::InvalidLabelMap(format!(
                            "glyph {:?} maps to two class ids",
                            a.glyph
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn entries(&self) -> &[LabelEntry] {
        &self.entries
    }

    /// Number of distinct classes (glyph texts).
    pub fn num_classes(&self) -> usize {
        self.entries
            .iter()
            .map(|e| e.class_id + 1)
            .max()
            .unwrap_or(0)
    }

    pub fn class_of(&self, glyph: &str) -> Option<usize> {
        self.entries
            .iter()
            .find(|e| e.glyph == glyph)
            .map(|e| e.class_id)
    }

    pub fn glyph_of(&self, class_id: usize) -> Option<&str> {
        self.entries
            .iter()
            .find(|e| e.class_id == class_id)
            .map(|e| e.glyph.as_str())
    }

    fn lookup(&self, glyph: &str, family: Family) -> Option<usize> {
        self.entries
            .iter()
            .find(|e| e.glyph == glyph && e.family == family)
            .map(|e| e.class_id)
    }

    pub fn to_json(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("label map serializes")
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, CorpusError> {
        let map: LabelMap = serde_json::from_slice(bytes)
            .map_err(|e| CorpusError::InvalidLabelMap(e.to_string()))?;
        map.validate()?;
        Ok(map)
    }
}

/// One labeled training block.
#[derive(Clone, Debug)]
pub struct LabeledExample {
    pub block: GlyphBlock,
    pub class_id: usize,
    pub family: Family,
}

/// A label map plus its examples, in manifest (or generation) order.
#[derive(Clone, Debug)]
pub struct Corpus {
    pub labels: LabelMap,
    pub examples: Vec<LabeledExample>,
}

impl Corpus {
    pub fn num_classes(&self) -> usize {
        self.labels.num_classes()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }
}

#[derive(Deserialize)]
struct ManifestRecord {
    image: String,
    label: String,
    family: Family,
}

#[derive(Deserialize)]
struct ManifestDocument {
    labels: Vec<LabelEntry>,
    records: Vec<ManifestRecord>,
}

/// Load a manifest and decode every referenced image into a 28x28 block.
pub fn load_manifest(path: &Path) -> Result<Corpus, CorpusError> {
    let bytes = std::fs::read(path).map_err(|e| {
        CorpusError::ManifestParse(format!("{}: {e}", path.display()))
    })?;
    let value: serde_json::Value = serde_json::from_slice(&bytes)
        .map_err(|e| CorpusError::ManifestParse(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));

    let (labels, records) = if value.is_array() {
        let records: Vec<ManifestRecord> = serde_json::from_value(value)
            .map_err(|e| CorpusError::ManifestParse(e.to_string()))?;
        (derive_label_map(&records)?, records)
    } else {
        let doc: ManifestDocument = serde_json::from_value(value)
            .map_err(|e| CorpusError::ManifestParse(e.to_string()))?;
        (LabelMap::from_entries(doc.labels)?, doc.records)
    };

    let mut examples = Vec::with_capacity(records.len());
    for record in &records {
        let class_id = labels
            .lookup(&record.label, record.family)
            .ok_or_else(|| CorpusError::UnknownLabel {
                label: record.label.clone(),
                family: record.family,
            })?;
        let image_path = base.join(&record.image);
        let decoded = read_image(&image_path).map_err(|e| match e {
            RasterError::Io { path, .. } => CorpusError::MissingImage { path },
            other => CorpusError::Raster(other),
        })?;
        examples.push(LabeledExample {
            block: block_from_gray(&decoded.into_gray()),
            class_id,
            family: record.family,
        });
    }
    Ok(Corpus { labels, examples })
}

/// A corpus with no records still needs a valid (possibly empty) shape; the
/// derived map is empty only when there are no records at all.
fn derive_label_map(records: &[ManifestRecord]) -> Result<LabelMap, CorpusError> {
    if records.is_empty() {
        return Ok(LabelMap { entries: Vec::new() });
    }
    let mut entries: Vec<LabelEntry> = Vec::new();
    for record in records {
        if entries
            .iter()
            .any(|e| e.glyph == record.label && e.family == record.family)
        {
            continue;
        }
        let class_id = entries
            .iter()
            .find(|e| e.glyph == record.label)
            .map(|e| e.class_id)
            .unwrap_or_else(|| {
                entries
                    .iter()
                    .map(|e| e.class_id + 1)
                    .max()
                    .unwrap_or(0)
            });
        entries.push(LabelEntry {
            class_id,
            glyph: record.label.clone(),
            family: record.family,
        });
    }
    LabelMap::from_entries(entries)
}

/// Convert a grayscale crop to a block: invert so ink is 1.0, rescale to
/// 28x28 when needed.
pub fn block_from_gray(img: &GrayImage) -> GlyphBlock {
    let values: Vec<f64> = img
        .pixels()
        .iter()
        .map(|&p| f64::from(255 - p) / 255.0)
        .collect();
    let values = if img.width() as usize == BLOCK_SIDE && img.height() as usize == BLOCK_SIDE {
        values
    } else {
        resample_to_block(&values, img.width() as usize, img.height() as usize)
    };
    GlyphBlock::new(values, (0, 0))
}

/// Deterministic augmentation parameters. All draws come from a stream keyed
/// by (seed, example hash, copy index), so augmentation is reproducible under
/// any iteration order.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct AugmentSpec {
    /// Rotation drawn from ±this many degrees.
    pub rotation_degrees: f64,
    /// Translation drawn from ±this many pixels, per axis.
    pub translate_pixels: f64,
    /// Multiplicative scale range.
    pub scale: (f64, f64),
    /// Independent per-pixel flip probability, must be < 0.5.
    pub noise_flip_prob: f64,
    /// Augmented copies generated per source example.
    pub copies_per_example: u32,
    pub seed: u64,
}

impl Default for AugmentSpec {
    fn default() -> Self {
        Self {
            rotation_degrees: 10.0,
            translate_pixels: 2.0,
            scale: (0.9, 1.1),
            noise_flip_prob: 0.02,
            copies_per_example: 4,
            seed: 0,
        }
    }
}

impl AugmentSpec {
    fn validate(&self) {
        assert!(self.rotation_degrees.is_finite() && self.rotation_degrees >= 0.0);
        assert!(self.translate_pixels.is_finite() && self.translate_pixels >= 0.0);
        assert!(self.scale.0.is_finite() && self.scale.1.is_finite());
        assert!(0.0 < self.scale.0 && self.scale.0 <= self.scale.1);
        assert!((0.0..0.5).contains(&self.noise_flip_prob));
    }
}

fn example_hash(ex: &LabeledExample) -> u64 {
    let mut h = seeds::hash_bytes(0xcbf2_9ce4_8422_2325, &(ex.class_id as u64).to_le_bytes());
    h = seeds::hash_bytes(h, &[ex.family.tag() as u8]);
    for v in ex.block.values() {
        h = seeds::hash_bytes(h, &v.to_bits().to_le_bytes());
    }
    h
}

/// Produce the `index`-th augmented copy of an example. Label and family are
/// unchanged; geometry is rotation + translation + scale with bilinear
/// resampling (out-of-frame reads as background), followed by Bernoulli
/// ink flips.
pub fn augment(ex: &LabeledExample, spec: &AugmentSpec, index: u32) -> LabeledExample {
    spec.validate();
    let mut rng = seeds::stream(
        "augment",
        &[spec.seed, example_hash(ex), u64::from(index)],
    );
    let theta = rng
        .gen_range(-spec.rotation_degrees..=spec.rotation_degrees)
        .to_radians();
    let dx = rng.gen_range(-spec.translate_pixels..=spec.translate_pixels);
    let dy = rng.gen_range(-spec.translate_pixels..=spec.translate_pixels);
    let scale = rng.gen_range(spec.scale.0..=spec.scale.1);

    let mut values = affine_resample(ex.block.values(), theta, dx, dy, scale);
    for v in values.iter_mut() {
        if rng.gen::<f64>() < spec.noise_flip_prob {
            *v = 1.0 - *v;
        }
    }
    for v in values.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    LabeledExample {
        block: GlyphBlock::new(values, ex.block.origin()),
        class_id: ex.class_id,
        family: ex.family,
    }
}

/// Append `copies_per_example` augmented copies of every example.
pub fn augment_corpus(corpus: &Corpus, spec: &AugmentSpec) -> Corpus {
    let mut examples = corpus.examples.clone();
    for ex in &corpus.examples {
        for index in 0..spec.copies_per_example {
            examples.push(augment(ex, spec, index));
        }
    }
    Corpus {
        labels: corpus.labels.clone(),
        examples,
    }
}

/// Sample a block under the forward map rotate(theta) . scale . translate,
/// inverse-mapped per destination pixel with bilinear interpolation and zero
/// (background) outside the frame.
pub(crate) fn affine_resample(src: &[f64], theta: f64, dx: f64, dy: f64, scale: f64) -> Vec<f64> {
    debug_assert_eq!(src.len(), BLOCK_LEN);
    let c = (BLOCK_SIDE as f64 - 1.0) / 2.0;
    let (sin, cos) = theta.sin_cos();
    let mut out = Vec::with_capacity(BLOCK_LEN);
    for y in 0..BLOCK_SIDE {
        for x in 0..BLOCK_SIDE {
            let qx = x as f64 - c - dx;
            let qy = y as f64 - c - dy;
            let sx = (cos * qx + sin * qy) / scale + c;
            let sy = (-sin * qx + cos * qy) / scale + c;
            out.push(bilinear_zero(src, sx, sy));
        }
    }
    out
}

fn bilinear_zero(src: &[f64], x: f64, y: f64) -> f64 {
    let fetch = |ix: i64, iy: i64| -> f64 {
        if (0..BLOCK_SIDE as i64).contains(&ix) && (0..BLOCK_SIDE as i64).contains(&iy) {
            src[iy as usize * BLOCK_SIDE + ix as usize]
        } else {
            0.0
        }
    };
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let (x0, y0) = (x0 as i64, y0 as i64);
    fetch(x0, y0) * (1.0 - fx) * (1.0 - fy)
        + fetch(x0 + 1, y0) * fx * (1.0 - fy)
        + fetch(x0, y0 + 1) * (1.0 - fx) * fy
        + fetch(x0 + 1, y0 + 1) * fx * fy
}

// ---------------------------------------------------------------------------
// Procedural glyph corpus
// ---------------------------------------------------------------------------

const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653;

struct StrokeStyle {
    thickness: f64,
    rotation: f64,
    translate: f64,
    scale: (f64, f64),
    speckles: Option<(u32, u32)>,
}

fn family_style(family: Family) -> StrokeStyle {
    match family {
        Family::Modern => StrokeStyle {
            thickness: 1.8,
            rotation: 7.0,
            translate: 1.5,
            scale: (0.93, 1.07),
            speckles: None,
        },
        // Carved-stone look: heavier strokes, looser placement, erosion.
        Family::Ancient => StrokeStyle {
            thickness: 3.2,
            rotation: 14.0,
            translate: 2.5,
            scale: (0.84, 1.12),
            speckles: Some((60, 130)),
        },
    }
}

fn draw_segment(canvas: &mut [f64], x0: f64, y0: f64, x1: f64, y1: f64, thickness: f64) {
    let half = thickness / 2.0;
    let (vx, vy) = (x1 - x0, y1 - y0);
    let len_sq = vx * vx + vy * vy;
    for y in 0..BLOCK_SIDE {
        for x in 0..BLOCK_SIDE {
            let (px, py) = (x as f64 - x0, y as f64 - y0);
            let t = if len_sq > 0.0 {
                ((px * vx + py * vy) / len_sq).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let (ex, ey) = (px - t * vx, py - t * vy);
            let d = (ex * ex + ey * ey).sqrt();
            let v = (half + 0.5 - d).clamp(0.0, 1.0);
            let cell = &mut canvas[y * BLOCK_SIDE + x];
            *cell = cell.max(v);
        }
    }
}

fn draw_ring(canvas: &mut [f64], cx: f64, cy: f64, radius: f64, thickness: f64) {
    let half = thickness / 2.0;
    for y in 0..BLOCK_SIDE {
        for x in 0..BLOCK_SIDE {
            let d = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt();
            let v = (half + 0.5 - (d - radius).abs()).clamp(0.0, 1.0);
            let cell = &mut canvas[y * BLOCK_SIDE + x];
            *cell = cell.max(v);
        }
    }
}

fn draw_dot(canvas: &mut [f64], cx: f64, cy: f64, radius: f64) {
    for y in 0..BLOCK_SIDE {
        for x in 0..BLOCK_SIDE {
            let d = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt();
            let v = (radius + 0.5 - d).clamp(0.0, 1.0);
            let cell = &mut canvas[y * BLOCK_SIDE + x];
            *cell = cell.max(v);
        }
    }
}

/// Canonical stroke pattern of a class. Structure comes from the class id
/// bits (ring, cross, diagonal, dot count) plus a golden-angle main stroke,
/// so any two classes differ in at least one element; a per-class stream
/// only jitters placement. Both families draw the same abstract character.
fn glyph_pattern(class_id: usize, family: Family) -> Vec<f64> {
    let mut rng = seeds::stream("glyph-pattern", &[class_id as u64]);
    let angle_jitter: f64 = rng.gen_range(-0.06..=0.06);
    let main_off = (rng.gen_range(-1.5..=1.5), rng.gen_range(-1.5..=1.5));
    let ring_r = 5.0 + rng.gen_range(0.0..=2.0) + (class_id % 3) as f64 * 0.7;
    let ring_c = (rng.gen_range(-2.5..=2.5), rng.gen_range(-2.5..=2.5));
    let cross_shift = rng.gen_range(-3.0..=3.0);
    let diag_angle = rng.gen_range(0.7..=1.2);
    let dot_spots: Vec<(f64, f64)> = (0..3)
        .map(|_| (rng.gen_range(-9.0..=9.0), rng.gen_range(-9.0..=9.0)))
        .collect();

    let style = family_style(family);
    let c = (BLOCK_SIDE as f64 - 1.0) / 2.0;
    let theta = (class_id as f64 * GOLDEN_ANGLE + angle_jitter) % PI;
    let mut canvas = vec![0.0; BLOCK_LEN];

    let (mx, my) = (c + main_off.0, c + main_off.1);
    let (dxm, dym) = (theta.cos() * 10.0, theta.sin() * 10.0);
    draw_segment(&mut canvas, mx - dxm, my - dym, mx + dxm, my + dym, style.thickness);

    if class_id & 1 != 0 {
        draw_ring(&mut canvas, c + ring_c.0, c + ring_c.1, ring_r, style.thickness);
    }
    if class_id & 2 != 0 {
        let phi = theta + PI / 2.0;
        let (cx, cy) = (mx + cross_shift * theta.cos(), my + cross_shift * theta.sin());
        let (dxc, dyc) = (phi.cos() * 6.5, phi.sin() * 6.5);
        draw_segment(&mut canvas, cx - dxc, cy - dyc, cx + dxc, cy + dyc, style.thickness);
    }
    if class_id & 4 != 0 {
        let phi = theta + diag_angle;
        let (dxd, dyd) = (phi.cos() * 8.0, phi.sin() * 8.0);
        draw_segment(&mut canvas, mx - dxd, my - dyd, mx + dxd, my + dyd, style.thickness);
    }
    let dots = (class_id >> 3) & 3;
    for spot in dot_spots.iter().take(dots) {
        draw_dot(&mut canvas, c + spot.0, c + spot.1, 1.6);
    }
    canvas
}

fn synth_block(class_id: usize, family: Family, rng: &mut ChaCha8Rng) -> GlyphBlock {
    let style = family_style(family);
    let theta = rng.gen_range(-style.rotation..=style.rotation).to_radians();
    let dx = rng.gen_range(-style.translate..=style.translate);
    let dy = rng.gen_range(-style.translate..=style.translate);
    let scale = rng.gen_range(style.scale.0..=style.scale.1);
    let mut values = affine_resample(&glyph_pattern(class_id, family), theta, dx, dy, scale);
    if let Some((lo, hi)) = style.speckles {
        let n = rng.gen_range(lo..=hi);
        for _ in 0..n {
            let x = rng.gen_range(0..BLOCK_SIDE);
            let y = rng.gen_range(0..BLOCK_SIDE);
            // Erosion drops ink more often than debris adds it.
            let v = &mut values[y * BLOCK_SIDE + x];
            *v = if rng.gen::<f64>() < 0.7 { 0.0 } else { 0.85 };
        }
    }
    for v in values.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    GlyphBlock::new(values, (0, 0))
}

fn synth_label_map(num_classes: usize, family: Family) -> LabelMap {
    let entries = (0..num_classes)
        .map(|class_id| LabelEntry {
            class_id,
            glyph: (SYNTH_GLYPHS[class_id] as char).to_string(),
            family,
        })
        .collect();
    LabelMap { entries }
}

/// Deterministic synthetic corpus in the given family. Examples are ordered
/// class-major with exactly `per_class` examples each.
pub fn synth_corpus_family(
    num_classes: usize,
    per_class: usize,
    seed: u64,
    family: Family,
) -> Corpus {
    assert!(
        (2..=64).contains(&num_classes),
        "synthetic corpus supports 2..=64 classes"
    );
    let labels = synth_label_map(num_classes, family);
    let mut examples = Vec::with_capacity(num_classes * per_class);
    for class_id in 0..num_classes {
        for index in 0..per_class {
            let mut rng = seeds::stream(
                "synth-example",
                &[seed, family.tag(), class_id as u64, index as u64],
            );
            examples.push(LabeledExample {
                block: synth_block(class_id, family, &mut rng),
                class_id,
                family,
            });
        }
    }
    Corpus { labels, examples }
}

/// Modern-family synthetic corpus (the default generation path).
pub fn synth_corpus(num_classes: usize, per_class: usize, seed: u64) -> Corpus {
    synth_corpus_family(num_classes, per_class, seed, Family::Modern)
}

/// Render a page image laying out one jittered glyph per grid cell (28 px
/// cells, ink black on white). `class_ids` is row-major and must fill the
/// grid.
pub fn render_page(class_ids: &[usize], grid: GridSpec, family: Family, seed: u64) -> GrayImage {
    assert_eq!(class_ids.len(), grid.cells(), "class ids must fill the grid");
    let side = BLOCK_SIDE as u32;
    let width = grid.cols * side;
    let height = grid.rows * side;
    let mut pixels = vec![255u8; width as usize * height as usize];
    for (cell, &class_id) in class_ids.iter().enumerate() {
        let r = cell / grid.cols as usize;
        let c = cell % grid.cols as usize;
        let mut rng = seeds::stream("page-cell", &[seed, family.tag(), cell as u64]);
        let block = synth_block(class_id, family, &mut rng);
        for y in 0..BLOCK_SIDE {
            for x in 0..BLOCK_SIDE {
                let px = c * BLOCK_SIDE + x;
                let py = r * BLOCK_SIDE + y;
                pixels[py * width as usize + px] =
                    (255.0 * (1.0 - block.value_at(x, y)) + 0.5).floor() as u8;
            }
        }
    }
    GrayImage::new(width, height, pixels)
}

/// Deterministic per-class split: the last `ceil(n * holdout)` examples of
/// each class go to the held-out corpus, the rest stay in training. Input
/// order is preserved in both halves.
pub fn stratified_split(corpus: &Corpus, holdout: f64) -> (Corpus, Corpus) {
    assert!((0.0..1.0).contains(&holdout));
    let k = corpus.num_classes();
    let mut per_class: Vec<usize> = vec![0; k];
    for ex in &corpus.examples {
        per_class[ex.class_id] += 1;
    }
    let keep: Vec<usize> = per_class
        .iter()
        .map(|&n| n - ((n as f64 * holdout).ceil() as usize).min(n))
        .collect();

    let mut taken = vec![0usize; k];
    let mut train = Vec::new();
    let mut held = Vec::new();
    for ex in &corpus.examples {
        if taken[ex.class_id] < keep[ex.class_id] {
            train.push(ex.clone());
        } else {
            held.push(ex.clone());
        }
        taken[ex.class_id] += 1;
    }
    (
        Corpus {
            labels: corpus.labels.clone(),
            examples: train,
        },
        Corpus {
            labels: corpus.labels.clone(),
            examples: held,
        },
    )
}

/// Merge two corpora that agree on glyph-to-class assignments (for example a
/// modern and an ancient rendering of the same character set).
pub fn merge(a: &Corpus, b: &Corpus) -> Result<Corpus, CorpusError> {
    let mut entries = a.labels.entries.clone();
    for entry in &b.labels.entries {
        if let Some(existing) = entries.iter().find(|e| e.glyph == entry.glyph) {
            if existing.class_id != entry.class_id {
                return Err(CorpusError::LabelConflict {
                    glyph: entry.glyph.clone(),
                });
            }
        }
        if !entries
            .iter()
            .any(|e| e.glyph == entry.glyph && e.family == entry.family)
        {
            entries.push(entry.clone());
        }
    }
    let labels = LabelMap::from_entries(entries)?;
    let mut examples = a.examples.clone();
    examples.extend(b.examples.iter().cloned());
    Ok(Corpus { labels, examples })
}
