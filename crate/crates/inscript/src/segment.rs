//! Grid slicing of binarized pages into letter blocks, block normalization
//! to the network input size, and tile reassembly for the external validator.
//!
//! Slicing uses a uniform grid; cell sizes are floor(width/cols) by
//! floor(height/rows) with remainder pixels absorbed into the last column and
//! row, so no pixel is dropped. Cells are resampled to 28x28 with a box
//! filter when shrinking and bilinear interpolation when stretching.

use std::path::{Path, PathBuf};

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::binarize::BinaryImage;
use crate::raster::{encode_pgm, GrayImage};

/// Side length of a normalized letter block.
pub const BLOCK_SIDE: usize = 28;
/// Number of values in a normalized letter block.
pub const BLOCK_LEN: usize = BLOCK_SIDE * BLOCK_SIDE;

#[derive(Debug, Error)]
pub enum SegmentError {
    #[error("grid too fine: {rows}x{cols} over a {width}x{height} image leaves empty cells")]
    GridTooFine {
        rows: u32,
        cols: u32,
        width: u32,
        height: u32,
    },
    #[error("missing block for grid cell ({row}, {col})")]
    MissingBlock { row: u32, col: u32 },
    #[error("duplicate block origin ({row}, {col})")]
    DuplicateOrigin { row: u32, col: u32 },
    #[error("block origin ({row}, {col}) lies outside the grid")]
    OriginOutOfGrid { row: u32, col: u32 },
}

/// Uniform slicing grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct GridSpec {
    pub rows: u32,
    pub cols: u32,
}

impl GridSpec {
    pub fn new(rows: u32, cols: u32) -> Self {
        assert!(rows >= 1 && cols >= 1, "grid dimensions must be >= 1");
        Self { rows, cols }
    }

    pub fn cells(&self) -> usize {
        self.rows as usize * self.cols as usize
    }
}

/// One segmented character image, normalized to 28x28 values in [0, 1].
///
/// A value of 1.0 is foreground ink; rendered files map ink to black.
#[derive(Clone, Debug, PartialEq)]
pub struct GlyphBlock {
    values: Vec<f64>,
    origin: (u32, u32),
}

impl GlyphBlock {
    /// `values` must hold exactly [`BLOCK_LEN`] entries in [0, 1].
    pub fn new(values: Vec<f64>, origin: (u32, u32)) -> Self {
        assert_eq!(values.len(), BLOCK_LEN, "block must hold {BLOCK_LEN} values");
        assert!(
            values.iter().all(|v| (0.0..=1.0).contains(v)),
            "block values must lie in [0, 1]"
        );
        Self { values, origin }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// (row, col) grid position in the source page.
    pub fn origin(&self) -> (u32, u32) {
        self.origin
    }

    pub fn value_at(&self, x: usize, y: usize) -> f64 {
        debug_assert!(x < BLOCK_SIDE && y < BLOCK_SIDE);
        self.values[y * BLOCK_SIDE + x]
    }

    /// Render with ink black on a white background.
    pub fn render_gray(&self) -> GrayImage {
        let pixels = self
            .values
            .iter()
            .map(|&v| (255.0 * (1.0 - v) + 0.5).floor() as u8)
            .collect();
        GrayImage::new(BLOCK_SIDE as u32, BLOCK_SIDE as u32, pixels)
    }

    /// File name used when exporting crops: `r{row}_c{col}.pgm`.
    pub fn export_name(&self) -> String {
        format!("r{}_c{}.pgm", self.origin.0, self.origin.1)
    }
}

/// Per-axis resampling plan: for each output index, the (input index, weight)
/// pairs to blend. Box averaging shrinks; bilinear stretches.
fn axis_plan(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let mut plan = Vec::with_capacity(dst);
    if src >= dst {
        let scale = src as f64 / dst as f64;
        for j in 0..dst {
            let x0 = j as f64 * scale;
            let x1 = x0 + scale;
            let mut taps = Vec::new();
            let mut total = 0.0;
            let first = x0.floor() as usize;
            let last = (x1.ceil() as usize).min(src);
            for i in first..last {
                let w = (x1.min((i + 1) as f64) - x0.max(i as f64)).max(0.0);
                if w > 0.0 {
                    taps.push((i, w));
                    total += w;
                }
            }
            for tap in &mut taps {
                tap.1 /= total;
            }
            plan.push(taps);
        }
    } else {
        let scale = src as f64 / dst as f64;
        for j in 0..dst {
            let x = ((j as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
            let i0 = x.floor() as usize;
            let f = x - i0 as f64;
            if f > 0.0 && i0 + 1 < src {
                plan.push(vec![(i0, 1.0 - f), (i0 + 1, f)]);
            } else {
                plan.push(vec![(i0, 1.0)]);
            }
        }
    }
    plan
}

/// Resample a row-major `src_w` x `src_h` buffer to `dst_w` x `dst_h`.
pub(crate) fn resample(
    src: &[f64],
    src_w: usize,
    src_h: usize,
    dst_w: usize,
    dst_h: usize,
) -> Vec<f64> {
    debug_assert_eq!(src.len(), src_w * src_h);
    let h_plan = axis_plan(src_w, dst_w);
    let mut horizontal = vec![0.0; dst_w * src_h];
    for y in 0..src_h {
        let row = &src[y * src_w..(y + 1) * src_w];
        for (j, taps) in h_plan.iter().enumerate() {
            horizontal[y * dst_w + j] = taps.iter().map(|&(i, w)| row[i] * w).sum();
        }
    }
    let v_plan = axis_plan(src_h, dst_h);
    let mut out = vec![0.0; dst_w * dst_h];
    for (j, taps) in v_plan.iter().enumerate() {
        for x in 0..dst_w {
            out[j * dst_w + x] = taps
                .iter()
                .map(|&(i, w)| horizontal[i * dst_w + x] * w)
                .sum();
        }
    }
    out
}

/// Normalize an arbitrary [0, 1] buffer to one 28x28 block.
pub(crate) fn resample_to_block(src: &[f64], src_w: usize, src_h: usize) -> Vec<f64> {
    resample(src, src_w, src_h, BLOCK_SIDE, BLOCK_SIDE)
        .into_iter()
        .map(|v| v.clamp(0.0, 1.0))
        .collect()
}

/// Slice a binarized page into `rows * cols` normalized letter blocks in
/// row-major order.
pub fn slice(img: &BinaryImage, grid: GridSpec) -> Result<Vec<GlyphBlock>, SegmentError> {
    let width = img.width() as usize;
    let height = img.height() as usize;
    let rows = grid.rows as usize;
    let cols = grid.cols as usize;
    if width < cols || height < rows {
        return Err(SegmentError::GridTooFine {
            rows: grid.rows,
            cols: grid.cols,
            width: img.width(),
            height: img.height(),
        });
    }
    let cell_w = width / cols;
    let cell_h = height / rows;

    let mut blocks = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let y0 = r * cell_h;
        let y1 = if r + 1 == rows { height } else { (r + 1) * cell_h };
        for c in 0..cols {
            let x0 = c * cell_w;
            let x1 = if c + 1 == cols { width } else { (c + 1) * cell_w };
            let (w, h) = (x1 - x0, y1 - y0);
            let mut cell = Vec::with_capacity(w * h);
            for y in y0..y1 {
                for x in x0..x1 {
                    cell.push(f64::from(img.bit(x as u32, y as u32)));
                }
            }
            blocks.push(GlyphBlock::new(
                resample_to_block(&cell, w, h),
                (r as u32, c as u32),
            ));
        }
    }
    Ok(blocks)
}

/// Single image reassembled from recognized blocks, with a fixed gutter of
/// background pixels between cells.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tile {
    image: BinaryImage,
    grid: GridSpec,
    gutter: u32,
}

impl Tile {
    pub fn image(&self) -> &BinaryImage {
        &self.image
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn gutter(&self) -> u32 {
        self.gutter
    }

    /// PGM bytes of the rendered tile (ink black on white).
    pub fn to_pgm(&self) -> Vec<u8> {
        encode_pgm(&self.image.render_gray())
    }
}

impl Serialize for Tile {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use base64::Engine as _;
        let mut s = serializer.serialize_struct("Tile", 3)?;
        s.serialize_field("width", &self.image.width())?;
        s.serialize_field("height", &self.image.height())?;
        s.serialize_field(
            "pgm_base64",
            &base64::engine::general_purpose::STANDARD.encode(self.to_pgm()),
        )?;
        s.end()
    }
}

/// Assemble blocks into one tile. Blocks are placed by their origin; every
/// grid cell must be covered exactly once. A block value >= 0.5 renders as
/// foreground; gutter pixels are background.
pub fn assemble_tile(
    blocks: &[GlyphBlock],
    grid: GridSpec,
    gutter: u32,
) -> Result<Tile, SegmentError> {
    let rows = grid.rows as usize;
    let cols = grid.cols as usize;
    let mut seen = vec![false; rows * cols];
    for block in blocks {
        let (r, c) = block.origin();
        if r >= grid.rows || c >= grid.cols {
            return Err(SegmentError::OriginOutOfGrid { row: r, col: c });
        }
        let idx = r as usize * cols + c as usize;
        if seen[idx] {
            return Err(SegmentError::DuplicateOrigin { row: r, col: c });
        }
        seen[idx] = true;
    }
    if let Some(hole) = seen.iter().position(|&s| !s) {
        return Err(SegmentError::MissingBlock {
            row: (hole / cols) as u32,
            col: (hole % cols) as u32,
        });
    }

    let side = BLOCK_SIDE as u32;
    let width = grid.cols * side + (grid.cols - 1) * gutter;
    let height = grid.rows * side + (grid.rows - 1) * gutter;
    let mut bits = vec![0u8; width as usize * height as usize];
    for block in blocks {
        let (r, c) = block.origin();
        let base_x = c * (side + gutter);
        let base_y = r * (side + gutter);
        for y in 0..BLOCK_SIDE {
            for x in 0..BLOCK_SIDE {
                if block.value_at(x, y) >= 0.5 {
                    let gx = base_x as usize + x;
                    let gy = base_y as usize + y;
                    bits[gy * width as usize + gx] = 1;
                }
            }
        }
    }
    Ok(Tile {
        image: BinaryImage::new(width, height, bits),
        grid,
        gutter,
    })
}

/// Write each block as `r{row}_c{col}.pgm` under `dir` for dataset curation.
pub fn export_blocks(blocks: &[GlyphBlock], dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::with_capacity(blocks.len());
    for block in blocks {
        let path = dir.join(block.export_name());
        std::fs::write(&path, encode_pgm(&block.render_gray()))?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn checker(width: u32, height: u32) -> BinaryImage {
        let bits = (0..height)
            .flat_map(|y| (0..width).map(move |x| ((x + y) % 2) as u8))
            .collect();
        BinaryImage::new(width, height, bits)
    }

    fn seeded_bits(width: u32, height: u32, seed: u64) -> BinaryImage {
        let mut state = seed | 1;
        let bits = (0..width as usize * height as usize)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((state >> 62) & 1) as u8
            })
            .collect();
        BinaryImage::new(width, height, bits)
    }

    #[test]
    fn identity_grid_casts_bits() {
        let img = checker(28, 28);
        let blocks = slice(&img, GridSpec::new(1, 1)).unwrap();
        assert_eq!(blocks.len(), 1);
        for y in 0..28 {
            for x in 0..28 {
                assert_eq!(blocks[0].value_at(x, y), f64::from(img.bit(x as u32, y as u32)));
            }
        }
    }

    #[test]
    fn exact_division_slices_quadrants() {
        let img = seeded_bits(56, 56, 9);
        let blocks = slice(&img, GridSpec::new(2, 2)).unwrap();
        assert_eq!(blocks.len(), 4);
        assert_eq!(blocks[1].origin(), (0, 1));
        // Quadrant (0,1) covers x in [28,56): cells are exactly 28x28 so the
        // block is a bit-cast of that region.
        for y in 0..28 {
            for x in 0..28 {
                assert_eq!(
                    blocks[1].value_at(x, y),
                    f64::from(img.bit(x as u32 + 28, y as u32))
                );
            }
        }
    }

    #[test]
    fn remainder_goes_to_last_column() {
        // 57 wide over 2 cols: left cells 28 wide, right cells 29 wide.
        let img = seeded_bits(57, 56, 4);
        let blocks = slice(&img, GridSpec::new(2, 2)).unwrap();
        assert_eq!(blocks.len(), 4);
        // Right-column block mixes a 29-pixel-wide cell down to 28, so some
        // values are fractional while the left column stays exact.
        assert!(blocks[0].values().iter().all(|&v| v == 0.0 || v == 1.0));
        assert!(blocks
            .iter()
            .flat_map(|b| b.values())
            .all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn grid_finer_than_image_is_rejected() {
        let img = checker(3, 3);
        assert!(matches!(
            slice(&img, GridSpec::new(1, 4)),
            Err(SegmentError::GridTooFine { .. })
        ));
    }

    #[test]
    fn rescaling_preserves_mass() {
        for (w, h) in [(28, 28), (56, 56), (70, 42), (21, 30), (14, 14), (95, 13)] {
            let img = seeded_bits(w, h, u64::from(w) * 1000 + u64::from(h));
            let blocks = slice(&img, GridSpec::new(1, 1)).unwrap();
            let fg = img.foreground_count() as f64 / (w as f64 * h as f64);
            let mean = blocks[0].values().iter().sum::<f64>() / BLOCK_LEN as f64;
            assert!(
                (mean - fg).abs() < 1.0 / BLOCK_LEN as f64,
                "{w}x{h}: mean {mean} vs foreground fraction {fg}"
            );
        }
    }

    #[test]
    fn slice_then_assemble_recovers_divisible_images() {
        for (rows, cols) in [(1, 1), (2, 3), (3, 2)] {
            let img = seeded_bits(cols * 28, rows * 28, 77);
            let grid = GridSpec::new(rows, cols);
            let tile = assemble_tile(&slice(&img, grid).unwrap(), grid, 0).unwrap();
            assert_eq!(tile.image(), &img, "{rows}x{cols} round trip drifted");
        }
    }

    #[test]
    fn single_block_tile_thresholds_at_half() {
        let mut values = vec![0.0; BLOCK_LEN];
        values[0] = 0.5;
        values[1] = 0.49;
        values[2] = 1.0;
        let tile = assemble_tile(
            &[GlyphBlock::new(values, (0, 0))],
            GridSpec::new(1, 1),
            0,
        )
        .unwrap();
        assert_eq!(tile.image().bit(0, 0), 1);
        assert_eq!(tile.image().bit(1, 0), 0);
        assert_eq!(tile.image().bit(2, 0), 1);
    }

    #[test]
    fn gutter_expands_tile_dimensions() {
        let img = seeded_bits(56, 56, 5);
        let grid = GridSpec::new(2, 2);
        let tile = assemble_tile(&slice(&img, grid).unwrap(), grid, 1).unwrap();
        assert_eq!(tile.image().width(), 57);
        assert_eq!(tile.image().height(), 57);
        // Gutter row/column stays background.
        for i in 0..57 {
            assert_eq!(tile.image().bit(28, i), 0);
            assert_eq!(tile.image().bit(i, 28), 0);
        }
    }

    #[test]
    fn assemble_rejects_bad_covers() {
        let grid = GridSpec::new(1, 2);
        let block = |origin| GlyphBlock::new(vec![0.0; BLOCK_LEN], origin);
        assert!(matches!(
            assemble_tile(&[block((0, 0))], grid, 0),
            Err(SegmentError::MissingBlock { row: 0, col: 1 })
        ));
        assert!(matches!(
            assemble_tile(&[block((0, 0)), block((0, 0))], grid, 0),
            Err(SegmentError::DuplicateOrigin { .. })
        ));
        assert!(matches!(
            assemble_tile(&[block((0, 0)), block((0, 5))], grid, 0),
            Err(SegmentError::OriginOutOfGrid { .. })
        ));
    }

    #[test]
    fn export_names_follow_grid_origins() {
        let block = GlyphBlock::new(vec![0.0; BLOCK_LEN], (3, 7));
        assert_eq!(block.export_name(), "r3_c7.pgm");
    }

    #[test]
    fn block_render_round_trips_binary_values() {
        let mut values = vec![0.0; BLOCK_LEN];
        values[3] = 1.0;
        let gray = GlyphBlock::new(values.clone(), (0, 0)).render_gray();
        assert_eq!(gray.pixels()[3], 0);
        assert_eq!(gray.pixels()[0], 255);
    }
}
