//! Otsu global thresholding.
//!
//! The threshold sweep minimizes the within-class variance
//! `w_b(t) * var_b(t) + w_f(t) * var_f(t)` over all 256 candidate thresholds,
//! with the background class holding values `<= t`. Class moments come from
//! cumulative histogram sums, so the sweep is O(256) after the histogram pass.

use serde::Serialize;
use thiserror::Error;

use crate::raster::GrayImage;

#[derive(Debug, Error)]
pub enum BinarizeError {
    #[error("empty histogram: no pixels to threshold")]
    EmptyHistogram,
}

/// 256-bin intensity histogram.
#[derive(Clone, Debug)]
pub struct Histogram256 {
    counts: [u64; 256],
    total: u64,
}

impl Histogram256 {
    pub fn from_counts(counts: [u64; 256]) -> Self {
        let total = counts.iter().sum();
        Self { counts, total }
    }

    pub fn counts(&self) -> &[u64; 256] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Number of distinct occupied bins.
    fn occupied(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }
}

/// Count pixel values of a grayscale image.
pub fn histogram(img: &GrayImage) -> Histogram256 {
    let mut counts = [0u64; 256];
    for &p in img.pixels() {
        counts[p as usize] += 1;
    }
    Histogram256::from_counts(counts)
}

/// Outcome of the threshold sweep.
#[derive(Clone, Copy, Debug)]
pub struct OtsuResult {
    /// Smallest threshold minimizing the within-class variance.
    pub threshold: u8,
    /// Within-class variance at `threshold`.
    pub within_class_variance: f64,
    /// Set when only one histogram bin is occupied; the threshold is then
    /// that bin value and the sweep is skipped so blank crops keep flowing.
    pub degenerate: bool,
}

/// Select the threshold minimizing within-class variance; ties break low.
pub fn otsu_threshold(hist: &Histogram256) -> Result<OtsuResult, BinarizeError> {
    if hist.total == 0 {
        return Err(BinarizeError::EmptyHistogram);
    }
    if hist.occupied() == 1 {
        let v = hist.counts.iter().position(|&c| c > 0).unwrap() as u8;
        return Ok(OtsuResult {
            threshold: v,
            within_class_variance: 0.0,
            degenerate: true,
        });
    }

    // Cumulative moments over the background class (values <= t).
    let total = hist.total as f64;
    let mut sum_all = 0.0;
    let mut sumsq_all = 0.0;
    for (v, &c) in hist.counts.iter().enumerate() {
        let v = v as f64;
        sum_all += v * c as f64;
        sumsq_all += v * v * c as f64;
    }

    let mut best_t = 0u8;
    let mut best_sigma = f64::INFINITY;
    let mut cnt_b = 0u64;
    let mut sum_b = 0.0;
    let mut sumsq_b = 0.0;
    for t in 0..=255usize {
        let c = hist.counts[t] as f64;
        cnt_b += hist.counts[t];
        sum_b += t as f64 * c;
        sumsq_b += (t * t) as f64 * c;

        let cnt_f = hist.total - cnt_b;
        let sigma = class_spread(cnt_b, sum_b, sumsq_b, total)
            + class_spread(cnt_f, sum_all - sum_b, sumsq_all - sumsq_b, total);
        if sigma < best_sigma {
            best_sigma = sigma;
            best_t = t as u8;
        }
    }
    Ok(OtsuResult {
        threshold: best_t,
        within_class_variance: best_sigma,
        degenerate: false,
    })
}

/// Weighted variance contribution of one class; empty classes contribute 0.
fn class_spread(count: u64, sum: f64, sumsq: f64, total: f64) -> f64 {
    if count == 0 {
        return 0.0;
    }
    let n = count as f64;
    let mean = sum / n;
    let var = (sumsq / n - mean * mean).max(0.0);
    (n / total) * var
}

/// Which pixel class becomes foreground (bit 1).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    /// Foreground is the dark class: bit 1 iff pixel <= t.
    DarkForeground,
    /// Foreground is the light class: bit 1 iff pixel > t.
    LightForeground,
    /// Pick whichever polarity leaves the foreground in the minority.
    Auto,
}

impl std::fmt::Display for Polarity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Polarity::DarkForeground => "dark_foreground",
            Polarity::LightForeground => "light_foreground",
            Polarity::Auto => "auto",
        };
        f.write_str(s)
    }
}

/// Bilevel raster; bit 1 marks foreground (glyph stroke).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryImage {
    width: u32,
    height: u32,
    bits: Vec<u8>,
}

impl BinaryImage {
    /// `bits` must be 0/1 values covering `width * height`.
    pub fn new(width: u32, height: u32, bits: Vec<u8>) -> Self {
        assert!(width >= 1 && height >= 1, "image dimensions must be >= 1");
        assert_eq!(bits.len(), width as usize * height as usize);
        debug_assert!(bits.iter().all(|&b| b <= 1), "bits must be 0 or 1");
        Self {
            width,
            height,
            bits,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn bit(&self, x: u32, y: u32) -> u8 {
        debug_assert!(x < self.width && y < self.height);
        self.bits[y as usize * self.width as usize + x as usize]
    }

    pub fn foreground_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }

    /// Render for interchange: foreground ink black (0), background white (255).
    pub fn render_gray(&self) -> GrayImage {
        let pixels = self.bits.iter().map(|&b| if b == 1 { 0 } else { 255 }).collect();
        GrayImage::new(self.width, self.height, pixels)
    }
}

/// Resolve `Auto` against the image: foreground should be the minority class.
pub fn choose_polarity(img: &GrayImage, t: u8, polarity: Polarity) -> Polarity {
    match polarity {
        Polarity::Auto => {
            let total = img.pixels().len();
            let dark = img.pixels().iter().filter(|&&p| p <= t).count();
            // The two candidate foregrounds partition the image, so exactly
            // one fraction is below 1/2 unless both sit exactly at 1/2.
            if 2 * dark < total {
                Polarity::DarkForeground
            } else if 2 * (total - dark) < total {
                Polarity::LightForeground
            } else {
                Polarity::DarkForeground
            }
        }
        fixed => fixed,
    }
}

/// Apply a threshold with the given polarity.
pub fn apply_threshold(img: &GrayImage, t: u8, polarity: Polarity) -> BinaryImage {
    let polarity = choose_polarity(img, t, polarity);
    let bits = img
        .pixels()
        .iter()
        .map(|&p| match polarity {
            Polarity::DarkForeground => u8::from(p <= t),
            Polarity::LightForeground => u8::from(p > t),
            Polarity::Auto => unreachable!("auto resolved above"),
        })
        .collect();
    BinaryImage::new(img.width(), img.height(), bits)
}

/// Histogram, sweep, and threshold in one step.
///
/// Returns the binarized image, the sweep result, and the polarity actually
/// applied (useful when the caller asked for `Auto`).
pub fn binarize(
    img: &GrayImage,
    polarity: Polarity,
) -> Result<(BinaryImage, OtsuResult, Polarity), BinarizeError> {
    let otsu = otsu_threshold(&histogram(img))?;
    let resolved = choose_polarity(img, otsu.threshold, polarity);
    Ok((apply_threshold(img, otsu.threshold, resolved), otsu, resolved))
}
