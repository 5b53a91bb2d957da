//! Image representation, decoding/encoding, and grayscale conversion.
//!
//! Supported interchange formats are PNG (decode) and binary PGM/PPM with
//! maxval 255 (decode and, for PGM, encode). Everything downstream of this
//! module works on [`GrayImage`].

use std::fmt;
use std::path::Path;

use thiserror::Error;

/// Rejects absurd headers before allocating pixel buffers.
const MAX_PIXELS: u64 = 1 << 28;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("malformed image file: {0}")]
    MalformedFile(String),
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// 8-bit single-channel raster, row-major.
#[derive(Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl GrayImage {
    /// `pixels` must hold exactly `width * height` luminance values.
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Self {
        assert!(width >= 1 && height >= 1, "image dimensions must be >= 1");
        assert_eq!(
            pixels.len(),
            width as usize * height as usize,
            "pixel buffer does not match {width}x{height}"
        );
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixel(&self, x: u32, y: u32) -> u8 {
        debug_assert!(x < self.width && y < self.height);
        self.pixels[y as usize * self.width as usize + x as usize]
    }
}

impl fmt::Debug for GrayImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GrayImage({}x{})", self.width, self.height)
    }
}

/// 8-bit RGB raster, row-major triples.
#[derive(Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl RgbImage {
    /// `pixels` must hold exactly `3 * width * height` channel values.
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Self {
        assert!(width >= 1 && height >= 1, "image dimensions must be >= 1");
        assert_eq!(
            pixels.len(),
            3 * width as usize * height as usize,
            "pixel buffer does not match {width}x{height} rgb"
        );
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixel(&self, x: u32, y: u32) -> (u8, u8, u8) {
        debug_assert!(x < self.width && y < self.height);
        let i = 3 * (y as usize * self.width as usize + x as usize);
        (self.pixels[i], self.pixels[i + 1], self.pixels[i + 2])
    }
}

impl fmt::Debug for RgbImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RgbImage({}x{})", self.width, self.height)
    }
}

/// Decoded raster in whichever channel layout the file carried.
#[derive(Clone, Debug)]
pub enum Decoded {
    Gray(GrayImage),
    Rgb(RgbImage),
}

impl Decoded {
    /// Collapse to grayscale, converting RGB with the fixed luma weights.
    pub fn into_gray(self) -> GrayImage {
        match self {
            Decoded::Gray(g) => g,
            Decoded::Rgb(rgb) => to_grayscale(&rgb),
        }
    }

    pub fn dimensions(&self) -> (u32, u32) {
        match self {
            Decoded::Gray(g) => (g.width(), g.height()),
            Decoded::Rgb(r) => (r.width(), r.height()),
        }
    }
}

/// Rec. 601 luma: round(0.299 R + 0.587 G + 0.114 B), clamped to [0, 255].
pub fn luma(r: u8, g: u8, b: u8) -> u8 {
    let y = 0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b);
    (y + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Convert an RGB raster to grayscale with the fixed luma weights.
pub fn to_grayscale(img: &RgbImage) -> GrayImage {
    let pixels = img
        .pixels
        .chunks_exact(3)
        .map(|p| luma(p[0], p[1], p[2]))
        .collect();
    GrayImage::new(img.width, img.height, pixels)
}

const PNG_MAGIC: [u8; 8] = [0x89, b'P', b'N', b'G', 0x0D, 0x0A, 0x1A, 0x0A];

/// Decode PNG, binary PGM (P5), or binary PPM (P6) bytes.
pub fn decode_image(bytes: &[u8]) -> Result<Decoded, RasterError> {
    if bytes.len() >= 8 && bytes[..8] == PNG_MAGIC {
        return decode_png(bytes);
    }
    match bytes.get(..2) {
        Some(b"P5") => decode_pnm(bytes, false),
        Some(b"P6") => decode_pnm(bytes, true),
        Some(m) if m[0] == b'P' && (b'1'..=b'7').contains(&m[1]) => {
            Err(RasterError::UnsupportedFormat(format!(
                "netpbm variant {} (only binary P5/P6 are supported)",
                String::from_utf8_lossy(m)
            )))
        }
        _ => Err(RasterError::UnsupportedFormat(
            "unrecognized magic bytes (expected PNG, P5, or P6)".into(),
        )),
    }
}

/// Read and decode an image file.
pub fn read_image(path: &Path) -> Result<Decoded, RasterError> {
    let bytes = std::fs::read(path).map_err(|source| RasterError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode_image(&bytes)
}

fn decode_png(bytes: &[u8]) -> Result<Decoded, RasterError> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| RasterError::MalformedFile(format!("png: {e}")))?;
    let decoded = match &img {
        image::DynamicImage::ImageLuma8(_)
        | image::DynamicImage::ImageLumaA8(_)
        | image::DynamicImage::ImageLuma16(_)
        | image::DynamicImage::ImageLumaA16(_) => {
            let g = img.to_luma8();
            Decoded::Gray(GrayImage::new(g.width(), g.height(), g.into_raw()))
        }
        _ => {
            let rgb = img.to_rgb8();
            Decoded::Rgb(RgbImage::new(rgb.width(), rgb.height(), rgb.into_raw()))
        }
    };
    Ok(decoded)
}

/// Whitespace- and comment-tolerant netpbm header reader.
struct PnmHeader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> PnmHeader<'a> {
    fn new(data: &'a [u8]) -> Self {
        // Magic already checked by the caller.
        Self { data, pos: 2 }
    }

    fn skip_separators(&mut self) {
        while let Some(&b) = self.data.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while let Some(&c) = self.data.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn number(&mut self) -> Result<u32, RasterError> {
        self.skip_separators();
        let start = self.pos;
        while self
            .data
            .get(self.pos)
            .map_or(false, u8::is_ascii_digit)
        {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(RasterError::MalformedFile(
                "expected a decimal header field".into(),
            ));
        }
        std::str::from_utf8(&self.data[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| RasterError::MalformedFile("header field out of range".into()))
    }

    /// The header ends with exactly one whitespace byte before the raster.
    fn payload(mut self) -> Result<&'a [u8], RasterError> {
        match self.data.get(self.pos) {
            Some(b) if b.is_ascii_whitespace() => {
                self.pos += 1;
                Ok(&self.data[self.pos..])
            }
            _ => Err(RasterError::MalformedFile(
                "missing whitespace after maxval".into(),
            )),
        }
    }
}

fn decode_pnm(bytes: &[u8], color: bool) -> Result<Decoded, RasterError> {
    let mut header = PnmHeader::new(bytes);
    let width = header.number()?;
    let height = header.number()?;
    let maxval = header.number()?;
    if maxval != 255 {
        return Err(RasterError::UnsupportedFormat(format!(
            "netpbm maxval {maxval} (only 255 is supported)"
        )));
    }
    if width == 0 || height == 0 || u64::from(width) * u64::from(height) > MAX_PIXELS {
        return Err(RasterError::MalformedFile(format!(
            "implausible dimensions {width}x{height}"
        )));
    }
    let payload = header.payload()?;
    let channels = if color { 3 } else { 1 };
    let expected = width as usize * height as usize * channels;
    if payload.len() < expected {
        return Err(RasterError::MalformedFile(format!(
            "raster truncated: expected {expected} bytes, found {}",
            payload.len()
        )));
    }
    let pixels = payload[..expected].to_vec();
    Ok(if color {
        Decoded::Rgb(RgbImage::new(width, height, pixels))
    } else {
        Decoded::Gray(GrayImage::new(width, height, pixels))
    })
}

/// Encode as binary PGM (P5, maxval 255). `decode_image` inverts this exactly.
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let header = format!("P5\n{} {}\n255\n", img.width, img.height);
    let mut out = Vec::with_capacity(header.len() + img.pixels.len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(&img.pixels);
    out
}

/// Write a grayscale image to disk as binary PGM.
pub fn write_pgm(img: &GrayImage, path: &Path) -> Result<(), RasterError> {
    std::fs::write(path, encode_pgm(img)).map_err(|source| RasterError::Io {
        path: path.display().to_string(),
        source,
    })
}
