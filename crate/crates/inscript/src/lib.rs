//! Batch OCR pipeline for inscription and printed-script photographs.
//!
//! The pipeline runs in stages, one module per stage:
//!
//! 1. [`raster`] — decode PNG/PGM/PPM input and convert color photographs to
//!    8-bit grayscale.
//! 2. [`binarize`] — Otsu global thresholding to separate glyph strokes from
//!    the (often noisy) background.
//! 3. [`segment`] — slice the binarized page into a uniform grid of letter
//!    blocks normalized to 28×28, and reassemble recognized blocks into a
//!    single tile.
//! 4. [`corpus`] — dataset manifests, label maps, deterministic augmentation,
//!    and a procedural glyph generator for desk-scale runs.
//! 5. [`glyphnet`] — the from-scratch convolutional network: forward/backward
//!    passes, softmax and contrastive training objectives, plain SGD,
//!    transfer learning, and a bit-exact checkpoint format.
//! 6. [`recognize`] — Euclidean nearest-prototype classification of blocks,
//!    tile assembly, and external OCR/TTS command bridges.
//! 7. [`evalkit`] — per-sample accuracy and combined-efficiency reporting.
//!
//! The [`cli`] module wires the stages into the `inscript` binary; the
//! `examples/` directory holds one runnable program per capability.

pub mod binarize;
pub mod cli;
pub mod corpus;
pub mod evalkit;
pub mod glyphnet;
pub mod raster;
pub mod recognize;
pub mod segment;

mod seeds;

pub use binarize::{apply_threshold, histogram, otsu_threshold, BinaryImage, OtsuResult, Polarity};
pub use corpus::{synth_corpus, Corpus, Family, LabelMap, LabeledExample};
pub use glyphnet::{Glyphnet, ModelCheckpoint, TrainConfig, TrainMode};
pub use raster::{decode_image, encode_pgm, to_grayscale, Decoded, GrayImage, RgbImage};
pub use recognize::{run_pipeline, PipelineOptions, PrototypeSet, RecognitionResult};
pub use segment::{assemble_tile, slice, GlyphBlock, GridSpec, Tile, BLOCK_SIDE};
