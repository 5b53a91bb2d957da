//! The from-scratch 2D convolutional network.
//!
//! Architecture (fixed): Conv(5x5, 1 -> 16, valid, stride 1) -> ReLU ->
//! MaxPool(2x2) -> Conv(5x5, 16 -> 32, valid, stride 1) -> ReLU ->
//! MaxPool(2x2) -> Flatten(512) -> Dense(512 -> K) -> Softmax. A 28x28
//! single-channel block therefore passes through feature maps
//! (16,24,24) -> (16,12,12) -> (32,8,8) -> (32,4,4); the flattened (32,4,4)
//! activation is the 512-value embedding used for nearest-prototype
//! matching.
//!
//! All arithmetic runs in f64; checkpoints store parameters as f32
//! little-endian, bit-exactly reproducible for a given corpus and config.

mod checkpoint;
mod net;
mod tensor;
mod train;

pub use checkpoint::{
    checkpoint_from_bytes, checkpoint_to_bytes, load_checkpoint, save_checkpoint,
    ModelCheckpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use net::{
    gradients, loss_contrastive, loss_softmax, maxpool2x2, relu, softmax, Conv2d, Dense,
    Forward, Glyphnet, Gradients,
};
pub use tensor::Tensor;
pub use train::{evaluate_accuracy, train, TrainConfig, TrainMode, TrainReport};

use thiserror::Error;

/// Input side length of the standard network.
pub const INPUT_SIDE: usize = 28;
/// Channels of the first convolution.
pub const CONV1_CHANNELS: usize = 16;
/// Channels of the second convolution.
pub const CONV2_CHANNELS: usize = 32;
/// Kernel side of both convolutions.
pub const KERNEL_SIDE: usize = 5;
/// Length of the flattened post-pool embedding (32 * 4 * 4).
pub const EMBEDDING_DIM: usize = 512;

#[derive(Debug, Error)]
pub enum GlyphnetError {
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },
    #[error("class id {class_id} out of range for {num_classes} classes")]
    BadClassId {
        class_id: usize,
        num_classes: usize,
    },
    #[error("max-pooling needs even dimensions, got {height}x{width}")]
    OddDimension { height: usize, width: usize },
    #[error("cannot train on an empty corpus")]
    EmptyCorpus,
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
}
