//! Dense rank-1..3 float tensor shared by all layers.

use super::GlyphnetError;
use crate::segment::GlyphBlock;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        assert!((1..=3).contains(&shape.len()), "tensors are rank 1..3");
        let len = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; len],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Self {
        assert!((1..=3).contains(&shape.len()), "tensors are rank 1..3");
        assert_eq!(shape.iter().product::<usize>(), data.len());
        debug_assert!(data.iter().all(|v| v.is_finite()), "tensor values must be finite");
        Self {
            shape: shape.to_vec(),
            data,
        }
    }

    /// View a letter block as a single-channel (1, 28, 28) input.
    pub fn from_block(block: &GlyphBlock) -> Self {
        let side = crate::segment::BLOCK_SIDE;
        Self::from_vec(&[1, side, side], block.values().to_vec())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Interpret as (channels, height, width).
    pub fn dims3(&self) -> Result<(usize, usize, usize), GlyphnetError> {
        match self.shape.as_slice() {
            &[c, h, w] => Ok((c, h, w)),
            other => Err(GlyphnetError::ShapeMismatch {
                expected: "(channels, height, width)".into(),
                found: format!("{other:?}"),
            }),
        }
    }
}
