use alloc::vec::Vec;

use super::frame::FrameSpec;
use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::real::Real;

/// Width of every feature frame.
pub const FEATURE_DIM: usize = 40;

/// `T x 40` PCEN mel features for one utterance, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: Vec<f32>,
    frames: usize,
    frame_spec: FrameSpec,
}

impl FeatureMatrix {
    pub fn new(data: Vec<f32>, frames: usize, frame_spec: FrameSpec) -> Result<Self> {
        if data.len() != frames * FEATURE_DIM {
            return Err(Error::DimensionMismatch {
                what: "feature matrix entries",
                expected: frames * FEATURE_DIM,
                found: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature matrix"));
        }
        Ok(Self {
            data,
            frames,
            frame_spec,
        })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn is_empty(&self) -> bool {
        self.frames == 0
    }

    pub fn frame_spec(&self) -> FrameSpec {
        self.frame_spec
    }

    pub fn row(&self, t: usize) -> &[f32] {
        &self.data[t * FEATURE_DIM..(t + 1) * FEATURE_DIM]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(FEATURE_DIM)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    /// Rows `[start, end)` as a new matrix.
    pub fn slice(&self, start: usize, end: usize) -> Self {
        Self {
            data: self.data[start * FEATURE_DIM..end * FEATURE_DIM].to_vec(),
            frames: end - start,
            frame_spec: self.frame_spec,
        }
    }

    /// Converts to the model's scalar type.
    pub fn to_matrix<T: Real>(&self) -> Matrix<T> {
        Matrix::from_vec(
            self.frames,
            FEATURE_DIM,
            self.data.iter().map(|&v| T::of_f32(v)).collect(),
        )
        .expect("shape checked at construction")
    }
}
