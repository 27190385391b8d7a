use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use super::init::{glorot_with, zero_init_bias};
use super::matrix::Matrix;
use super::params::{BufferKind, ParamView, Parameters};
use crate::real::Real;

/// Affine map `y = W x + b`, `W` is `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    pub weight: Matrix<T>,
    pub bias: Vec<T>,
}

impl<T: Real> Linear<T> {
    pub fn new(input_dim: usize, output_dim: usize, rng: &mut impl Rng) -> Self {
        Self {
            weight: glorot_with(rng, input_dim, output_dim),
            bias: zero_init_bias(output_dim),
        }
    }

    pub fn zeros(input_dim: usize, output_dim: usize) -> Self {
        Self {
            weight: Matrix::zeros(output_dim, input_dim),
            bias: zero_init_bias(output_dim),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn forward_into(&self, x: &[T], out: &mut [T]) {
        out.copy_from_slice(&self.bias);
        self.weight.gemv_acc(x, out);
    }

    pub fn forward(&self, x: &[T]) -> Vec<T> {
        let mut out = alloc::vec![T::zero(); self.output_dim()];
        self.forward_into(x, &mut out);
        out
    }

    /// Accumulates parameter gradients into `grad` and input gradients into `dx`.
    pub fn backward(&self, x: &[T], dy: &[T], grad: &mut Self, dx: &mut [T]) {
        grad.weight.outer_acc(dy, x);
        for (g, &d) in grad.bias.iter_mut().zip(dy) {
            *g += d;
        }
        self.weight.gemv_t_acc(dy, dx);
    }

    pub(crate) fn views(&self, prefix: &str) -> Vec<ParamView<'_, T>> {
        alloc::vec![
            ParamView {
                name: format!("{prefix}.weight"),
                kind: BufferKind::Weight,
                shape: alloc::vec![self.weight.rows(), self.weight.cols()],
                data: self.weight.as_slice(),
            },
            ParamView {
                name: format!("{prefix}.bias"),
                kind: BufferKind::Bias,
                shape: alloc::vec![self.bias.len()],
                data: &self.bias,
            },
        ]
    }

    pub(crate) fn views_mut(&mut self) -> Vec<&mut [T]> {
        alloc::vec![self.weight.as_mut_slice(), self.bias.as_mut_slice()]
    }
}

impl<T: Real> Parameters<T> for Linear<T> {
    fn params(&self) -> Vec<ParamView<'_, T>> {
        self.views("linear")
    }

    fn params_mut(&mut self) -> Vec<&mut [T]> {
        self.views_mut()
    }
}
