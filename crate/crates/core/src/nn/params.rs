use alloc::string::String;
use alloc::vec::Vec;

use crate::real::Real;

/// Weight matrices are L2-regularized; biases are not.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BufferKind {
    Weight,
    Bias,
}

/// Read-only view of one parameter buffer.
#[derive(Debug)]
pub struct ParamView<'a, T> {
    pub name: String,
    pub kind: BufferKind,
    pub shape: Vec<usize>,
    pub data: &'a [T],
}

/// A container of trainable buffers with a canonical order.
///
/// `params` and `params_mut` must list buffers in the same order.
pub trait Parameters<T: Real>: Clone {
    fn params(&self) -> Vec<ParamView<'_, T>>;
    fn params_mut(&mut self) -> Vec<&mut [T]>;

    fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.data.len()).sum()
    }

    /// Same shapes, all zeros: a fresh gradient bundle.
    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.fill(T::zero());
        z
    }

    fn fill(&mut self, v: T) {
        for b in self.params_mut() {
            b.iter_mut().for_each(|x| *x = v);
        }
    }

    fn scale(&mut self, s: T) {
        for b in self.params_mut() {
            b.iter_mut().for_each(|x| *x *= s);
        }
    }

    /// `self += other`, buffer by buffer in declaration order.
    fn add_assign(&mut self, other: &Self) {
        let src = other.params();
        for (dst, src) in self.params_mut().into_iter().zip(src) {
            for (d, &s) in dst.iter_mut().zip(src.data) {
                *d += s;
            }
        }
    }

    /// Concatenation of every buffer in declaration order.
    fn flatten(&self) -> Vec<T> {
        self.params()
            .iter()
            .flat_map(|p| p.data.iter().copied())
            .collect()
    }

    /// Inverse of [`Parameters::flatten`]; returns false on a length mismatch.
    fn load_flat(&mut self, flat: &[T]) -> bool {
        if flat.len() != self.param_count() {
            return false;
        }
        let mut offset = 0;
        for b in self.params_mut() {
            b.copy_from_slice(&flat[offset..offset + b.len()]);
            offset += b.len();
        }
        true
    }

    fn is_finite(&self) -> bool {
        self.params()
            .iter()
            .all(|p| p.data.iter().all(|v| v.is_finite()))
    }
}
