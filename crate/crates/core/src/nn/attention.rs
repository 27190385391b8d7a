use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use super::init::glorot_with;
use super::loss::softmax_in_place;
use super::matrix::Matrix;
use super::params::{BufferKind, ParamView, Parameters};
use crate::error::{Error, Result};
use crate::real::Real;

/// Soft attention with a shared single-hidden-layer scorer:
/// `e_t = v . tanh(W h_t)`, `a = softmax(e)`, `C = sum_t a_t h_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionScorer<T> {
    /// `attn_dim x hidden_dim`
    pub w: Matrix<T>,
    pub v: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct AttentionCache<T> {
    /// `tanh(W h_t)` per frame.
    pub projected: Matrix<T>,
    pub weights: Vec<T>,
    pub context: Vec<T>,
}

impl<T: Real> AttentionScorer<T> {
    pub fn new(hidden_dim: usize, attn_dim: usize, rng: &mut impl Rng) -> Self {
        let w = glorot_with(rng, hidden_dim, attn_dim);
        let v = glorot_with::<T>(rng, attn_dim, 1).into_vec();
        Self { w, v }
    }

    pub fn zeros(hidden_dim: usize, attn_dim: usize) -> Self {
        Self {
            w: Matrix::zeros(attn_dim, hidden_dim),
            v: alloc::vec![T::zero(); attn_dim],
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn attn_dim(&self) -> usize {
        self.w.rows()
    }

    /// Score of a single encoder output; also returns `tanh(W h)`.
    pub fn score(&self, h: &[T]) -> (T, Vec<T>) {
        let mut u = alloc::vec![T::zero(); self.attn_dim()];
        self.w.gemv_acc(h, &mut u);
        let mut e = T::zero();
        for (uk, &vk) in u.iter_mut().zip(&self.v) {
            *uk = uk.ptanh();
            e += vk * *uk;
        }
        (e, u)
    }

    /// Pools `hs` (`frames x hidden_dim`) into a context vector.
    pub fn forward(&self, hs: &Matrix<T>) -> Result<AttentionCache<T>> {
        if hs.rows() == 0 {
            return Err(Error::EmptyInput("attention window"));
        }
        let mut projected = Matrix::zeros(hs.rows(), self.attn_dim());
        let mut scores = Vec::with_capacity(hs.rows());
        for t in 0..hs.rows() {
            let (e, u) = self.score(hs.row(t));
            projected.row_mut(t).copy_from_slice(&u);
            scores.push(e);
        }
        let (weights, context) = pool(&scores, (0..hs.rows()).map(|t| hs.row(t)), hs.cols());
        Ok(AttentionCache {
            projected,
            weights,
            context,
        })
    }

    /// Given `dL/dC`, accumulates scorer gradients and returns `dL/dh`.
    pub fn backward(
        &self,
        hs: &Matrix<T>,
        cache: &AttentionCache<T>,
        d_context: &[T],
        grad: &mut Self,
    ) -> Matrix<T> {
        let frames = hs.rows();
        let mut dh = Matrix::zeros(frames, hs.cols());
        // dL/da_t = dC . h_t
        let da: Vec<T> = (0..frames)
            .map(|t| hs.row(t).iter().zip(d_context).map(|(&h, &d)| h * d).sum())
            .collect();
        let mean: T = cache.weights.iter().zip(&da).map(|(&a, &d)| a * d).sum();
        let one = T::one();
        for (t, (&a, &dat)) in cache.weights.iter().zip(&da).enumerate() {
            for (o, &d) in dh.row_mut(t).iter_mut().zip(d_context) {
                *o += a * d;
            }
            let de = a * (dat - mean);
            let u = cache.projected.row(t);
            let dpre: Vec<T> = u
                .iter()
                .zip(&self.v)
                .map(|(&uk, &vk)| de * vk * (one - uk * uk))
                .collect();
            for (gv, &uk) in grad.v.iter_mut().zip(u) {
                *gv += de * uk;
            }
            grad.w.outer_acc(&dpre, hs.row(t));
            self.w.gemv_t_acc(&dpre, dh.row_mut(t));
        }
        dh
    }

    pub(crate) fn views(&self, prefix: &str) -> Vec<ParamView<'_, T>> {
        alloc::vec![
            ParamView {
                name: format!("{prefix}.w"),
                kind: BufferKind::Weight,
                shape: alloc::vec![self.w.rows(), self.w.cols()],
                data: self.w.as_slice(),
            },
            ParamView {
                name: format!("{prefix}.v"),
                kind: BufferKind::Weight,
                shape: alloc::vec![self.v.len()],
                data: &self.v,
            },
        ]
    }

    pub(crate) fn views_mut(&mut self) -> Vec<&mut [T]> {
        alloc::vec![self.w.as_mut_slice(), self.v.as_mut_slice()]
    }
}

impl<T: Real> Parameters<T> for AttentionScorer<T> {
    fn params(&self) -> Vec<ParamView<'_, T>> {
        self.views("attention")
    }

    fn params_mut(&mut self) -> Vec<&mut [T]> {
        self.views_mut()
    }
}

/// Softmax over `scores` and the weighted sum of `rows`.
pub(crate) fn pool<'a, T: Real>(
    scores: &[T],
    rows: impl Iterator<Item = &'a [T]>,
    dim: usize,
) -> (Vec<T>, Vec<T>) {
    let mut weights = scores.to_vec();
    softmax_in_place(&mut weights);
    let mut context = alloc::vec![T::zero(); dim];
    for (&a, h) in weights.iter().zip(rows) {
        for (c, &hv) in context.iter_mut().zip(h) {
            *c += a * hv;
        }
    }
    (weights, context)
}
