use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::EncoderConfig;
use crate::error::Result;
use crate::labeling::LabelSequence;
use crate::nn::loss::weighted_xent_sum;
use crate::nn::{
    softmax_in_place, Encoder, EncoderCache, EncoderState, Linear, Matrix, ParamView, Parameters,
};
use crate::real::Real;

/// Stacked unidirectional RNN with a per-frame two-way softmax head.
/// Output `y_t` depends only on frames `1..=t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Seq2SeqModel<T> {
    pub encoder: Encoder<T>,
    pub head: Linear<T>,
}

/// Keyword probability from one encoder output.
pub(crate) fn head_probability<T: Real>(head: &Linear<T>, h: &[T]) -> T {
    let mut logits = [T::zero(); 2];
    head.forward_into(h, &mut logits);
    softmax_in_place(&mut logits);
    logits[1]
}

impl<T: Real> Seq2SeqModel<T> {
    pub fn new(cfg: &EncoderConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let encoder = Encoder::new(
            cfg.cell,
            cfg.input_dim,
            cfg.hidden_units,
            cfg.num_layers,
            &mut rng,
        );
        let head = Linear::new(cfg.hidden_units, 2, &mut rng);
        Self { encoder, head }
    }

    pub fn zeros(cfg: &EncoderConfig) -> Self {
        Self {
            encoder: Encoder::zeros(cfg.cell, cfg.input_dim, cfg.hidden_units, cfg.num_layers),
            head: Linear::zeros(cfg.hidden_units, 2),
        }
    }

    pub fn encoder_config(&self) -> EncoderConfig {
        EncoderConfig {
            cell: self.encoder.kind(),
            num_layers: self.encoder.num_layers(),
            hidden_units: self.encoder.hidden_dim(),
            input_dim: self.encoder.input_dim(),
        }
    }

    /// Per-frame keyword probabilities.
    pub fn forward(&self, x: &Matrix<T>) -> Result<Vec<T>> {
        let (hs, _) = self.encoder.forward(x)?;
        Ok((0..hs.rows())
            .map(|t| head_probability(&self.head, hs.row(t)))
            .collect())
    }

    /// Per-frame `[p(no keyword), p(keyword)]`.
    pub fn forward_pairs(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        let (logits, _, _) = self.logits(x)?;
        let mut out = logits;
        for t in 0..out.rows() {
            softmax_in_place(out.row_mut(t));
        }
        Ok(out)
    }

    /// Head logits with the encoder outputs and cache needed for backward.
    pub fn logits(&self, x: &Matrix<T>) -> Result<(Matrix<T>, Matrix<T>, EncoderCache<T>)> {
        let (hs, cache) = self.encoder.forward(x)?;
        let mut logits = Matrix::zeros(hs.rows(), 2);
        for t in 0..hs.rows() {
            self.head.forward_into(hs.row(t), logits.row_mut(t));
        }
        Ok((logits, hs, cache))
    }

    pub(crate) fn step(&self, state: &mut EncoderState<T>, x: &[T]) -> T {
        let h = self.encoder.step(state, x);
        head_probability(&self.head, h)
    }

    /// Summed weighted NLL, summed weight, and the gradient of the sum.
    pub fn loss_and_grad(&self, x: &Matrix<T>, labels: &LabelSequence) -> Result<(T, T, Self)> {
        let (logits, hs, cache) = self.logits(x)?;
        let (loss, weight, dlogits) = weighted_xent_sum(&logits, labels)?;
        let mut grad = self.zeros_like();
        let mut dh = Matrix::zeros(hs.rows(), hs.cols());
        for t in 0..hs.rows() {
            self.head
                .backward(hs.row(t), dlogits.row(t), &mut grad.head, dh.row_mut(t));
        }
        self.encoder.backward(&cache, &dh, &mut grad.encoder);
        Ok((loss, weight, grad))
    }
}

impl<T: Real> Parameters<T> for Seq2SeqModel<T> {
    fn params(&self) -> Vec<ParamView<'_, T>> {
        let mut v = self.encoder.views("encoder");
        v.extend(self.head.views("head"));
        v
    }

    fn params_mut(&mut self) -> Vec<&mut [T]> {
        let mut v = self.encoder.views_mut();
        v.extend(self.head.views_mut());
        v
    }
}
