use alloc::collections::VecDeque;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{ModelConfig, ModelKind};
use crate::dsp::{FeatureMatrix, FEATURE_DIM};
use crate::error::Result;
use crate::nn::attention::pool;
use crate::nn::loss::log_softmax;
use crate::nn::{
    softmax_in_place, AttentionScorer, Encoder, EncoderState, Linear, Matrix, ParamView, Parameters,
};
use crate::real::Real;

/// Encoder, soft attention over its outputs, and a softmax head on the
/// pooled context vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionModel<T> {
    pub encoder: Encoder<T>,
    pub scorer: AttentionScorer<T>,
    pub head: Linear<T>,
    pub train_window: usize,
    pub runtime_window: usize,
}

/// Probability, attention weights and context of one window.
#[derive(Debug, Clone)]
pub struct WindowOutput<T> {
    pub probability: T,
    pub weights: Vec<T>,
    pub context: Vec<T>,
}

impl<T: Real> AttentionModel<T> {
    pub fn new(cfg: &ModelConfig, seed: u64) -> Self {
        let e = &cfg.encoder;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let encoder = Encoder::new(e.cell, e.input_dim, e.hidden_units, e.num_layers, &mut rng);
        let scorer = AttentionScorer::new(e.hidden_units, cfg.attn_dim, &mut rng);
        let head = Linear::new(e.hidden_units, 2, &mut rng);
        Self {
            encoder,
            scorer,
            head,
            train_window: cfg.train_window,
            runtime_window: cfg.runtime_window,
        }
    }

    pub fn zeros(cfg: &ModelConfig) -> Self {
        let e = &cfg.encoder;
        Self {
            encoder: Encoder::zeros(e.cell, e.input_dim, e.hidden_units, e.num_layers),
            scorer: AttentionScorer::zeros(e.hidden_units, cfg.attn_dim),
            head: Linear::zeros(e.hidden_units, 2),
            train_window: cfg.train_window,
            runtime_window: cfg.runtime_window,
        }
    }

    pub fn config(&self) -> ModelConfig {
        ModelConfig {
            kind: ModelKind::Attention,
            encoder: super::EncoderConfig {
                cell: self.encoder.kind(),
                num_layers: self.encoder.num_layers(),
                hidden_units: self.encoder.hidden_dim(),
                input_dim: self.encoder.input_dim(),
            },
            attn_dim: self.scorer.attn_dim(),
            train_window: self.train_window,
            runtime_window: self.runtime_window,
        }
    }

    /// Clip-level prediction over a whole window of frames.
    pub fn forward_window(&self, x: &Matrix<T>) -> Result<WindowOutput<T>> {
        let (hs, _) = self.encoder.forward(x)?;
        let att = self.scorer.forward(&hs)?;
        let mut p = self.head.forward(&att.context);
        softmax_in_place(&mut p);
        Ok(WindowOutput {
            probability: p[1],
            weights: att.weights,
            context: att.context,
        })
    }

    /// Clip-level cross-entropy for one window and its gradient.
    pub fn loss_and_grad(&self, x: &Matrix<T>, positive: bool) -> Result<(T, Self)> {
        let (hs, cache) = self.encoder.forward(x)?;
        let att = self.scorer.forward(&hs)?;
        let logits = self.head.forward(&att.context);
        let logp = log_softmax(&logits);
        let class = usize::from(positive);
        let loss = -logp[class];
        let dlogits: Vec<T> = logp
            .iter()
            .enumerate()
            .map(|(k, lp)| lp.pexp() - if k == class { T::one() } else { T::zero() })
            .collect();
        let mut grad = self.zeros_like();
        let mut d_context = alloc::vec![T::zero(); att.context.len()];
        self.head
            .backward(&att.context, &dlogits, &mut grad.head, &mut d_context);
        let dh = self
            .scorer
            .backward(&hs, &att, &d_context, &mut grad.scorer);
        self.encoder.backward(&cache, &dh, &mut grad.encoder);
        Ok((loss, grad))
    }

    /// One streaming frame: encoder step, then attention over the last
    /// `runtime_window` outputs. Scores are cached with their outputs so
    /// each frame costs one RNN step plus a pass over the window.
    pub(crate) fn step(
        &self,
        state: &mut EncoderState<T>,
        history: &mut VecDeque<(Vec<T>, T)>,
        weights: &mut Vec<T>,
        x: &[T],
    ) -> T {
        let h = self.encoder.step(state, x).to_vec();
        let (score, _) = self.scorer.score(&h);
        if history.len() == self.runtime_window {
            history.pop_front();
        }
        history.push_back((h, score));
        let scores: Vec<T> = history.iter().map(|(_, e)| *e).collect();
        let (w, context) = pool(
            &scores,
            history.iter().map(|(h, _)| h.as_slice()),
            self.encoder.hidden_dim(),
        );
        *weights = w;
        let mut p = self.head.forward(&context);
        softmax_in_place(&mut p);
        p[1]
    }
}

impl<T: Real> Parameters<T> for AttentionModel<T> {
    fn params(&self) -> Vec<ParamView<'_, T>> {
        let mut v = self.encoder.views("encoder");
        v.extend(self.scorer.views("attention"));
        v.extend(self.head.views("head"));
        v
    }

    fn params_mut(&mut self) -> Vec<&mut [T]> {
        let mut v = self.encoder.views_mut();
        v.extend(self.scorer.views_mut());
        v.extend(self.head.views_mut());
        v
    }
}

/// Cuts a fixed-length training window from a clip.
///
/// Clips shorter than `len` are left-padded with zero frames. Longer
/// positives are centred on the keyword span; longer negatives get a
/// uniformly random crop.
pub fn baseline_window<T: Real>(
    x: &FeatureMatrix,
    keyword: Option<(usize, usize)>,
    len: usize,
    rng: &mut impl Rng,
) -> Matrix<T> {
    let frames = x.frames();
    let mut out = Matrix::zeros(len, FEATURE_DIM);
    if frames <= len {
        let pad = len - frames;
        for t in 0..frames {
            for (o, &v) in out.row_mut(pad + t).iter_mut().zip(x.row(t)) {
                *o = T::of_f32(v);
            }
        }
        return out;
    }
    let max_start = frames - len;
    let start = match keyword {
        Some((s, e)) => ((s + e) / 2).saturating_sub(len / 2).min(max_start),
        None => rng.gen_range(0..=max_start),
    };
    for t in 0..len {
        for (o, &v) in out.row_mut(t).iter_mut().zip(x.row(start + t)) {
            *o = T::of_f32(v);
        }
    }
    out
}
