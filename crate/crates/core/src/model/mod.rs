//! The per-frame sequence-to-sequence detector and the attention-pooling
//! baseline, behind one [`KwsModel`] type.

mod attention;
mod config;
mod seq2seq;

use alloc::collections::VecDeque;
use alloc::vec::Vec;

pub use attention::{baseline_window, AttentionModel};
pub use config::{EncoderConfig, ModelConfig, ModelKind};
pub use seq2seq::Seq2SeqModel;

use crate::dsp::{FeatureMatrix, FEATURE_DIM};
use crate::error::{Error, Result};
use crate::nn::{EncoderState, ParamView, Parameters};
use crate::real::Real;

/// Either detector architecture.
#[derive(Debug, Clone, PartialEq)]
pub enum KwsModel<T> {
    Seq2Seq(Seq2SeqModel<T>),
    Attention(AttentionModel<T>),
}

/// Streaming inference state for one audio stream.
#[derive(Debug, Clone)]
pub enum StreamState<T> {
    Seq2Seq(EncoderState<T>),
    Attention {
        encoder: EncoderState<T>,
        /// Last `runtime_window` encoder outputs with their attention scores.
        history: VecDeque<(Vec<T>, T)>,
        /// Attention weights from the latest step.
        weights: Vec<T>,
    },
}

impl<T: Real> StreamState<T> {
    pub fn reset(&mut self) {
        match self {
            StreamState::Seq2Seq(s) => s.reset(),
            StreamState::Attention {
                encoder,
                history,
                weights,
            } => {
                encoder.reset();
                history.clear();
                weights.clear();
            }
        }
    }

    /// Attention weights over the current window (baseline only).
    pub fn attention_weights(&self) -> Option<&[T]> {
        match self {
            StreamState::Seq2Seq(_) => None,
            StreamState::Attention { weights, .. } => Some(weights),
        }
    }
}

impl<T: Real> KwsModel<T> {
    /// Glorot-initialized weights, zero biases.
    pub fn new(cfg: &ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        Ok(match cfg.kind {
            ModelKind::Seq2Seq => KwsModel::Seq2Seq(Seq2SeqModel::new(&cfg.encoder, seed)),
            ModelKind::Attention => KwsModel::Attention(AttentionModel::new(cfg, seed)),
        })
    }

    /// All-zero parameters, e.g. as a target for loading a checkpoint.
    pub fn zeros(cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(match cfg.kind {
            ModelKind::Seq2Seq => KwsModel::Seq2Seq(Seq2SeqModel::zeros(&cfg.encoder)),
            ModelKind::Attention => KwsModel::Attention(AttentionModel::zeros(cfg)),
        })
    }

    pub fn config(&self) -> ModelConfig {
        match self {
            KwsModel::Seq2Seq(m) => ModelConfig::seq2seq(m.encoder_config()),
            KwsModel::Attention(m) => m.config(),
        }
    }

    pub fn new_stream(&self) -> StreamState<T> {
        match self {
            KwsModel::Seq2Seq(m) => StreamState::Seq2Seq(m.encoder.initial_state()),
            KwsModel::Attention(m) => StreamState::Attention {
                encoder: m.encoder.initial_state(),
                history: VecDeque::with_capacity(m.runtime_window),
                weights: Vec::new(),
            },
        }
    }

    /// Keyword probability after consuming one feature row.
    pub fn stream_step(&self, state: &mut StreamState<T>, frame: &[f32]) -> Result<T> {
        if frame.len() != FEATURE_DIM {
            return Err(Error::DimensionMismatch {
                what: "feature row width",
                expected: FEATURE_DIM,
                found: frame.len(),
            });
        }
        let x: Vec<T> = frame.iter().map(|&v| T::of_f32(v)).collect();
        Ok(match (self, state) {
            (KwsModel::Seq2Seq(m), StreamState::Seq2Seq(s)) => m.step(s, &x),
            (
                KwsModel::Attention(m),
                StreamState::Attention {
                    encoder,
                    history,
                    weights,
                },
            ) => m.step(encoder, history, weights, &x),
            _ => panic!("stream state does not belong to this model"),
        })
    }

    /// Per-frame keyword probabilities of a whole utterance.
    ///
    /// For the seq2seq model this is the batch forward pass; the baseline
    /// slides its runtime attention window one frame at a time.
    pub fn frame_probabilities(&self, x: &FeatureMatrix) -> Result<Vec<T>> {
        match self {
            KwsModel::Seq2Seq(m) => m.forward(&x.to_matrix()),
            KwsModel::Attention(_) => {
                if x.is_empty() {
                    return Err(Error::EmptyInput("feature sequence"));
                }
                let mut st = self.new_stream();
                x.rows().map(|r| self.stream_step(&mut st, r)).collect()
            }
        }
    }

    /// Exact trainable parameter count.
    pub fn param_count(&self) -> usize {
        Parameters::param_count(self)
    }

    /// Parameter count in thousands, rounded to one decimal.
    pub fn param_count_k(&self) -> f64 {
        round_k(self.param_count())
    }
}

/// Rounds a count to 0.1K.
pub fn round_k(count: usize) -> f64 {
    ((count + 50) / 100) as f64 / 10.0
}

impl<T: Real> Parameters<T> for KwsModel<T> {
    fn params(&self) -> Vec<ParamView<'_, T>> {
        match self {
            KwsModel::Seq2Seq(m) => m.params(),
            KwsModel::Attention(m) => m.params(),
        }
    }

    fn params_mut(&mut self) -> Vec<&mut [T]> {
        match self {
            KwsModel::Seq2Seq(m) => m.params_mut(),
            KwsModel::Attention(m) => m.params_mut(),
        }
    }
}
