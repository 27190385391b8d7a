use core::fmt;
use core::str::FromStr;

use crate::dsp::FEATURE_DIM;
use crate::error::{Error, Result};
use crate::nn::CellKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncoderConfig {
    pub cell: CellKind,
    pub num_layers: usize,
    pub hidden_units: usize,
    pub input_dim: usize,
}

impl EncoderConfig {
    pub fn new(cell: CellKind, num_layers: usize, hidden_units: usize) -> Self {
        Self {
            cell,
            num_layers,
            hidden_units,
            input_dim: FEATURE_DIM,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_layers == 0 || self.hidden_units == 0 {
            return Err(Error::invalid("encoder", "layers and units must be >= 1"));
        }
        if self.input_dim != FEATURE_DIM {
            return Err(Error::DimensionMismatch {
                what: "encoder input dim",
                expected: FEATURE_DIM,
                found: self.input_dim,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    /// Per-frame detector trained on frame labels.
    Seq2Seq,
    /// Attention-pooled clip classifier.
    Attention,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Seq2Seq => "seq2seq",
            ModelKind::Attention => "baseline",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub encoder: EncoderConfig,
    /// Hidden width of the attention scorer.
    pub attn_dim: usize,
    /// Clip length used to train the baseline.
    pub train_window: usize,
    /// Frames the baseline attends over at inference.
    pub runtime_window: usize,
}

impl ModelConfig {
    pub fn seq2seq(encoder: EncoderConfig) -> Self {
        Self {
            kind: ModelKind::Seq2Seq,
            encoder,
            attn_dim: 128,
            train_window: 189,
            runtime_window: 100,
        }
    }

    pub fn attention(encoder: EncoderConfig) -> Self {
        Self {
            kind: ModelKind::Attention,
            ..Self::seq2seq(encoder)
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        if self.kind == ModelKind::Attention
            && (self.attn_dim == 0 || self.train_window == 0 || self.runtime_window == 0)
        {
            return Err(Error::invalid(
                "attention config",
                "attn_dim and windows must be >= 1",
            ));
        }
        Ok(())
    }

    /// Short name such as `seq2seq-gru` or `baseline-lstm`.
    pub fn name(&self) -> alloc::string::String {
        alloc::format!("{}-{}", self.kind.as_str(), self.encoder.cell)
    }
}

impl fmt::Display for ModelConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}-{}",
            self.name(),
            self.encoder.num_layers,
            self.encoder.hidden_units
        )
    }
}

/// Parses `seq2seq-gru`, `baseline-lstm`, and so on.
impl FromStr for ModelConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, cell) = s
            .split_once('-')
            .ok_or_else(|| Error::invalid("model name", alloc::format!("{s:?}")))?;
        let cell: CellKind = cell.parse()?;
        let enc = EncoderConfig::new(cell, 1, 128);
        match kind {
            "seq2seq" => Ok(Self::seq2seq(enc)),
            "baseline" | "attention" => Ok(Self::attention(enc)),
            _ => Err(Error::invalid(
                "model name",
                alloc::format!("{s:?} (expected seq2seq-<cell> or baseline-<cell>)"),
            )),
        }
    }
}
