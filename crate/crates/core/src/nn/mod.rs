//! Hand-derived forward and backward kernels.
//!
//! Every trainable container implements [`Parameters`], which exposes its
//! buffers in a fixed declaration order. Gradients use the same container
//! type as the parameters, so a gradient bundle is just a zeroed clone.

pub(crate) mod attention;
mod gru;
mod init;
mod linear;
pub(crate) mod loss;
mod lstm;
mod matrix;
mod optim;
mod params;
mod rnn;

pub use attention::{AttentionCache, AttentionScorer};
pub use gru::{gru_cell_backward, gru_cell_forward, GruCache};
pub use init::{glorot_bound, glorot_init, zero_init_bias};
pub use linear::Linear;
pub use loss::{log_softmax, softmax, softmax_in_place, weighted_softmax_xent, XentOutput};
pub use lstm::{lstm_cell_backward, lstm_cell_forward, LstmCache};
pub use matrix::Matrix;
pub use optim::{apply_l2, clip_global_norm, global_norm, AdamConfig, AdamState};
pub use params::{BufferKind, ParamView, Parameters};
pub use rnn::{CellKind, Encoder, EncoderCache, EncoderState, LayerState, RnnLayer};
