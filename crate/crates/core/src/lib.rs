//! Small-footprint keyword spotting.
//!
//! The crate is `no_std` (it needs `alloc`) and contains every numerical
//! piece of the detector:
//!
//! * [`dsp`]: framing, mel filterbank energies and PCEN normalization.
//! * [`labeling`]: per-frame `{0, 1, -1}` targets from token alignments.
//! * [`nn`]: hand-derived forward/backward kernels for linear, LSTM and GRU
//!   layers, weighted cross-entropy, clipping, L2 and Adam.
//! * [`model`]: the per-frame sequence-to-sequence detector and the
//!   attention-pooling baseline.
//! * [`train`]: the batch training loop.
//! * [`decoder`]: frame-synchronous streaming inference with n-frame
//!   smoothing and a refractory trigger.
//! * [`eval`]: ROC sweeps and FRR at a fixed false-alarm rate.
//!
//! File formats, audio IO and the command line live in the `kws` crate.

#![no_std]

extern crate alloc;

pub mod decoder;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod labeling;
pub mod model;
pub mod nn;
pub mod real;
pub mod train;

pub use error::{Error, Result};
pub use real::Real;
