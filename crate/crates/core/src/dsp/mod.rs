//! Audio front end: 25 ms / 10 ms framing, 40 mel filterbank energies and
//! per-channel energy normalization.
//!
//! The batch path ([`featurize`]) and the streaming path ([`Frontend`]) share
//! every per-frame helper, so they produce bit-identical features.

mod features;
mod fft;
mod frame;
mod frontend;
mod mel;
mod pcen;

pub use features::{FeatureMatrix, FEATURE_DIM};
pub use fft::{power_spectrum, Fft};
pub use frame::{frame_count, frame_signal, hann_window, FrameSpec, Waveform};
pub use frontend::{featurize, Frontend, FrontendConfig};
pub use mel::{hz_to_mel, mel_energies, mel_to_hz, MelFilterbank};
pub use pcen::{pcen, PcenConfig, PcenState};
