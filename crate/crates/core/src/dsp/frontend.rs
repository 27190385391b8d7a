use alloc::vec::Vec;

use super::features::{FeatureMatrix, FEATURE_DIM};
use super::frame::{apply_window, hann_window, FrameSpec, Waveform};
use super::mel::MelFilterbank;
use super::pcen::{PcenConfig, PcenState};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontendConfig {
    pub sample_rate_hz: u32,
    pub frame: FrameSpec,
    pub n_fft: usize,
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    pub pcen: PcenConfig,
}

impl Default for FrontendConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: 16_000,
            frame: FrameSpec::default(),
            n_fft: 512,
            f_min_hz: 20.0,
            f_max_hz: 8000.0,
            pcen: PcenConfig::default(),
        }
    }
}

impl FrontendConfig {
    pub fn validate(&self) -> Result<()> {
        self.frame.validate()?;
        self.pcen.validate()?;
        if self.sample_rate_hz == 0 {
            return Err(Error::invalid("sample rate", "must be positive"));
        }
        let window = self.frame.window_samples(self.sample_rate_hz);
        if self.frame.shift_samples(self.sample_rate_hz) == 0 {
            return Err(Error::invalid(
                "frame spec",
                "shift shorter than one sample",
            ));
        }
        if self.n_fft < window {
            return Err(Error::invalid(
                "FFT size",
                alloc::format!("{} is shorter than the {window}-sample window", self.n_fft),
            ));
        }
        Ok(())
    }

    pub fn filterbank(&self) -> Result<MelFilterbank> {
        MelFilterbank::new(
            FEATURE_DIM,
            self.n_fft,
            self.sample_rate_hz,
            self.f_min_hz,
            self.f_max_hz,
        )
    }
}

/// Streaming feature extractor: audio samples in, PCEN frames out.
///
/// Buffers at most one window of samples; the PCEN smoother carries over
/// between calls so chunked input gives the same features as one call.
#[derive(Debug, Clone)]
pub struct Frontend {
    cfg: FrontendConfig,
    window: Vec<f64>,
    shift: usize,
    fbank: MelFilterbank,
    pcen: PcenState,
    pending: Vec<f32>,
    energies: Vec<f64>,
}

impl Frontend {
    pub fn new(cfg: FrontendConfig) -> Result<Self> {
        cfg.validate()?;
        let window = hann_window(cfg.frame.window_samples(cfg.sample_rate_hz));
        Ok(Self {
            shift: cfg.frame.shift_samples(cfg.sample_rate_hz),
            fbank: cfg.filterbank()?,
            pcen: PcenState::new(cfg.pcen, FEATURE_DIM),
            pending: Vec::with_capacity(window.len() * 2),
            energies: alloc::vec![0.0; FEATURE_DIM],
            window,
            cfg,
        })
    }

    pub fn config(&self) -> &FrontendConfig {
        &self.cfg
    }

    pub fn reset(&mut self) {
        self.pending.clear();
        self.pcen.reset();
    }

    /// Feeds samples and calls `emit` with every completed feature row.
    pub fn push_samples(
        &mut self,
        samples: &[f32],
        mut emit: impl FnMut(&[f32; FEATURE_DIM]),
    ) -> Result<()> {
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("audio samples"));
        }
        let win = self.window.len();
        let mut row = [0.0f32; FEATURE_DIM];
        for chunk in samples.chunks(self.shift.max(1)) {
            self.pending.extend_from_slice(chunk);
            while self.pending.len() >= win {
                let frame = apply_window(&self.pending[..win], &self.window);
                self.fbank.frame_energies(&frame, &mut self.energies)?;
                self.pcen.step(&self.energies, &mut row)?;
                emit(&row);
                self.pending.drain(..self.shift);
            }
        }
        Ok(())
    }
}

/// Full front end over one utterance.
pub fn featurize(wave: &Waveform, cfg: &FrontendConfig) -> Result<FeatureMatrix> {
    if wave.sample_rate_hz() != cfg.sample_rate_hz {
        return Err(Error::invalid(
            "sample rate",
            alloc::format!(
                "expected {} Hz, got {} Hz",
                cfg.sample_rate_hz,
                wave.sample_rate_hz()
            ),
        ));
    }
    cfg.validate()?;
    let frames = super::frame::frame_signal(wave, &cfg.frame)?;
    let mel = super::mel::mel_energies(&frames, &cfg.filterbank()?)?;
    super::pcen::pcen(&mel, &cfg.pcen, cfg.frame)
}
