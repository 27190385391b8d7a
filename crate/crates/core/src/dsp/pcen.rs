use alloc::vec::Vec;

use super::features::FeatureMatrix;
use super::frame::FrameSpec;
use crate::error::{Error, Result};
use crate::nn::Matrix;

/// Per-channel energy normalization parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcenConfig {
    /// Smoother coefficient `s` in `M(t) = (1 - s) M(t-1) + s E(t)`.
    pub smoothing: f64,
    /// Gain normalization exponent.
    pub alpha: f64,
    pub delta: f64,
    /// Root compression exponent.
    pub root: f64,
    pub epsilon: f64,
}

impl Default for PcenConfig {
    fn default() -> Self {
        Self {
            smoothing: 0.025,
            alpha: 0.98,
            delta: 2.0,
            root: 0.5,
            epsilon: 1e-6,
        }
    }
}

impl PcenConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.smoothing > 0.0
            && self.smoothing <= 1.0
            && self.alpha > 0.0
            && self.alpha <= 1.0
            && self.delta > 0.0
            && self.root > 0.0
            && self.root <= 1.0
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(
                "PCEN config",
                "need 0<s<=1, 0<alpha<=1, delta>0, 0<r<=1, epsilon>0",
            ))
        }
    }

    /// Steady-state output for a constant energy `c` (where `M = c`).
    pub fn fixed_point(&self, c: f64) -> f64 {
        libm::pow(
            c / libm::pow(self.epsilon + c, self.alpha) + self.delta,
            self.root,
        ) - libm::pow(self.delta, self.root)
    }
}

/// Causal smoother memory for one stream.
#[derive(Debug, Clone, PartialEq)]
pub struct PcenState {
    cfg: PcenConfig,
    smoothed: Vec<f64>,
    started: bool,
}

impl PcenState {
    pub fn new(cfg: PcenConfig, channels: usize) -> Self {
        Self {
            cfg,
            smoothed: alloc::vec![0.0; channels],
            started: false,
        }
    }

    pub fn reset(&mut self) {
        self.smoothed.iter_mut().for_each(|m| *m = 0.0);
        self.started = false;
    }

    /// Normalizes one frame of energies into `out`.
    pub fn step(&mut self, energies: &[f64], out: &mut [f32]) -> Result<()> {
        if energies.len() != self.smoothed.len() || out.len() != energies.len() {
            return Err(Error::DimensionMismatch {
                what: "PCEN channels",
                expected: self.smoothed.len(),
                found: energies.len(),
            });
        }
        if energies.iter().any(|&e| e.is_nan() || e < 0.0) {
            return Err(Error::invalid(
                "PCEN input",
                "energies must be non-negative",
            ));
        }
        let c = &self.cfg;
        let offset = libm::pow(c.delta, c.root);
        for ((m, &e), o) in self.smoothed.iter_mut().zip(energies).zip(out.iter_mut()) {
            *m = if self.started {
                (1.0 - c.smoothing) * *m + c.smoothing * e
            } else {
                e
            };
            let v = libm::pow(e / libm::pow(c.epsilon + *m, c.alpha) + c.delta, c.root) - offset;
            *o = v as f32;
        }
        self.started = true;
        Ok(())
    }
}

/// PCEN over a whole utterance of filterbank energies.
pub fn pcen(mel: &Matrix<f64>, cfg: &PcenConfig, frame_spec: FrameSpec) -> Result<FeatureMatrix> {
    cfg.validate()?;
    let mut state = PcenState::new(*cfg, mel.cols());
    let mut data = alloc::vec![0.0f32; mel.rows() * mel.cols()];
    for t in 0..mel.rows() {
        let cols = mel.cols();
        state.step(mel.row(t), &mut data[t * cols..(t + 1) * cols])?;
    }
    FeatureMatrix::new(data, mel.rows(), frame_spec)
}
