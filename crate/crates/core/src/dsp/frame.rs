use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};

/// Mono audio with amplitudes nominally in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f32>,
    sample_rate_hz: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f32>, sample_rate_hz: u32) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(Error::invalid("sample rate", "must be positive"));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("waveform samples"));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    /// Converts signed 16-bit PCM to `[-1, 1)` amplitudes.
    pub fn from_pcm16(pcm: &[i16], sample_rate_hz: u32) -> Result<Self> {
        Self::new(
            pcm.iter().map(|&s| s as f32 / 32768.0).collect(),
            sample_rate_hz,
        )
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }
}

/// Analysis window and hop, in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameSpec {
    pub window_ms: u32,
    pub shift_ms: u32,
}

impl Default for FrameSpec {
    fn default() -> Self {
        Self {
            window_ms: 25,
            shift_ms: 10,
        }
    }
}

impl FrameSpec {
    pub fn validate(&self) -> Result<()> {
        if self.window_ms == 0 || self.shift_ms == 0 {
            return Err(Error::invalid(
                "frame spec",
                "window and shift must be positive",
            ));
        }
        if self.shift_ms > self.window_ms {
            return Err(Error::invalid("frame spec", "shift exceeds window"));
        }
        Ok(())
    }

    pub fn window_samples(&self, sample_rate_hz: u32) -> usize {
        (sample_rate_hz as u64 * self.window_ms as u64 / 1000) as usize
    }

    pub fn shift_samples(&self, sample_rate_hz: u32) -> usize {
        (sample_rate_hz as u64 * self.shift_ms as u64 / 1000) as usize
    }

    pub fn shift_seconds(&self) -> f64 {
        self.shift_ms as f64 / 1000.0
    }
}

/// Number of complete frames in `len` samples; zero when shorter than a window.
pub fn frame_count(len: usize, window: usize, shift: usize) -> usize {
    if len < window || window == 0 || shift == 0 {
        0
    } else {
        (len - window) / shift + 1
    }
}

/// Periodic Hann window.
pub fn hann_window(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * libm::cos(2.0 * PI * n as f64 / len as f64))
        .collect()
}

pub(crate) fn apply_window(samples: &[f32], window: &[f64]) -> Vec<f64> {
    samples
        .iter()
        .zip(window)
        .map(|(&s, &w)| s as f64 * w)
        .collect()
}

/// Splits `wave` into Hann-windowed frames; frame `t` covers samples
/// `[t * shift, t * shift + window)`.
pub fn frame_signal(wave: &Waveform, spec: &FrameSpec) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    let window = spec.window_samples(wave.sample_rate_hz);
    let shift = spec.shift_samples(wave.sample_rate_hz);
    if window == 0 || shift == 0 {
        return Err(Error::invalid(
            "frame spec",
            "window shorter than one sample",
        ));
    }
    let n = frame_count(wave.samples.len(), window, shift);
    if n == 0 {
        return Err(Error::EmptyInput("audio shorter than one analysis window"));
    }
    let taper = hann_window(window);
    Ok((0..n)
        .map(|t| apply_window(&wave.samples[t * shift..t * shift + window], &taper))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn wave(len: usize) -> Waveform {
        Waveform::new(alloc::vec![0.1; len], 16_000).unwrap()
    }

    #[test]
    fn exactly_one_window() {
        let frames = frame_signal(&wave(400), &FrameSpec::default()).unwrap();
        assert_eq!(frames.len(), 1);
        assert_eq!(frames[0].len(), 400);
    }

    #[test]
    fn thousand_samples_give_four_frames() {
        let spec = FrameSpec::default();
        let frames = frame_signal(&wave(1000), &spec).unwrap();
        assert_eq!(frames.len(), 4);
        // starts 0, 160, 320, 480: the last frame ends at 880 <= 1000 and a
        // fifth would end at 1040
        assert_eq!(spec.shift_samples(16_000) * 3 + 400, 880);
    }

    #[test]
    fn shorter_than_window_is_an_error() {
        assert!(matches!(
            frame_signal(&wave(399), &FrameSpec::default()),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn frame_contents_are_windowed_slices() {
        let samples: Vec<f32> = (0..1000).map(|i| (i as f32 * 0.01).sin()).collect();
        let w = Waveform::new(samples.clone(), 16_000).unwrap();
        let frames = frame_signal(&w, &FrameSpec::default()).unwrap();
        let taper = hann_window(400);
        for (t, f) in frames.iter().enumerate() {
            for n in 0..400 {
                assert_eq!(f[n], samples[t * 160 + n] as f64 * taper[n]);
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(Waveform::new(alloc::vec![0.0, f32::NAN], 16_000).is_err());
        assert!(Waveform::new(alloc::vec![0.0], 0).is_err());
        let bad = FrameSpec {
            window_ms: 10,
            shift_ms: 25,
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn hann_is_periodic() {
        let w = hann_window(8);
        assert_eq!(w[0], 0.0);
        assert!((w[4] - 1.0).abs() < 1e-15);
        assert!((w[2] - w[6]).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn frame_count_formula(len in 400usize..20_000) {
            let frames = frame_signal(&wave(len), &FrameSpec::default()).unwrap();
            prop_assert_eq!(frames.len(), (len - 400) / 160 + 1);
            // one more frame would overrun the signal
            prop_assert!((frames.len()) * 160 + 400 > len);
        }
    }
}
