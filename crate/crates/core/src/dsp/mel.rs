use alloc::vec::Vec;

use super::fft::{power_spectrum, Fft};
use crate::error::{Error, Result};
use crate::nn::Matrix;

/// HTK mel scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * libm::log10(1.0 + hz / 700.0)
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (libm::pow(10.0, mel / 2595.0) - 1.0)
}

/// Triangular filters, equally spaced on the mel scale, evaluated at the
/// FFT bin centre frequencies.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    n_filters: usize,
    n_fft: usize,
    sample_rate_hz: u32,
    f_min: f64,
    f_max: f64,
    /// `n_filters` rows by `n_fft / 2 + 1` bins.
    weights: Vec<Vec<f64>>,
    fft: Fft,
}

impl MelFilterbank {
    pub fn new(
        n_filters: usize,
        n_fft: usize,
        sample_rate_hz: u32,
        f_min: f64,
        f_max: f64,
    ) -> Result<Self> {
        if n_filters == 0 {
            return Err(Error::invalid(
                "mel filterbank",
                "needs at least one filter",
            ));
        }
        let nyquist = sample_rate_hz as f64 / 2.0;
        if !(f_min >= 0.0 && f_min < f_max && f_max <= nyquist) {
            return Err(Error::invalid(
                "mel filterbank",
                alloc::format!("need 0 <= f_min < f_max <= {nyquist} Hz"),
            ));
        }
        let fft = Fft::new(n_fft)?;
        let bins = n_fft / 2 + 1;
        let (lo, hi) = (hz_to_mel(f_min), hz_to_mel(f_max));
        let edges: Vec<f64> = (0..n_filters + 2)
            .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n_filters + 1) as f64))
            .collect();
        let bin_hz = sample_rate_hz as f64 / n_fft as f64;
        let mut weights = Vec::with_capacity(n_filters);
        for f in 0..n_filters {
            let (left, centre, right) = (edges[f], edges[f + 1], edges[f + 2]);
            let row: Vec<f64> = (0..bins)
                .map(|k| {
                    let hz = k as f64 * bin_hz;
                    let rise = (hz - left) / (centre - left);
                    let fall = (right - hz) / (right - centre);
                    rise.min(fall).max(0.0)
                })
                .collect();
            if row.iter().sum::<f64>() <= 0.0 {
                return Err(Error::invalid(
                    "mel filterbank",
                    alloc::format!("filter {f} covers no FFT bin; increase n_fft or f_min"),
                ));
            }
            weights.push(row);
        }
        Ok(Self {
            n_filters,
            n_fft,
            sample_rate_hz,
            f_min,
            f_max,
            weights,
            fft,
        })
    }

    pub fn n_filters(&self) -> usize {
        self.n_filters
    }

    pub fn n_fft(&self) -> usize {
        self.n_fft
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn range_hz(&self) -> (f64, f64) {
        (self.f_min, self.f_max)
    }

    pub fn weights(&self, filter: usize) -> &[f64] {
        &self.weights[filter]
    }

    /// Centre frequency of each filter in Hz.
    pub fn centres_hz(&self) -> Vec<f64> {
        let (lo, hi) = (hz_to_mel(self.f_min), hz_to_mel(self.f_max));
        (1..=self.n_filters)
            .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (self.n_filters + 1) as f64))
            .collect()
    }

    pub(crate) fn apply(&self, power: &[f64], out: &mut [f64]) {
        for (o, w) in out.iter_mut().zip(&self.weights) {
            *o = w.iter().zip(power).map(|(a, b)| a * b).sum();
        }
    }

    pub(crate) fn frame_energies(&self, frame: &[f64], out: &mut [f64]) -> Result<()> {
        let power = power_spectrum(&self.fft, frame)?;
        self.apply(&power, out);
        Ok(())
    }
}

/// Filterbank energies of already-windowed frames: one row per frame, one
/// column per filter.
pub fn mel_energies(frames: &[Vec<f64>], fbank: &MelFilterbank) -> Result<Matrix<f64>> {
    if frames.is_empty() {
        return Err(Error::EmptyInput("no frames"));
    }
    let mut out = Matrix::zeros(frames.len(), fbank.n_filters);
    for (t, frame) in frames.iter().enumerate() {
        fbank.frame_energies(frame, out.row_mut(t))?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::hann_window;
    use core::f64::consts::PI;

    fn default_bank() -> MelFilterbank {
        MelFilterbank::new(40, 512, 16_000, 20.0, 8000.0).unwrap()
    }

    #[test]
    fn mel_scale_round_trips() {
        for hz in [0.0, 20.0, 700.0, 8000.0] {
            assert!((mel_to_hz(hz_to_mel(hz)) - hz).abs() < 1e-9);
        }
        assert!((hz_to_mel(700.0) - 2595.0 * 2f64.log10()).abs() < 1e-12);
    }

    #[test]
    fn filters_are_nonnegative_and_overlap() {
        let bank = default_bank();
        for f in 0..40 {
            let w = bank.weights(f);
            assert!(w.iter().all(|&v| v >= 0.0));
            assert!(w.iter().sum::<f64>() > 0.0);
        }
        for f in 0..39 {
            let overlap = bank
                .weights(f)
                .iter()
                .zip(bank.weights(f + 1))
                .any(|(a, b)| *a > 0.0 && *b > 0.0);
            assert!(overlap, "filters {f} and {} do not overlap", f + 1);
        }
    }

    #[test]
    fn zero_frame_gives_zero_energies() {
        let e = mel_energies(&[alloc::vec![0.0; 400]], &default_bank()).unwrap();
        assert!(e.row(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn tone_peaks_in_its_own_band() {
        let bank = default_bank();
        let centres = bank.centres_hz();
        let taper = hann_window(400);
        for &f in &[5usize, 12, 20, 30, 38] {
            let hz = centres[f];
            let frame: Vec<f64> = (0..400)
                .map(|n| (2.0 * PI * hz * n as f64 / 16_000.0).sin() * taper[n])
                .collect();
            let e = mel_energies(&[frame], &bank).unwrap();
            let row = e.row(0);
            for g in 0..40 {
                if g + 2 <= f || g >= f + 2 {
                    assert!(row[f] > row[g], "band {f} vs {g}: {} <= {}", row[f], row[g]);
                }
            }
        }
    }

    #[test]
    fn dc_only_frame_is_silent_when_f_min_positive() {
        let bank = default_bank();
        assert!((0..40).all(|f| bank.weights(f)[0] == 0.0));
        // an unwindowed constant frame of FFT length has energy in bin 0 only
        let e = mel_energies(&[alloc::vec![1.0; 512]], &bank).unwrap();
        let dc_power = 512.0f64 * 512.0;
        assert!(e.row(0).iter().all(|&v| v < dc_power * 1e-20));
    }

    #[test]
    fn rejects_degenerate_configs() {
        assert!(MelFilterbank::new(40, 512, 16_000, 100.0, 50.0).is_err());
        assert!(MelFilterbank::new(40, 512, 16_000, 20.0, 9000.0).is_err());
        // far too many filters for the bin resolution
        assert!(MelFilterbank::new(400, 64, 16_000, 20.0, 8000.0).is_err());
    }
}
