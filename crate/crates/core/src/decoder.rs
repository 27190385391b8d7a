//! Frame-synchronous streaming detection.
//!
//! Each frame advances the model state by one step, the raw keyword
//! probability is averaged with the previous `n - 1` (fewer during warm-up),
//! and a trigger fires when the average reaches the threshold outside the
//! refractory lockout.

use alloc::vec::Vec;

use crate::dsp::FeatureMatrix;
use crate::error::{Error, Result};
use crate::model::{KwsModel, StreamState};
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoderConfig {
    /// Smoothing length `n`.
    pub smoothing: usize,
    pub threshold: f64,
    /// Frames suppressed after each trigger.
    pub lockout_frames: usize,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self {
            smoothing: 12,
            threshold: 0.5,
            lockout_frames: 100,
        }
    }
}

impl DecoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.smoothing == 0 {
            return Err(Error::invalid("smoothing", "n must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::invalid("threshold", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Running mean of the last `n` values.
#[derive(Debug, Clone)]
pub struct Smoother<T> {
    ring: Vec<T>,
    next: usize,
    filled: usize,
}

impl<T: Real> Smoother<T> {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "smoothing length must be >= 1");
        Self {
            ring: alloc::vec![T::zero(); n],
            next: 0,
            filled: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.ring.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filled == 0
    }

    /// Number of values currently averaged.
    pub fn filled(&self) -> usize {
        self.filled
    }

    pub fn reset(&mut self) {
        self.next = 0;
        self.filled = 0;
        self.ring.iter_mut().for_each(|v| *v = T::zero());
    }

    /// Pushes `y` and returns the mean of the last `min(count, n)` values,
    /// summed oldest first.
    pub fn push(&mut self, y: T) -> T {
        let n = self.ring.len();
        self.ring[self.next] = y;
        self.next = (self.next + 1) % n;
        self.filled = (self.filled + 1).min(n);
        let oldest = (self.next + n - self.filled) % n;
        let mut sum = T::zero();
        for k in 0..self.filled {
            sum += self.ring[(oldest + k) % n];
        }
        sum / T::of_usize(self.filled)
    }
}

/// Smooths a whole probability track.
pub fn smooth<T: Real>(raw: &[T], n: usize) -> Vec<T> {
    let mut s = Smoother::new(n);
    raw.iter().map(|&y| s.push(y)).collect()
}

/// Threshold-and-lockout trigger logic shared by the decoder and the false
/// alarm counter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriggerGate {
    threshold: f64,
    lockout: usize,
    remaining: usize,
}

impl TriggerGate {
    pub fn new(threshold: f64, lockout: usize) -> Self {
        Self {
            threshold,
            lockout,
            remaining: 0,
        }
    }

    pub fn lockout_remaining(&self) -> usize {
        self.remaining
    }

    pub fn reset(&mut self) {
        self.remaining = 0;
    }

    /// Returns true when this frame fires.
    #[inline]
    pub fn push(&mut self, y_hat: f64) -> bool {
        if self.remaining == 0 && y_hat >= self.threshold {
            self.remaining = self.lockout;
            true
        } else {
            self.remaining = self.remaining.saturating_sub(1);
            false
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriggerEvent {
    pub frame_index: u64,
    pub smoothed_probability: f64,
}

/// Per-stream decoder state bound to a shared model.
#[derive(Debug, Clone)]
pub struct StreamingDecoder<'m, T> {
    model: &'m KwsModel<T>,
    config: DecoderConfig,
    state: StreamState<T>,
    smoother: Smoother<T>,
    gate: TriggerGate,
    frames_seen: u64,
}

impl<'m, T: Real> StreamingDecoder<'m, T> {
    pub fn new(model: &'m KwsModel<T>, config: DecoderConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            model,
            state: model.new_stream(),
            smoother: Smoother::new(config.smoothing),
            gate: TriggerGate::new(config.threshold, config.lockout_frames),
            frames_seen: 0,
            config,
        })
    }

    pub fn config(&self) -> &DecoderConfig {
        &self.config
    }

    pub fn frames_seen(&self) -> u64 {
        self.frames_seen
    }

    pub fn lockout_remaining(&self) -> usize {
        self.gate.lockout_remaining()
    }

    pub fn buffered(&self) -> usize {
        self.smoother.filled()
    }

    pub fn model_state(&self) -> &StreamState<T> {
        &self.state
    }

    /// Consumes one feature row; returns the raw and smoothed probability
    /// and the trigger event, if any.
    pub fn push_frame(&mut self, frame: &[f32]) -> Result<FrameResult<T>> {
        let raw = self.model.stream_step(&mut self.state, frame)?;
        let smoothed = self.smoother.push(raw);
        let index = self.frames_seen;
        self.frames_seen += 1;
        let event = self.gate.push(smoothed.as_f64()).then_some(TriggerEvent {
            frame_index: index,
            smoothed_probability: smoothed.as_f64(),
        });
        Ok(FrameResult {
            raw,
            smoothed,
            event,
        })
    }

    pub fn reset(&mut self) {
        self.state.reset();
        self.smoother.reset();
        self.gate.reset();
        self.frames_seen = 0;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameResult<T> {
    pub raw: T,
    pub smoothed: T,
    pub event: Option<TriggerEvent>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamOutput<T> {
    pub events: Vec<TriggerEvent>,
    pub raw: Vec<T>,
    pub smoothed: Vec<T>,
}

/// Feeds every row of `features` through a fresh decoder.
pub fn run_stream<T: Real>(
    model: &KwsModel<T>,
    features: &FeatureMatrix,
    config: DecoderConfig,
) -> Result<StreamOutput<T>> {
    let mut dec = StreamingDecoder::new(model, config)?;
    let mut out = StreamOutput {
        events: Vec::new(),
        raw: Vec::with_capacity(features.frames()),
        smoothed: Vec::with_capacity(features.frames()),
    };
    for row in features.rows() {
        let r = dec.push_frame(row)?;
        out.raw.push(r.raw);
        out.smoothed.push(r.smoothed);
        out.events.extend(r.event);
    }
    Ok(out)
}
