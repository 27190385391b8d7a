//! ROC evaluation: FRR against false alarms per hour over a threshold grid.
//!
//! A positive clip counts as detected when the maximum of its smoothed
//! track reaches the threshold. False alarms are counted on negative audio
//! with the same trigger lockout used in deployment.

use alloc::string::String;
use alloc::vec::Vec;

use crate::decoder::{smooth, TriggerGate};
use crate::dsp::FeatureMatrix;
use crate::error::{Error, Result};
use crate::model::KwsModel;
use crate::real::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub smoothing: usize,
    pub lockout_frames: usize,
    /// Ascending thresholds in `[0, 1]`.
    pub thresholds: Vec<f64>,
    pub target_fa_per_hour: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            smoothing: 12,
            lockout_frames: 100,
            thresholds: threshold_grid(1001),
            target_fa_per_hour: 0.1,
        }
    }
}

/// `points` evenly spaced thresholds from 0 to 1 inclusive.
pub fn threshold_grid(points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => alloc::vec![0.0],
        _ => (0..points)
            .map(|i| i as f64 / (points - 1) as f64)
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UtteranceScore {
    pub utt_id: String,
    pub score: f64,
}

/// Smoothed detection track of keyword-free audio.
#[derive(Debug, Clone, PartialEq)]
pub struct NegativeTrace {
    pub smoothed: Vec<f64>,
    pub duration_hours: f64,
}

impl NegativeTrace {
    pub fn new(smoothed: Vec<f64>, duration_hours: f64) -> Result<Self> {
        if smoothed.is_empty() {
            return Err(Error::EmptyInput("negative trace"));
        }
        if duration_hours.is_nan() || duration_hours <= 0.0 {
            return Err(Error::ZeroDuration);
        }
        Ok(Self {
            smoothed,
            duration_hours,
        })
    }
}

/// Trigger events the decoder would emit on this trace at `threshold`.
pub fn count_false_alarms(trace: &NegativeTrace, threshold: f64, lockout: usize) -> usize {
    let mut gate = TriggerGate::new(threshold, lockout);
    trace.smoothed.iter().filter(|&&y| gate.push(y)).count()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub frr: f64,
    pub fa_per_hour: f64,
    pub false_alarms: usize,
    pub misses: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub positives: usize,
    pub negative_hours: f64,
}

impl RocCurve {
    /// FRR non-decreasing and FA/hr non-increasing in the threshold.
    pub fn is_monotone(&self) -> bool {
        self.points.windows(2).all(|w| {
            w[0].threshold <= w[1].threshold
                && w[0].frr <= w[1].frr
                && w[0].fa_per_hour >= w[1].fa_per_hour
        })
    }
}

/// Operating point per threshold.
pub fn sweep_roc(
    positive_scores: &[f64],
    negatives: &[NegativeTrace],
    thresholds: &[f64],
    lockout: usize,
) -> Result<RocCurve> {
    if positive_scores.is_empty() {
        return Err(Error::EmptyInput("positive scores"));
    }
    if negatives.is_empty() {
        return Err(Error::EmptyInput("negative traces"));
    }
    if thresholds.is_empty() {
        return Err(Error::EmptyInput("threshold grid"));
    }
    let hours: f64 = negatives.iter().map(|n| n.duration_hours).sum();
    if hours.is_nan() || hours <= 0.0 {
        return Err(Error::ZeroDuration);
    }
    let mut grid = thresholds.to_vec();
    grid.sort_by(f64::total_cmp);
    let mut sorted = positive_scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let total = sorted.len() as f64;
    let points: Vec<RocPoint> = grid
        .iter()
        .map(|&th| {
            let misses = sorted.partition_point(|&s| s < th);
            let false_alarms: usize = negatives
                .iter()
                .map(|n| count_false_alarms(n, th, lockout))
                .sum();
            RocPoint {
                threshold: th,
                frr: misses as f64 / total,
                fa_per_hour: false_alarms as f64 / hours,
                false_alarms,
                misses,
            }
        })
        .collect();
    let curve = RocCurve {
        points,
        positives: sorted.len(),
        negative_hours: hours,
    };
    if !curve.is_monotone() {
        return Err(Error::invalid("ROC curve", "monotonicity violated"));
    }
    Ok(curve)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub point: RocPoint,
    /// False when no threshold reaches the target; `point` is then the
    /// highest-threshold point.
    pub meets_target: bool,
}

/// FRR at the smallest threshold whose FA/hr is within `target`; no
/// interpolation between grid points.
pub fn frr_at_fa(curve: &RocCurve, target: f64) -> Result<OperatingPoint> {
    let best = curve
        .points
        .iter()
        .filter(|p| p.fa_per_hour <= target)
        .min_by(|a, b| a.threshold.total_cmp(&b.threshold));
    if let Some(p) = best {
        return Ok(OperatingPoint {
            point: *p,
            meets_target: true,
        });
    }
    curve
        .points
        .iter()
        .max_by(|a, b| a.threshold.total_cmp(&b.threshold))
        .map(|p| OperatingPoint {
            point: *p,
            meets_target: false,
        })
        .ok_or(Error::EmptyInput("ROC curve"))
}

/// Labeled evaluation audio, already featurized.
#[derive(Debug, Clone, Default)]
pub struct EvalSet {
    pub positives: Vec<(String, FeatureMatrix)>,
    pub negatives: Vec<(String, FeatureMatrix)>,
}

/// Raw per-frame probabilities of every clip, computed once and reused for
/// any smoothing length.
#[derive(Debug, Clone)]
pub struct RawTracks {
    pub positives: Vec<(String, Vec<f64>)>,
    /// Track and audio duration in hours.
    pub negatives: Vec<(Vec<f64>, f64)>,
}

fn duration_hours(x: &FeatureMatrix) -> f64 {
    x.frames() as f64 * x.frame_spec().shift_seconds() / 3600.0
}

pub fn raw_tracks<T: Real>(model: &KwsModel<T>, set: &EvalSet) -> Result<RawTracks> {
    let track = |x: &FeatureMatrix| -> Result<Vec<f64>> {
        Ok(model
            .frame_probabilities(x)?
            .into_iter()
            .map(Real::as_f64)
            .collect())
    };
    let positives = set
        .positives
        .iter()
        .map(|(id, x)| Ok((id.clone(), track(x)?)))
        .collect::<Result<_>>()?;
    let negatives = set
        .negatives
        .iter()
        .map(|(_, x)| Ok((track(x)?, duration_hours(x))))
        .collect::<Result<_>>()?;
    Ok(RawTracks {
        positives,
        negatives,
    })
}

/// Each positive clip scored as the maximum of its smoothed track.
pub fn score_positives<T: Real>(
    model: &KwsModel<T>,
    positives: &[(String, FeatureMatrix)],
    smoothing: usize,
) -> Result<Vec<UtteranceScore>> {
    if positives.is_empty() {
        return Err(Error::EmptyInput("positive set"));
    }
    positives
        .iter()
        .map(|(id, x)| {
            let raw = model.frame_probabilities(x)?;
            Ok(UtteranceScore {
                utt_id: id.clone(),
                score: max_score(&smooth(&raw, smoothing)),
            })
        })
        .collect()
}

fn max_score<T: Real>(track: &[T]) -> f64 {
    track.iter().map(|v| v.as_f64()).fold(0.0f64, f64::max)
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub smoothing: usize,
    pub scores: Vec<UtteranceScore>,
    pub curve: RocCurve,
    pub operating: OperatingPoint,
}

/// ROC and headline operating point from precomputed raw tracks.
pub fn evaluate_tracks(
    tracks: &RawTracks,
    smoothing: usize,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    if smoothing == 0 {
        return Err(Error::invalid("smoothing", "n must be >= 1"));
    }
    let scores: Vec<UtteranceScore> = tracks
        .positives
        .iter()
        .map(|(id, raw)| UtteranceScore {
            utt_id: id.clone(),
            score: max_score(&smooth(raw, smoothing)),
        })
        .collect();
    let negatives = tracks
        .negatives
        .iter()
        .map(|(raw, hours)| NegativeTrace::new(smooth(raw, smoothing), *hours))
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = scores.iter().map(|s| s.score).collect();
    let curve = sweep_roc(&values, &negatives, &cfg.thresholds, cfg.lockout_frames)?;
    let operating = frr_at_fa(&curve, cfg.target_fa_per_hour)?;
    Ok(EvalReport {
        smoothing,
        scores,
        curve,
        operating,
    })
}

pub fn evaluate<T: Real>(
    model: &KwsModel<T>,
    set: &EvalSet,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    evaluate_tracks(&raw_tracks(model, set)?, cfg.smoothing, cfg)
}

/// One report per smoothing length, sharing the forward passes.
pub fn smoothing_sweep<T: Real>(
    model: &KwsModel<T>,
    set: &EvalSet,
    cfg: &EvalConfig,
    lengths: &[usize],
) -> Result<Vec<EvalReport>> {
    let tracks = raw_tracks(model, set)?;
    lengths
        .iter()
        .map(|&n| evaluate_tracks(&tracks, n, cfg))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub model: String,
    pub frr: f64,
    pub meets_target: bool,
    pub threshold: f64,
    pub params: usize,
    pub params_k: f64,
}

/// FRR at the target FA rate and parameter count of each named model.
pub fn compare_models<T: Real>(
    models: &[(String, &KwsModel<T>)],
    set: &EvalSet,
    cfg: &EvalConfig,
) -> Result<Vec<ComparisonRow>> {
    models
        .iter()
        .map(|(name, m)| {
            let r = evaluate(*m, set, cfg)?;
            Ok(ComparisonRow {
                model: name.clone(),
                frr: r.operating.point.frr,
                meets_target: r.operating.meets_target,
                threshold: r.operating.point.threshold,
                params: m.param_count(),
                params_k: m.param_count_k(),
            })
        })
        .collect()
}
