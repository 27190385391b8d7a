//! Mini-batch training: forward, weighted cross-entropy, L2, BPTT,
//! global-norm clipping, Adam.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dsp::FeatureMatrix;
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalConfig, EvalSet};
use crate::labeling::LabelSequence;
use crate::model::{baseline_window, KwsModel};
use crate::nn::{apply_l2, clip_global_norm, AdamConfig, AdamState, Parameters};
use crate::real::Real;

/// Named sub-seed streams derived from the run seed.
pub mod seeds {
    pub const INIT: u64 = 1;
    pub const SHUFFLE: u64 = 2;
    pub const DATA: u64 = 3;
}

/// Independent seed for one named stream of randomness.
pub fn sub_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.next_u64()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr: f64,
    pub clip_norm: f64,
    pub l2: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            lr: 1e-3,
            clip_norm: 1.0,
            l2: 1e-5,
            epochs: 10,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::invalid(
                "train config",
                "batch size and epochs must be >= 1",
            ));
        }
        if !(self.lr >= 0.0 && self.clip_norm > 0.0 && self.l2 >= 0.0) {
            return Err(Error::invalid(
                "train config",
                "need lr >= 0, clip_norm > 0, l2 >= 0",
            ));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            ..AdamConfig::default()
        }
    }
}

/// One training utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub id: String,
    pub features: FeatureMatrix,
    pub labels: LabelSequence,
    /// Frames `[start, end)` of the first keyword occurrence, if any.
    pub keyword: Option<(usize, usize)>,
}

impl Example {
    pub fn new(
        id: impl Into<String>,
        features: FeatureMatrix,
        labels: LabelSequence,
        keyword: Option<(usize, usize)>,
    ) -> Result<Self> {
        if labels.len() != features.frames() {
            return Err(Error::DimensionMismatch {
                what: "label/feature length",
                expected: features.frames(),
                found: labels.len(),
            });
        }
        Ok(Self {
            id: id.into(),
            features,
            labels,
            keyword,
        })
    }

    pub fn is_positive(&self) -> bool {
        self.keyword.is_some() || self.labels.is_positive()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    /// Data loss before the L2 term.
    pub loss: f64,
    pub grad_norm: f64,
    /// True when the batch had no weighted frame and no update was made.
    pub skipped: bool,
}

pub struct Trainer<T: Real> {
    model: KwsModel<T>,
    adam: AdamState<T>,
    cfg: TrainConfig,
    rng: ChaCha8Rng,
    steps: u64,
    epochs_done: u64,
}

fn epoch_rng(seed: u64, epoch: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, seeds::SHUFFLE));
    rng.set_stream(epoch);
    rng
}

impl<T: Real> Trainer<T> {
    pub fn new(model: KwsModel<T>, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            adam: AdamState::new(&model, cfg.adam()),
            rng: epoch_rng(cfg.seed, 0),
            model,
            cfg,
            steps: 0,
            epochs_done: 0,
        })
    }

    pub fn model(&self) -> &KwsModel<T> {
        &self.model
    }

    pub fn into_model(self) -> KwsModel<T> {
        self.model
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn epochs_done(&self) -> u64 {
        self.epochs_done
    }

    pub fn optimizer(&self) -> &AdamState<T> {
        &self.adam
    }

    /// Restores optimizer moments and progress after `epochs_done` full
    /// epochs. Shuffling depends only on the seed and epoch index, so the
    /// next epoch matches an uninterrupted run.
    pub fn resume(&mut self, adam: AdamState<T>, epochs_done: u64) -> Result<()> {
        if adam.m.len() != self.model.param_count() || adam.v.len() != adam.m.len() {
            return Err(Error::DimensionMismatch {
                what: "optimizer state size",
                expected: self.model.param_count(),
                found: adam.m.len(),
            });
        }
        self.steps = adam.step;
        self.adam = adam;
        self.epochs_done = epochs_done;
        Ok(())
    }

    /// Mean data loss of a batch and its gradient (before L2 and clipping).
    pub fn batch_gradient(&mut self, batch: &[&Example]) -> Result<(T, KwsModel<T>, T)> {
        if batch.is_empty() {
            return Err(Error::EmptyInput("batch"));
        }
        let mut grad = self.model.zeros_like();
        let mut loss = T::zero();
        let mut weight = T::zero();
        match &self.model {
            KwsModel::Seq2Seq(m) => {
                // per-utterance sums, so padding-free batches match padded ones
                for ex in batch {
                    let (l, w, g) = m.loss_and_grad(&ex.features.to_matrix(), &ex.labels)?;
                    loss += l;
                    weight += w;
                    if let KwsModel::Seq2Seq(acc) = &mut grad {
                        acc.add_assign(&g);
                    }
                }
            }
            KwsModel::Attention(m) => {
                for ex in batch {
                    let x =
                        baseline_window(&ex.features, ex.keyword, m.train_window, &mut self.rng);
                    let (l, g) = m.loss_and_grad(&x, ex.is_positive())?;
                    loss += l;
                    weight += T::one();
                    if let KwsModel::Attention(acc) = &mut grad {
                        acc.add_assign(&g);
                    }
                }
            }
        }
        if weight > T::zero() {
            let inv = T::one() / weight;
            grad.scale(inv);
            loss *= inv;
        }
        Ok((loss, grad, weight))
    }

    /// One optimizer step on `batch`.
    pub fn step(&mut self, batch: &[&Example]) -> Result<StepStats> {
        let (loss, mut grad, weight) = self.batch_gradient(batch)?;
        if !loss.is_finite() || !grad.is_finite() {
            return Err(Error::NonFinite("training loss or gradient"));
        }
        if weight == T::zero() {
            return Ok(StepStats {
                loss: 0.0,
                grad_norm: 0.0,
                skipped: true,
            });
        }
        apply_l2(loss, &mut grad, &self.model, T::lit(self.cfg.l2));
        let norm = clip_global_norm(&mut grad, T::lit(self.cfg.clip_norm));
        self.adam.step(&mut self.model, &grad);
        self.steps += 1;
        if !self.model.is_finite() {
            return Err(Error::NonFinite("model parameters"));
        }
        Ok(StepStats {
            loss: loss.as_f64(),
            grad_norm: norm.as_f64(),
            skipped: false,
        })
    }

    /// One pass over `data` in a seeded shuffled order; returns the mean
    /// step loss.
    pub fn epoch(&mut self, data: &[Example]) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::EmptyInput("training set"));
        }
        self.rng = epoch_rng(self.cfg.seed, self.epochs_done);
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut self.rng);
        let mut total = 0.0;
        let mut count = 0usize;
        for chunk in order.chunks(self.cfg.batch_size) {
            let batch: Vec<&Example> = chunk.iter().map(|&i| &data[i]).collect();
            let s = self.step(&batch)?;
            if !s.skipped {
                total += s.loss;
                count += 1;
            }
        }
        self.epochs_done += 1;
        Ok(if count == 0 {
            0.0
        } else {
            total / count as f64
        })
    }
}

/// Mean loss of `model` over `data` with the training objective and no
/// regularization. Baseline windows use a fixed crop seed.
pub fn dataset_loss<T: Real>(model: &KwsModel<T>, data: &[Example]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyInput("dataset"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    match model {
        KwsModel::Seq2Seq(m) => {
            let mut loss = 0.0;
            let mut weight = 0.0;
            for ex in data {
                let (logits, _, _) = m.logits(&ex.features.to_matrix())?;
                let (l, w, _) = crate::nn::loss::weighted_xent_sum(&logits, &ex.labels)?;
                loss += l.as_f64();
                weight += w.as_f64();
            }
            Ok(if weight > 0.0 { loss / weight } else { 0.0 })
        }
        KwsModel::Attention(m) => {
            let mut loss = 0.0;
            for ex in data {
                let x = baseline_window(&ex.features, ex.keyword, m.train_window, &mut rng);
                let out = m.forward_window(&x)?;
                let p = if ex.is_positive() {
                    out.probability
                } else {
                    T::one() - out.probability
                };
                loss -= libm::log(p.as_f64().max(1e-300));
            }
            Ok(loss / data.len() as f64)
        }
    }
}

/// Splits examples into an evaluation set by polarity.
pub fn eval_set_from(examples: &[Example]) -> EvalSet {
    let mut set = EvalSet::default();
    for ex in examples {
        let item = (ex.id.clone(), ex.features.clone());
        if ex.is_positive() {
            set.positives.push(item);
        } else {
            set.negatives.push(item);
        }
    }
    set
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochReport {
    pub epoch: usize,
    pub step: u64,
    pub train_loss: f64,
    pub dev_loss: Option<f64>,
    /// FRR at the target false-alarm rate on the dev set.
    pub dev_frr: Option<f64>,
}

/// Dev-set ranking key of an epoch: lower FRR wins, then lower dev loss;
/// ties keep the earlier epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    pub epoch: usize,
    pub dev_frr: f64,
    pub dev_loss: f64,
}

impl Selection {
    pub fn of(report: &EpochReport) -> Self {
        Self {
            epoch: report.epoch,
            dev_frr: report.dev_frr.unwrap_or(0.0),
            dev_loss: report.dev_loss.unwrap_or(0.0),
        }
    }

    pub fn beats(&self, other: &Self) -> bool {
        self.dev_frr < other.dev_frr
            || (self.dev_frr == other.dev_frr && self.dev_loss < other.dev_loss)
    }
}

/// Trains until `trainer` has completed `epochs` epochs, evaluating on
/// `dev` after each one. `on_epoch` receives the report, the trainer, and
/// whether this epoch is the new best. Without a dev set every epoch
/// counts as the new best. Returns the reports of the epochs run here and
/// the overall best selection, starting from `best`.
pub fn fit<T: Real, E: From<Error>>(
    trainer: &mut Trainer<T>,
    train: &[Example],
    dev: Option<(&[Example], &EvalConfig)>,
    epochs: usize,
    mut best: Option<Selection>,
    mut on_epoch: impl FnMut(&EpochReport, &Trainer<T>, bool) -> core::result::Result<(), E>,
) -> core::result::Result<(Vec<EpochReport>, Option<Selection>), E> {
    let dev_set = dev.map(|(d, _)| eval_set_from(d));
    let mut reports = Vec::new();
    while (trainer.epochs_done() as usize) < epochs {
        let train_loss = trainer.epoch(train)?;
        let mut report = EpochReport {
            epoch: trainer.epochs_done() as usize,
            step: trainer.steps(),
            train_loss,
            dev_loss: None,
            dev_frr: None,
        };
        if let (Some((dev_examples, eval_cfg)), Some(set)) = (dev, &dev_set) {
            report.dev_loss = Some(dataset_loss(trainer.model(), dev_examples)?);
            if !set.positives.is_empty() && !set.negatives.is_empty() {
                let r = evaluate(trainer.model(), set, eval_cfg)?;
                report.dev_frr = Some(r.operating.point.frr);
            }
        }
        let sel = Selection::of(&report);
        let improved = match &best {
            None => true,
            Some(b) => dev.is_none() || sel.beats(b),
        };
        if improved {
            best = Some(sel);
        }
        on_epoch(&report, trainer, improved)?;
        reports.push(report);
    }
    Ok((reports, best))
}
