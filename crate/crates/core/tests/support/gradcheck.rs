//! Central-difference gradient checks in f64.
//!
//! Each check builds a small random layer, defines a scalar loss from its
//! output, and compares every analytic partial derivative (parameters and
//! inputs) with `(L(p + h) - L(p - h)) / 2h`.

use kws_core::labeling::LabelSequence;
use kws_core::model::{AttentionModel, EncoderConfig, ModelConfig, Seq2SeqModel};
use kws_core::nn::{
    weighted_softmax_xent, AttentionScorer, CellKind, Encoder, Linear, Matrix, Parameters,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STEP: f64 = 1e-5;
/// Denominator floor: partials smaller than this are compared absolutely.
pub const FLOOR: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct Summary {
    pub name: &'static str,
    pub trials: usize,
    pub checked: usize,
    pub max_rel: f64,
}

pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(FLOOR)
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

fn matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix<f64> {
    Matrix::from_vec(rows, cols, uniform(rng, rows * cols, scale)).unwrap()
}

fn randomize<P: Parameters<f64>>(p: &mut P, rng: &mut ChaCha8Rng, scale: f64) {
    let n = p.param_count();
    assert!(p.load_flat(&uniform(rng, n, scale)));
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Max relative error between `analytic` and central differences of
/// `loss` over the flat values `at`.
fn compare(at: &[f64], analytic: &[f64], mut loss: impl FnMut(&[f64]) -> f64) -> (usize, f64) {
    assert_eq!(at.len(), analytic.len());
    let mut probe = at.to_vec();
    let mut worst = 0.0f64;
    for i in 0..at.len() {
        probe[i] = at[i] + STEP;
        let up = loss(&probe);
        probe[i] = at[i] - STEP;
        let down = loss(&probe);
        probe[i] = at[i];
        worst = worst.max(rel_err(analytic[i], (up - down) / (2.0 * STEP)));
    }
    (at.len(), worst)
}

fn params_check<P: Parameters<f64>>(model: &P, grad: &P, loss: impl Fn(&P) -> f64) -> (usize, f64) {
    let mut probe = model.clone();
    compare(&model.flatten(), &grad.flatten(), |flat| {
        probe.load_flat(flat);
        loss(&probe)
    })
}

struct Acc {
    checked: usize,
    max_rel: f64,
}

impl Acc {
    fn add(&mut self, (n, e): (usize, f64)) {
        self.checked += n;
        self.max_rel = self.max_rel.max(e);
    }
}

fn run(
    name: &'static str,
    trials: usize,
    seed: u64,
    mut trial: impl FnMut(&mut ChaCha8Rng, &mut Acc),
) -> Summary {
    let mut acc = Acc {
        checked: 0,
        max_rel: 0.0,
    };
    for k in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(1_000_003) + k as u64);
        trial(&mut rng, &mut acc);
    }
    Summary {
        name,
        trials,
        checked: acc.checked,
        max_rel: acc.max_rel,
    }
}

pub fn linear(trials: usize) -> Summary {
    run("linear", trials, 1, |rng, acc| {
        let (i, o) = (rng.gen_range(1..7), rng.gen_range(1..7));
        let mut layer = Linear::<f64>::zeros(i, o);
        randomize(&mut layer, rng, 1.0);
        let x = uniform(rng, i, 1.0);
        let c = uniform(rng, o, 1.0);
        let mut grad = layer.zeros_like();
        let mut dx = vec![0.0; i];
        layer.backward(&x, &c, &mut grad, &mut dx);
        acc.add(params_check(&layer, &grad, |l| dot(&c, &l.forward(&x))));
        acc.add(compare(&x, &dx, |x| dot(&c, &layer.forward(x))));
    })
}

fn encoder(kind: CellKind, name: &'static str, seed: u64, trials: usize) -> Summary {
    run(name, trials, seed, |rng, acc| {
        let (i, h) = (rng.gen_range(1..5), rng.gen_range(1..5));
        let (layers, frames) = (rng.gen_range(1..3), rng.gen_range(1..7));
        let mut enc = Encoder::<f64>::zeros(kind, i, h, layers);
        randomize(&mut enc, rng, 0.8);
        let x = matrix(rng, frames, i, 1.0);
        let c = matrix(rng, frames, h, 1.0);
        let loss = |e: &Encoder<f64>, x: &Matrix<f64>| {
            let (out, _) = e.forward(x).unwrap();
            dot(out.as_slice(), c.as_slice())
        };
        let (_, cache) = enc.forward(&x).unwrap();
        let mut grad = enc.zeros_like();
        let dx = enc.backward(&cache, &c, &mut grad);
        acc.add(params_check(&enc, &grad, |e| loss(e, &x)));
        acc.add(compare(x.as_slice(), dx.as_slice(), |flat| {
            loss(&enc, &Matrix::from_vec(frames, i, flat.to_vec()).unwrap())
        }));
    })
}

pub fn lstm(trials: usize) -> Summary {
    encoder(CellKind::Lstm, "lstm", 2, trials)
}

pub fn gru(trials: usize) -> Summary {
    encoder(CellKind::Gru, "gru", 3, trials)
}

pub fn attention_scorer(trials: usize) -> Summary {
    run("attention scorer", trials, 4, |rng, acc| {
        let (h, a, frames) = (
            rng.gen_range(1..5),
            rng.gen_range(1..5),
            rng.gen_range(1..7),
        );
        let mut scorer = AttentionScorer::<f64>::zeros(h, a);
        randomize(&mut scorer, rng, 1.0);
        let hs = matrix(rng, frames, h, 1.0);
        let c = uniform(rng, h, 1.0);
        let loss =
            |s: &AttentionScorer<f64>, hs: &Matrix<f64>| dot(&c, &s.forward(hs).unwrap().context);
        let cache = scorer.forward(&hs).unwrap();
        let mut grad = scorer.zeros_like();
        let dh = scorer.backward(&hs, &cache, &c, &mut grad);
        acc.add(params_check(&scorer, &grad, |s| loss(s, &hs)));
        acc.add(compare(hs.as_slice(), dh.as_slice(), |flat| {
            loss(
                &scorer,
                &Matrix::from_vec(frames, h, flat.to_vec()).unwrap(),
            )
        }));
    })
}

fn random_labels(rng: &mut ChaCha8Rng, frames: usize) -> LabelSequence {
    let mut labels: Vec<i8> = (0..frames).map(|_| rng.gen_range(-1..2)).collect();
    let k = rng.gen_range(0..frames);
    if labels[k] < 0 {
        labels[k] = rng.gen_range(0..2);
    }
    LabelSequence::from_labels(labels).unwrap()
}

pub fn weighted_xent(trials: usize) -> Summary {
    run("weighted xent", trials, 5, |rng, acc| {
        let frames = rng.gen_range(1..9);
        let logits = matrix(rng, frames, 2, 3.0);
        let labels = random_labels(rng, frames);
        let out = weighted_softmax_xent(&logits, &labels).unwrap();
        acc.add(compare(logits.as_slice(), out.grad.as_slice(), |flat| {
            let m = Matrix::from_vec(frames, 2, flat.to_vec()).unwrap();
            weighted_softmax_xent(&m, &labels).unwrap().loss
        }));
    })
}

/// Both detectors end to end: seq2seq on frame labels and the attention
/// baseline on a clip label, alternating by trial.
pub fn full_model(trials: usize) -> Summary {
    run("full tiny model", trials, 6, |rng, acc| {
        let cell = if rng.gen_bool(0.5) {
            CellKind::Gru
        } else {
            CellKind::Lstm
        };
        let enc = EncoderConfig::new(cell, rng.gen_range(1..3), rng.gen_range(1..4));
        let frames = rng.gen_range(1..6);
        let x = matrix(rng, frames, enc.input_dim, 1.0);
        if rng.gen_bool(0.5) {
            let mut m = Seq2SeqModel::<f64>::zeros(&enc);
            randomize(&mut m, rng, 0.5);
            let labels = random_labels(rng, frames);
            let (_, _, grad) = m.loss_and_grad(&x, &labels).unwrap();
            acc.add(params_check(&m, &grad, |m| {
                m.loss_and_grad(&x, &labels).unwrap().0
            }));
        } else {
            let cfg = ModelConfig {
                attn_dim: rng.gen_range(1..4),
                train_window: frames,
                runtime_window: frames,
                ..ModelConfig::attention(enc)
            };
            let mut m = AttentionModel::<f64>::zeros(&cfg);
            randomize(&mut m, rng, 0.5);
            let positive = rng.gen_bool(0.5);
            let (_, grad) = m.loss_and_grad(&x, positive).unwrap();
            acc.add(params_check(&m, &grad, |m| {
                m.loss_and_grad(&x, positive).unwrap().0
            }));
        }
    })
}
