//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

#[path = "../../core/tests/support/gradcheck.rs"]
mod gradcheck;

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use kws::checkpoint;
use kws::config::RunConfig;
use kws::manifest::Manifest;
use kws::pipeline;
use kws::synth::{self, SynthConfig};
use kws_core::decoder::{run_stream, DecoderConfig};
use kws_core::dsp::{
    featurize, FeatureMatrix, FrameSpec, FrontendConfig, PcenConfig, PcenState, Waveform,
    FEATURE_DIM,
};
use kws_core::eval::{frr_at_fa, sweep_roc, NegativeTrace};
use kws_core::labeling::{
    labels_from_alignment, validate_label_sequence, Alignment, Hold, KeywordSpec, Token,
};
use kws_core::model::{EncoderConfig, KwsModel, ModelConfig, ModelKind};
use kws_core::nn::{
    apply_l2, clip_global_norm, global_norm, AdamConfig, AdamState, BufferKind, CellKind,
    Parameters,
};
use kws_core::Real;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

// 1

fn param_counts() -> Outcome {
    let want = [(1, 64, 27.0), (2, 64, 60.0), (3, 64, 93.1), (1, 128, 86.8)];
    let mut got = Vec::new();
    for (layers, units, k) in want {
        let cfg = ModelConfig::seq2seq(EncoderConfig::new(CellKind::Lstm, layers, units));
        let m = KwsModel::<f32>::zeros(&cfg).map_err(|e| e.to_string())?;
        let n = m.param_count();
        // 4 gates per layer plus the 2-way output layer
        let mut oracle = 2 * units + 2;
        let mut input = FEATURE_DIM;
        for _ in 0..layers {
            oracle += 4 * (units * (input + units) + units);
            input = units;
        }
        ensure(n == oracle, || {
            format!("lstm {layers}x{units}: {n} params, expected {oracle}")
        })?;
        let rounded = (n as f64 / 100.0).round() / 10.0;
        ensure(rounded == k && m.param_count_k() == k, || {
            format!("lstm {layers}x{units}: {n} params rounds to {rounded}K, expected {k}K")
        })?;
        got.push(format!("{layers}x{units}={:.1}K", rounded));
    }
    Ok(got.join(" "))
}

// 2

fn gradients() -> Outcome {
    const TRIALS: usize = 100;
    let checks: [fn(usize) -> gradcheck::Summary; 6] = [
        gradcheck::linear,
        gradcheck::lstm,
        gradcheck::gru,
        gradcheck::attention_scorer,
        gradcheck::weighted_xent,
        gradcheck::full_model,
    ];
    let mut parts = Vec::new();
    for f in checks {
        let s = f(TRIALS);
        ensure(s.trials >= TRIALS && s.checked >= TRIALS, || {
            format!("{}: {} trials, {} partials", s.name, s.trials, s.checked)
        })?;
        ensure(s.max_rel < 1e-4, || {
            format!("{}: max relative error {:e}", s.name, s.max_rel)
        })?;
        parts.push(format!("{} {:.1e}", s.name, s.max_rel));
    }
    Ok(format!(
        "{TRIALS} trials each, max rel err: {}",
        parts.join(", ")
    ))
}

// 3

fn random_features(rng: &mut ChaCha8Rng, frames: usize) -> FeatureMatrix {
    let data = (0..frames * FEATURE_DIM)
        .map(|_| rng.gen_range(-2.0f32..3.0))
        .collect();
    FeatureMatrix::new(data, frames, FrameSpec::default()).unwrap()
}

fn brute_smooth<T: Real>(raw: &[T], n: usize) -> Vec<T> {
    (0..raw.len())
        .map(|t| {
            let lo = (t + 1).saturating_sub(n);
            let mut sum = T::zero();
            for &v in &raw[lo..=t] {
                sum += v;
            }
            sum / T::of_usize(t + 1 - lo)
        })
        .collect()
}

fn brute_triggers(track: &[f64], threshold: f64, lockout: usize) -> Vec<usize> {
    let mut fired: Vec<usize> = Vec::new();
    for (t, &y) in track.iter().enumerate() {
        if y >= threshold && fired.last().is_none_or(|&l| t - l > lockout) {
            fired.push(t);
        }
    }
    fired
}

fn stream_vs_batch<T: Real>(
    model: &KwsModel<T>,
    x: &FeatureMatrix,
    rng: &mut ChaCha8Rng,
) -> Result<(), String> {
    let batch = model.frame_probabilities(x).map_err(|e| e.to_string())?;
    for n in [1, 2, 5, 12] {
        let cfg = DecoderConfig {
            smoothing: n,
            threshold: rng.gen_range(0.2..0.8),
            lockout_frames: rng.gen_range(0..20),
        };
        let out = run_stream(model, x, cfg).map_err(|e| e.to_string())?;
        let same = out.raw.len() == batch.len()
            && out
                .raw
                .iter()
                .zip(&batch)
                .all(|(a, b)| a.as_f64().to_bits() == b.as_f64().to_bits());
        ensure(same, || "streaming probabilities differ from batch".into())?;
        let brute = brute_smooth(&batch, n);
        let same = brute
            .iter()
            .zip(&out.smoothed)
            .all(|(a, b)| a.as_f64().to_bits() == b.as_f64().to_bits());
        ensure(same, || format!("smoothing n={n} differs from brute force"))?;
        let track: Vec<f64> = out.smoothed.iter().map(|v| v.as_f64()).collect();
        let fired: Vec<usize> = out.events.iter().map(|e| e.frame_index as usize).collect();
        ensure(
            fired == brute_triggers(&track, cfg.threshold, cfg.lockout_frames),
            || format!("trigger frames differ at n={n}"),
        )?;
    }
    Ok(())
}

fn streaming() -> Outcome {
    const MODELS: usize = 60;
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut frames = 0;
    for i in 0..MODELS {
        let cell = if i % 2 == 0 {
            CellKind::Gru
        } else {
            CellKind::Lstm
        };
        let enc = EncoderConfig::new(cell, rng.gen_range(1..=3), rng.gen_range(1..=24));
        let cfg = ModelConfig::seq2seq(enc);
        let t = if i < 3 { i + 1 } else { rng.gen_range(1..=160) };
        frames += t;
        let x = random_features(&mut rng, t);
        let seed = rng.gen();
        let scale = rng.gen_range(0.1..1.5);
        if i % 3 == 0 {
            let mut m = KwsModel::<f64>::new(&cfg, seed).unwrap();
            let flat: Vec<f64> = (0..m.param_count())
                .map(|_| rng.gen_range(-scale..scale))
                .collect();
            m.load_flat(&flat);
            stream_vs_batch(&m, &x, &mut rng)
        } else {
            let mut m = KwsModel::<f32>::new(&cfg, seed).unwrap();
            let flat: Vec<f32> = (0..m.param_count())
                .map(|_| rng.gen_range(-scale as f32..scale as f32))
                .collect();
            m.load_flat(&flat);
            stream_vs_batch(&m, &x, &mut rng)
        }
        .map_err(|e| format!("model {i} ({}, {t} frames): {e}", cfg))?;
    }
    Ok(format!(
        "{MODELS} random models, {frames} frames, n in {{1,2,5,12}} bitwise equal"
    ))
}

// 4

const UNITS: [&str; 3] = ["a", "b", "c"];

/// Frame `t` is 1 when frames `[0, t)` contain the whole keyword and -1
/// while the final unit of a keyword is at least half spoken but not
/// finished. Every token window is tested independently for every frame.
fn brute_labels(tokens: &[(&str, usize, usize)], frames: usize, hold: Option<usize>) -> Vec<i8> {
    let k = UNITS.len();
    let matches = |i: usize| i + k <= tokens.len() && (0..k).all(|j| tokens[i + j].0 == UNITS[j]);
    (0..frames)
        .map(|t| {
            let done = (0..tokens.len())
                .filter(|&i| matches(i) && tokens[i + k - 1].2 <= t)
                .map(|i| tokens[i + k - 1].2)
                .max();
            let halfway = (0..tokens.len()).filter(|&i| matches(i)).any(|i| {
                let (_, s, e) = tokens[i + k - 1];
                (s + e) / 2 <= t && t < e
            });
            match (halfway, done) {
                (true, _) => -1,
                (false, Some(e)) if hold.is_none_or(|h| t < e + h) => 1,
                _ => 0,
            }
        })
        .collect()
}

fn kw_at(start: usize, lens: [usize; 3]) -> Vec<(&'static str, usize, usize)> {
    let mut s = start;
    UNITS
        .iter()
        .zip(lens)
        .map(|(&u, l)| {
            s += l;
            (u, s - l, s)
        })
        .collect()
}

/// Name, tokens, frames, hold.
type Case = (
    &'static str,
    Vec<(&'static str, usize, usize)>,
    usize,
    Option<usize>,
);

fn handcrafted() -> Vec<Case> {
    let mut cases = vec![
        ("empty", vec![], 30, None),
        ("silence only", vec![("sil", 0, 30)], 30, None),
        (
            "distractors",
            vec![("x", 0, 10), ("b", 10, 20), ("c", 20, 30)],
            40,
            None,
        ),
        ("prefix only", vec![("a", 0, 10), ("b", 10, 20)], 30, None),
        (
            "out of order",
            vec![("b", 0, 5), ("a", 5, 10), ("c", 10, 15)],
            20,
            None,
        ),
        ("keyword at start", kw_at(0, [4, 4, 6]), 40, None),
        ("keyword at end", kw_at(20, [5, 5, 10]), 40, None),
        ("one-frame final unit", kw_at(3, [3, 3, 1]), 20, None),
        ("one-frame final unit at end", kw_at(5, [2, 2, 1]), 10, None),
        ("all units one frame", kw_at(0, [1, 1, 1]), 3, None),
        ("odd final unit", kw_at(2, [3, 3, 7]), 30, None),
        ("even final unit", kw_at(2, [3, 3, 8]), 30, None),
        ("hold 5 frames", kw_at(2, [3, 3, 4]), 40, Some(5)),
        ("hold past end", kw_at(10, [3, 3, 4]), 25, Some(50)),
        ("hold zero", kw_at(0, [2, 2, 4]), 20, Some(0)),
    ];
    let mut gap = kw_at(0, [3, 3, 3]);
    gap.insert(1, ("sil", 3, 4));
    for t in &mut gap[2..] {
        t.1 += 1;
        t.2 += 1;
    }
    cases.push(("silence inside keyword", gap, 20, None));
    let mut spaced = vec![("sil", 0, 4)];
    spaced.extend(kw_at(6, [3, 3, 5]));
    spaced.push(("sil", 20, 25));
    cases.push(("gaps between tokens", spaced, 30, None));
    let mut two = kw_at(0, [3, 3, 4]);
    two.extend(kw_at(15, [3, 3, 6]));
    cases.push(("two occurrences", two.clone(), 40, None));
    cases.push(("two occurrences with hold", two, 40, Some(3)));
    let mut adjacent = kw_at(0, [2, 2, 2]);
    adjacent.extend(kw_at(6, [2, 2, 2]));
    cases.push(("back to back", adjacent, 14, None));
    let mut repeated = kw_at(0, [2, 2, 2]);
    repeated.insert(0, ("a", 0, 1));
    for t in &mut repeated[1..] {
        t.1 += 1;
        t.2 += 1;
    }
    cases.push(("repeated first unit", repeated, 12, None));
    let mut overlapping = vec![
        ("a", 0, 2),
        ("b", 2, 4),
        ("a", 4, 6),
        ("b", 6, 8),
        ("c", 8, 12),
    ];
    overlapping.push(("c", 12, 14));
    cases.push(("partial then full", overlapping, 20, None));
    cases.push(("exact length", kw_at(0, [5, 5, 5]), 15, None));
    cases
}

fn labeling() -> Outcome {
    let kw = KeywordSpec::new(UNITS).unwrap();
    let cases = handcrafted();
    for (name, tokens, frames, hold) in &cases {
        let align = Alignment::new(
            tokens
                .iter()
                .map(|&(s, a, b)| Token::new(s, a, b))
                .collect(),
        )
        .map_err(|e| format!("{name}: {e}"))?;
        let h = hold.map_or(Hold::ToEnd, Hold::Frames);
        let ls =
            labels_from_alignment(&align, &kw, *frames, h).map_err(|e| format!("{name}: {e}"))?;
        let want = brute_labels(tokens, *frames, *hold);
        ensure(ls.labels() == want.as_slice(), || {
            format!("{name}: labels {:?}, brute force {:?}", ls.labels(), want)
        })?;
        for (t, (&l, &w)) in ls.labels().iter().zip(ls.weights()).enumerate() {
            ensure(w == if l == -1 { 0.0 } else { 1.0 }, || {
                format!("{name}: weight {w} at frame {t}")
            })?;
        }
        validate_label_sequence(&ls).map_err(|v| format!("{name}: {v}"))?;
        let band: usize = (0..tokens.len().saturating_sub(UNITS.len() - 1))
            .filter(|&i| (0..UNITS.len()).all(|j| tokens[i + j].0 == UNITS[j]))
            .map(|i| {
                let (_, s, e) = tokens[i + UNITS.len() - 1];
                (e - s).div_ceil(2)
            })
            .sum();
        let ignored = ls.labels().iter().filter(|&&l| l == -1).count();
        ensure(ignored == band, || {
            format!("{name}: {ignored} ignored frames, expected {band}")
        })?;
    }
    Ok(format!("{} alignments match brute force", cases.len()))
}

// 5

fn optimizer() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut worst_adam = 0.0f64;
    let mut worst_clip = 0.0f64;
    for i in 0..50 {
        let cell = if i % 2 == 0 {
            CellKind::Gru
        } else {
            CellKind::Lstm
        };
        let mut cfg = ModelConfig::seq2seq(EncoderConfig::new(
            cell,
            rng.gen_range(1..=2),
            rng.gen_range(1..=8),
        ));
        if i % 5 == 0 {
            cfg = ModelConfig {
                kind: ModelKind::Attention,
                attn_dim: 4,
                ..cfg
            };
        }
        let model = KwsModel::<f64>::new(&cfg, rng.gen()).unwrap();
        let n = model.param_count();
        let mut grads = model.zeros_like();
        let g: Vec<f64> = (0..n)
            .map(|_| rng.gen_range(-1.0..1.0) * 10f64.powi(rng.gen_range(-6..3)))
            .collect();
        grads.load_flat(&g);

        let ac = AdamConfig {
            lr: rng.gen_range(1e-4..1e-1),
            ..AdamConfig::default()
        };
        let mut updated = model.clone();
        AdamState::new(&updated, ac).step(&mut updated, &grads);
        let before = model.flatten();
        for ((&w, &w1), &gi) in before.iter().zip(&updated.flatten()).zip(&g) {
            let m_hat = (1.0 - ac.beta1) * gi / (1.0 - ac.beta1);
            let v_hat = (1.0 - ac.beta2) * gi * gi / (1.0 - ac.beta2);
            let closed = w - ac.lr * m_hat / (v_hat.sqrt() + ac.eps);
            worst_adam = worst_adam.max((w1 - closed).abs());
        }

        let mut clipped = grads.clone();
        let norm = clip_global_norm(&mut clipped, 1.0);
        let oracle = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        ensure((norm - oracle).abs() <= 1e-12 * oracle.max(1.0), || {
            format!("model {i}: norm {norm} vs {oracle}")
        })?;
        let after = global_norm(&clipped);
        worst_clip = worst_clip.max(after);
        if oracle <= 1.0 {
            ensure(clipped == grads, || {
                format!("model {i}: gradient under the limit was changed")
            })?;
        }

        let lambda = 1e-3;
        let mut reg = grads.clone();
        let loss = apply_l2(0.5, &mut reg, &model, lambda);
        let mut penalty = 0.0;
        for ((p, r), g0) in model.params().iter().zip(reg.params()).zip(grads.params()) {
            for ((&w, &gr), &gi) in p.data.iter().zip(r.data).zip(g0.data) {
                match p.kind {
                    BufferKind::Bias => ensure(gr == gi, || {
                        format!("model {i}: bias {} regularized", p.name)
                    })?,
                    BufferKind::Weight => {
                        penalty += w * w;
                        ensure(
                            (gr - (gi + 2.0 * lambda * w)).abs() <= 1e-15 * gi.abs().max(1.0),
                            || format!("model {i}: weight {} gradient off", p.name),
                        )?;
                    }
                }
            }
        }
        ensure((loss - 0.5 - lambda * penalty).abs() < 1e-12, || {
            format!("model {i}: penalty off")
        })?;
    }
    ensure(worst_adam <= 1e-12, || {
        format!("Adam first step off by {worst_adam:e}")
    })?;
    ensure(worst_clip <= 1.0 + 1e-6, || {
        format!("clipped norm {worst_clip}")
    })?;
    Ok(format!("50 models: Adam max err {worst_adam:.1e}, clipped norm <= {worst_clip:.9}, biases untouched by L2"))
}

// 6 and 8

const RECIPE_EPOCHS: usize = 40;

struct Run {
    out: PathBuf,
    train_time: Duration,
    frr: Vec<(usize, f64, bool)>,
    cfg: RunConfig,
    train: Vec<kws_core::train::Example>,
    dev: Vec<kws_core::train::Example>,
    test: Vec<kws_core::train::Example>,
    minutes: f64,
}

fn full_run(root: &Path) -> Result<Run, String> {
    let e = |e: kws::Error| e.to_string();
    let path = synth::write_corpus(root, &SynthConfig::default()).map_err(e)?;
    let mut cfg = RunConfig::load(path).map_err(e)?;
    for kv in [
        "model.kind=\"seq2seq\"",
        "model.cell=\"gru\"",
        "model.layers=1",
        "model.hidden=32",
        "train.batch_size=16",
        "train.lr=0.005",
        "train.seed=0",
    ] {
        cfg.set(kv).map_err(e)?;
    }
    cfg.train.epochs = RECIPE_EPOCHS;
    let cache = cfg.cache_dir().map_err(e)?;
    let mut splits = Vec::new();
    let mut seconds = 0.0;
    for p in [
        &cfg.paths.train_manifest,
        &cfg.paths.dev_manifest,
        &cfg.paths.eval_manifest,
    ] {
        let m = Manifest::read(p.as_ref().unwrap()).map_err(e)?;
        let s = pipeline::featurize(&m, &cfg, &cache).map_err(e)?;
        ensure(s.failures.is_empty(), || {
            format!("featurize failures: {:?}", s.failures)
        })?;
        let ex = pipeline::load_examples(&m, &cfg, &cache).map_err(e)?;
        seconds += ex
            .iter()
            .map(|x| x.features.frames() as f64 * 0.01)
            .sum::<f64>();
        splits.push(ex);
    }
    let test = splits.pop().unwrap();
    let dev = splits.pop().unwrap();
    let train = splits.pop().unwrap();
    let out = cfg.out_dir();
    let start = Instant::now();
    let o = pipeline::train_model(
        &cfg,
        &cfg.model_config().map_err(e)?,
        &train,
        Some(&dev),
        &out,
        false,
        |_| {},
    )
    .map_err(e)?;
    let train_time = start.elapsed();
    let best = checkpoint::load(&o.best_path).map_err(e)?;
    pipeline::eval(&cfg, &best, &test, &out).map_err(e)?;
    cfg.eval.smoothing_grid = vec![1, 12];
    let reports = pipeline::sweep_smoothing(&cfg, &best, &test, &out).map_err(e)?;
    let frr = reports
        .iter()
        .map(|r| (r.smoothing, r.operating.point.frr, r.operating.meets_target))
        .collect();
    Ok(Run {
        out,
        train_time,
        frr,
        cfg,
        train,
        dev,
        test,
        minutes: seconds / 60.0,
    })
}

fn training(run: &Run) -> Outcome {
    let frr = |n: usize| run.frr.iter().find(|r| r.0 == n).copied().unwrap();
    let (_, f12, met12) = frr(12);
    let (_, f1, met1) = frr(1);
    let pos = run.test.iter().filter(|x| x.is_positive()).count();
    let total = run.train.len() + run.dev.len() + run.test.len();
    let mut line = format!(
        "{total} clips ({:.1} min), {} train / {} dev / {} test ({pos} pos); GRU 1-32 trained in {:.0}s; test FRR at 0.1 FA/hr: n=1 {:.1}%, n=12 {:.1}%",
        run.minutes,
        run.train.len(),
        run.dev.len(),
        run.test.len(),
        run.train_time.as_secs_f64(),
        100.0 * f1,
        100.0 * f12
    );

    let mut base_cfg = run.cfg.model_config().map_err(|e| e.to_string())?;
    base_cfg.kind = ModelKind::Attention;
    let base_out = run.out.join("baseline");
    let o = pipeline::train_model(
        &run.cfg,
        &base_cfg,
        &run.train,
        Some(&run.dev),
        &base_out,
        false,
        |_| {},
    )
    .map_err(|e| e.to_string())?;
    let base = checkpoint::load(&o.best_path).map_err(|e| e.to_string())?;
    let r = pipeline::eval(&run.cfg, &base, &run.test, &base_out).map_err(|e| e.to_string())?;
    let b = r.operating.point.frr;
    let order = if f12 < b {
        "seq2seq better"
    } else if f12 > b {
        "baseline better"
    } else {
        "tie"
    };
    line += &format!("; baseline GRU 1-32 FRR {:.1}% ({order})", 100.0 * b);

    ensure(run.train_time < Duration::from_secs(600), || {
        format!("{line}: training too slow")
    })?;
    ensure(met12 && f12 <= 0.10, || {
        format!("{line}: FRR above 10% or FA target unmet")
    })?;
    ensure(met1 && f12 <= f1, || {
        format!("{line}: smoothing made FRR worse")
    })?;
    Ok(line)
}

fn determinism(a: &Run, b: &Run) -> Outcome {
    let files = [
        pipeline::FINAL,
        pipeline::BEST,
        pipeline::FINAL_OPT,
        "final.kwsm.json",
        "best.kwsm.json",
        pipeline::METRICS,
        "roc.tsv",
        "roc_n1.tsv",
        "roc_n12.tsv",
        "eval.tsv",
    ];
    for f in files {
        let x = fs::read(a.out.join(f)).map_err(|e| format!("{f}: {e}"))?;
        let y = fs::read(b.out.join(f)).map_err(|e| format!("{f}: {e}"))?;
        ensure(x == y, || format!("{f} differs between runs"))?;
    }
    Ok(format!(
        "{} files bitwise identical across two runs",
        files.len()
    ))
}

// 7

fn roc() -> Outcome {
    const SETS: usize = 1000;
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut recounts = 0;
    for s in 0..SETS {
        let pos: Vec<f64> = (0..rng.gen_range(1..40))
            .map(|_| rng.gen::<f64>())
            .collect();
        let negs: Vec<NegativeTrace> = (0..rng.gen_range(1..6))
            .map(|_| {
                let len = rng.gen_range(1..300);
                let y = (0..len).map(|_| rng.gen::<f64>().powi(3)).collect();
                NegativeTrace::new(y, len as f64 * 0.01 / 3600.0).unwrap()
            })
            .collect();
        let points = rng.gen_range(2..60);
        let mut grid: Vec<f64> = (0..points).map(|_| rng.gen::<f64>()).collect();
        if s % 2 == 0 {
            grid = (0..points)
                .map(|i| i as f64 / (points - 1) as f64)
                .collect();
        }
        let lockout = rng.gen_range(0..50);
        let curve = sweep_roc(&pos, &negs, &grid, lockout).map_err(|e| format!("set {s}: {e}"))?;
        for w in curve.points.windows(2) {
            ensure(
                w[0].threshold <= w[1].threshold
                    && w[0].frr <= w[1].frr
                    && w[0].fa_per_hour >= w[1].fa_per_hour,
                || {
                    format!(
                        "set {s}: not monotone between thresholds {} and {}",
                        w[0].threshold, w[1].threshold
                    )
                },
            )?;
        }
        let hours: f64 = negs.iter().map(|n| n.duration_hours).sum();
        let recount = |th: f64| {
            let misses = pos.iter().filter(|&&p| p < th).count();
            let fa: usize = negs
                .iter()
                .map(|n| brute_triggers(&n.smoothed, th, lockout).len())
                .sum();
            (misses as f64 / pos.len() as f64, fa as f64 / hours)
        };
        for _ in 0..3 {
            let p = curve.points[rng.gen_range(0..curve.points.len())];
            ensure(recount(p.threshold) == (p.frr, p.fa_per_hour), || {
                format!("set {s}: recount at {} disagrees", p.threshold)
            })?;
            recounts += 1;
        }
        let target = rng.gen_range(0.0..3.0) * hours.recip() / 10.0;
        let op = frr_at_fa(&curve, target).map_err(|e| e.to_string())?;
        let mut sorted = grid.clone();
        sorted.sort_by(f64::total_cmp);
        let want = sorted.iter().copied().find(|&th| recount(th).1 <= target);
        match want {
            Some(th) => ensure(
                op.meets_target && op.point.threshold == th && recount(th).0 == op.point.frr,
                || {
                    format!(
                        "set {s}: frr_at_fa chose {} instead of {th}",
                        op.point.threshold
                    )
                },
            )?,
            None => ensure(
                !op.meets_target && op.point.threshold == *sorted.last().unwrap(),
                || format!("set {s}: frr_at_fa claims to meet an unreachable target"),
            )?,
        }
    }
    Ok(format!(
        "{SETS} score sets monotone, {recounts} recounted thresholds agree"
    ))
}

// 9

fn pcen() -> Outcome {
    let cfg = PcenConfig::default();
    let levels = [1e-8, 1e-4, 0.01, 0.5, 1.0, 3.0, 100.0, 1e4, 1e7];
    let mut state = PcenState::new(cfg, levels.len());
    let mut out = vec![0f32; levels.len()];
    let mut worst = 0.0f64;
    for frame in 0..1000 {
        state.step(&levels, &mut out).map_err(|e| e.to_string())?;
        if frame + 1 >= 400 {
            for (&c, &o) in levels.iter().zip(&out) {
                let smoothed = c;
                let want = (c / (cfg.epsilon + smoothed).powf(cfg.alpha) + cfg.delta)
                    .powf(cfg.root)
                    - cfg.delta.powf(cfg.root);
                worst = worst.max((o as f64 - want).abs());
            }
        }
    }
    ensure(worst < 1e-5, || {
        format!("constant input off by {worst:e} after 400 frames")
    })?;

    let mut zero = PcenState::new(cfg, FEATURE_DIM);
    let mut out = vec![1f32; FEATURE_DIM];
    for _ in 0..500 {
        zero.step(&[0.0; FEATURE_DIM], &mut out)
            .map_err(|e| e.to_string())?;
        ensure(out.iter().all(|&v| v == 0.0), || {
            "zero energies gave nonzero output".into()
        })?;
    }
    let silent = Waveform::new(vec![0.0; 16_000], 16_000).map_err(|e| e.to_string())?;
    let feats = featurize(&silent, &FrontendConfig::default()).map_err(|e| e.to_string())?;
    ensure(feats.as_slice().iter().all(|&v| v == 0.0), || {
        "digital silence gave nonzero features".into()
    })?;
    Ok(format!(
        "{} levels within {worst:.1e} from frame 400; zero energies and digital silence give exact zeros",
        levels.len()
    ))
}

fn run(id: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let result = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into()))
    });
    let secs = start.elapsed().as_secs_f64();
    match &result {
        Ok(detail) => println!("PASS criterion {id} ({name}): {detail} [{secs:.1}s]"),
        Err(detail) => println!("FAIL criterion {id} ({name}): {detail} [{secs:.1}s]"),
    }
    result.is_ok()
}

fn main() {
    panic::set_hook(Box::new(|_| {}));
    let mut ok = true;
    ok &= run(1, "parameter counts", param_counts);
    ok &= run(2, "finite-difference gradients", gradients);
    ok &= run(3, "streaming equals batch", streaming);
    ok &= run(4, "labeling", labeling);
    ok &= run(5, "Adam, clipping and L2", optimizer);

    let dirs = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut first = None;
    ok &= run(6, "training on the synthetic corpus", || {
        let r = full_run(dirs.0.path())?;
        let line = training(&r);
        first = Some(r);
        line
    });
    ok &= run(7, "ROC sweep", roc);
    ok &= run(8, "determinism", || {
        let b = full_run(dirs.1.path())?;
        let a = match first.take() {
            Some(r) => r,
            None => full_run(dirs.0.path())?,
        };
        determinism(&a, &b)
    });
    ok &= run(9, "PCEN", pcen);
    if !ok {
        std::process::exit(1);
    }
}
