//! Synthetic tone-sequence corpus.
//!
//! Every "unit" is a short tone at a unit-specific frequency. The keyword
//! is four keyword units played back to back. Positive clips contain the
//! keyword somewhere among filler units; negative clips contain fillers
//! only, including near misses: three of the four keyword units, the
//! keyword units out of order, or the keyword units separated by silence.
//! Gaps are aligned as `sil` tokens.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use kws_core::labeling::{find_occurrences, Alignment, KeywordSpec, Token};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::alignment_file::{self, Alignments};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::manifest::{Entry, Manifest};
use crate::wav;

pub const KEYWORD: [&str; 4] = ["k0", "k1", "k2", "k3"];
pub const SILENCE: &str = "sil";
const UNITS: [(&str, f64); 8] = [
    ("k0", 600.0),
    ("k1", 1000.0),
    ("k2", 1600.0),
    ("k3", 2400.0),
    ("d0", 800.0),
    ("d1", 1300.0),
    ("d2", 2000.0),
    ("d3", 3000.0),
];
const SAMPLES_PER_FRAME: usize = 160;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub positives: usize,
    pub negatives: usize,
    pub clip_seconds: f64,
    pub sample_rate_hz: u32,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            positives: 200,
            negatives: 400,
            clip_seconds: 2.0,
            sample_rate_hz: 16_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthClip {
    pub id: String,
    pub pcm: Vec<i16>,
    pub alignment: Alignment,
    pub positive: bool,
}

pub fn keyword() -> KeywordSpec {
    KeywordSpec::new(KEYWORD).expect("non-empty keyword")
}

fn frequency(symbol: &str) -> f64 {
    UNITS
        .iter()
        .find(|(s, _)| *s == symbol)
        .expect("known unit")
        .1
}

/// Frames a clip of `samples` samples yields with 25 ms / 10 ms framing at
/// 16 kHz; alignments must end by then.
fn usable_frames(samples: usize) -> usize {
    if samples < 400 {
        0
    } else {
        1 + (samples - 400) / SAMPLES_PER_FRAME
    }
}

struct Builder<'r> {
    rng: &'r mut ChaCha8Rng,
    tokens: Vec<Token>,
    cursor: usize,
    limit: usize,
}

impl Builder<'_> {
    fn gap(&mut self, min: usize, max: usize) {
        let n = self.rng.gen_range(min..=max).min(self.limit - self.cursor);
        if n > 0 {
            self.tokens
                .push(Token::new(SILENCE, self.cursor, self.cursor + n));
            self.cursor += n;
        }
    }

    fn unit_len(&mut self) -> usize {
        self.rng.gen_range(10..=18)
    }

    /// Appends units back to back if they fit; returns false otherwise.
    fn units(&mut self, symbols: &[&str]) -> bool {
        let lens: Vec<usize> = symbols.iter().map(|_| self.unit_len()).collect();
        if self.cursor + lens.iter().sum::<usize>() > self.limit {
            return false;
        }
        for (s, n) in symbols.iter().zip(lens) {
            self.tokens
                .push(Token::new(*s, self.cursor, self.cursor + n));
            self.cursor += n;
        }
        true
    }

    fn fillers(&mut self, budget: usize) {
        let end = (self.cursor + budget).min(self.limit);
        while self.cursor + 18 < end {
            let (sym, _) = UNITS[self.rng.gen_range(0..UNITS.len())];
            self.units(&[sym]);
            self.gap(3, 20);
        }
    }
}

fn near_miss(rng: &mut ChaCha8Rng) -> Vec<Vec<&'static str>> {
    match rng.gen_range(0..3) {
        0 => {
            let skip = rng.gen_range(0..4);
            vec![KEYWORD
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != skip)
                .map(|(_, s)| *s)
                .collect()]
        }
        1 => loop {
            let mut p = KEYWORD.to_vec();
            p.shuffle(rng);
            if p != KEYWORD {
                break vec![p];
            }
        },
        _ => {
            let split = rng.gen_range(1..4);
            vec![KEYWORD[..split].to_vec(), KEYWORD[split..].to_vec()]
        }
    }
}

fn render(tokens: &[Token], samples: usize, rng: &mut ChaCha8Rng, sr: f64) -> Vec<i16> {
    let noise = if rng.gen_bool(0.2) {
        0.0
    } else {
        rng.gen_range(0.005..0.03)
    };
    let gain = rng.gen_range(0.4..1.2);
    let mut out: Vec<f64> = (0..samples)
        .map(|_| noise * (rng.gen::<f64>() * 2.0 - 1.0))
        .collect();
    for t in tokens.iter().filter(|t| t.symbol != SILENCE) {
        let f = frequency(&t.symbol) * rng.gen_range(0.97..1.03);
        let amp = gain * rng.gen_range(0.15..0.3);
        let phase = rng.gen_range(0.0..2.0 * PI);
        let start = t.start_frame * SAMPLES_PER_FRAME;
        let end = (t.end_frame * SAMPLES_PER_FRAME).min(samples);
        let ramp = 80.0;
        for (k, o) in out[start..end].iter_mut().enumerate() {
            let edge = (k as f64 / ramp)
                .min((end - start - k) as f64 / ramp)
                .min(1.0);
            let x = 2.0 * PI * f * k as f64 / sr + phase;
            *o += amp * edge * (x.sin() + 0.3 * (2.0 * x).sin());
        }
    }
    out.iter()
        .map(|&v| (v * 32768.0).round().clamp(-32768.0, 32767.0) as i16)
        .collect()
}

fn clip(index: usize, positive: bool, cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> SynthClip {
    let samples = (cfg.clip_seconds * cfg.sample_rate_hz as f64).round() as usize;
    let limit = usable_frames(samples).saturating_sub(2);
    let kw = keyword();
    if !positive && rng.gen_bool(0.05) {
        let align = Alignment::new(vec![Token::new(SILENCE, 0, limit)]).expect("one token");
        return SynthClip {
            id: format!("neg{index:04}"),
            pcm: vec![0; samples],
            alignment: align,
            positive,
        };
    }
    loop {
        let mut b = Builder {
            rng: &mut *rng,
            tokens: Vec::new(),
            cursor: 0,
            limit,
        };
        b.gap(5, 30);
        let lead = b.rng.gen_range(0..limit / 2);
        b.fillers(lead);
        let ok = if positive {
            let ok = b.units(&KEYWORD);
            b.gap(5, 30);
            ok
        } else {
            let parts = near_miss(b.rng);
            let last = parts.len() - 1;
            parts.iter().enumerate().all(|(i, p)| {
                let ok = b.units(p);
                // a split keyword needs an audible pause to count as two words
                if i < last {
                    b.gap(25, 40);
                } else {
                    b.gap(4, 20);
                }
                ok
            })
        };
        let rest = limit - b.cursor;
        b.fillers(rest);
        let tokens = b.tokens;
        let align = Alignment::new(tokens.clone()).expect("builder keeps tokens ordered");
        let hits = find_occurrences(&align, &kw).len();
        if ok && hits == usize::from(positive) {
            let pcm = render(&tokens, samples, rng, cfg.sample_rate_hz as f64);
            let tag = if positive { "pos" } else { "neg" };
            return SynthClip {
                id: format!("{tag}{index:04}"),
                pcm,
                alignment: align,
                positive,
            };
        }
    }
}

/// Positives then negatives, fully determined by `cfg.seed`.
pub fn generate(cfg: &SynthConfig) -> Vec<SynthClip> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out: Vec<SynthClip> = (0..cfg.positives)
        .map(|i| clip(i, true, cfg, &mut rng))
        .collect();
    out.extend((0..cfg.negatives).map(|i| clip(i, false, cfg, &mut rng)));
    out
}

/// Deterministic split into train/dev/test by clip index: within each
/// class every 20 clips contribute 13 to train, 2 to dev and 5 to test.
pub fn split(clips: &[SynthClip]) -> [Vec<&SynthClip>; 3] {
    let mut parts: [Vec<&SynthClip>; 3] = Default::default();
    for positive in [true, false] {
        for (i, c) in clips.iter().filter(|c| c.positive == positive).enumerate() {
            let k = match i % 20 {
                0..=12 => 0,
                13 | 14 => 1,
                _ => 2,
            };
            parts[k].push(c);
        }
    }
    parts
}

/// Writes the corpus under `dir`: `wav/*.wav`, `alignments.txt`,
/// `train.tsv`, `dev.tsv`, `test.tsv`, and a `config.toml` naming the
/// keyword and those paths. Returns the config path.
pub fn write_corpus(dir: &Path, cfg: &SynthConfig) -> Result<PathBuf> {
    let wav_dir = dir.join("wav");
    fs::create_dir_all(&wav_dir).map_err(|e| Error::io(&wav_dir, e))?;
    let clips = generate(cfg);
    let mut alignments = Alignments::new();
    for c in &clips {
        wav::write_wav(
            wav_dir.join(format!("{}.wav", c.id)),
            &c.pcm,
            cfg.sample_rate_hz,
        )?;
        alignments.insert(c.id.clone(), c.alignment.clone());
    }
    let align_path = dir.join("alignments.txt");
    fs::write(&align_path, alignment_file::render(&alignments))
        .map_err(|e| Error::io(&align_path, e))?;
    for (name, part) in ["train", "dev", "test"].iter().zip(split(&clips)) {
        let manifest = Manifest {
            entries: part
                .iter()
                .map(|c| Entry {
                    utt_id: c.id.clone(),
                    wav_path: wav_dir.join(format!("{}.wav", c.id)),
                    alignment_id: Some(c.id.clone()),
                    is_positive: c.positive,
                })
                .collect(),
        };
        manifest.write(dir.join(format!("{name}.tsv")))?;
    }
    let mut run = RunConfig::default();
    run.frontend.sample_rate = cfg.sample_rate_hz;
    run.labels.keyword = KEYWORD.map(String::from).to_vec();
    // relative to the config file
    run.paths.train_manifest = Some("train.tsv".into());
    run.paths.dev_manifest = Some("dev.tsv".into());
    run.paths.eval_manifest = Some("test.tsv".into());
    run.paths.alignments = Some("alignments.txt".into());
    run.paths.cache = Some("cache".into());
    run.paths.out = Some("run".into());
    let path = dir.join("config.toml");
    fs::write(&path, run.to_toml()).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
