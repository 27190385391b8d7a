//! The work behind each subcommand, as library functions.

use std::fs::{self, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use kws_core::decoder::StreamingDecoder;
use kws_core::dsp::{featurize as featurize_wave, FeatureMatrix, Frontend, FEATURE_DIM};
use kws_core::eval::{
    compare_models, evaluate, smoothing_sweep, ComparisonRow, EvalReport, EvalSet,
};
use kws_core::labeling::{
    find_occurrences, labels_from_alignment, validate_label_sequence, LabelSequence,
};
use kws_core::model::{KwsModel, ModelConfig, ModelKind};
use kws_core::train::{fit, seeds, sub_seed, EpochReport, Example, Selection, Trainer};

use crate::alignment_file::{self, Alignments};
use crate::checkpoint;
use crate::config::{parse_encoder, RunConfig};
use crate::error::{Error, Result};
use crate::kwsf;
use crate::label_file;
use crate::manifest::{cache_path, Manifest};
use crate::report::{self, EventRecord, MetricsRecord};
use crate::wav::{self, Pcm16Chunks};

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn require(path: &Option<PathBuf>, key: &str) -> Result<PathBuf> {
    path.clone()
        .ok_or_else(|| Error::Usage(format!("missing paths.{key} (config or flag)")))
}

#[derive(Debug, Default)]
pub struct FeaturizeSummary {
    pub written: usize,
    pub skipped: usize,
    pub failures: Vec<(String, Error)>,
}

fn source_key(wav_bytes: &[u8], cfg: &RunConfig) -> String {
    let mut keyed = wav_bytes.to_vec();
    keyed.extend_from_slice(toml::to_string(&cfg.frontend).unwrap().as_bytes());
    keyed.extend_from_slice(toml::to_string(&cfg.pcen).unwrap().as_bytes());
    checkpoint::sha256_hex(&keyed)
}

/// Computes `<cache>/<utt_id>.kwsf` for every manifest entry. Entries whose
/// audio and front-end settings match the checksum recorded next to the
/// cached file are skipped. Per-file failures are collected, not fatal.
pub fn featurize(manifest: &Manifest, cfg: &RunConfig, cache: &Path) -> Result<FeaturizeSummary> {
    let frontend = cfg.frontend_config()?;
    create_dir(cache)?;
    let mut summary = FeaturizeSummary::default();
    for e in &manifest.entries {
        let out = cache_path(cache, &e.utt_id);
        let stamp = out.with_extension("kwsf.src");
        let result = (|| -> Result<bool> {
            let bytes = fs::read(&e.wav_path).map_err(|err| Error::io(&e.wav_path, err))?;
            let key = source_key(&bytes, cfg);
            if out.exists() && fs::read_to_string(&stamp).ok().as_deref() == Some(key.as_str()) {
                return Ok(false);
            }
            let wave = wav::read_wav_from(&bytes[..], &e.wav_path)?;
            let feats = featurize_wave(&wave, &frontend).map_err(|err| match err {
                kws_core::Error::NonFinite(_) => Error::Core(err),
                other => Error::format(&e.wav_path, other.to_string()),
            })?;
            kwsf::write(&out, &feats)?;
            write_file(&stamp, key)?;
            Ok(true)
        })();
        match result {
            Ok(true) => summary.written += 1,
            Ok(false) => summary.skipped += 1,
            Err(err) => summary.failures.push((e.utt_id.clone(), err)),
        }
    }
    Ok(summary)
}

fn load_alignments(manifest: &Manifest, cfg: &RunConfig) -> Result<Option<Alignments>> {
    if manifest.entries.iter().all(|e| e.alignment_id.is_none()) {
        return Ok(None);
    }
    Ok(Some(alignment_file::read(require(
        &cfg.paths.alignments,
        "alignments",
    )?)?))
}

/// Features, labels and keyword span for every manifest entry.
pub fn load_examples(manifest: &Manifest, cfg: &RunConfig, cache: &Path) -> Result<Vec<Example>> {
    let alignments = load_alignments(manifest, cfg)?;
    let keyword = if alignments.is_some() {
        Some(cfg.keyword()?)
    } else {
        None
    };
    let spec = cfg.frame_spec();
    manifest
        .entries
        .iter()
        .map(|e| {
            let path = cache_path(cache, &e.utt_id);
            if !path.exists() {
                return Err(Error::Data(format!(
                    "{}: no cached features for {} (run featurize)",
                    path.display(),
                    e.utt_id
                )));
            }
            let features = kwsf::read(&path, spec)?;
            let frames = features.frames();
            let (labels, span) = match (&e.alignment_id, &alignments, &keyword) {
                (Some(id), Some(all), Some(kw)) => {
                    let align = all.get(id).ok_or_else(|| {
                        Error::Data(format!("{}: alignment {id} not found", e.utt_id))
                    })?;
                    let labels = labels_from_alignment(align, kw, frames, cfg.hold())
                        .map_err(|err| Error::Data(format!("{}: {err}", e.utt_id)))?;
                    let span = find_occurrences(align, kw)
                        .first()
                        .map(|o| (o.start_frame, o.end_frame));
                    if span.is_some() != e.is_positive {
                        return Err(Error::Data(format!(
                            "{}: is_positive = {} but the alignment {} the keyword",
                            e.utt_id,
                            u8::from(e.is_positive),
                            if span.is_some() { "contains" } else { "lacks" }
                        )));
                    }
                    (labels, span)
                }
                _ => (LabelSequence::negative(frames), None),
            };
            Ok(Example::new(e.utt_id.clone(), features, labels, span)?)
        })
        .collect()
}

pub fn load_split(path: &Path, cfg: &RunConfig) -> Result<Vec<Example>> {
    load_examples(&Manifest::read(path)?, cfg, &cfg.cache_dir()?)
}

/// Writes `<out>/<utt_id>.labels.tsv` for each labeled entry after
/// validating it; returns how many were written.
pub fn label(manifest: &Manifest, cfg: &RunConfig, cache: &Path, out: &Path) -> Result<usize> {
    create_dir(out)?;
    let examples = load_examples(manifest, cfg, cache)?;
    for ex in &examples {
        validate_label_sequence(&ex.labels)
            .map_err(|v| Error::Data(format!("{}: invalid labels: {v}", ex.id)))?;
        write_file(
            &out.join(format!("{}.labels.tsv", ex.id)),
            label_file::render(&ex.labels),
        )?;
    }
    Ok(examples.len())
}

pub fn eval_set(examples: &[Example]) -> EvalSet {
    kws_core::train::eval_set_from(examples)
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub reports: Vec<EpochReport>,
    pub best: Option<Selection>,
    pub final_path: PathBuf,
    pub best_path: PathBuf,
}

pub const FINAL: &str = "final.kwsm";
pub const FINAL_OPT: &str = "final.kwso";
pub const BEST: &str = "best.kwsm";
pub const METRICS: &str = "metrics.jsonl";

fn read_metrics(path: &Path) -> Result<Vec<MetricsRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| Error::format(path, e.to_string())))
        .collect()
}

/// Trains `cfg.model` on `train`, checkpointing into `out` after every
/// epoch: `final.kwsm` (+ optimizer state) always, `best.kwsm` when the dev
/// selection improves. With `resume`, continues from `final.kwsm`.
pub fn train_model(
    cfg: &RunConfig,
    model_cfg: &ModelConfig,
    train: &[Example],
    dev: Option<&[Example]>,
    out: &Path,
    resume: bool,
    mut progress: impl FnMut(&EpochReport),
) -> Result<TrainOutcome> {
    if train.is_empty() {
        return Err(Error::Data("training manifest is empty".into()));
    }
    create_dir(out)?;
    let tcfg = cfg.train_config()?;
    let eval_cfg = cfg.eval_config(cfg.decoder.smoothing)?;
    let metrics_path = out.join(METRICS);
    let final_path = out.join(FINAL);
    let opt_path = out.join(FINAL_OPT);
    let best_path = out.join(BEST);
    let mut best = None;
    let trainer = if resume && final_path.exists() && opt_path.exists() {
        let model = checkpoint::load(&final_path)?;
        if model.config().kind != model_cfg.kind || model.config().encoder != model_cfg.encoder {
            return Err(Error::Data(format!(
                "{}: checkpoint is {}, config asks for {}",
                final_path.display(),
                model.config(),
                model_cfg
            )));
        }
        let (adam, epochs_done) = checkpoint::load_optimizer(&opt_path, tcfg.adam())?;
        let mut t = Trainer::new(model, tcfg)?;
        t.resume(adam, epochs_done)?;
        let records: Vec<MetricsRecord> = read_metrics(&metrics_path)?
            .into_iter()
            .filter(|r| r.epoch as u64 <= epochs_done)
            .collect();
        for r in &records {
            let sel = Selection {
                epoch: r.epoch,
                dev_frr: r.dev_frr_at_target.unwrap_or(0.0),
                dev_loss: r.dev_loss.unwrap_or(0.0),
            };
            if best.as_ref().is_none_or(|b| dev.is_none() || sel.beats(b)) {
                best = Some(sel);
            }
        }
        let kept: String = records.iter().map(|r| r.to_line() + "\n").collect();
        write_file(&metrics_path, kept)?;
        t
    } else {
        let model = KwsModel::new(model_cfg, sub_seed(tcfg.seed, seeds::INIT))?;
        write_file(&metrics_path, "")?;
        Trainer::new(model, tcfg)?
    };
    let mut trainer = trainer;
    let mut log = OpenOptions::new()
        .append(true)
        .open(&metrics_path)
        .map_err(|e| Error::io(&metrics_path, e))?;
    let (reports, best) = fit::<f32, Error>(
        &mut trainer,
        train,
        dev.map(|d| (d, &eval_cfg)),
        tcfg.epochs,
        best,
        |r, t, improved| {
            checkpoint::save(&final_path, t.model())?;
            checkpoint::save_optimizer(&opt_path, t.optimizer(), t.epochs_done())?;
            if improved {
                checkpoint::save(&best_path, t.model())?;
            }
            let rec = MetricsRecord {
                epoch: r.epoch,
                step: r.step,
                train_loss: r.train_loss,
                dev_loss: r.dev_loss,
                dev_frr_at_target: r.dev_frr,
            };
            writeln!(log, "{}", rec.to_line()).map_err(|e| Error::io(&metrics_path, e))?;
            progress(r);
            Ok(())
        },
    )?;
    Ok(TrainOutcome {
        reports,
        best,
        final_path,
        best_path,
    })
}

/// `train` subcommand: manifests and output directory from the config.
pub fn train(
    cfg: &RunConfig,
    resume: bool,
    progress: impl FnMut(&EpochReport),
) -> Result<TrainOutcome> {
    let train = load_split(&require(&cfg.paths.train_manifest, "train_manifest")?, cfg)?;
    let dev = match &cfg.paths.dev_manifest {
        Some(p) => Some(load_split(p, cfg)?),
        None => None,
    };
    let out = cfg.out_dir();
    create_dir(&out)?;
    write_file(&out.join("config.toml"), cfg.to_toml())?;
    train_model(
        cfg,
        &cfg.model_config()?,
        &train,
        dev.as_deref(),
        &out,
        resume,
        progress,
    )
}

fn summary_text(model: &KwsModel<f32>, r: &EvalReport, target: f64) -> String {
    let op = &r.operating;
    format!(
        "model\t{}\nparams\t{}\nparams_k\t{:.1}\nsmoothing\t{}\npositives\t{}\nnegative_hours\t{}\nthreshold\t{}\nfrr_at_{target}fa\t{}\nfa_per_hour\t{}\nmeets_target\t{}\n",
        model.config(),
        model.param_count(),
        model.param_count_k(),
        r.smoothing,
        r.curve.positives,
        r.curve.negative_hours,
        op.point.threshold,
        op.point.frr,
        op.point.fa_per_hour,
        op.meets_target,
    )
}

/// `eval`: writes `roc.tsv` and `eval.tsv` (headline numbers) to `out`.
pub fn eval(
    cfg: &RunConfig,
    model: &KwsModel<f32>,
    examples: &[Example],
    out: &Path,
) -> Result<EvalReport> {
    create_dir(out)?;
    let ecfg = cfg.eval_config(cfg.decoder.smoothing)?;
    let r = evaluate(model, &eval_set(examples), &ecfg)?;
    write_file(&out.join("roc.tsv"), report::roc_tsv(&r.curve))?;
    write_file(
        &out.join("eval.tsv"),
        summary_text(model, &r, ecfg.target_fa_per_hour),
    )?;
    Ok(r)
}

/// `sweep-smoothing`: one `roc_n<n>.tsv` per smoothing length plus
/// `smoothing.tsv`.
pub fn sweep_smoothing(
    cfg: &RunConfig,
    model: &KwsModel<f32>,
    examples: &[Example],
    out: &Path,
) -> Result<Vec<EvalReport>> {
    create_dir(out)?;
    let ecfg = cfg.eval_config(cfg.decoder.smoothing)?;
    let reports = smoothing_sweep(model, &eval_set(examples), &ecfg, &cfg.eval.smoothing_grid)?;
    for r in &reports {
        write_file(
            &out.join(format!("roc_n{}.tsv", r.smoothing)),
            report::roc_tsv(&r.curve),
        )?;
    }
    write_file(&out.join("smoothing.tsv"), report::smoothing_tsv(&reports))?;
    Ok(reports)
}

/// Model configurations named by `sweep.encoders`. Entries are
/// `<cell>-<layers>-<units>` (using `model.kind`) or prefixed with
/// `seq2seq-` or `baseline-`.
pub fn sweep_models(cfg: &RunConfig) -> Result<Vec<ModelConfig>> {
    let base = cfg.model_config()?;
    cfg.sweep
        .encoders
        .iter()
        .map(|s| {
            let (kind, rest) = match s.split_once('-') {
                Some(("seq2seq", rest)) => (ModelKind::Seq2Seq, rest),
                Some(("baseline", rest)) => (ModelKind::Attention, rest),
                _ => (base.kind, s.as_str()),
            };
            Ok(ModelConfig {
                kind,
                encoder: parse_encoder(rest)?,
                ..base
            })
        })
        .collect()
}

pub fn model_dir_name(m: &ModelConfig) -> String {
    format!(
        "{}-{}-{}",
        m.name(),
        m.encoder.num_layers,
        m.encoder.hidden_units
    )
}

/// `sweep-encoders`: trains every configuration into `<out>/<name>/` and
/// compares the best-dev checkpoints on the eval manifest in
/// `comparison.tsv` and `comparison.txt`. With `params_only`, skips
/// training and reports parameter counts.
pub fn sweep_encoders(
    cfg: &RunConfig,
    params_only: bool,
    mut progress: impl FnMut(&str, &EpochReport),
) -> Result<String> {
    let configs = sweep_models(cfg)?;
    let out = cfg.out_dir();
    create_dir(&out)?;
    if params_only {
        let mut s = String::from("model\tparams\tparams_k\n");
        for m in &configs {
            let model = KwsModel::<f32>::zeros(m)?;
            s += &format!(
                "{}\t{}\t{:.1}\n",
                m,
                model.param_count(),
                model.param_count_k()
            );
        }
        write_file(&out.join("params.tsv"), &s)?;
        return Ok(s);
    }
    let train = load_split(&require(&cfg.paths.train_manifest, "train_manifest")?, cfg)?;
    let dev = match &cfg.paths.dev_manifest {
        Some(p) => Some(load_split(p, cfg)?),
        None => None,
    };
    let test = load_split(&require(&cfg.paths.eval_manifest, "eval_manifest")?, cfg)?;
    let mut models = Vec::new();
    for m in &configs {
        let name = model_dir_name(m);
        let o = train_model(
            cfg,
            m,
            &train,
            dev.as_deref(),
            &out.join(&name),
            false,
            |r| progress(&name, r),
        )?;
        models.push((m.to_string(), checkpoint::load(&o.best_path)?));
    }
    let ecfg = cfg.eval_config(cfg.decoder.smoothing)?;
    let refs: Vec<(String, &KwsModel<f32>)> = models.iter().map(|(n, m)| (n.clone(), m)).collect();
    let rows: Vec<ComparisonRow> = compare_models(&refs, &eval_set(&test), &ecfg)?;
    write_file(&out.join("comparison.tsv"), report::comparison_tsv(&rows))?;
    let text = report::comparison_text(&rows, ecfg.target_fa_per_hour);
    write_file(&out.join("comparison.txt"), &text)?;
    Ok(text)
}

/// Audio for `stream`.
pub enum AudioSource<R> {
    Wav(PathBuf),
    /// Headerless little-endian 16-bit PCM at the configured sample rate.
    Raw(R),
}

/// Runs audio through the front end and streaming decoder, writing one
/// JSON line per trigger. Event time is the end of the triggering frame.
pub fn stream<R: Read, W: Write>(
    cfg: &RunConfig,
    model: &KwsModel<f32>,
    source: AudioSource<R>,
    mut out: W,
    wall_clock: bool,
) -> Result<Vec<EventRecord>> {
    let fcfg = cfg.frontend_config()?;
    let mut frontend = Frontend::new(fcfg)?;
    let mut decoder = StreamingDecoder::new(model, cfg.decoder_config()?)?;
    let shift = fcfg.frame.shift_ms as f64 / 1000.0;
    let window = fcfg.frame.window_ms as f64 / 1000.0;
    let mut events = Vec::new();
    let mut rows: Vec<[f32; FEATURE_DIM]> = Vec::new();
    let mut feed = |samples: &[f32], events: &mut Vec<EventRecord>| -> Result<()> {
        rows.clear();
        frontend.push_samples(samples, |r| rows.push(*r))?;
        for row in &rows {
            if let Some(ev) = decoder.push_frame(row)?.event {
                let rec = EventRecord {
                    frame_index: ev.frame_index,
                    time_seconds: ev.frame_index as f64 * shift + window,
                    y_hat: ev.smoothed_probability,
                };
                let mut line = rec.to_line();
                if wall_clock {
                    let now = SystemTime::now()
                        .duration_since(UNIX_EPOCH)
                        .map_or(0.0, |d| d.as_secs_f64());
                    line.insert_str(line.len() - 1, &format!(",\"wall_clock\":{now}"));
                }
                writeln!(out, "{line}")
                    .and_then(|_| out.flush())
                    .map_err(|e| Error::io("<output>", e))?;
                events.push(rec);
            }
        }
        Ok(())
    };
    match source {
        AudioSource::Wav(path) => {
            let wave = wav::read_wav(&path)?;
            if wave.sample_rate_hz() != fcfg.sample_rate_hz {
                return Err(Error::format(
                    &path,
                    format!(
                        "sample rate {} Hz, expected {} Hz",
                        wave.sample_rate_hz(),
                        fcfg.sample_rate_hz
                    ),
                ));
            }
            feed(wave.samples(), &mut events)?;
        }
        AudioSource::Raw(input) => {
            let mut chunks = Pcm16Chunks::new(input, fcfg.frame.shift_samples(fcfg.sample_rate_hz));
            while let Some(c) = chunks.next_chunk().map_err(|e| Error::io("<stdin>", e))? {
                feed(&c, &mut events)?;
            }
        }
    }
    Ok(events)
}

/// Per-frame probability track as TSV (`frame`, `y`), plus the attention
/// weights of the final window for the baseline.
pub fn export_track(model: &KwsModel<f32>, features: &FeatureMatrix) -> Result<String> {
    let y = model.frame_probabilities(features)?;
    let mut s = String::from("frame\ty\n");
    for (t, v) in y.iter().enumerate() {
        s += &format!("{t}\t{v}\n");
    }
    if let KwsModel::Attention(_) = model {
        let mut state = model.new_stream();
        for row in features.rows() {
            model.stream_step(&mut state, row)?;
        }
        if let Some(w) = state.attention_weights() {
            s += "# attention weights over the last window, oldest first\n";
            let line: Vec<String> = w.iter().map(|v| v.to_string()).collect();
            s += &format!("# {}\n", line.join("\t"));
        }
    }
    Ok(s)
}
