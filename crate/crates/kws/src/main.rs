use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kws::config::RunConfig;
use kws::error::{Error, Result};
use kws::manifest::Manifest;
use kws::pipeline::{self, AudioSource};
use kws::synth::{self, SynthConfig};
use kws::{checkpoint, kwsf};
use kws_core::train::EpochReport;

/// Small-footprint keyword spotting: features, training, evaluation and
/// streaming detection.
#[derive(Parser)]
#[command(name = "kws", version)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Override a config value, e.g. `--set train.lr=0.01`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Feature cache directory (else paths.cache, else $KWS_CACHE_DIR).
    #[arg(long, global = true)]
    cache: Option<PathBuf>,
    /// Output directory (paths.out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Random seed (train.seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ModelFlags {
    /// Model name such as `seq2seq-gru` or `baseline-lstm`.
    #[arg(long)]
    model: Option<String>,
    /// Encoder layers (model.layers).
    #[arg(long)]
    layers: Option<usize>,
    /// Encoder units per layer (model.hidden).
    #[arg(long)]
    hidden: Option<usize>,
}

#[derive(Args)]
struct DecoderFlags {
    /// Smoothing length n (decoder.smoothing).
    #[arg(long)]
    smoothing: Option<usize>,
    /// Trigger threshold (decoder.threshold).
    #[arg(long)]
    threshold: Option<f64>,
    /// Lockout frames after a trigger (decoder.lockout).
    #[arg(long)]
    lockout: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Compute and cache features for every manifest entry.
    Featurize {
        /// Dataset manifest; defaults to every manifest in `[paths]`.
        #[arg(long)]
        manifest: Vec<PathBuf>,
    },
    /// Derive per-frame labels from alignments and write them as TSV.
    Label {
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Train one model.
    Train {
        #[command(flatten)]
        model: ModelFlags,
        #[arg(long)]
        train_manifest: Option<PathBuf>,
        #[arg(long)]
        dev_manifest: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
        /// Continue from `final.kwsm` in the output directory.
        #[arg(long)]
        resume: bool,
    },
    /// ROC curve and FRR at the target false-alarm rate.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[command(flatten)]
        decoder: DecoderFlags,
    },
    /// Train and compare every encoder listed in `sweep.encoders`.
    SweepEncoders {
        /// Only report parameter counts.
        #[arg(long)]
        params_only: bool,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Evaluate one checkpoint at every smoothing length in `eval.smoothing_grid`.
    SweepSmoothing {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Comma-separated smoothing lengths.
        #[arg(long, value_delimiter = ',')]
        grid: Vec<usize>,
    },
    /// Detect the keyword in a WAV file or raw 16-bit PCM on stdin.
    Stream {
        #[arg(long)]
        checkpoint: PathBuf,
        /// WAV input; without it, reads headerless PCM from stdin.
        #[arg(long)]
        wav: Option<PathBuf>,
        #[command(flatten)]
        decoder: DecoderFlags,
        /// Add a `wall_clock` (Unix seconds) field to each event.
        #[arg(long)]
        wall_clock: bool,
    },
    /// Export a per-frame probability track for cached features.
    Track {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        features: PathBuf,
    },
    /// Write a synthetic tone-sequence corpus with manifests and a config.
    Synth {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value_t = 200)]
        positives: usize,
        #[arg(long, default_value_t = 400)]
        negatives: usize,
    },
}

fn set<T: serde::Serialize>(cfg: &mut RunConfig, key: &str, v: Option<T>) -> Result<()> {
    match v {
        Some(v) => {
            let value =
                toml::Value::try_from(v).map_err(|e| Error::Usage(format!("{key}: {e}")))?;
            cfg.set_value(key, value)
        }
        None => Ok(()),
    }
}

fn set_path(slot: &mut Option<PathBuf>, v: Option<PathBuf>) {
    if v.is_some() {
        *slot = v;
    }
}

fn apply_decoder(cfg: &mut RunConfig, d: DecoderFlags) -> Result<()> {
    set(cfg, "decoder.smoothing", d.smoothing)?;
    set(cfg, "decoder.threshold", d.threshold)?;
    set(cfg, "decoder.lockout", d.lockout)
}

fn progress(r: &EpochReport) {
    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
    eprintln!(
        "epoch {:>3}  step {:>6}  train_loss {:.4}  dev_loss {}  dev_frr {}",
        r.epoch,
        r.step,
        r.train_loss,
        fmt(r.dev_loss),
        fmt(r.dev_frr)
    );
}

fn eval_examples(
    cfg: &RunConfig,
    manifest: Option<PathBuf>,
) -> Result<Vec<kws_core::train::Example>> {
    let path = manifest
        .or_else(|| cfg.paths.eval_manifest.clone())
        .ok_or_else(|| Error::Usage("missing --manifest or paths.eval_manifest".into()))?;
    pipeline::load_split(&path, cfg)
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for o in &cli.overrides {
        cfg.set(o)?;
    }
    set_path(&mut cfg.paths.cache, cli.cache);
    set_path(&mut cfg.paths.out, cli.out);
    set(&mut cfg, "train.seed", cli.seed)?;

    match cli.command {
        Command::Featurize { manifest } => {
            let paths: Vec<PathBuf> = if manifest.is_empty() {
                [
                    &cfg.paths.train_manifest,
                    &cfg.paths.dev_manifest,
                    &cfg.paths.eval_manifest,
                ]
                .into_iter()
                .flatten()
                .cloned()
                .collect()
            } else {
                manifest
            };
            if paths.is_empty() {
                return Err(Error::Usage("no manifest given".into()));
            }
            let cache = cfg.cache_dir()?;
            let mut failed = 0;
            for p in paths {
                let m = Manifest::read(&p)?;
                if m.is_empty() {
                    eprintln!("warning: {} lists no utterances", p.display());
                }
                let s = pipeline::featurize(&m, &cfg, &cache)?;
                for (id, e) in &s.failures {
                    eprintln!("error: {id}: {e}");
                }
                println!(
                    "{}: {} written, {} up to date, {} failed",
                    p.display(),
                    s.written,
                    s.skipped,
                    s.failures.len()
                );
                failed += s.failures.len();
            }
            if failed > 0 {
                return Err(Error::Data(format!("{failed} file(s) failed")));
            }
        }
        Command::Label { manifest } => {
            let path = manifest
                .or_else(|| cfg.paths.train_manifest.clone())
                .ok_or_else(|| Error::Usage("missing --manifest or paths.train_manifest".into()))?;
            let out = cfg.out_dir().join("labels");
            let n = pipeline::label(&Manifest::read(&path)?, &cfg, &cfg.cache_dir()?, &out)?;
            println!("{n} label files written to {}", out.display());
        }
        Command::Train {
            model,
            train_manifest,
            dev_manifest,
            epochs,
            lr,
            batch_size,
            resume,
        } => {
            if let Some(name) = model.model {
                cfg.set_model_name(&name)?;
            }
            set(&mut cfg, "model.layers", model.layers)?;
            set(&mut cfg, "model.hidden", model.hidden)?;
            set(&mut cfg, "train.epochs", epochs)?;
            set(&mut cfg, "train.lr", lr)?;
            set(&mut cfg, "train.batch_size", batch_size)?;
            set_path(&mut cfg.paths.train_manifest, train_manifest);
            set_path(&mut cfg.paths.dev_manifest, dev_manifest);
            let m = cfg.model_config()?;
            eprintln!(
                "training {m} ({} parameters)",
                kws_core::model::KwsModel::<f32>::zeros(&m)?.param_count()
            );
            let o = pipeline::train(&cfg, resume, progress)?;
            println!("final checkpoint: {}", o.final_path.display());
            if let Some(b) = o.best {
                println!(
                    "best checkpoint: {} (epoch {})",
                    o.best_path.display(),
                    b.epoch
                );
            }
        }
        Command::Eval {
            checkpoint: ckpt,
            manifest,
            decoder,
        } => {
            apply_decoder(&mut cfg, decoder)?;
            let model = checkpoint::load(&ckpt)?;
            let examples = eval_examples(&cfg, manifest)?;
            let out = cfg.out_dir();
            let r = pipeline::eval(&cfg, &model, &examples, &out)?;
            let op = r.operating;
            println!(
                "model {} ({} parameters, {:.1}K)",
                model.config(),
                model.param_count(),
                model.param_count_k()
            );
            println!(
                "FRR {:.2}% at {} FA/h (threshold {}, {} FA/h){}",
                100.0 * op.point.frr,
                cfg.eval.target_fa_per_hour,
                op.point.threshold,
                op.point.fa_per_hour,
                if op.meets_target {
                    ""
                } else {
                    ", target not reached"
                }
            );
            println!("ROC written to {}", out.join("roc.tsv").display());
        }
        Command::SweepEncoders {
            params_only,
            epochs,
        } => {
            set(&mut cfg, "train.epochs", epochs)?;
            let text = pipeline::sweep_encoders(&cfg, params_only, |name, r| {
                eprint!("{name}: ");
                progress(r);
            })?;
            print!("{text}");
        }
        Command::SweepSmoothing {
            checkpoint: ckpt,
            manifest,
            grid,
        } => {
            if !grid.is_empty() {
                let list: Vec<String> = grid.iter().map(|n| n.to_string()).collect();
                cfg.set(&format!("eval.smoothing_grid=[{}]", list.join(",")))?;
            }
            let model = checkpoint::load(&ckpt)?;
            let examples = eval_examples(&cfg, manifest)?;
            let out = cfg.out_dir();
            let reports = pipeline::sweep_smoothing(&cfg, &model, &examples, &out)?;
            print!("{}", kws::report::smoothing_tsv(&reports));
        }
        Command::Stream {
            checkpoint: ckpt,
            wav,
            decoder,
            wall_clock,
        } => {
            apply_decoder(&mut cfg, decoder)?;
            let model = checkpoint::load(&ckpt)?;
            let source = match wav {
                Some(p) => AudioSource::Wav(p),
                None => AudioSource::Raw(io::stdin().lock()),
            };
            pipeline::stream(&cfg, &model, source, io::stdout().lock(), wall_clock)?;
        }
        Command::Track {
            checkpoint: ckpt,
            features,
        } => {
            let model = checkpoint::load(&ckpt)?;
            let x = kwsf::read(&features, cfg.frame_spec())?;
            let text = pipeline::export_track(&model, &x)?;
            io::stdout()
                .lock()
                .write_all(text.as_bytes())
                .map_err(|e| Error::io("<stdout>", e))?;
        }
        Command::Synth {
            dir,
            positives,
            negatives,
        } => {
            let sc = SynthConfig {
                positives,
                negatives,
                seed: cfg.train.seed,
                ..SynthConfig::default()
            };
            let path = synth::write_corpus(&dir, &sc)?;
            println!("corpus written; config at {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
