//! Run configuration: a TOML file with one table per component. Every key
//! is optional; unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use kws_core::decoder::DecoderConfig;
use kws_core::dsp::{FrameSpec, FrontendConfig, PcenConfig};
use kws_core::eval::{threshold_grid, EvalConfig};
use kws_core::labeling::{Hold, KeywordSpec};
use kws_core::model::{EncoderConfig, ModelConfig, ModelKind};
use kws_core::nn::CellKind;
use kws_core::train::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Environment variable that supplies `paths.cache` when neither the file
/// nor a flag sets it.
pub const CACHE_ENV: &str = "KWS_CACHE_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrontendSection {
    pub sample_rate: u32,
    pub window_ms: u32,
    pub shift_ms: u32,
    pub n_fft: usize,
    pub f_min: f64,
    pub f_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PcenSection {
    pub smoothing: f64,
    pub alpha: f64,
    pub delta: f64,
    pub root: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    /// `seq2seq` or `baseline`.
    pub kind: String,
    /// `lstm` or `gru`.
    pub cell: String,
    pub layers: usize,
    pub hidden: usize,
    pub attn_dim: usize,
    pub train_window: usize,
    pub runtime_window: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub batch_size: usize,
    pub lr: f64,
    pub clip_norm: f64,
    pub l2: f64,
    pub epochs: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelSection {
    /// Keyword as a sequence of alignment symbols.
    pub keyword: Vec<String>,
    /// Frames of positive labels after the keyword; unset holds to the end.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hold_frames: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecoderSection {
    pub smoothing: usize,
    pub threshold: f64,
    pub lockout: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// Number of evenly spaced thresholds in `[0, 1]`.
    pub thresholds: usize,
    pub target_fa_per_hour: f64,
    pub smoothing_grid: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    /// Encoder shapes as `<cell>-<layers>-<units>`, e.g. `lstm-1-64`.
    pub encoders: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_manifest: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dev_manifest: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval_manifest: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alignments: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub frontend: FrontendSection,
    pub pcen: PcenSection,
    pub model: ModelSection,
    pub train: TrainSection,
    pub labels: LabelSection,
    pub decoder: DecoderSection,
    pub eval: EvalSection,
    pub sweep: SweepSection,
    pub paths: PathSection,
}

impl Default for FrontendSection {
    fn default() -> Self {
        let f = FrontendConfig::default();
        Self {
            sample_rate: f.sample_rate_hz,
            window_ms: f.frame.window_ms,
            shift_ms: f.frame.shift_ms,
            n_fft: f.n_fft,
            f_min: f.f_min_hz,
            f_max: f.f_max_hz,
        }
    }
}

impl Default for PcenSection {
    fn default() -> Self {
        let p = PcenConfig::default();
        Self {
            smoothing: p.smoothing,
            alpha: p.alpha,
            delta: p.delta,
            root: p.root,
            epsilon: p.epsilon,
        }
    }
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            kind: "seq2seq".into(),
            cell: "gru".into(),
            layers: 1,
            hidden: 128,
            attn_dim: 128,
            train_window: 189,
            runtime_window: 100,
        }
    }
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            batch_size: t.batch_size,
            lr: t.lr,
            clip_norm: t.clip_norm,
            l2: t.l2,
            epochs: t.epochs,
            seed: t.seed,
        }
    }
}

impl Default for DecoderSection {
    fn default() -> Self {
        let d = DecoderConfig::default();
        Self {
            smoothing: d.smoothing,
            threshold: d.threshold,
            lockout: d.lockout_frames,
        }
    }
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            thresholds: 1001,
            target_fa_per_hour: 0.1,
            smoothing_grid: vec![1, 2, 5, 12],
        }
    }
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            encoders: [
                "lstm-1-64",
                "lstm-2-64",
                "lstm-3-64",
                "lstm-1-128",
                "gru-1-64",
                "gru-1-128",
                "gru-2-128",
            ]
            .map(String::from)
            .to_vec(),
        }
    }
}

fn invalid(detail: impl std::fmt::Display) -> Error {
    Error::Usage(format!("config: {detail}"))
}

/// Parses `<cell>-<layers>-<units>`.
pub fn parse_encoder(s: &str) -> Result<EncoderConfig> {
    let parts: Vec<&str> = s.split('-').collect();
    let [cell, layers, units] = parts[..] else {
        return Err(invalid(format!(
            "encoder {s:?} is not <cell>-<layers>-<units>"
        )));
    };
    let cell: CellKind = cell.parse().map_err(invalid)?;
    let num = |v: &str| {
        v.parse::<usize>()
            .map_err(|_| invalid(format!("encoder {s:?}")))
    };
    let enc = EncoderConfig::new(cell, num(layers)?, num(units)?);
    enc.validate().map_err(invalid)?;
    Ok(enc)
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| invalid(e.message().trim()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file. Relative paths in `[paths]` are taken relative
    /// to the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            Error::Usage(d) => Error::Usage(format!("{}: {d}", path.display())),
            other => other,
        })?;
        let dir = path.parent().unwrap_or(Path::new(""));
        let base = std::path::absolute(dir).map_err(|e| Error::io(dir, e))?;
        let p = &mut cfg.paths;
        for slot in [
            &mut p.train_manifest,
            &mut p.dev_manifest,
            &mut p.eval_manifest,
            &mut p.alignments,
            &mut p.cache,
            &mut p.out,
        ] {
            if let Some(rel) = slot.as_ref().filter(|v| v.is_relative()) {
                *slot = Some(base.join(rel));
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Applies a `section.key=value` override. Values are parsed as TOML,
    /// falling back to a bare string.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| invalid(format!("override {assignment:?} is not key=value")))?;
        let value = value.trim();
        let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(value.to_string()));
        self.set_value(key, parsed)
    }

    /// Like [`RunConfig::set`] with an already typed value.
    pub fn set_value(&mut self, key: &str, parsed: toml::Value) -> Result<()> {
        let (section, field) = key
            .trim()
            .split_once('.')
            .ok_or_else(|| invalid(format!("override key {key:?} is not section.key")))?;
        let mut root = toml::Value::try_from(&*self).expect("config serializes");
        let table = root
            .get_mut(section)
            .and_then(toml::Value::as_table_mut)
            .ok_or_else(|| invalid(format!("unknown section {section:?}")))?;
        table.insert(field.to_string(), parsed);
        let next: Self = root
            .try_into()
            .map_err(|e: toml::de::Error| invalid(e.message().trim()))?;
        next.validate()?;
        *self = next;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.frontend_config()?;
        self.model_config()?;
        self.train_config()?;
        self.decoder_config()?;
        self.eval_config(self.decoder.smoothing)?;
        if let Some(0) = self.labels.hold_frames {
            return Err(invalid("labels.hold_frames must be >= 1"));
        }
        if self.eval.smoothing_grid.contains(&0) {
            return Err(invalid("eval.smoothing_grid entries must be >= 1"));
        }
        for e in &self.sweep.encoders {
            parse_encoder(e)?;
        }
        Ok(())
    }

    pub fn frontend_config(&self) -> Result<FrontendConfig> {
        let f = &self.frontend;
        let p = &self.pcen;
        let cfg = FrontendConfig {
            sample_rate_hz: f.sample_rate,
            frame: FrameSpec {
                window_ms: f.window_ms,
                shift_ms: f.shift_ms,
            },
            n_fft: f.n_fft,
            f_min_hz: f.f_min,
            f_max_hz: f.f_max,
            pcen: PcenConfig {
                smoothing: p.smoothing,
                alpha: p.alpha,
                delta: p.delta,
                root: p.root,
                epsilon: p.epsilon,
            },
        };
        cfg.validate().map_err(invalid)?;
        Ok(cfg)
    }

    pub fn frame_spec(&self) -> FrameSpec {
        FrameSpec {
            window_ms: self.frontend.window_ms,
            shift_ms: self.frontend.shift_ms,
        }
    }

    pub fn model_config(&self) -> Result<ModelConfig> {
        let m = &self.model;
        let kind = match m.kind.as_str() {
            "seq2seq" => ModelKind::Seq2Seq,
            "baseline" | "attention" => ModelKind::Attention,
            other => {
                return Err(invalid(format!(
                    "model.kind {other:?} (seq2seq or baseline)"
                )))
            }
        };
        let cfg = ModelConfig {
            kind,
            encoder: EncoderConfig::new(m.cell.parse().map_err(invalid)?, m.layers, m.hidden),
            attn_dim: m.attn_dim,
            train_window: m.train_window,
            runtime_window: m.runtime_window,
        };
        cfg.validate().map_err(invalid)?;
        Ok(cfg)
    }

    /// Sets kind and cell from a name like `seq2seq-gru`.
    pub fn set_model_name(&mut self, name: &str) -> Result<()> {
        let parsed: ModelConfig = name.parse().map_err(invalid)?;
        self.model.kind = parsed.kind.as_str().into();
        self.model.cell = parsed.encoder.cell.as_str().into();
        Ok(())
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let t = &self.train;
        let cfg = TrainConfig {
            batch_size: t.batch_size,
            lr: t.lr,
            clip_norm: t.clip_norm,
            l2: t.l2,
            epochs: t.epochs,
            seed: t.seed,
        };
        cfg.validate().map_err(invalid)?;
        Ok(cfg)
    }

    pub fn decoder_config(&self) -> Result<DecoderConfig> {
        let cfg = DecoderConfig {
            smoothing: self.decoder.smoothing,
            threshold: self.decoder.threshold,
            lockout_frames: self.decoder.lockout,
        };
        cfg.validate().map_err(invalid)?;
        Ok(cfg)
    }

    /// Evaluation settings at smoothing length `n`.
    pub fn eval_config(&self, n: usize) -> Result<EvalConfig> {
        let e = &self.eval;
        if e.thresholds < 2 {
            return Err(invalid("eval.thresholds must be >= 2"));
        }
        if e.target_fa_per_hour.is_nan() || e.target_fa_per_hour < 0.0 {
            return Err(invalid("eval.target_fa_per_hour must be >= 0"));
        }
        if n == 0 {
            return Err(invalid("smoothing length must be >= 1"));
        }
        Ok(EvalConfig {
            smoothing: n,
            lockout_frames: self.decoder.lockout,
            thresholds: threshold_grid(e.thresholds),
            target_fa_per_hour: e.target_fa_per_hour,
        })
    }

    pub fn keyword(&self) -> Result<KeywordSpec> {
        KeywordSpec::new(self.labels.keyword.iter().cloned())
            .map_err(|_| invalid("labels.keyword must list at least one symbol"))
    }

    pub fn hold(&self) -> Hold {
        self.labels.hold_frames.map_or(Hold::ToEnd, Hold::Frames)
    }

    /// `paths.cache`, else the cache environment variable.
    pub fn cache_dir(&self) -> Result<PathBuf> {
        self.paths
            .cache
            .clone()
            .or_else(|| std::env::var_os(CACHE_ENV).map(PathBuf::from))
            .ok_or_else(|| invalid(format!("no feature cache: set paths.cache or {CACHE_ENV}")))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.paths.out.clone().unwrap_or_else(|| PathBuf::from("."))
    }
}
