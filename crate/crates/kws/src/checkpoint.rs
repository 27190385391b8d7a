//! Model checkpoints.
//!
//! `<name>.kwsm` holds a fixed header (magic `KWSM`, format version, model
//! configuration, parameter count) followed by every parameter buffer in
//! canonical order as little-endian `f32`. `<name>.kwsm.json` describes the
//! buffers and carries the SHA-256 of the binary file.
//!
//! Optimizer moments for resuming live in a separate `.kwso` file.

use std::fs;
use std::path::{Path, PathBuf};

use kws_core::model::{EncoderConfig, KwsModel, ModelConfig, ModelKind};
use kws_core::nn::{AdamConfig, AdamState, BufferKind, CellKind, Parameters};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"KWSM";
pub const VERSION: u32 = 1;
const HEADER_BYTES: usize = 48;
const OPT_MAGIC: &[u8; 4] = b"KWSO";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BufferInfo {
    pub name: String,
    pub kind: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub model: String,
    pub kind: String,
    pub cell: String,
    pub num_layers: usize,
    pub hidden_units: usize,
    pub input_dim: usize,
    pub attn_dim: usize,
    pub train_window: usize,
    pub runtime_window: usize,
    pub param_count: usize,
    pub params_k: f64,
    pub buffers: Vec<BufferInfo>,
    pub sha256: String,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

pub fn encode(model: &KwsModel<f32>) -> Vec<u8> {
    let cfg = model.config();
    let flat = model.flatten();
    let mut out = Vec::with_capacity(HEADER_BYTES + flat.len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(match cfg.kind {
        ModelKind::Seq2Seq => 0,
        ModelKind::Attention => 1,
    });
    out.push(match cfg.encoder.cell {
        CellKind::Lstm => 0,
        CellKind::Gru => 1,
    });
    out.extend_from_slice(&[0, 0]);
    for v in [
        cfg.encoder.num_layers,
        cfg.encoder.hidden_units,
        cfg.encoder.input_dim,
        cfg.attn_dim,
        cfg.train_window,
        cfg.runtime_window,
    ] {
        put_u32(&mut out, v);
    }
    out.extend_from_slice(&(flat.len() as u64).to_le_bytes());
    out.extend_from_slice(&[0; 4]);
    debug_assert_eq!(out.len(), HEADER_BYTES);
    for v in flat {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> std::result::Result<KwsModel<f32>, String> {
    if bytes.len() < HEADER_BYTES || &bytes[..4] != MAGIC {
        return Err("not a KWSM checkpoint".into());
    }
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != VERSION {
        return Err(format!("checkpoint version {version}, expected {VERSION}"));
    }
    let kind = match bytes[8] {
        0 => ModelKind::Seq2Seq,
        1 => ModelKind::Attention,
        k => return Err(format!("unknown model kind tag {k}")),
    };
    let cell = match bytes[9] {
        0 => CellKind::Lstm,
        1 => CellKind::Gru,
        c => return Err(format!("unknown cell tag {c}")),
    };
    let field = |k: usize| u32_at(12 + 4 * k) as usize;
    let cfg = ModelConfig {
        kind,
        encoder: EncoderConfig {
            cell,
            num_layers: field(0),
            hidden_units: field(1),
            input_dim: field(2),
        },
        attn_dim: field(3),
        train_window: field(4),
        runtime_window: field(5),
    };
    let count = u64::from_le_bytes(bytes[36..44].try_into().unwrap()) as usize;
    let mut model = KwsModel::<f32>::zeros(&cfg).map_err(|e| e.to_string())?;
    if count != model.param_count() {
        return Err(format!(
            "header lists {count} parameters, {} needs {}",
            cfg,
            model.param_count()
        ));
    }
    let body = &bytes[HEADER_BYTES..];
    if body.len() != count * 4 {
        return Err(format!(
            "{} payload bytes, expected {}",
            body.len(),
            count * 4
        ));
    }
    let flat: Vec<f32> = body
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    model.load_flat(&flat);
    Ok(model)
}

pub fn manifest(model: &KwsModel<f32>, bytes: &[u8]) -> Manifest {
    let cfg = model.config();
    Manifest {
        format: "KWSM".into(),
        version: VERSION,
        model: cfg.to_string(),
        kind: cfg.kind.as_str().into(),
        cell: cfg.encoder.cell.as_str().into(),
        num_layers: cfg.encoder.num_layers,
        hidden_units: cfg.encoder.hidden_units,
        input_dim: cfg.encoder.input_dim,
        attn_dim: cfg.attn_dim,
        train_window: cfg.train_window,
        runtime_window: cfg.runtime_window,
        param_count: model.param_count(),
        params_k: model.param_count_k(),
        buffers: model
            .params()
            .into_iter()
            .map(|p| BufferInfo {
                name: p.name,
                kind: match p.kind {
                    BufferKind::Weight => "weight".into(),
                    BufferKind::Bias => "bias".into(),
                },
                shape: p.shape,
            })
            .collect(),
        sha256: sha256_hex(bytes),
    }
}

/// Writes the binary checkpoint and its JSON sidecar.
pub fn save(path: impl AsRef<Path>, model: &KwsModel<f32>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(model);
    let json = serde_json::to_string_pretty(&manifest(model, &bytes)).expect("manifest serializes");
    fs::write(path, &bytes).map_err(|e| Error::io(path, e))?;
    let side = sidecar_path(path);
    fs::write(&side, json + "\n").map_err(|e| Error::io(&side, e))
}

/// Loads a checkpoint, verifying the sidecar checksum when one exists.
pub fn load(path: impl AsRef<Path>) -> Result<KwsModel<f32>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let side = sidecar_path(path);
    if side.exists() {
        let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
        let m: Manifest =
            serde_json::from_str(&text).map_err(|e| Error::format(&side, e.to_string()))?;
        let actual = sha256_hex(&bytes);
        if m.sha256 != actual {
            return Err(Error::format(
                path,
                format!("checksum {actual} does not match manifest {}", m.sha256),
            ));
        }
    }
    decode(&bytes).map_err(|d| Error::format(path, d))
}

/// Saves Adam moments and progress: magic, version, step, epochs done,
/// length, then `m` and `v` as little-endian `f32`.
pub fn save_optimizer(
    path: impl AsRef<Path>,
    adam: &AdamState<f32>,
    epochs_done: u64,
) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::with_capacity(32 + adam.m.len() * 8);
    out.extend_from_slice(OPT_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&adam.step.to_le_bytes());
    out.extend_from_slice(&epochs_done.to_le_bytes());
    out.extend_from_slice(&(adam.m.len() as u64).to_le_bytes());
    for v in adam.m.iter().chain(&adam.v) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_optimizer(path: impl AsRef<Path>, config: AdamConfig) -> Result<(AdamState<f32>, u64)> {
    let path = path.as_ref();
    let b = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |d: &str| Error::format(path, d.to_string());
    if b.len() < 32 || &b[..4] != OPT_MAGIC {
        return Err(bad("not a KWSO optimizer state"));
    }
    let u64_at = |i: usize| u64::from_le_bytes(b[i..i + 8].try_into().unwrap());
    let (step, epochs, n) = (u64_at(8), u64_at(16), u64_at(24) as usize);
    if b.len() != 32 + n * 8 {
        return Err(bad("truncated optimizer state"));
    }
    let vals: Vec<f32> = b[32..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let (m, v) = vals.split_at(n);
    Ok((
        AdamState {
            config,
            m: m.to_vec(),
            v: v.to_vec(),
            step,
        },
        epochs,
    ))
}
