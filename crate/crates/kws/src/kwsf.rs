//! Feature blobs: `KWSF`, `u32` frame count, `u32` dim, then row-major
//! little-endian `f32` values.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use kws_core::dsp::{FeatureMatrix, FrameSpec, FEATURE_DIM};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"KWSF";
const HEADER_BYTES: usize = 12;

pub fn encode(features: &FeatureMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_BYTES + features.as_slice().len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(features.frames() as u32).to_le_bytes());
    out.extend_from_slice(&(FEATURE_DIM as u32).to_le_bytes());
    for v in features.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Parses a blob; `spec` is the framing the features were computed with.
pub fn decode(bytes: &[u8], spec: FrameSpec) -> std::result::Result<FeatureMatrix, String> {
    if bytes.len() < HEADER_BYTES || &bytes[..4] != MAGIC {
        return Err("not a KWSF feature file".into());
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let (frames, dim) = (word(4), word(8));
    if dim != FEATURE_DIM {
        return Err(format!("feature dim {dim}, expected {FEATURE_DIM}"));
    }
    let body = &bytes[HEADER_BYTES..];
    if body.len() != frames * dim * 4 {
        return Err(format!(
            "{} payload bytes for {frames} frames, expected {}",
            body.len(),
            frames * dim * 4
        ));
    }
    let data = body
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    FeatureMatrix::new(data, frames, spec).map_err(|e| e.to_string())
}

pub fn write(path: impl AsRef<Path>, features: &FeatureMatrix) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(features)).map_err(|e| Error::io(path, e))
}

pub fn read(path: impl AsRef<Path>, spec: FrameSpec) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, spec).map_err(|d| Error::format(path, d))
}

/// Debug export: one frame per line, tab-separated values.
pub fn write_tsv<W: Write>(mut out: W, features: &FeatureMatrix) -> io::Result<()> {
    for row in features.rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", line.join("\t"))?;
    }
    Ok(())
}

pub fn read_tsv<R: Read>(
    mut input: R,
    spec: FrameSpec,
) -> std::result::Result<FeatureMatrix, String> {
    let mut text = String::new();
    input.read_to_string(&mut text).map_err(|e| e.to_string())?;
    let mut data = Vec::new();
    let mut frames = 0;
    for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.is_empty()) {
        let row = line
            .split('\t')
            .map(str::parse::<f32>)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| format!("line {}: {e}", n + 1))?;
        if row.len() != FEATURE_DIM {
            return Err(format!("line {}: {} columns", n + 1, row.len()));
        }
        data.extend(row);
        frames += 1;
    }
    FeatureMatrix::new(data, frames, spec).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn matrix(values: Vec<f32>) -> FeatureMatrix {
        let frames = values.len() / FEATURE_DIM;
        FeatureMatrix::new(
            values[..frames * FEATURE_DIM].to_vec(),
            frames,
            FrameSpec::default(),
        )
        .unwrap()
    }

    #[test]
    fn header_layout() {
        let m = matrix((0..80).map(|i| i as f32).collect());
        let b = encode(&m);
        assert_eq!(&b[..4], b"KWSF");
        assert_eq!(&b[4..8], &2u32.to_le_bytes());
        assert_eq!(&b[8..12], &40u32.to_le_bytes());
        assert_eq!(&b[12 + 41 * 4..12 + 42 * 4], &41f32.to_le_bytes());
        assert_eq!(b.len(), 12 + 320);
    }

    #[test]
    fn rejects_bad_blobs() {
        let m = matrix(vec![0.5; 40]);
        let mut b = encode(&m);
        assert!(decode(&b[..b.len() - 1], FrameSpec::default()).is_err());
        b[8] = 13;
        assert!(decode(&b, FrameSpec::default())
            .unwrap_err()
            .contains("dim"));
        assert!(decode(b"RIFF....", FrameSpec::default()).is_err());
    }

    proptest! {
        #[test]
        fn binary_and_tsv_round_trip(values in prop::collection::vec(-1e6f32..1e6, 0..400)) {
            let m = matrix(values);
            prop_assert_eq!(&decode(&encode(&m), FrameSpec::default()).unwrap(), &m);
            let mut tsv = Vec::new();
            write_tsv(&mut tsv, &m).unwrap();
            prop_assert_eq!(&read_tsv(&tsv[..], FrameSpec::default()).unwrap(), &m);
        }
    }
}
