//! 16-bit PCM mono WAV input and output.

use std::io::{self, Read};
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use kws_core::dsp::Waveform;

use crate::error::{Error, Result};

pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    let reader = WavReader::open(path).map_err(|e| hound_error(path, e))?;
    decode(reader, path)
}

pub fn read_wav_from<R: Read>(input: R, name: impl AsRef<Path>) -> Result<Waveform> {
    let reader = WavReader::new(input).map_err(|e| hound_error(name.as_ref(), e))?;
    decode(reader, name.as_ref())
}

fn decode<R: Read>(reader: WavReader<R>, path: &Path) -> Result<Waveform> {
    let spec = reader.spec();
    if spec.sample_format != SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::format(
            path,
            format!(
                "expected 16-bit integer PCM, found {}-bit {:?}",
                spec.bits_per_sample, spec.sample_format
            ),
        ));
    }
    if spec.channels != 1 {
        return Err(Error::format(
            path,
            format!("expected mono audio, found {} channels", spec.channels),
        ));
    }
    let pcm = reader
        .into_samples::<i16>()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| hound_error(path, e))?;
    Ok(Waveform::from_pcm16(&pcm, spec.sample_rate)?)
}

fn hound_error(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::format(path, other.to_string()),
    }
}

pub fn write_wav(path: impl AsRef<Path>, pcm: &[i16], sample_rate_hz: u32) -> Result<()> {
    let path = path.as_ref();
    let spec = WavSpec {
        channels: 1,
        sample_rate: sample_rate_hz,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut w = WavWriter::create(path, spec).map_err(|e| hound_error(path, e))?;
    for &s in pcm {
        w.write_sample(s).map_err(|e| hound_error(path, e))?;
    }
    w.finalize().map_err(|e| hound_error(path, e))
}

/// Quantizes `[-1, 1]` samples to 16-bit PCM with clipping.
pub fn to_pcm16(samples: &[f32]) -> Vec<i16> {
    samples
        .iter()
        .map(|&s| (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16)
        .collect()
}

/// Raw little-endian 16-bit PCM (no header) read in chunks, scaled to
/// `[-1, 1)` like [`Waveform::from_pcm16`].
pub struct Pcm16Chunks<R> {
    input: R,
    buf: Vec<u8>,
    carry: Option<u8>,
}

impl<R: Read> Pcm16Chunks<R> {
    pub fn new(input: R, chunk_samples: usize) -> Self {
        Self {
            input,
            buf: vec![0; chunk_samples.max(1) * 2],
            carry: None,
        }
    }

    /// Next block of samples; `None` at end of input.
    pub fn next_chunk(&mut self) -> io::Result<Option<Vec<f32>>> {
        let mut bytes = Vec::with_capacity(self.buf.len() + 1);
        bytes.extend(self.carry.take());
        let n = loop {
            match self.input.read(&mut self.buf) {
                Ok(n) => break n,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
                Err(e) => return Err(e),
            }
        };
        if n == 0 {
            return Ok(None);
        }
        bytes.extend_from_slice(&self.buf[..n]);
        if bytes.len() % 2 == 1 {
            self.carry = bytes.pop();
        }
        Ok(Some(
            bytes
                .chunks_exact(2)
                .map(|b| i16::from_le_bytes([b[0], b[1]]) as f32 / 32768.0)
                .collect(),
        ))
    }
}
