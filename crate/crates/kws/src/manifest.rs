//! Dataset manifests: TSV rows of `utt_id`, `wav_path`, `alignment_id` (or
//! `-`), `is_positive`. Features for an utterance are cached at
//! `<cache>/<utt_id>.kwsf`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const HEADER: &str = "utt_id\twav_path\talignment_id\tis_positive";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub utt_id: String,
    /// Relative paths are resolved against the manifest's directory.
    pub wav_path: PathBuf,
    pub alignment_id: Option<String>,
    pub is_positive: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    pub entries: Vec<Entry>,
}

pub fn cache_path(cache: &Path, utt_id: &str) -> PathBuf {
    cache.join(format!("{utt_id}.kwsf"))
}

fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "1" | "true" | "yes" => Some(true),
        "0" | "false" | "no" => Some(false),
        _ => None,
    }
}

impl Manifest {
    /// Parses manifest text; a header row and `#` comment lines are optional.
    pub fn parse(text: &str, base: &Path) -> std::result::Result<Self, String> {
        let mut entries = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') || line == HEADER {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            let [id, wav, align, pos] = f[..] else {
                return Err(format!("line {}: expected 4 tab-separated columns", n + 1));
            };
            if id.is_empty() || id.contains(['/', '\\']) {
                return Err(format!("line {}: invalid utterance id {id:?}", n + 1));
            }
            if !seen.insert(id.to_string()) {
                return Err(format!("line {}: duplicate utterance id {id}", n + 1));
            }
            let is_positive = parse_bool(pos.trim())
                .ok_or_else(|| format!("line {}: is_positive {pos:?} is not 0/1", n + 1))?;
            let alignment_id = (align != "-").then(|| align.to_string());
            if is_positive && alignment_id.is_none() {
                return Err(format!(
                    "line {}: positive utterance {id} has no alignment",
                    n + 1
                ));
            }
            let wav = PathBuf::from(wav);
            entries.push(Entry {
                utt_id: id.to_string(),
                wav_path: if wav.is_absolute() {
                    wav
                } else {
                    base.join(wav)
                },
                alignment_id,
                is_positive,
            });
        }
        Ok(Self { entries })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse(&text, base).map_err(|d| Error::format(path, d))
    }

    /// Renders with paths relative to `base` where possible.
    pub fn render(&self, base: &Path) -> String {
        let mut s = format!("{HEADER}\n");
        for e in &self.entries {
            let wav = e.wav_path.strip_prefix(base).unwrap_or(&e.wav_path);
            writeln!(
                s,
                "{}\t{}\t{}\t{}",
                e.utt_id,
                wav.display(),
                e.alignment_id.as_deref().unwrap_or("-"),
                u8::from(e.is_positive)
            )
            .unwrap();
        }
        s
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or(Path::new(""));
        fs::write(path, self.render(base)).map_err(|e| Error::io(path, e))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_render_round_trip() {
        let text = "utt_id\twav_path\talignment_id\tis_positive\n# note\na\twav/a.wav\ta\t1\nb\t/abs/b.wav\t-\t0\n";
        let m = Manifest::parse(text, Path::new("/data")).unwrap();
        assert_eq!(m.entries[0].wav_path, PathBuf::from("/data/wav/a.wav"));
        assert_eq!(m.entries[1].alignment_id, None);
        assert!(!m.entries[1].is_positive);
        let back = Manifest::parse(&m.render(Path::new("/data")), Path::new("/data")).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn rejects_bad_rows() {
        let base = Path::new(".");
        assert!(Manifest::parse("a\tx.wav\t-\n", base).is_err());
        assert!(Manifest::parse("a\tx.wav\t-\tmaybe\n", base).is_err());
        assert!(Manifest::parse("a\tx.wav\t-\t1\n", base)
            .unwrap_err()
            .contains("alignment"));
        assert!(Manifest::parse("a\tx\t-\t0\na\ty\t-\t0\n", base)
            .unwrap_err()
            .contains("duplicate"));
        assert!(Manifest::parse("../a\tx\t-\t0\n", base).is_err());
    }

    #[test]
    fn cache_convention() {
        assert_eq!(cache_path(Path::new("c"), "u1"), PathBuf::from("c/u1.kwsf"));
    }
}
