//! Per-frame detection targets from token alignments.
//!
//! A frame is labeled `1` once the whole keyword has been heard, `-1` while
//! the final keyword unit is at least half heard but not finished, and `0`
//! otherwise. `-1` frames get zero loss weight.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

/// One aligned token; `end_frame` is exclusive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub symbol: String,
    pub start_frame: usize,
    pub end_frame: usize,
}

impl Token {
    pub fn new(symbol: impl Into<String>, start_frame: usize, end_frame: usize) -> Self {
        Self {
            symbol: symbol.into(),
            start_frame,
            end_frame,
        }
    }

    pub fn len(&self) -> usize {
        self.end_frame - self.start_frame
    }

    pub fn is_empty(&self) -> bool {
        self.end_frame <= self.start_frame
    }
}

/// Time-ordered, non-overlapping tokens of one utterance.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Alignment {
    tokens: Vec<Token>,
}

impl Alignment {
    pub fn new(tokens: Vec<Token>) -> Result<Self> {
        for (i, t) in tokens.iter().enumerate() {
            if t.start_frame >= t.end_frame {
                return Err(Error::invalid(
                    "alignment",
                    alloc::format!("token {i} ({}) has start >= end", t.symbol),
                ));
            }
            if i > 0 && tokens[i - 1].end_frame > t.start_frame {
                return Err(Error::invalid(
                    "alignment",
                    alloc::format!(
                        "token {i} ({}) overlaps or precedes its predecessor",
                        t.symbol
                    ),
                ));
            }
        }
        Ok(Self { tokens })
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn end_frame(&self) -> usize {
        self.tokens.last().map_or(0, |t| t.end_frame)
    }

    /// Shifts every token by `offset` frames.
    pub fn offset(&self, offset: usize) -> Self {
        Self {
            tokens: self
                .tokens
                .iter()
                .map(|t| {
                    Token::new(
                        t.symbol.clone(),
                        t.start_frame + offset,
                        t.end_frame + offset,
                    )
                })
                .collect(),
        }
    }

    /// Appends `other`, whose frames must not start before this alignment ends.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        let mut tokens = self.tokens.clone();
        tokens.extend(other.tokens.iter().cloned());
        Self::new(tokens)
    }
}

/// Ordered subword units that make up the keyword.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeywordSpec {
    units: Vec<String>,
}

impl KeywordSpec {
    pub fn new<S: Into<String>>(units: impl IntoIterator<Item = S>) -> Result<Self> {
        let units: Vec<String> = units.into_iter().map(Into::into).collect();
        if units.is_empty() || units.iter().any(|u| u.is_empty()) {
            return Err(Error::invalid(
                "keyword",
                "needs at least one nonempty unit",
            ));
        }
        Ok(Self { units })
    }

    pub fn units(&self) -> &[String] {
        &self.units
    }
}

/// One keyword occurrence located in an alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Occurrence {
    /// Index of the first matching token.
    pub token_index: usize,
    pub start_frame: usize,
    pub final_start: usize,
    /// Exclusive end of the final unit.
    pub end_frame: usize,
}

impl Occurrence {
    /// `floor((start + end) / 2)` of the final unit.
    pub fn midpoint(&self) -> usize {
        (self.final_start + self.end_frame) / 2
    }
}

/// Every run of consecutive tokens equal to the keyword units, scanned left
/// to right without overlap.
pub fn find_occurrences(align: &Alignment, kw: &KeywordSpec) -> Vec<Occurrence> {
    let toks = align.tokens();
    let k = kw.units.len();
    let mut out = Vec::new();
    let mut i = 0;
    while i + k <= toks.len() {
        if toks[i..i + k]
            .iter()
            .zip(&kw.units)
            .all(|(t, u)| &t.symbol == u)
        {
            out.push(Occurrence {
                token_index: i,
                start_frame: toks[i].start_frame,
                final_start: toks[i + k - 1].start_frame,
                end_frame: toks[i + k - 1].end_frame,
            });
            i += k;
        } else {
            i += 1;
        }
    }
    out
}

/// How long positive labels persist after the keyword ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Hold {
    /// Until the end of the utterance.
    #[default]
    ToEnd,
    Frames(usize),
}

/// Per-frame targets in `{0, 1, -1}` with loss weights.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSequence {
    labels: Vec<i8>,
    weights: Vec<f32>,
    /// `[start, end)` label scope of each keyword occurrence.
    windows: Vec<(usize, usize)>,
}

impl LabelSequence {
    /// Weights derived from labels: 0 for `-1`, else 1.
    pub fn from_labels(labels: Vec<i8>) -> Result<Self> {
        if let Some(i) = labels.iter().position(|l| !(-1..=1).contains(l)) {
            return Err(Error::invalid(
                "label",
                alloc::format!("{} at frame {i}", labels[i]),
            ));
        }
        let weights = labels
            .iter()
            .map(|&l| if l == -1 { 0.0 } else { 1.0 })
            .collect();
        Ok(Self {
            labels,
            weights,
            windows: Vec::new(),
        })
    }

    /// Unchecked parts; see [`validate_label_sequence`].
    pub fn from_parts(labels: Vec<i8>, weights: Vec<f32>, windows: Vec<(usize, usize)>) -> Self {
        Self {
            labels,
            weights,
            windows,
        }
    }

    /// All-zero labels with unit weights.
    pub fn negative(frames: usize) -> Self {
        Self {
            labels: alloc::vec![0; frames],
            weights: alloc::vec![1.0; frames],
            windows: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn weights(&self) -> &[f32] {
        &self.weights
    }

    pub fn windows(&self) -> &[(usize, usize)] {
        &self.windows
    }

    pub fn is_positive(&self) -> bool {
        self.labels.contains(&1)
    }

    /// Appends frames with zero weight and label `-1` (batch padding).
    pub fn padded(&self, frames: usize) -> Self {
        let mut out = self.clone();
        out.labels.resize(frames.max(self.len()), -1);
        out.weights.resize(frames.max(self.len()), 0.0);
        out
    }

    /// Appends `other`, shifting its occurrence windows.
    pub fn concat(&self, other: &Self) -> Self {
        let off = self.len();
        let mut out = self.clone();
        out.labels.extend_from_slice(&other.labels);
        out.weights.extend_from_slice(&other.weights);
        out.windows
            .extend(other.windows.iter().map(|&(a, b)| (a + off, b + off)));
        out
    }
}

/// Builds frame targets for an utterance of `frames` frames.
///
/// For each keyword occurrence with final unit `[s, e)` and midpoint
/// `m = (s + e) / 2`, frames `[m, e)` are `-1` and frames from `e` are `1`
/// for the `hold` duration. Later occurrences overwrite earlier ones from
/// their midpoint on.
pub fn labels_from_alignment(
    align: &Alignment,
    kw: &KeywordSpec,
    frames: usize,
    hold: Hold,
) -> Result<LabelSequence> {
    if let Some(t) = align.tokens().iter().find(|t| t.end_frame > frames) {
        return Err(Error::AlignmentOutOfRange {
            end_frame: t.end_frame,
            frames,
        });
    }
    let mut labels = alloc::vec![0i8; frames];
    let mut windows = Vec::new();
    for occ in find_occurrences(align, kw) {
        let m = occ.midpoint();
        let e = occ.end_frame;
        let scope = match hold {
            Hold::ToEnd => frames,
            Hold::Frames(h) => frames.min(e + h),
        };
        labels[m..e].iter_mut().for_each(|l| *l = -1);
        labels[e..scope].iter_mut().for_each(|l| *l = 1);
        // a later occurrence truncates the previous scope
        if let Some(last) = windows.last_mut() {
            let last: &mut (usize, usize) = last;
            last.1 = last.1.min(m);
        }
        windows.push((m, scope));
    }
    let weights = labels
        .iter()
        .map(|&l| if l == -1 { 0.0 } else { 1.0 })
        .collect();
    Ok(LabelSequence {
        labels,
        weights,
        windows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    LengthMismatch,
    LabelOutOfRange,
    /// Weight must be 0 exactly for `-1` labels and 1 otherwise.
    Weight,
    /// A `1` followed by a `0` or `-1` inside one occurrence window.
    NonMonotone,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Violation {
    pub index: usize,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} at frame {}", self.kind, self.index)
    }
}

/// Checks the weight rule and within-occurrence monotonicity, reporting the
/// first violating frame.
pub fn validate_label_sequence(ls: &LabelSequence) -> core::result::Result<(), Violation> {
    if ls.labels.len() != ls.weights.len() {
        return Err(Violation {
            index: ls.labels.len().min(ls.weights.len()),
            kind: ViolationKind::LengthMismatch,
        });
    }
    for (i, (&l, &w)) in ls.labels.iter().zip(&ls.weights).enumerate() {
        if !(-1..=1).contains(&l) {
            return Err(Violation {
                index: i,
                kind: ViolationKind::LabelOutOfRange,
            });
        }
        let want = if l == -1 { 0.0 } else { 1.0 };
        if w != want {
            return Err(Violation {
                index: i,
                kind: ViolationKind::Weight,
            });
        }
    }
    for &(start, end) in &ls.windows {
        let end = end.min(ls.labels.len());
        for i in start.max(1)..end {
            if i > start && ls.labels[i - 1] == 1 && ls.labels[i] != 1 {
                return Err(Violation {
                    index: i,
                    kind: ViolationKind::NonMonotone,
                });
            }
        }
    }
    Ok(())
}
