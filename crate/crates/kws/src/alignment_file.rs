//! Token alignments: `<symbol>\t<start_frame>\t<end_frame>` per line, with
//! `#utt <id>` starting each utterance.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use kws_core::labeling::{Alignment, Token};

use crate::error::{Error, Result};

pub type Alignments = BTreeMap<String, Alignment>;

pub fn parse(text: &str) -> std::result::Result<Alignments, String> {
    let mut out = Alignments::new();
    let mut current: Option<(String, Vec<Token>)> = None;
    let finish = |cur: Option<(String, Vec<Token>)>,
                  out: &mut Alignments|
     -> std::result::Result<(), String> {
        if let Some((id, tokens)) = cur {
            let a = Alignment::new(tokens).map_err(|e| format!("utterance {id}: {e}"))?;
            if out.insert(id.clone(), a).is_some() {
                return Err(format!("utterance {id} appears twice"));
            }
        }
        Ok(())
    };
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        if let Some(id) = line.strip_prefix("#utt") {
            let id = id.trim();
            if id.is_empty() {
                return Err(format!("line {}: missing utterance id", n + 1));
            }
            finish(current.take(), &mut out)?;
            current = Some((id.to_string(), Vec::new()));
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [symbol, start, end] = fields[..] else {
            return Err(format!("line {}: expected symbol, start, end", n + 1));
        };
        let frame = |s: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|e| format!("line {}: {s:?}: {e}", n + 1))
        };
        let token = Token::new(symbol, frame(start)?, frame(end)?);
        match &mut current {
            Some((_, tokens)) => tokens.push(token),
            None => return Err(format!("line {}: token before any #utt line", n + 1)),
        }
    }
    finish(current, &mut out)?;
    Ok(out)
}

pub fn read(path: impl AsRef<Path>) -> Result<Alignments> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(&text).map_err(|d| Error::format(path, d))
}

pub fn render(alignments: &Alignments) -> String {
    let mut s = String::new();
    for (id, a) in alignments {
        writeln!(s, "#utt {id}").unwrap();
        for t in a.tokens() {
            writeln!(s, "{}\t{}\t{}", t.symbol, t.start_frame, t.end_frame).unwrap();
        }
    }
    s
}
