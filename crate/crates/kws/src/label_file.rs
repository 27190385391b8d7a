//! Label sequences as TSV: `frame`, `label`, `weight`.

use std::fmt::Write as _;

use kws_core::labeling::LabelSequence;

pub const HEADER: &str = "frame\tlabel\tweight";

pub fn render(labels: &LabelSequence) -> String {
    let mut s = String::from(HEADER);
    s.push('\n');
    for (t, (l, w)) in labels.labels().iter().zip(labels.weights()).enumerate() {
        writeln!(s, "{t}\t{l}\t{w}").unwrap();
    }
    s
}

pub fn parse(text: &str) -> Result<LabelSequence, String> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    if lines.next().map(str::trim) != Some(HEADER) {
        return Err(format!("missing header {HEADER:?}"));
    }
    let mut labels = Vec::new();
    let mut weights = Vec::new();
    for (i, line) in lines.enumerate() {
        let f: Vec<&str> = line.trim().split('\t').collect();
        let [frame, label, weight] = f[..] else {
            return Err(format!("row {i}: expected 3 columns"));
        };
        if frame.parse::<usize>().ok() != Some(i) {
            return Err(format!("row {i}: frame index {frame:?} out of order"));
        }
        labels.push(label.parse::<i8>().map_err(|e| format!("row {i}: {e}"))?);
        weights.push(weight.parse::<f32>().map_err(|e| format!("row {i}: {e}"))?);
    }
    Ok(LabelSequence::from_parts(labels, weights, Vec::new()))
}
