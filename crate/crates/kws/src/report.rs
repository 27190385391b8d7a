//! Text outputs: ROC curves, comparison tables, metrics logs and stream
//! events.

use std::fmt::Write as _;

use kws_core::eval::{ComparisonRow, EvalReport, RocCurve};
use serde::{Deserialize, Serialize};

pub fn roc_tsv(curve: &RocCurve) -> String {
    let mut s = String::from("threshold\tfrr\tfa_per_hour\n");
    for p in &curve.points {
        writeln!(s, "{}\t{}\t{}", p.threshold, p.frr, p.fa_per_hour).unwrap();
    }
    s
}

/// One line per model: name, FRR (%), whether the FA target was reached,
/// threshold, parameter count and its K-rounded display value.
pub fn comparison_tsv(rows: &[ComparisonRow]) -> String {
    let mut s = String::from("model\tfrr_percent\tmeets_target\tthreshold\tparams\tparams_k\n");
    for r in rows {
        writeln!(
            s,
            "{}\t{:.2}\t{}\t{}\t{}\t{:.1}",
            r.model,
            100.0 * r.frr,
            r.meets_target,
            r.threshold,
            r.params,
            r.params_k
        )
        .unwrap();
    }
    s
}

pub fn comparison_text(rows: &[ComparisonRow], target_fa_per_hour: f64) -> String {
    let frr_head = format!("FRR(%) @{target_fa_per_hour} FA/h");
    let cells: Vec<[String; 3]> = rows
        .iter()
        .map(|r| {
            let frr = format!(
                "{:.2}{}",
                100.0 * r.frr,
                if r.meets_target { "" } else { "*" }
            );
            [r.model.clone(), frr, format!("{:.1}", r.params_k)]
        })
        .collect();
    let head = ["Model".to_string(), frr_head, "Params(K)".to_string()];
    let widths: Vec<usize> = (0..3)
        .map(|i| {
            cells
                .iter()
                .map(|c| c[i].len())
                .chain([head[i].len()])
                .max()
                .unwrap()
        })
        .collect();
    let line = |c: &[String; 3]| {
        format!(
            "{:<w0$}  {:>w1$}  {:>w2$}\n",
            c[0],
            c[1],
            c[2],
            w0 = widths[0],
            w1 = widths[1],
            w2 = widths[2]
        )
    };
    let mut s = line(&head);
    s.push_str(&format!(
        "{}\n",
        "-".repeat(widths.iter().sum::<usize>() + 4)
    ));
    for c in &cells {
        s.push_str(&line(c));
    }
    if rows.iter().any(|r| !r.meets_target) {
        s.push_str("* target FA rate not reached at any threshold\n");
    }
    s
}

/// FRR at the target FA rate for each smoothing length.
pub fn smoothing_tsv(reports: &[EvalReport]) -> String {
    let mut s = String::from("smoothing\tfrr_percent\tmeets_target\tthreshold\n");
    for r in reports {
        writeln!(
            s,
            "{}\t{:.2}\t{}\t{}",
            r.smoothing,
            100.0 * r.operating.point.frr,
            r.operating.meets_target,
            r.operating.point.threshold
        )
        .unwrap();
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub epoch: usize,
    pub step: u64,
    pub train_loss: f64,
    pub dev_loss: Option<f64>,
    #[serde(rename = "dev_frr_at_0.1fa")]
    pub dev_frr_at_target: Option<f64>,
}

impl MetricsRecord {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub frame_index: u64,
    pub time_seconds: f64,
    pub y_hat: f64,
}

impl EventRecord {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }
}
