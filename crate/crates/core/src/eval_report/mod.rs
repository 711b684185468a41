//! Confusion counts, precision/recall/F1 with forged as the positive class,
//! and Table-style report rendering.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::TensorDataset;
use crate::error::{usage, Result};
use crate::models::TwoHeadNetwork;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Counts with label 1 (forged) as positive.
pub fn confusion(predictions: &[usize], labels: &[usize]) -> Result<ConfusionCounts> {
    if predictions.len() != labels.len() {
        return Err(usage!("{} predictions for {} labels", predictions.len(), labels.len()));
    }
    let mut c = ConfusionCounts::default();
    for (&p, &l) in predictions.iter().zip(labels) {
        match (p, l) {
            (1, 1) => c.tp += 1,
            (1, 0) => c.fp += 1,
            (0, 0) => c.tn += 1,
            (0, 1) => c.fn_ += 1,
            _ => return Err(usage!("labels must be 0 or 1, got prediction {p} label {l}")),
        }
    }
    Ok(c)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub counts: ConfusionCounts,
    /// Set when precision or recall had a zero denominator and was reported as 0.
    pub undefined: bool,
}

pub fn metrics(counts: ConfusionCounts) -> Result<MetricsReport> {
    let total = counts.total();
    if total == 0 {
        return Err(usage!("no evaluated records"));
    }
    let ratio = |num: u64, den: u64| if den == 0 { None } else { Some(num as f64 / den as f64) };
    let p = ratio(counts.tp, counts.tp + counts.fp);
    let r = ratio(counts.tp, counts.tp + counts.fn_);
    let (precision, recall) = (p.unwrap_or(0.0), r.unwrap_or(0.0));
    Ok(MetricsReport {
        accuracy: (counts.tp + counts.tn) as f64 / total as f64,
        precision,
        recall,
        f1: f1_score(precision, recall),
        counts,
        undefined: p.is_none() || r.is_none(),
    })
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// Argmax class predictions over a dataset, in dataset order.
pub fn predict(net: &mut TwoHeadNetwork, data: &TensorDataset, batch_size: usize) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(data.len());
    for batch in data.sequential_batches(batch_size) {
        out.extend(net.predict_logits(&batch?.images)?.argmax_rows()?);
    }
    Ok(out)
}

pub fn evaluate(net: &mut TwoHeadNetwork, data: &TensorDataset, batch_size: usize) -> Result<MetricsReport> {
    let labels = data.labels.as_ref().ok_or_else(|| usage!("evaluation needs labeled records"))?;
    let preds = predict(net, data, batch_size)?;
    metrics(confusion(&preds, labels)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Csv,
}

fn pct(v: f64) -> String {
    format!("{:.2}", v * 100.0)
}

/// One row per run in input order; values are percentages with two decimals.
pub fn render_report(entries: &[(String, MetricsReport)], format: ReportFormat) -> String {
    let header = ["Run", "Accuracy", "Precision", "Recall", "F1"];
    let rows: Vec<[String; 5]> = entries
        .iter()
        .map(|(name, m)| [name.clone(), pct(m.accuracy), pct(m.precision), pct(m.recall), pct(m.f1)])
        .collect();
    let mut out = String::new();
    match format {
        ReportFormat::Csv => {
            out.push_str("run,accuracy,precision,recall,f1\n");
            for r in &rows {
                let name = if r[0].contains([',', '"', '\n']) {
                    format!("\"{}\"", r[0].replace('"', "\"\""))
                } else {
                    r[0].clone()
                };
                let _ = writeln!(out, "{name},{},{},{},{}", r[1], r[2], r[3], r[4]);
            }
        }
        ReportFormat::Text => {
            let mut widths = header.map(str::len);
            for r in &rows {
                for (w, c) in widths.iter_mut().zip(r) {
                    *w = (*w).max(c.chars().count());
                }
            }
            let line = |cells: [&str; 5]| {
                let mut s = format!("{:<w$}", cells[0], w = widths[0]);
                for (c, w) in cells[1..].iter().zip(&widths[1..]) {
                    let _ = write!(s, "  {c:>w$}");
                }
                s.trim_end().to_string()
            };
            let _ = writeln!(out, "{}", line(header));
            let _ = writeln!(out, "{}", "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
            for r in &rows {
                let _ = writeln!(out, "{}", line([&r[0], &r[1], &r[2], &r[3], &r[4]]));
            }
        }
    }
    out
}
