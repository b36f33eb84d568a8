//! Binary classification metrics with Malware as the positive class.
//!
//! Precision/recall that would divide by zero are reported as 0 and flagged in
//! [`MetricsReport::warnings`]. ROC-AUC is the Mann-Whitney rank statistic with
//! ties given half credit, which equals trapezoidal integration of the ROC curve.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::label::Label;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no predictions to score")]
    EmptyPredictions,
    #[error("ROC-AUC needs both classes among the true labels")]
    SingleClassOnly,
    #[error("ROC-AUC needs a malware score on every prediction ({missing} missing)")]
    MissingScores { missing: usize },
    #[error("score {score} for {sample_id} is outside [0, 1]")]
    InvalidScore { sample_id: String, score: f64 },
    #[error("predictions line {line}: {reason}")]
    Parse { line: u64, reason: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub sample_id: String,
    pub true_label: Label,
    pub predicted_label: Label,
    /// Probability of Malware, when the classifier produces one.
    pub score_malware: Option<f64>,
}

impl PredictionRecord {
    pub fn new(sample_id: impl Into<String>, true_label: Label, predicted_label: Label, score: Option<f64>) -> Self {
        Self {
            sample_id: sample_id.into(),
            true_label,
            predicted_label,
            score_malware: score,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// (tp, fp, fn) when `class` is treated as positive.
    fn counts_for(&self, class: Label) -> (usize, usize, usize) {
        match class {
            Label::Malware => (self.tp, self.fp, self.fn_),
            Label::Benign => (self.tn, self.fn_, self.fp),
        }
    }
}

pub fn confusion(predictions: &[PredictionRecord]) -> Result<ConfusionMatrix, MetricsError> {
    if predictions.is_empty() {
        return Err(MetricsError::EmptyPredictions);
    }
    let mut m = ConfusionMatrix::default();
    for p in predictions {
        match (p.true_label, p.predicted_label) {
            (Label::Malware, Label::Malware) => m.tp += 1,
            (Label::Benign, Label::Malware) => m.fp += 1,
            (Label::Benign, Label::Benign) => m.tn += 1,
            (Label::Malware, Label::Benign) => m.fn_ += 1,
        }
    }
    Ok(m)
}

fn round4<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64((v * 1e4).round() / 1e4)
}

fn round4_opt<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(v) => round4(v, s),
        None => s.serialize_none(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassMetrics {
    #[serde(serialize_with = "round4")]
    pub precision: f64,
    #[serde(serialize_with = "round4")]
    pub recall: f64,
    #[serde(serialize_with = "round4")]
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AveragedMetrics {
    #[serde(serialize_with = "round4")]
    pub precision: f64,
    #[serde(serialize_with = "round4")]
    pub recall: f64,
    #[serde(serialize_with = "round4")]
    pub f1: f64,
}

/// Full evaluation table. Values are kept at full precision; the JSON form rounds to 4 decimals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub n: usize,
    #[serde(serialize_with = "round4")]
    pub accuracy: f64,
    pub benign: ClassMetrics,
    pub malware: ClassMetrics,
    #[serde(rename = "macro")]
    pub macro_avg: AveragedMetrics,
    #[serde(rename = "weighted")]
    pub weighted_avg: AveragedMetrics,
    #[serde(serialize_with = "round4_opt")]
    pub roc_auc: Option<f64>,
    pub confusion: ConfusionMatrix,
    pub warnings: Vec<String>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn class_metrics(m: &ConfusionMatrix, class: Label, warnings: &mut Vec<String>) -> ClassMetrics {
    let (tp, fp, fn_) = m.counts_for(class);
    let precision = ratio(tp, tp + fp).unwrap_or_else(|| {
        warnings.push(format!(
            "precision for {class} is 0/0 (no {class} predictions); reported as 0"
        ));
        0.0
    });
    let recall = ratio(tp, tp + fn_).unwrap_or_else(|| {
        warnings.push(format!(
            "recall for {class} is 0/0 (no true {class} samples); reported as 0"
        ));
        0.0
    });
    ClassMetrics {
        precision,
        recall,
        f1: harmonic(precision, recall),
        support: tp + fn_,
    }
}

pub fn report(predictions: &[PredictionRecord]) -> Result<MetricsReport, MetricsError> {
    let m = confusion(predictions)?;
    let n = m.total();
    let mut warnings = Vec::new();
    let benign = class_metrics(&m, Label::Benign, &mut warnings);
    let malware = class_metrics(&m, Label::Malware, &mut warnings);

    let macro_avg = AveragedMetrics {
        precision: (benign.precision + malware.precision) / 2.0,
        recall: (benign.recall + malware.recall) / 2.0,
        f1: (benign.f1 + malware.f1) / 2.0,
    };
    let (wb, wm) = (benign.support as f64 / n as f64, malware.support as f64 / n as f64);
    let weighted_avg = AveragedMetrics {
        precision: wb * benign.precision + wm * malware.precision,
        recall: wb * benign.recall + wm * malware.recall,
        f1: wb * benign.f1 + wm * malware.f1,
    };

    let roc_auc = match roc_auc(predictions) {
        Ok(auc) => Some(auc),
        Err(MetricsError::MissingScores { missing }) if missing == predictions.len() => None,
        Err(e @ MetricsError::InvalidScore { .. }) => return Err(e),
        Err(e) => {
            warnings.push(format!("ROC-AUC not computed: {e}"));
            None
        }
    };

    Ok(MetricsReport {
        n,
        accuracy: (m.tp + m.tn) as f64 / n as f64,
        benign,
        malware,
        macro_avg,
        weighted_avg,
        roc_auc,
        confusion: m,
        warnings,
    })
}

/// Probability that a random malware sample outscores a random benign one (ties count ½).
pub fn roc_auc(predictions: &[PredictionRecord]) -> Result<f64, MetricsError> {
    if predictions.is_empty() {
        return Err(MetricsError::EmptyPredictions);
    }
    let missing = predictions.iter().filter(|p| p.score_malware.is_none()).count();
    if missing > 0 {
        return Err(MetricsError::MissingScores { missing });
    }
    let mut scored: Vec<(f64, bool)> = Vec::with_capacity(predictions.len());
    for p in predictions {
        let s = p.score_malware.expect("checked above");
        if !(0.0..=1.0).contains(&s) {
            return Err(MetricsError::InvalidScore {
                sample_id: p.sample_id.clone(),
                score: s,
            });
        }
        scored.push((s, p.true_label.is_positive()));
    }
    let n_pos = scored.iter().filter(|(_, pos)| *pos).count();
    let n_neg = scored.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricsError::SingleClassOnly);
    }

    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    // 1-based ranks, tied groups share their mean rank.
    let mut positive_rank_sum = 0.0;
    let mut i = 0;
    while i < scored.len() {
        let mut j = i;
        while j + 1 < scored.len() && scored[j + 1].0 == scored[i].0 {
            j += 1;
        }
        let mean_rank = (i + j + 2) as f64 / 2.0;
        let positives = scored[i..=j].iter().filter(|(_, pos)| *pos).count();
        positive_rank_sum += mean_rank * positives as f64;
        i = j + 1;
    }
    let u = positive_rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Per-class block followed by a summary row with the Accuracy / Precision /
    /// Recall / F1-Score / ROC AUC columns (macro averages), two decimals.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<14}{:>10}{:>10}{:>10}{:>10}",
            "", "precision", "recall", "f1-score", "support"
        );
        for (name, c) in [("benign", &self.benign), ("malware", &self.malware)] {
            let _ = writeln!(
                out,
                "{:<14}{:>10.2}{:>10.2}{:>10.2}{:>10}",
                name, c.precision, c.recall, c.f1, c.support
            );
        }
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "{:<14}{:>10}{:>10}{:>10.2}{:>10}",
            "accuracy", "", "", self.accuracy, self.n
        );
        for (name, a) in [("macro avg", &self.macro_avg), ("weighted avg", &self.weighted_avg)] {
            let _ = writeln!(
                out,
                "{:<14}{:>10.2}{:>10.2}{:>10.2}{:>10}",
                name, a.precision, a.recall, a.f1, self.n
            );
        }
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "{:<10}{:>11}{:>9}{:>10}{:>9}",
            "Accuracy", "Precision", "Recall", "F1-Score", "ROC AUC"
        );
        let auc = self.roc_auc.map_or_else(|| "n/a".to_string(), |a| format!("{a:.4}"));
        let _ = writeln!(
            out,
            "{:<10.2}{:>11.2}{:>9.2}{:>10.2}{:>9}",
            self.accuracy, self.macro_avg.precision, self.macro_avg.recall, self.macro_avg.f1, auc
        );
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        out
    }
}

pub const PREDICTIONS_HEADER: &str = "sample_id,true,pred,score";

/// Reads `sample_id,true,pred,score` lines. A header line and an empty score column are allowed.
pub fn read_predictions<R: Read>(reader: R) -> Result<Vec<PredictionRecord>, MetricsError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() == 1 && row[0].is_empty() {
            continue;
        }
        if out.is_empty() && row.get(0) == Some("sample_id") {
            continue;
        }
        let bad = |reason: String| MetricsError::Parse { line, reason };
        if row.len() < 3 || row.len() > 4 {
            return Err(bad(format!("expected 3 or 4 columns, found {}", row.len())));
        }
        let true_label = row[1].parse().map_err(|e| bad(format!("{e}")))?;
        let predicted_label = row[2].parse().map_err(|e| bad(format!("{e}")))?;
        let score = match row.get(3) {
            None | Some("") => None,
            Some(s) => Some(s.parse::<f64>().map_err(|e| bad(format!("score {s:?}: {e}")))?),
        };
        out.push(PredictionRecord::new(&row[0], true_label, predicted_label, score));
    }
    Ok(out)
}

pub fn read_predictions_file(path: &Path) -> Result<Vec<PredictionRecord>, MetricsError> {
    read_predictions(std::fs::File::open(path)?)
}

pub fn write_predictions<W: Write>(mut w: W, predictions: &[PredictionRecord]) -> std::io::Result<()> {
    writeln!(w, "{PREDICTIONS_HEADER}")?;
    for p in predictions {
        match p.score_malware {
            Some(s) => writeln!(w, "{},{},{},{}", p.sample_id, p.true_label, p.predicted_label, s)?,
            None => writeln!(w, "{},{},{},", p.sample_id, p.true_label, p.predicted_label)?,
        }
    }
    Ok(())
}
