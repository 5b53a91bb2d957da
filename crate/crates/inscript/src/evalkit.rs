//! Accuracy and efficiency accounting.
//!
//! Scoring is character-level: predicted and truth strings are stripped of
//! whitespace and compared position by position, left-aligned. A sample's
//! efficiency is the mean of its scored stage accuracies (OCR and, when
//! present, TTS); the combined figure is the arithmetic mean of per-sample
//! efficiencies. All percentages are reported at one decimal, rounded
//! half-up.

use std::path::Path;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("truth text is empty after whitespace stripping")]
    EmptyTruth,
    #[error("cannot average an empty efficiency list")]
    EmptyList,
    #[error("a sample needs at least one scored stage")]
    NoStages,
    #[error("correct count {correct} exceeds total {total}")]
    CountOverflow { correct: usize, total: usize },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Round half-up to one decimal place.
fn round1(value: f64) -> f64 {
    (value * 10.0 + 0.5).floor() / 10.0
}

/// Position-wise character score of a prediction against the truth, after
/// whitespace stripping. Returns (correct, total) with total the truth
/// length.
pub fn score_sample(predicted: &str, truth: &str) -> Result<(usize, usize), EvalError> {
    let truth: Vec<char> = truth.chars().filter(|c| !c.is_whitespace()).collect();
    if truth.is_empty() {
        return Err(EvalError::EmptyTruth);
    }
    let predicted: Vec<char> = predicted.chars().filter(|c| !c.is_whitespace()).collect();
    let correct = truth
        .iter()
        .zip(&predicted)
        .filter(|(t, p)| t == p)
        .count();
    Ok((correct, truth.len()))
}

/// Arithmetic mean of per-sample efficiencies, one-decimal rounded. Values
/// are summed in sorted order so the result is exactly permutation
/// invariant.
pub fn combined_efficiency(efficiencies: &[f64]) -> Result<f64, EvalError> {
    if efficiencies.is_empty() {
        return Err(EvalError::EmptyList);
    }
    debug_assert!(efficiencies.iter().all(|e| (0.0..=100.0).contains(e)));
    let mut sorted = efficiencies.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(round1(sorted.iter().sum::<f64>() / sorted.len() as f64))
}

/// Per-sample accuracy and efficiency figures.
#[derive(Clone, Debug, Serialize)]
pub struct SampleReport {
    pub sample_id: String,
    pub total_chars: usize,
    pub ocr_accuracy: Option<f64>,
    pub tts_accuracy: Option<f64>,
    pub efficiency: f64,
    #[serde(skip)]
    pub ocr_correct: Option<usize>,
    #[serde(skip)]
    pub tts_correct: Option<usize>,
}

impl SampleReport {
    /// Build from raw counts. Each accuracy is `100 * correct / total`; the
    /// efficiency weights the scored stages equally:
    /// `100 * (ocr + tts) / (2 * total)` when both ran, otherwise the single
    /// stage's accuracy.
    pub fn new(
        sample_id: impl Into<String>,
        total_chars: usize,
        ocr_correct: Option<usize>,
        tts_correct: Option<usize>,
    ) -> Result<Self, EvalError> {
        if total_chars == 0 {
            return Err(EvalError::EmptyTruth);
        }
        for correct in [ocr_correct, tts_correct].into_iter().flatten() {
            if correct > total_chars {
                return Err(EvalError::CountOverflow {
                    correct,
                    total: total_chars,
                });
            }
        }
        let accuracy =
            |correct: Option<usize>| correct.map(|c| round1(100.0 * c as f64 / total_chars as f64));
        let efficiency = match (ocr_correct, tts_correct) {
            (Some(o), Some(t)) => round1(100.0 * (o + t) as f64 / (2.0 * total_chars as f64)),
            (Some(o), None) => round1(100.0 * o as f64 / total_chars as f64),
            (None, Some(t)) => round1(100.0 * t as f64 / total_chars as f64),
            (None, None) => return Err(EvalError::NoStages),
        };
        Ok(Self {
            sample_id: sample_id.into(),
            total_chars,
            ocr_accuracy: accuracy(ocr_correct),
            tts_accuracy: accuracy(tts_correct),
            efficiency,
            ocr_correct,
            tts_correct,
        })
    }
}

/// All samples plus their combined efficiency.
#[derive(Clone, Debug, Serialize)]
pub struct CombinedReport {
    pub samples: Vec<SampleReport>,
    pub combined_efficiency: f64,
}

impl CombinedReport {
    pub fn new(samples: Vec<SampleReport>) -> Result<Self, EvalError> {
        let efficiencies: Vec<f64> = samples.iter().map(|s| s.efficiency).collect();
        Ok(Self {
            combined_efficiency: combined_efficiency(&efficiencies)?,
            samples,
        })
    }
}

/// Render the aligned plain-text results table.
pub fn format_table(report: &CombinedReport) -> String {
    let id_width = report
        .samples
        .iter()
        .map(|s| s.sample_id.chars().count())
        .chain(std::iter::once("sample".len()))
        .max()
        .unwrap_or(6);
    let cell = |v: Option<f64>| match v {
        Some(v) => format!("{v:>6.1}"),
        None => format!("{:>6}", "-"),
    };
    let mut out = String::new();
    out.push_str("# efficiency = mean of scored stage accuracies (ocr, tts)\n");
    out.push_str(&format!(
        "{:<id_width$}  {:>6}  {:>6}  {:>6}  {:>6}\n",
        "sample", "chars", "ocr%", "tts%", "eff%"
    ));
    for s in &report.samples {
        out.push_str(&format!(
            "{:<id_width$}  {:>6}  {}  {}  {:>6.1}\n",
            s.sample_id,
            s.total_chars,
            cell(s.ocr_accuracy),
            cell(s.tts_accuracy),
            s.efficiency
        ));
    }
    out.push_str(&format!(
        "combined efficiency: {:.1}\n",
        report.combined_efficiency
    ));
    out
}

/// Write the report as UTF-8 JSON with stable key order; returns the number
/// of bytes written. The companion table comes from [`format_table`].
pub fn emit_report(report: &CombinedReport, path: &Path) -> Result<usize, EvalError> {
    let mut bytes = serde_json::to_vec_pretty(report).expect("report serializes");
    bytes.push(b'\n');
    std::fs::write(path, &bytes)?;
    Ok(bytes.len())
}
