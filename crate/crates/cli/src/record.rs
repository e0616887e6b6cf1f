use chrono::{SecondsFormat, Utc};
use hopperstat::{Analysis, FullnessClass, ScoreVector};
use serde::{Deserialize, Serialize};

/// One JSON line per analyzed frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisRecord {
    pub file: String,
    pub class: FullnessClass,
    pub scores: ScoreVector,
    pub adjusted_score: f64,
    pub timestamp: String,
}

impl AnalysisRecord {
    pub fn new(file: String, analysis: &Analysis) -> Self {
        Self {
            file,
            class: analysis.class,
            scores: analysis.scores,
            adjusted_score: analysis.adjusted_score,
            timestamp: now_rfc3339(),
        }
    }
}

/// Emitted by `watch` in place of a record when a frame cannot be analyzed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub file: String,
    pub error: String,
    pub timestamp: String,
}

impl ErrorRecord {
    pub fn new(file: String, error: impl ToString) -> Self {
        Self {
            file,
            error: error.to_string(),
            timestamp: now_rfc3339(),
        }
    }
}

pub fn now_rfc3339() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Serialize as a single line (no trailing newline).
pub fn to_line<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("records serialize")
}
