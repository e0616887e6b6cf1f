//! Accuracy and latency evaluation over a labeled corpus.
//!
//! Accuracy is `R / T`: correct verdicts over evaluated frames, where any
//! wrong class counts as wrong regardless of how close it was. Frames listed
//! as exclusions are skipped entirely and only counted.
//!
//! Latency is wall-clock time per frame covering file read, decode, line
//! sampling, scoring and classification. One frame is processed untimed
//! first, then every frame is timed sequentially on the calling thread.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analysis::{analyze_bytes, Corpus, CorpusError};
use crate::classifier::{CalibrationModel, FullnessClass};
use crate::imaging::ImageError;
use crate::manifest::ManifestEntry;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusions {
    pub count: usize,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalReport {
    /// Frames evaluated (T).
    pub total: usize,
    /// Frames classified correctly (R).
    pub correct: usize,
    pub accuracy: f64,
    /// `confusion[truth][predicted]`, classes in P10..P100 order.
    pub confusion: [[usize; 5]; 5],
    pub excluded: Exclusions,
    /// Seconds per image.
    pub mean_latency: f64,
    pub per_image_latencies: Vec<f64>,
}

impl EvalReport {
    /// Build a report from (truth, predicted) pairs and per-frame latencies.
    pub fn tally(
        outcomes: &[(FullnessClass, FullnessClass)],
        per_image_latencies: Vec<f64>,
        excluded_files: Vec<String>,
    ) -> Self {
        let mut confusion = [[0usize; 5]; 5];
        for &(truth, predicted) in outcomes {
            confusion[truth.index()][predicted.index()] += 1;
        }
        let total = outcomes.len();
        let correct = (0..5).map(|i| confusion[i][i]).sum();
        Self {
            total,
            correct,
            accuracy: if total == 0 { 0.0 } else { correct as f64 / total as f64 },
            confusion,
            excluded: Exclusions {
                count: excluded_files.len(),
                files: excluded_files,
            },
            mean_latency: mean_or_zero(&per_image_latencies),
            per_image_latencies,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Human-oriented table; not a stable format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "accuracy: {:.2}% ({}/{})",
            self.accuracy * 100.0,
            self.correct,
            self.total
        );
        let _ = writeln!(s, "mean latency: {:.3} ms/image", self.mean_latency * 1e3);
        let _ = writeln!(s, "excluded: {}", self.excluded.count);
        for f in &self.excluded.files {
            let _ = writeln!(s, "  - {f}");
        }
        let _ = writeln!(s, "confusion (rows: truth, columns: predicted):");
        let _ = write!(s, "{:>6}", "");
        for c in FullnessClass::ALL {
            let _ = write!(s, "{:>6}", c.as_str());
        }
        s.push('\n');
        for truth in FullnessClass::ALL {
            let _ = write!(s, "{:>6}", truth.as_str());
            for n in self.confusion[truth.index()] {
                let _ = write!(s, "{n:>6}");
            }
            s.push('\n');
        }
        s
    }
}

fn mean_or_zero(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn frame_error(file: &str, err: ImageError) -> CorpusError {
    match err {
        ImageError::OutOfBounds { .. } => CorpusError::LineOutOfBounds {
            file: file.to_string(),
            source: err,
        },
        _ => CorpusError::BadFrame {
            file: file.to_string(),
            source: err,
        },
    }
}

/// Classify one manifest entry, returning the verdict and elapsed seconds.
fn timed_frame(
    corpus: &Corpus,
    entry: &ManifestEntry,
    model: &CalibrationModel,
) -> Result<(FullnessClass, f64), CorpusError> {
    let start = Instant::now();
    let bytes = corpus.read_bytes(entry)?;
    let analysis = analyze_bytes(&bytes, model).map_err(|e| frame_error(&entry.file, e))?;
    Ok((analysis.class, start.elapsed().as_secs_f64()))
}

fn evaluated_entries<'a>(
    corpus: &'a Corpus,
    exclusions: &[String],
) -> Result<(Vec<&'a ManifestEntry>, Vec<String>), CorpusError> {
    let known: HashSet<&str> = corpus.entries.iter().map(|e| e.file.as_str()).collect();
    let mut excluded = Vec::new();
    for x in exclusions {
        if !known.contains(x.as_str()) {
            return Err(CorpusError::UnknownExclusion(x.clone()));
        }
        if !excluded.contains(x) {
            excluded.push(x.clone());
        }
    }
    let kept = corpus
        .entries
        .iter()
        .filter(|e| !excluded.contains(&e.file))
        .collect::<Vec<_>>();
    if kept.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    Ok((kept, excluded))
}

pub fn evaluate(
    model: &CalibrationModel,
    corpus: &Corpus,
    exclusions: &[String],
) -> Result<EvalReport, CorpusError> {
    let (kept, excluded) = evaluated_entries(corpus, exclusions)?;
    timed_frame(corpus, kept[0], model)?;
    let mut outcomes = Vec::with_capacity(kept.len());
    let mut latencies = Vec::with_capacity(kept.len());
    for entry in kept {
        let (predicted, secs) = timed_frame(corpus, entry, model)?;
        outcomes.push((entry.truth, predicted));
        latencies.push(secs);
    }
    Ok(EvalReport::tally(&outcomes, latencies, excluded))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatencyStats {
    pub per_image: Vec<f64>,
    pub mean: f64,
}

impl LatencyStats {
    pub fn total(&self) -> f64 {
        self.per_image.iter().sum()
    }
}

/// Time every frame of `corpus` after one untimed warm-up frame.
pub fn measure_latency(
    model: &CalibrationModel,
    corpus: &Corpus,
) -> Result<LatencyStats, CorpusError> {
    let first = corpus.entries.first().ok_or(CorpusError::EmptyCorpus)?;
    timed_frame(corpus, first, model)?;
    let per_image = corpus
        .entries
        .iter()
        .map(|e| timed_frame(corpus, e, model).map(|(_, secs)| secs))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(LatencyStats {
        mean: mean_or_zero(&per_image),
        per_image,
    })
}
