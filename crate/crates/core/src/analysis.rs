//! Per-frame pipeline (decode, sample, score, classify) and corpus-level
//! calibration.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{
    apply_baseline, calibrate, classify, CalibrationError, CalibrationModel, FullnessClass,
    LabeledScore,
};
use crate::config::{LineConfig, LinePair};
use crate::imaging::{decode_image, sample_line, GrayImage, ImageError};
use crate::linestats::{combine_scores, line_stats, ScoreKind, ScoreVector};
use crate::manifest::{read_manifest, ManifestEntry, ManifestError};

/// Scores of one frame on a pair of lines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameScores {
    pub scores: ScoreVector,
    /// Standard deviation along L1, before any baseline.
    pub sigma_l1: f64,
}

pub fn score_frame(img: &GrayImage, lines: &LinePair) -> Result<FrameScores, ImageError> {
    let l1 = line_stats(&sample_line(img, &lines.l1)?).expect("rasterized lines are never empty");
    let l2 = line_stats(&sample_line(img, &lines.l2)?).expect("rasterized lines are never empty");
    Ok(FrameScores {
        scores: combine_scores(&l1, &l2),
        sigma_l1: l1.sigma,
    })
}

/// Verdict for one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub class: FullnessClass,
    pub scores: ScoreVector,
    /// Driving score after baseline subtraction.
    pub adjusted_score: f64,
    /// L1 standard deviation after baseline subtraction.
    pub adjusted_sigma_l1: f64,
}

pub fn analyze_frame(img: &GrayImage, model: &CalibrationModel) -> Result<Analysis, ImageError> {
    let fs = score_frame(img, model.lines())?;
    Ok(Analysis {
        class: classify(&fs.scores, fs.sigma_l1, model),
        scores: fs.scores,
        adjusted_score: model.adjusted_score(&fs.scores),
        adjusted_sigma_l1: apply_baseline(fs.sigma_l1, model.baseline_l1()),
    })
}

/// Decode and analyze an encoded frame.
pub fn analyze_bytes(bytes: &[u8], model: &CalibrationModel) -> Result<Analysis, ImageError> {
    analyze_frame(&decode_image(bytes)?, model)
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("MissingImage {file}: {source}")]
    MissingImage {
        file: String,
        #[source]
        source: io::Error,
    },
    #[error("{file}: {source}")]
    BadFrame {
        file: String,
        #[source]
        source: ImageError,
    },
    #[error("LineOutOfBounds {file}: {source}")]
    LineOutOfBounds {
        file: String,
        #[source]
        source: ImageError,
    },
    #[error("exclusion {0:?} is not in the manifest")]
    UnknownExclusion(String),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
}

impl CorpusError {
    fn from_image(file: &str, err: ImageError) -> Self {
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
}

/// A manifest together with the directory its paths are relative to.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl Corpus {
    pub fn load(manifest_path: &Path) -> Result<Self, CorpusError> {
        let entries = read_manifest(manifest_path)?;
        let root = manifest_path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default();
        Ok(Self { root, entries })
    }

    pub fn path_of(&self, entry: &ManifestEntry) -> PathBuf {
        self.root.join(&entry.file)
    }

    pub fn read_bytes(&self, entry: &ManifestEntry) -> Result<Vec<u8>, CorpusError> {
        fs::read(self.path_of(entry)).map_err(|source| CorpusError::MissingImage {
            file: entry.file.clone(),
            source,
        })
    }

    pub fn decode(&self, entry: &ManifestEntry) -> Result<GrayImage, CorpusError> {
        let bytes = self.read_bytes(entry)?;
        decode_image(&bytes).map_err(|e| CorpusError::from_image(&entry.file, e))
    }

    /// Split by position: even-indexed entries first, odd-indexed second.
    ///
    /// Synthetic corpora interleave classes, so both halves stay balanced.
    pub fn split_alternate(&self) -> (Corpus, Corpus) {
        let (even, odd): (Vec<_>, Vec<_>) = self
            .entries
            .iter()
            .cloned()
            .enumerate()
            .partition(|(i, _)| i % 2 == 0);
        let strip = |v: Vec<(usize, ManifestEntry)>| Corpus {
            root: self.root.clone(),
            entries: v.into_iter().map(|(_, e)| e).collect(),
        };
        (strip(even), strip(odd))
    }
}

/// Baselines measured on an empty-hopper frame: L1 sigma and the driving
/// score of `kind`.
pub fn baselines_from(
    empty: &GrayImage,
    lines: &LinePair,
    kind: ScoreKind,
) -> Result<(f64, f64), ImageError> {
    let fs = score_frame(empty, lines)?;
    Ok((fs.sigma_l1, fs.scores.driving(kind)))
}

/// Score every frame of `corpus` on lines resolved from `config`.
///
/// Lines left unspecified are placed for the size of the first frame.
pub fn labeled_scores(
    corpus: &Corpus,
    config: &LineConfig,
) -> Result<(Vec<LabeledScore>, LinePair), CorpusError> {
    let mut lines = None;
    let mut out = Vec::with_capacity(corpus.entries.len());
    for entry in &corpus.entries {
        let img = corpus.decode(entry)?;
        let lines = lines.get_or_insert_with(|| config.resolve(img.width(), img.height()));
        let fs = score_frame(&img, lines).map_err(|e| CorpusError::from_image(&entry.file, e))?;
        out.push(LabeledScore {
            score_vector: fs.scores,
            sigma_l1: fs.sigma_l1,
            truth: entry.truth,
        });
    }
    let lines = lines.ok_or(CorpusError::EmptyCorpus)?;
    Ok((out, lines))
}

/// Calibrate on a labeled corpus, optionally subtracting an empty-hopper
/// baseline frame.
pub fn calibrate_corpus(
    corpus: &Corpus,
    config: &LineConfig,
    kind: ScoreKind,
    baseline: Option<&GrayImage>,
) -> Result<CalibrationModel, CorpusError> {
    let (examples, lines) = labeled_scores(corpus, config)?;
    let (b1, b2) = match baseline {
        Some(img) => baselines_from(img, &lines, kind)
            .map_err(|e| CorpusError::from_image("<baseline>", e))?,
        None => (0.0, 0.0),
    };
    Ok(calibrate(&examples, kind, b1, b2, lines)?)
}
