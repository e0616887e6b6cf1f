//! Hopper fill-level estimation from scan-line texture statistics.
//!
//! A fixed camera looks into a vibrating hopper. Material in the hopper is
//! textured, the empty walls are smooth, so the spread of pixel values along
//! a line grows with the part of the line the material covers. Two lines are
//! read from each frame:
//!
//! - **L2** runs vertically through the center and measures how high the pile
//!   reaches.
//! - **L1** sits near the top and only picks up texture when the hopper is
//!   close to full, separating 75% from 100%.
//!
//! The pipeline:
//!
//! 1. [`imaging`]: decode PNG/JPEG/PGM to 8-bit luma and sample each line with
//!    Bresenham rasterization.
//! 2. [`linestats`]: population mean/σ/σ² per line, then the combined scores
//!    `A1 = (σ1+σ2)/2`, `A1²` and `A2 = (σ1²+σ2²)/2`.
//! 3. [`classifier`]: subtract empty-hopper baselines and map the driving score
//!    to one of five [`FullnessClass`]es using calibrated thresholds.
//!
//! [`synthcorpus`] renders labeled synthetic frames, and [`evalharness`]
//! reports accuracy and per-frame latency over a labeled corpus.

pub mod analysis;
pub mod classifier;
pub mod config;
pub mod evalharness;
pub mod imaging;
pub mod linestats;
pub mod manifest;
pub mod synthcorpus;
pub mod watch;

pub use analysis::{analyze_bytes, analyze_frame, score_frame, Analysis, Corpus, CorpusError};
pub use classifier::{
    apply_baseline, calibrate, classify, load_model, save_model, CalibrationError,
    CalibrationModel, FullnessClass, LabeledScore, MalformedModel,
};
pub use config::{LineConfig, LinePair};
pub use evalharness::{evaluate, measure_latency, EvalReport};
pub use imaging::{decode_image, sample_line, to_gray, GrayImage, ImageError, LineSample, LineSpec};
pub use linestats::{combine_scores, line_stats, LineStats, ScoreKind, ScoreVector};
pub use manifest::ManifestEntry;
pub use synthcorpus::{generate, generate_corpus, label_of, CorpusSpec, SynthParams};
