//! Population spread statistics along a line and the two-line scores
//! derived from them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imaging::LineSample;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StatsError {
    #[error("cannot compute statistics of an empty sample")]
    EmptySample,
}

/// Mean, population standard deviation and population variance of one line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineStats {
    pub mean: f64,
    pub sigma: f64,
    pub variance: f64,
    pub count: usize,
}

/// Two-pass, divide-by-N statistics over arbitrary numeric values.
pub fn spread_stats<T>(values: &[T]) -> Result<LineStats, StatsError>
where
    T: Copy + Into<f64>,
{
    if values.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let n = values.len() as f64;
    let mean = values.iter().map(|&v| v.into()).sum::<f64>() / n;
    let variance = values
        .iter()
        .map(|&v| {
            let d = v.into() - mean;
            d * d
        })
        .sum::<f64>()
        / n;
    Ok(LineStats {
        mean,
        sigma: variance.sqrt(),
        variance,
        count: values.len(),
    })
}

pub fn line_stats(sample: &LineSample) -> Result<LineStats, StatsError> {
    spread_stats(&sample.values)
}

/// Which combined score drives classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum ScoreKind {
    /// Mean of the two standard deviations.
    #[serde(rename = "A1")]
    A1,
    /// Square of [`ScoreKind::A1`].
    #[serde(rename = "A1_SQ")]
    A1Sq,
    /// Mean of the two variances.
    #[default]
    #[serde(rename = "A2")]
    A2,
}

impl ScoreKind {
    pub const ALL: [ScoreKind; 3] = [ScoreKind::A1, ScoreKind::A1Sq, ScoreKind::A2];

    pub fn as_str(self) -> &'static str {
        match self {
            ScoreKind::A1 => "A1",
            ScoreKind::A1Sq => "A1_SQ",
            ScoreKind::A2 => "A2",
        }
    }
}

impl fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown score kind {0:?} (expected A1, A1_SQ or A2)")]
pub struct UnknownScoreKind(pub String);

impl FromStr for ScoreKind {
    type Err = UnknownScoreKind;

    /// Case-insensitive; accepts `a1sq` as well as `a1_sq`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "A1" => Ok(ScoreKind::A1),
            "A1_SQ" | "A1SQ" => Ok(ScoreKind::A1Sq),
            "A2" => Ok(ScoreKind::A2),
            _ => Err(UnknownScoreKind(s.to_string())),
        }
    }
}

/// Combined scores of the L1/L2 pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    pub sigma1: f64,
    pub sigma2: f64,
    pub a1: f64,
    pub a1_sq: f64,
    pub a2: f64,
}

impl ScoreVector {
    pub fn from_sigmas(sigma1: f64, sigma2: f64) -> Self {
        let a1 = (sigma1 + sigma2) / 2.0;
        Self {
            sigma1,
            sigma2,
            a1,
            a1_sq: a1 * a1,
            a2: (sigma1 * sigma1 + sigma2 * sigma2) / 2.0,
        }
    }

    pub fn driving(&self, kind: ScoreKind) -> f64 {
        match kind {
            ScoreKind::A1 => self.a1,
            ScoreKind::A1Sq => self.a1_sq,
            ScoreKind::A2 => self.a2,
        }
    }
}

pub fn combine_scores(stats_l1: &LineStats, stats_l2: &LineStats) -> ScoreVector {
    ScoreVector::from_sigmas(stats_l1.sigma, stats_l2.sigma)
}
