//! Line geometry configuration.
//!
//! Both the config document and the model document describe lines the same
//! way: `{"L1": [x0, y0, x1, y1], "L2": [x0, y0, x1, y1]}`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imaging::LineSpec;
use crate::linestats::ScoreKind;

pub const L1: &str = "L1";
pub const L2: &str = "L2";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("malformed config: {0}")]
    Malformed(String),
}

/// The two scan lines: L1 (upper gate line) and L2 (center line).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "LinesDoc", into = "LinesDoc")]
pub struct LinePair {
    pub l1: LineSpec,
    pub l2: LineSpec,
}

impl LinePair {
    pub fn new(l1: [i64; 4], l2: [i64; 4]) -> Self {
        Self {
            l1: LineSpec::new(L1, l1[0], l1[1], l1[2], l1[3]),
            l2: LineSpec::new(L2, l2[0], l2[1], l2[2], l2[3]),
        }
    }

    /// Default placement for a `width` x `height` frame.
    ///
    /// L2 runs down the center column over 10%..95% of the height; L1 is a
    /// horizontal segment at 20% of the height spanning the middle half of
    /// the width.
    pub fn default_for(width: u32, height: u32) -> Self {
        let (w, h) = (width as i64, height as i64);
        let frac = |n: i64, f: f64| ((n as f64 * f).floor() as i64).clamp(0, n - 1);
        let l2 = [w / 2, frac(h, 0.10), w / 2, frac(h, 0.95)];
        let l1 = [frac(w, 0.25), frac(h, 0.20), frac(w, 0.75), frac(h, 0.20)];
        Self::new(l1, l2)
    }

    pub fn fits(&self, width: u32, height: u32) -> bool {
        [&self.l1, &self.l2].iter().all(|s| {
            let inside = |x: i64, y: i64| x >= 0 && y >= 0 && x < width as i64 && y < height as i64;
            inside(s.x0, s.y0) && inside(s.x1, s.y1)
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinesDoc {
    #[serde(rename = "L1")]
    l1: [i64; 4],
    #[serde(rename = "L2")]
    l2: [i64; 4],
}

impl From<LinesDoc> for LinePair {
    fn from(doc: LinesDoc) -> Self {
        LinePair::new(doc.l1, doc.l2)
    }
}

impl From<LinePair> for LinesDoc {
    fn from(p: LinePair) -> Self {
        LinesDoc {
            l1: p.l1.coords(),
            l2: p.l2.coords(),
        }
    }
}

/// User-facing line configuration; any line left out falls back to the
/// default placement for the frame it is applied to.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LineConfig {
    pub l1: Option<[i64; 4]>,
    pub l2: Option<[i64; 4]>,
    pub score_kind: Option<ScoreKind>,
}

#[derive(Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lines: Option<PartialLinesDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    score_kind: Option<ScoreKind>,
}

#[derive(Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialLinesDoc {
    #[serde(rename = "L1", default, skip_serializing_if = "Option::is_none")]
    l1: Option<[i64; 4]>,
    #[serde(rename = "L2", default, skip_serializing_if = "Option::is_none")]
    l2: Option<[i64; 4]>,
}

impl LineConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let doc: ConfigDoc =
            serde_json::from_str(text).map_err(|e| ConfigError::Malformed(e.to_string()))?;
        let lines = doc.lines.unwrap_or_default();
        Ok(Self {
            l1: lines.l1,
            l2: lines.l2,
            score_kind: doc.score_kind,
        })
    }

    pub fn to_json(&self) -> String {
        let lines = (self.l1.is_some() || self.l2.is_some()).then_some(PartialLinesDoc {
            l1: self.l1,
            l2: self.l2,
        });
        let doc = ConfigDoc {
            lines,
            score_kind: self.score_kind,
        };
        serde_json::to_string_pretty(&doc).expect("config serializes")
    }

    /// Concrete lines for a frame of the given size.
    pub fn resolve(&self, width: u32, height: u32) -> LinePair {
        let defaults = LinePair::default_for(width, height);
        LinePair::new(
            self.l1.unwrap_or(defaults.l1.coords()),
            self.l2.unwrap_or(defaults.l2.coords()),
        )
    }

    pub fn is_fully_specified(&self) -> bool {
        self.l1.is_some() && self.l2.is_some()
    }
}
