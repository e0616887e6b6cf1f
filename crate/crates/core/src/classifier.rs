//! Threshold calibration and fullness classification.
//!
//! The driving score (selected by [`ScoreKind`]) places a frame into one of
//! four bands: P10, P25, P50, or the shared P75/P100 band. Inside the top
//! band the L1 standard deviation decides whether material has reached the
//! upper line (P100) or not (P75).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::LinePair;
use crate::linestats::{ScoreKind, ScoreVector};

/// Nominal fill level of the hopper.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FullnessClass {
    P10,
    P25,
    P50,
    P75,
    P100,
}

impl FullnessClass {
    pub const ALL: [FullnessClass; 5] = [
        FullnessClass::P10,
        FullnessClass::P25,
        FullnessClass::P50,
        FullnessClass::P75,
        FullnessClass::P100,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Nominal fill fraction (0.10 .. 1.00).
    pub fn nominal(self) -> f64 {
        match self {
            FullnessClass::P10 => 0.10,
            FullnessClass::P25 => 0.25,
            FullnessClass::P50 => 0.50,
            FullnessClass::P75 => 0.75,
            FullnessClass::P100 => 1.00,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FullnessClass::P10 => "P10",
            FullnessClass::P25 => "P25",
            FullnessClass::P50 => "P50",
            FullnessClass::P75 => "P75",
            FullnessClass::P100 => "P100",
        }
    }
}

impl fmt::Display for FullnessClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FullnessClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FullnessClass::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown fullness class {s:?}"))
    }
}

/// Subtract an empty-hopper baseline, clamping at zero.
pub fn apply_baseline(raw: f64, baseline: f64) -> f64 {
    (raw - baseline).max(0.0)
}

/// One calibration example.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledScore {
    pub score_vector: ScoreVector,
    pub sigma_l1: f64,
    pub truth: FullnessClass,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrationError {
    #[error("MissingClass {0}")]
    MissingClass(FullnessClass),
    #[error("NonMonotoneClasses {lower} {upper}: mean score {upper_mean} of {upper} does not exceed {lower_mean} of {lower}")]
    NonMonotoneClasses {
        lower: &'static str,
        upper: &'static str,
        lower_mean: f64,
        upper_mean: f64,
    },
    #[error("DegenerateGate: mean L1 sigma of P100 ({p100_mean}) does not exceed that of P75 ({p75_mean})")]
    DegenerateGate { p75_mean: f64, p100_mean: f64 },
    #[error("invalid calibration input: {0}")]
    InvalidInput(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("MalformedModel: {0}")]
pub struct MalformedModel(pub String);

/// Calibrated thresholds plus the geometry they were computed on.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationModel {
    score_kind: ScoreKind,
    baseline_l1: f64,
    baseline_l2: f64,
    thresholds: [f64; 3],
    l1_gate: f64,
    lines: LinePair,
}

impl CalibrationModel {
    pub fn new(
        score_kind: ScoreKind,
        baseline_l1: f64,
        baseline_l2: f64,
        thresholds: [f64; 3],
        l1_gate: f64,
        lines: LinePair,
    ) -> Result<Self, MalformedModel> {
        let finite_nonneg = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(MalformedModel(format!("{name} must be finite and >= 0, got {v}")))
            }
        };
        finite_nonneg("baseline_l1", baseline_l1)?;
        finite_nonneg("baseline_l2", baseline_l2)?;
        finite_nonneg("l1_gate", l1_gate)?;
        if thresholds.iter().any(|t| !t.is_finite()) {
            return Err(MalformedModel(format!("thresholds must be finite, got {thresholds:?}")));
        }
        if !(thresholds[0] < thresholds[1] && thresholds[1] < thresholds[2]) {
            return Err(MalformedModel(format!(
                "thresholds must be strictly increasing, got {thresholds:?}"
            )));
        }
        Ok(Self {
            score_kind,
            baseline_l1,
            baseline_l2,
            thresholds,
            l1_gate,
            lines,
        })
    }

    pub fn score_kind(&self) -> ScoreKind {
        self.score_kind
    }

    pub fn baseline_l1(&self) -> f64 {
        self.baseline_l1
    }

    pub fn baseline_l2(&self) -> f64 {
        self.baseline_l2
    }

    pub fn thresholds(&self) -> [f64; 3] {
        self.thresholds
    }

    pub fn l1_gate(&self) -> f64 {
        self.l1_gate
    }

    pub fn lines(&self) -> &LinePair {
        &self.lines
    }

    /// Baseline-adjusted driving score of `score`.
    pub fn adjusted_score(&self, score: &ScoreVector) -> f64 {
        apply_baseline(score.driving(self.score_kind), self.baseline_l2)
    }

    pub fn to_json(&self) -> String {
        save_model(self)
    }

    pub fn from_json(text: &str) -> Result<Self, MalformedModel> {
        load_model(text)
    }
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values
        .into_iter()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Fit thresholds as midpoints between consecutive class means of the
/// adjusted driving score, and the L1 gate as the midpoint between the P75
/// and P100 mean adjusted L1 sigma.
pub fn calibrate(
    examples: &[LabeledScore],
    score_kind: ScoreKind,
    baseline_l1: f64,
    baseline_l2: f64,
    lines: LinePair,
) -> Result<CalibrationModel, CalibrationError> {
    for (name, b) in [("baseline_l1", baseline_l1), ("baseline_l2", baseline_l2)] {
        if !(b.is_finite() && b >= 0.0) {
            return Err(CalibrationError::InvalidInput(format!("{name} = {b}")));
        }
    }
    let adjusted = |e: &LabeledScore| apply_baseline(e.score_vector.driving(score_kind), baseline_l2);
    let gate_value = |e: &LabeledScore| apply_baseline(e.sigma_l1, baseline_l1);
    let of_class = |c: FullnessClass| examples.iter().filter(move |e| e.truth == c);

    let mut class_means = [0.0; 5];
    for class in FullnessClass::ALL {
        class_means[class.index()] =
            mean(of_class(class).map(adjusted)).ok_or(CalibrationError::MissingClass(class))?;
    }

    let top_band = mean(
        examples
            .iter()
            .filter(|e| e.truth >= FullnessClass::P75)
            .map(adjusted),
    )
    .expect("P75 and P100 are present");
    let bands = [
        ("P10", class_means[0]),
        ("P25", class_means[1]),
        ("P50", class_means[2]),
        ("P75+P100", top_band),
    ];
    let mut thresholds = [0.0; 3];
    for (i, pair) in bands.windows(2).enumerate() {
        let ((lower, lower_mean), (upper, upper_mean)) = (pair[0], pair[1]);
        // NaN fails too
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(upper_mean > lower_mean) {
            return Err(CalibrationError::NonMonotoneClasses {
                lower,
                upper,
                lower_mean,
                upper_mean,
            });
        }
        thresholds[i] = (lower_mean + upper_mean) / 2.0;
    }

    let p75_mean = mean(of_class(FullnessClass::P75).map(gate_value)).expect("P75 present");
    let p100_mean = mean(of_class(FullnessClass::P100).map(gate_value)).expect("P100 present");
    if p100_mean - p75_mean <= 1e-12 {
        return Err(CalibrationError::DegenerateGate {
            p75_mean,
            p100_mean,
        });
    }
    let l1_gate = (p75_mean + p100_mean) / 2.0;

    CalibrationModel::new(score_kind, baseline_l1, baseline_l2, thresholds, l1_gate, lines)
        .map_err(|e| CalibrationError::InvalidInput(e.0))
}

/// Map a score vector to a fullness class. Scores exactly on a threshold
/// fall into the higher class.
pub fn classify(score: &ScoreVector, sigma_l1: f64, model: &CalibrationModel) -> FullnessClass {
    classify_adjusted(
        model.adjusted_score(score),
        apply_baseline(sigma_l1, model.baseline_l1),
        model,
    )
}

/// Classification on already baseline-adjusted inputs.
pub fn classify_adjusted(score: f64, gate_value: f64, model: &CalibrationModel) -> FullnessClass {
    let [t1, t2, t3] = model.thresholds;
    if score < t1 {
        FullnessClass::P10
    } else if score < t2 {
        FullnessClass::P25
    } else if score < t3 {
        FullnessClass::P50
    } else if gate_value >= model.l1_gate {
        FullnessClass::P100
    } else {
        FullnessClass::P75
    }
}

pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    score_kind: ScoreKind,
    baseline_l1: f64,
    baseline_l2: f64,
    thresholds: [f64; 3],
    l1_gate: f64,
    lines: LinePair,
    version: u32,
}

pub fn save_model(model: &CalibrationModel) -> String {
    let doc = ModelDoc {
        score_kind: model.score_kind,
        baseline_l1: model.baseline_l1,
        baseline_l2: model.baseline_l2,
        thresholds: model.thresholds,
        l1_gate: model.l1_gate,
        lines: model.lines.clone(),
        version: MODEL_VERSION,
    };
    serde_json::to_string_pretty(&doc).expect("model serializes")
}

pub fn load_model(text: &str) -> Result<CalibrationModel, MalformedModel> {
    let doc: ModelDoc = serde_json::from_str(text).map_err(|e| MalformedModel(e.to_string()))?;
    if doc.version != MODEL_VERSION {
        return Err(MalformedModel(format!(
            "unsupported version {} (expected {MODEL_VERSION})",
            doc.version
        )));
    }
    CalibrationModel::new(
        doc.score_kind,
        doc.baseline_l1,
        doc.baseline_l2,
        doc.thresholds,
        doc.l1_gate,
        doc.lines,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lines() -> LinePair {
        LinePair::default_for(640, 480)
    }

    fn model(thresholds: [f64; 3], gate: f64) -> CalibrationModel {
        CalibrationModel::new(ScoreKind::A2, 0.0, 0.0, thresholds, gate, lines()).unwrap()
    }

    fn example(a2: f64, sigma_l1: f64, truth: FullnessClass) -> LabeledScore {
        LabeledScore {
            score_vector: scored(a2),
            sigma_l1,
            truth,
        }
    }

    fn scored(a2: f64) -> ScoreVector {
        ScoreVector {
            sigma1: 0.0,
            sigma2: 0.0,
            a1: 0.0,
            a1_sq: 0.0,
            a2,
        }
    }

    #[test]
    fn baseline_clamps() {
        assert_eq!(apply_baseline(17.0, 0.0), 17.0);
        assert_eq!(apply_baseline(12.0, 12.0), 0.0);
        assert_eq!(apply_baseline(10.0, 12.0), 0.0);
    }

    #[test]
    fn class_order_and_names() {
        assert!(FullnessClass::P10 < FullnessClass::P25);
        assert!(FullnessClass::P75 < FullnessClass::P100);
        assert_eq!(serde_json::to_string(&FullnessClass::P100).unwrap(), "\"P100\"");
        assert_eq!("p50".parse::<FullnessClass>().unwrap(), FullnessClass::P50);
    }

    #[test]
    fn calibrate_midpoints() {
        use FullnessClass::*;
        let ex = [
            example(10.0, 0.0, P10),
            example(20.0, 0.0, P25),
            example(30.0, 0.0, P50),
            example(36.0, 2.0, P75),
            example(44.0, 8.0, P100),
        ];
        let m = calibrate(&ex, ScoreKind::A2, 0.0, 0.0, lines()).unwrap();
        // top band mean is (36 + 44) / 2 = 40
        assert_eq!(m.thresholds(), [15.0, 25.0, 35.0]);
        assert_eq!(m.l1_gate(), 5.0);
    }

    #[test]
    fn calibrate_subtracts_baseline() {
        use FullnessClass::*;
        let ex = [
            example(14.0, 3.0, P10),
            example(24.0, 3.0, P25),
            example(34.0, 3.0, P50),
            example(44.0, 3.0, P75),
            example(44.0, 9.0, P100),
        ];
        let m = calibrate(&ex, ScoreKind::A2, 1.0, 4.0, lines()).unwrap();
        assert_eq!(m.thresholds(), [15.0, 25.0, 35.0]);
        assert_eq!(m.l1_gate(), 5.0);
        assert_eq!(m.baseline_l2(), 4.0);
    }

    #[test]
    fn calibrate_rejects_crossed_classes() {
        use FullnessClass::*;
        let ex = [
            example(10.0, 0.0, P10),
            example(30.0, 0.0, P25),
            example(20.0, 0.0, P50),
            example(40.0, 2.0, P75),
            example(40.0, 8.0, P100),
        ];
        let err = calibrate(&ex, ScoreKind::A2, 0.0, 0.0, lines()).unwrap_err();
        assert!(matches!(
            err,
            CalibrationError::NonMonotoneClasses { lower: "P25", upper: "P50", .. }
        ));
        assert!(err.to_string().starts_with("NonMonotoneClasses P25 P50"));
    }

    #[test]
    fn calibrate_reports_missing_class() {
        use FullnessClass::*;
        let ex = [
            example(10.0, 0.0, P10),
            example(30.0, 0.0, P50),
            example(40.0, 2.0, P75),
            example(40.0, 8.0, P100),
        ];
        let err = calibrate(&ex, ScoreKind::A2, 0.0, 0.0, lines()).unwrap_err();
        assert_eq!(err, CalibrationError::MissingClass(P25));
        assert_eq!(err.to_string(), "MissingClass P25");

        let no_p100 = &ex[..3];
        assert!(matches!(
            calibrate(no_p100, ScoreKind::A2, 0.0, 0.0, lines()),
            Err(CalibrationError::MissingClass(_))
        ));
    }

    #[test]
    fn calibrate_rejects_flat_gate() {
        use FullnessClass::*;
        let ex = [
            example(10.0, 0.0, P10),
            example(20.0, 0.0, P25),
            example(30.0, 0.0, P50),
            example(40.0, 4.0, P75),
            example(40.0, 4.0, P100),
        ];
        assert!(matches!(
            calibrate(&ex, ScoreKind::A2, 0.0, 0.0, lines()),
            Err(CalibrationError::DegenerateGate { .. })
        ));
    }

    #[test]
    fn classify_spot_values() {
        let m = model([15.0, 25.0, 35.0], 5.0);
        assert_eq!(classify(&scored(0.0), 0.0, &m), FullnessClass::P10);
        assert_eq!(classify(&scored(20.0), 0.0, &m), FullnessClass::P25);
        assert_eq!(classify(&scored(30.0), 0.0, &m), FullnessClass::P50);
        assert_eq!(classify(&scored(40.0), 1.0, &m), FullnessClass::P75);
        assert_eq!(classify(&scored(40.0), 9.0, &m), FullnessClass::P100);
    }

    #[test]
    fn ties_go_up() {
        let m = model([15.0, 25.0, 35.0], 5.0);
        assert_eq!(classify(&scored(15.0), 0.0, &m), FullnessClass::P25);
        assert_eq!(classify(&scored(25.0), 0.0, &m), FullnessClass::P50);
        assert_eq!(classify(&scored(35.0), 0.0, &m), FullnessClass::P75);
        assert_eq!(classify(&scored(35.0), 5.0, &m), FullnessClass::P100);
    }

    #[test]
    fn classify_uses_recorded_score_kind() {
        let m = CalibrationModel::new(ScoreKind::A1, 0.0, 0.0, [1.0, 2.0, 3.0], 1.0, lines()).unwrap();
        // a1 = 2.5 -> P50 even though a2 is large
        let sv = ScoreVector::from_sigmas(0.0, 5.0);
        assert_eq!(classify(&sv, 0.0, &m), FullnessClass::P50);
    }

    #[test]
    fn class_means_classify_as_their_class() {
        use FullnessClass::*;
        let ex = [
            example(10.0, 1.0, P10),
            example(20.0, 1.0, P25),
            example(30.0, 1.0, P50),
            example(38.0, 2.0, P75),
            example(42.0, 8.0, P100),
        ];
        let m = calibrate(&ex, ScoreKind::A2, 0.0, 0.0, lines()).unwrap();
        for e in &ex {
            assert_eq!(classify(&e.score_vector, e.sigma_l1, &m), e.truth);
        }
    }

    #[test]
    fn model_document_roundtrip() {
        let m = CalibrationModel::new(
            ScoreKind::A1Sq,
            1.25,
            0.1 + 0.2,
            [1.0 / 3.0, 2.0, 1e6],
            7.5,
            lines(),
        )
        .unwrap();
        let text = save_model(&m);
        assert!(text.contains("\"A1_SQ\"") && text.contains("\"version\": 1"));
        assert_eq!(load_model(&text).unwrap(), m);
    }

    const DOC: &str = r#"{"score_kind": "A2", "baseline_l1": 0, "baseline_l2": 0,
        "thresholds": [1, 2, 3], "l1_gate": 4,
        "lines": {"L1": [0, 1, 2, 1], "L2": [1, 0, 1, 3]}, "version": 1}"#;

    #[test]
    fn load_accepts_reference_document() {
        let m = load_model(DOC).unwrap();
        assert_eq!(m.thresholds(), [1.0, 2.0, 3.0]);
        assert_eq!(m.lines().l2.coords(), [1, 0, 1, 3]);
    }

    #[test]
    fn load_rejects_malformed_documents() {
        let bad = [
            DOC.replace("[1, 2, 3]", "[2, 1, 3]"),
            DOC.replace("[1, 2, 3]", "[1, 1, 3]"),
            DOC.replace("\"A2\"", "\"A3\""),
            DOC.replace("\"version\": 1", "\"version\": 2"),
            DOC.replace("\"l1_gate\": 4,", ""),
            DOC.replace("\"l1_gate\": 4", "\"l1_gate\": -1"),
            DOC.replace("\"version\": 1", "\"version\": 1, \"extra\": true"),
            DOC.replace("\"L2\"", "\"L3\""),
            "not json".to_string(),
        ];
        for doc in bad {
            assert!(load_model(&doc).is_err(), "accepted: {doc}");
        }
    }

    fn any_model() -> impl Strategy<Value = CalibrationModel> {
        (
            prop::sample::select(ScoreKind::ALL.to_vec()),
            0.0f64..50.0,
            0.0f64..50.0,
            0.0f64..1000.0,
            0.001f64..500.0,
            0.001f64..500.0,
            0.0f64..100.0,
        )
            .prop_map(|(k, b1, b2, t1, d1, d2, gate)| {
                CalibrationModel::new(k, b1, b2, [t1, t1 + d1, t1 + d1 + d2], gate, lines()).unwrap()
            })
    }

    proptest! {
        #[test]
        fn monotone_in_driving_score(m in any_model(), s in 0.0f64..2000.0, ds in 0.0f64..500.0, g in 0.0f64..150.0) {
            let lo = classify_adjusted(s, g, &m);
            let hi = classify_adjusted(s + ds, g, &m);
            prop_assert!(hi >= lo);
        }

        #[test]
        fn baseline_shift_equivariance(s in 0.0f64..2000.0, b in 0.0f64..100.0, delta in 0.0f64..100.0) {
            let m0 = CalibrationModel::new(ScoreKind::A2, 0.0, b, [100.0, 400.0, 900.0], 10.0, lines()).unwrap();
            let m1 = CalibrationModel::new(ScoreKind::A2, 0.0, b + delta, [100.0, 400.0, 900.0], 10.0, lines()).unwrap();
            let raw = s + b;
            prop_assert_eq!(classify(&scored(raw), 0.0, &m0), classify(&scored(raw + delta), 0.0, &m1));
        }

        #[test]
        fn save_load_classify_agree(m in any_model(), s1 in 0.0f64..60.0, s2 in 0.0f64..60.0) {
            let loaded = load_model(&save_model(&m)).unwrap();
            prop_assert_eq!(&loaded, &m);
            let sv = ScoreVector::from_sigmas(s1, s2);
            prop_assert_eq!(classify(&sv, s1, &loaded), classify(&sv, s1, &m));
        }
    }
}
