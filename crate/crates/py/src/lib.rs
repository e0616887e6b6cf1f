//! Python bindings: `import hopperstat`.

use std::path::{Path, PathBuf};

use ::hopperstat as hs;
use ::hopperstat::analysis::{calibrate_corpus as core_calibrate_corpus, Corpus, CorpusError};
use ::hopperstat::synthcorpus::SynthError;
use pyo3::create_exception;
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

create_exception!(hopperstat, ImageError, PyValueError, "Undecodable image or line outside the frame.");
create_exception!(hopperstat, CalibrationError, PyValueError, "Labeled data cannot be calibrated.");
create_exception!(hopperstat, MalformedModel, PyValueError, "Invalid model document.");

fn image_err(e: hs::ImageError) -> PyErr {
    ImageError::new_err(e.to_string())
}

fn corpus_err(e: CorpusError) -> PyErr {
    match e {
        CorpusError::Calibration(c) => CalibrationError::new_err(c.to_string()),
        CorpusError::BadFrame { .. } | CorpusError::LineOutOfBounds { .. } => ImageError::new_err(e.to_string()),
        CorpusError::UnknownExclusion(_) => PyValueError::new_err(e.to_string()),
        _ => PyOSError::new_err(e.to_string()),
    }
}

fn synth_err(e: SynthError) -> PyErr {
    match e {
        SynthError::IoFailure { .. } => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse<T: std::str::FromStr>(s: &str) -> PyResult<T>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e: T::Err| PyValueError::new_err(e.to_string()))
}

/// 8-bit grayscale frame.
#[pyclass(name = "GrayImage", module = "hopperstat", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGrayImage(hs::GrayImage);

#[pymethods]
impl PyGrayImage {
    #[new]
    fn new(width: u32, height: u32, data: Vec<u8>) -> PyResult<Self> {
        hs::GrayImage::new(width, height, data).map(Self).map_err(image_err)
    }

    /// Decode PNG, JPEG or binary PGM bytes.
    #[staticmethod]
    fn decode(data: &[u8]) -> PyResult<Self> {
        hs::decode_image(data).map(Self).map_err(image_err)
    }

    #[getter]
    fn width(&self) -> u32 {
        self.0.width()
    }

    #[getter]
    fn height(&self) -> u32 {
        self.0.height()
    }

    #[getter]
    fn data<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, self.0.as_raw())
    }

    fn get(&self, x: u32, y: u32) -> PyResult<u8> {
        if x >= self.0.width() || y >= self.0.height() {
            return Err(pyo3::exceptions::PyIndexError::new_err(format!("({x}, {y}) outside frame")));
        }
        Ok(self.0.get(x, y))
    }

    fn to_pgm<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.0.to_pgm())
    }

    fn __repr__(&self) -> String {
        format!("GrayImage({}x{})", self.0.width(), self.0.height())
    }
}

#[pyfunction]
fn decode_image(data: &[u8]) -> PyResult<PyGrayImage> {
    PyGrayImage::decode(data)
}

#[pyfunction]
fn to_gray(r: u8, g: u8, b: u8) -> u8 {
    hs::to_gray(r, g, b)
}

#[pyclass(name = "LineSpec", module = "hopperstat", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyLineSpec(hs::LineSpec);

#[pymethods]
impl PyLineSpec {
    #[new]
    fn new(name: String, x0: i64, y0: i64, x1: i64, y1: i64) -> Self {
        Self(hs::LineSpec::new(name, x0, y0, x1, y1))
    }

    #[getter]
    fn name(&self) -> &str {
        &self.0.name
    }

    #[getter]
    fn coords(&self) -> [i64; 4] {
        self.0.coords()
    }

    fn rasterize(&self) -> Vec<(i64, i64)> {
        self.0.rasterize()
    }

    fn __len__(&self) -> usize {
        self.0.pixel_count()
    }

    fn __repr__(&self) -> String {
        let [x0, y0, x1, y1] = self.0.coords();
        format!("LineSpec({:?}, {x0}, {y0}, {x1}, {y1})", self.0.name)
    }
}

/// Pixel values along `line` as `bytes`, in rasterization order.
#[pyfunction]
fn sample_line(image: PyRef<'_, PyGrayImage>, line: PyRef<'_, PyLineSpec>) -> PyResult<Vec<u8>> {
    hs::sample_line(&image.0, &line.0)
        .map(|s| s.values)
        .map_err(image_err)
}

#[pyclass(name = "LineStats", module = "hopperstat", frozen, skip_from_py_object, get_all)]
#[derive(Clone, Copy)]
struct PyLineStats {
    mean: f64,
    sigma: f64,
    variance: f64,
    count: usize,
}

#[pymethods]
impl PyLineStats {
    fn __repr__(&self) -> String {
        format!(
            "LineStats(mean={}, sigma={}, variance={}, count={})",
            self.mean, self.sigma, self.variance, self.count
        )
    }
}

/// Population mean, sigma and variance of a sequence of pixel values.
#[pyfunction]
fn line_stats(values: Vec<f64>) -> PyResult<PyLineStats> {
    let s = hs::linestats::spread_stats(&values).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(PyLineStats { mean: s.mean, sigma: s.sigma, variance: s.variance, count: s.count })
}

#[pyclass(name = "ScoreVector", module = "hopperstat", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyScoreVector(hs::ScoreVector);

#[pymethods]
impl PyScoreVector {
    #[new]
    fn new(sigma1: f64, sigma2: f64) -> Self {
        Self(hs::ScoreVector::from_sigmas(sigma1, sigma2))
    }

    #[getter]
    fn sigma1(&self) -> f64 {
        self.0.sigma1
    }

    #[getter]
    fn sigma2(&self) -> f64 {
        self.0.sigma2
    }

    #[getter]
    fn a1(&self) -> f64 {
        self.0.a1
    }

    #[getter]
    fn a1_sq(&self) -> f64 {
        self.0.a1_sq
    }

    #[getter]
    fn a2(&self) -> f64 {
        self.0.a2
    }

    /// Score selected by `kind` ("A1", "A1_SQ" or "A2").
    fn driving(&self, kind: &str) -> PyResult<f64> {
        Ok(self.0.driving(parse(kind)?))
    }

    fn __repr__(&self) -> String {
        let s = &self.0;
        format!(
            "ScoreVector(sigma1={}, sigma2={}, a1={}, a1_sq={}, a2={})",
            s.sigma1, s.sigma2, s.a1, s.a1_sq, s.a2
        )
    }
}

#[pyfunction]
fn combine_scores(l1: PyRef<'_, PyLineStats>, l2: PyRef<'_, PyLineStats>) -> PyScoreVector {
    PyScoreVector(hs::ScoreVector::from_sigmas(l1.sigma, l2.sigma))
}

#[pyclass(name = "CalibrationModel", module = "hopperstat", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyModel(hs::CalibrationModel);

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        hs::load_model(text).map(Self).map_err(|e| MalformedModel::new_err(e.0))
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let text = std::fs::read_to_string(&path).map_err(|e| PyOSError::new_err(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn to_json(&self) -> String {
        hs::save_model(&self.0)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        std::fs::write(&path, self.to_json() + "\n").map_err(|e| PyOSError::new_err(format!("{}: {e}", path.display())))
    }

    #[getter]
    fn score_kind(&self) -> &'static str {
        self.0.score_kind().as_str()
    }

    #[getter]
    fn baseline_l1(&self) -> f64 {
        self.0.baseline_l1()
    }

    #[getter]
    fn baseline_l2(&self) -> f64 {
        self.0.baseline_l2()
    }

    #[getter]
    fn thresholds(&self) -> [f64; 3] {
        self.0.thresholds()
    }

    #[getter]
    fn l1_gate(&self) -> f64 {
        self.0.l1_gate()
    }

    #[getter]
    fn lines(&self) -> ([i64; 4], [i64; 4]) {
        let l = self.0.lines();
        (l.l1.coords(), l.l2.coords())
    }

    /// Class name for a score vector and raw L1 sigma.
    fn classify(&self, scores: PyRef<'_, PyScoreVector>, sigma_l1: f64) -> &'static str {
        hs::classify(&scores.0, sigma_l1, &self.0).as_str()
    }

    /// Score and classify a decoded frame.
    fn analyze(&self, image: PyRef<'_, PyGrayImage>) -> PyResult<PyAnalysis> {
        hs::analyze_frame(&image.0, &self.0).map(PyAnalysis::from).map_err(image_err)
    }

    fn analyze_bytes(&self, py: Python<'_>, data: &[u8]) -> PyResult<PyAnalysis> {
        let model = &self.0;
        py.detach(|| hs::analyze_bytes(data, model))
            .map(PyAnalysis::from)
            .map_err(image_err)
    }

    fn __repr__(&self) -> String {
        let [t1, t2, t3] = self.0.thresholds();
        format!(
            "CalibrationModel({}, thresholds=[{t1}, {t2}, {t3}], l1_gate={})",
            self.0.score_kind(),
            self.0.l1_gate()
        )
    }
}

#[pyclass(name = "Analysis", module = "hopperstat", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyAnalysis {
    class_: &'static str,
    #[pyo3(get)]
    scores: PyScoreVector,
    #[pyo3(get)]
    adjusted_score: f64,
    #[pyo3(get)]
    adjusted_sigma_l1: f64,
}

impl From<hs::Analysis> for PyAnalysis {
    fn from(a: hs::Analysis) -> Self {
        Self {
            class_: a.class.as_str(),
            scores: PyScoreVector(a.scores),
            adjusted_score: a.adjusted_score,
            adjusted_sigma_l1: a.adjusted_sigma_l1,
        }
    }
}

#[pymethods]
impl PyAnalysis {
    #[getter(class)]
    fn class(&self) -> &'static str {
        self.class_
    }

    fn __repr__(&self) -> String {
        format!("Analysis(class={}, adjusted_score={})", self.class_, self.adjusted_score)
    }
}

fn line_pair(l1: Option<[i64; 4]>, l2: Option<[i64; 4]>, size: Option<(u32, u32)>) -> PyResult<hs::LinePair> {
    match (l1, l2, size) {
        (Some(l1), Some(l2), _) => Ok(hs::LinePair::new(l1, l2)),
        (l1, l2, Some((w, h))) => {
            let d = hs::LinePair::default_for(w, h);
            Ok(hs::LinePair::new(l1.unwrap_or(d.l1.coords()), l2.unwrap_or(d.l2.coords())))
        }
        _ => Err(PyValueError::new_err("give both l1 and l2, or the frame size")),
    }
}

/// Fit a model from `(ScoreVector, sigma_l1, class)` examples.
#[pyfunction]
#[pyo3(signature = (examples, score_kind = "A2", baseline_l1 = 0.0, baseline_l2 = 0.0, l1 = None, l2 = None, size = None))]
#[allow(clippy::too_many_arguments)]
fn calibrate(
    examples: Vec<(PyRef<'_, PyScoreVector>, f64, String)>,
    score_kind: &str,
    baseline_l1: f64,
    baseline_l2: f64,
    l1: Option<[i64; 4]>,
    l2: Option<[i64; 4]>,
    size: Option<(u32, u32)>,
) -> PyResult<PyModel> {
    let examples = examples
        .iter()
        .map(|(sv, sigma_l1, truth)| {
            Ok(hs::LabeledScore { score_vector: sv.0, sigma_l1: *sigma_l1, truth: parse(truth)? })
        })
        .collect::<PyResult<Vec<_>>>()?;
    let lines = line_pair(l1, l2, size)?;
    hs::calibrate(&examples, parse(score_kind)?, baseline_l1, baseline_l2, lines)
        .map(PyModel)
        .map_err(|e| CalibrationError::new_err(e.to_string()))
}

/// Calibrate on a labeled manifest, optionally against an empty-hopper frame.
#[pyfunction]
#[pyo3(signature = (manifest, score_kind = "A2", baseline = None))]
fn calibrate_corpus(py: Python<'_>, manifest: PathBuf, score_kind: &str, baseline: Option<PathBuf>) -> PyResult<PyModel> {
    let kind = parse(score_kind)?;
    let baseline = match baseline {
        Some(p) => {
            let bytes = std::fs::read(&p).map_err(|e| PyOSError::new_err(format!("{}: {e}", p.display())))?;
            Some(hs::decode_image(&bytes).map_err(image_err)?)
        }
        None => None,
    };
    py.detach(|| {
        let corpus = Corpus::load(&manifest)?;
        core_calibrate_corpus(&corpus, &hs::LineConfig::default(), kind, baseline.as_ref())
    })
    .map(PyModel)
    .map_err(corpus_err)
}

#[pyclass(name = "EvalReport", module = "hopperstat", frozen, skip_from_py_object)]
struct PyEvalReport(hs::EvalReport);

#[pymethods]
impl PyEvalReport {
    #[getter]
    fn total(&self) -> usize {
        self.0.total
    }

    #[getter]
    fn correct(&self) -> usize {
        self.0.correct
    }

    #[getter]
    fn accuracy(&self) -> f64 {
        self.0.accuracy
    }

    /// Rows are true classes, columns predictions, both P10..P100.
    #[getter]
    fn confusion(&self) -> [[usize; 5]; 5] {
        self.0.confusion
    }

    #[getter]
    fn excluded(&self) -> Vec<String> {
        self.0.excluded.files.clone()
    }

    #[getter]
    fn mean_latency(&self) -> f64 {
        self.0.mean_latency
    }

    #[getter]
    fn per_image_latencies(&self) -> Vec<f64> {
        self.0.per_image_latencies.clone()
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    fn to_text(&self) -> String {
        self.0.to_text()
    }

    fn __repr__(&self) -> String {
        format!("EvalReport({}/{} correct)", self.0.correct, self.0.total)
    }
}

#[pyfunction]
#[pyo3(signature = (model, manifest, exclude = Vec::new()))]
fn evaluate(py: Python<'_>, model: PyRef<'_, PyModel>, manifest: PathBuf, exclude: Vec<String>) -> PyResult<PyEvalReport> {
    let model = &model.0;
    py.detach(|| {
        let corpus = Corpus::load(&manifest)?;
        hs::evaluate(model, &corpus, &exclude)
    })
    .map(PyEvalReport)
    .map_err(corpus_err)
}

fn synth_params(width: u32, height: u32, fill: f64, skew: f64, seed: u64) -> hs::SynthParams {
    hs::SynthParams { width, height, fill, skew, seed, ..hs::SynthParams::default() }
}

/// Render one synthetic frame; returns `(image, class)`.
#[pyfunction]
#[pyo3(signature = (fill, seed = 0, skew = 0.0, width = 640, height = 480))]
fn generate(fill: f64, seed: u64, skew: f64, width: u32, height: u32) -> PyResult<(PyGrayImage, &'static str)> {
    let frame = hs::generate(&synth_params(width, height, fill, skew, seed)).map_err(synth_err)?;
    Ok((PyGrayImage(frame.image), frame.truth.as_str()))
}

/// Write a labeled corpus plus `manifest.jsonl`; returns the frame file names.
#[pyfunction]
#[pyo3(signature = (out_dir, count, fills = vec![0.1, 0.25, 0.5, 0.75, 1.0], skews = vec![0.0], seed = 0, width = 640, height = 480))]
#[allow(clippy::too_many_arguments)]
fn generate_corpus(
    py: Python<'_>,
    out_dir: PathBuf,
    count: usize,
    fills: Vec<f64>,
    skews: Vec<f64>,
    seed: u64,
    width: u32,
    height: u32,
) -> PyResult<Vec<String>> {
    let spec = hs::CorpusSpec {
        count,
        fills,
        skews,
        seed,
        template: synth_params(width, height, 0.0, 0.0, 0),
    };
    let out: &Path = &out_dir;
    let entries = py.detach(|| hs::generate_corpus(out, &spec)).map_err(synth_err)?;
    Ok(entries.into_iter().map(|e| e.file).collect())
}

#[pyfunction]
fn label_of(fill: f64) -> &'static str {
    hs::label_of(fill).as_str()
}

#[pyfunction]
fn apply_baseline(raw: f64, baseline: f64) -> f64 {
    hs::apply_baseline(raw, baseline)
}

#[pymodule]
fn hopperstat(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("ImageError", py.get_type::<ImageError>())?;
    m.add("CalibrationError", py.get_type::<CalibrationError>())?;
    m.add("MalformedModel", py.get_type::<MalformedModel>())?;
    m.add("CLASSES", hs::FullnessClass::ALL.map(|c| c.as_str()))?;
    m.add_class::<PyGrayImage>()?;
    m.add_class::<PyLineSpec>()?;
    m.add_class::<PyLineStats>()?;
    m.add_class::<PyScoreVector>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyAnalysis>()?;
    m.add_class::<PyEvalReport>()?;
    m.add_function(wrap_pyfunction!(decode_image, m)?)?;
    m.add_function(wrap_pyfunction!(to_gray, m)?)?;
    m.add_function(wrap_pyfunction!(sample_line, m)?)?;
    m.add_function(wrap_pyfunction!(line_stats, m)?)?;
    m.add_function(wrap_pyfunction!(combine_scores, m)?)?;
    m.add_function(wrap_pyfunction!(apply_baseline, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(generate_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(label_of, m)?)?;
    Ok(())
}
