//! Python bindings: embeddings, keyframe selection, the adaptation loop,
//! the reference detector, metrics and the simulator.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use selfaug::{
    AdaptationState, DetectorConfig, Embedding, EnrollTag, FrameLabel, FusionRule, SegmentFrames,
    SelectionConfig, SimulationConfig,
};

create_exception!(selfaug_py, SelfAugError, PyException);

fn err(e: selfaug::Error) -> PyErr {
    SelfAugError::new_err(format!("[{}] {}", e.code(), e))
}

fn embedding(v: Vec<f64>) -> PyResult<Embedding> {
    Embedding::new(v).map_err(err)
}

fn segment(
    frames: Vec<Vec<f64>>,
    activity: Option<Vec<f64>>,
    labels: Option<Vec<String>>,
) -> PyResult<SegmentFrames> {
    let n = frames.len();
    let embeddings = frames
        .into_iter()
        .map(embedding)
        .collect::<PyResult<Vec<_>>>()?;
    let labels = labels
        .map(|ls| {
            ls.iter()
                .map(|l| l.parse::<FrameLabel>())
                .collect::<selfaug::Result<Vec<_>>>()
        })
        .transpose()
        .map_err(err)?;
    SegmentFrames::new(
        1,
        embeddings,
        activity.unwrap_or_else(|| vec![1.0; n]),
        labels,
    )
    .map_err(err)
}

fn to_py(py: Python<'_>, v: &serde_json::Value) -> PyResult<Py<PyAny>> {
    use serde_json::Value;
    Ok(match v {
        Value::Null => py.None(),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any().unbind(),
        Value::Number(n) => match n.as_u64() {
            Some(u) => u.into_pyobject(py)?.into_any().unbind(),
            None => n
                .as_f64()
                .unwrap_or(f64::NAN)
                .into_pyobject(py)?
                .into_any()
                .unbind(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any().unbind(),
        Value::Array(a) => {
            let items = a
                .iter()
                .map(|x| to_py(py, x))
                .collect::<PyResult<Vec<_>>>()?;
            PyList::new(py, items)?.into_any().unbind()
        }
        Value::Object(o) => {
            let d = PyDict::new(py);
            for (k, x) in o {
                d.set_item(k, to_py(py, x)?)?;
            }
            d.into_any().unbind()
        }
    })
}

/// Cosine similarity clamped to [-1, 1].
#[pyfunction]
fn cosine_similarity(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    selfaug::cosine_similarity(&embedding(a)?, &embedding(b)?).map_err(err)
}

/// Index and similarity of the keyframe, or None below the threshold.
#[pyfunction]
#[pyo3(signature = (frames, reference, threshold = 0.5))]
fn select_keyframe(
    frames: Vec<Vec<f64>>,
    reference: Vec<f64>,
    threshold: f64,
) -> PyResult<Option<(usize, f64)>> {
    let seg = segment(frames, None, None)?;
    let cfg = SelectionConfig::new(threshold).map_err(err)?;
    match selfaug::select_keyframe(&seg, &embedding(reference)?, &cfg) {
        Ok(r) => Ok(Some((r.index, r.similarity))),
        Err(selfaug::Error::NoKeyframe { .. }) => Ok(None),
        Err(e) => Err(err(e)),
    }
}

#[pyfunction]
#[pyo3(signature = (enroll, selected, lam = 0.1))]
fn fixed_point(enroll: Vec<f64>, selected: Vec<f64>, lam: f64) -> PyResult<Vec<f64>> {
    let p = selfaug::fixed_point(&embedding(enroll)?, &embedding(selected)?, lam).map_err(err)?;
    Ok(p.into_vec())
}

/// Running reference for one session.
#[pyclass(name = "AdaptationState")]
struct PyAdaptationState {
    inner: AdaptationState,
}

#[pymethods]
impl PyAdaptationState {
    #[new]
    #[pyo3(signature = (enroll, rule = "weighted", lam = 0.1, threshold = 0.5, renormalize = false))]
    fn new(
        enroll: Vec<f64>,
        rule: &str,
        lam: f64,
        threshold: f64,
        renormalize: bool,
    ) -> PyResult<Self> {
        let rule = FusionRule::parse(rule, lam).map_err(err)?;
        let selection = SelectionConfig::new(threshold).map_err(err)?;
        let inner = AdaptationState::new(embedding(enroll)?, rule, selection)
            .map_err(err)?
            .with_renormalize(renormalize);
        Ok(PyAdaptationState { inner })
    }

    /// Process one segment; returns the selected frame index, if any.
    fn step(&mut self, frames: Vec<Vec<f64>>) -> PyResult<Option<usize>> {
        let (next, record) = self
            .inner
            .step(&segment(frames, None, None)?)
            .map_err(err)?;
        self.inner = next;
        Ok(record.selected)
    }

    /// Apply the rule with an already selected keyframe.
    fn update(&mut self, selected: Vec<f64>) -> PyResult<()> {
        self.inner = self.inner.apply(&embedding(selected)?).map_err(err)?;
        Ok(())
    }

    #[getter]
    fn current(&self) -> Vec<f64> {
        self.inner.current().as_slice().to_vec()
    }

    #[getter]
    fn n(&self) -> u32 {
        self.inner.n()
    }

    #[getter]
    fn rule(&self) -> String {
        self.inner.rule().to_string()
    }
}

/// Frame decisions ("NS", "NTSS", "TSS") and scores for one segment.
#[pyfunction]
#[pyo3(signature = (frames, activity, reference, vad_threshold = 0.5, speaker_threshold = 0.5))]
fn detect(
    frames: Vec<Vec<f64>>,
    activity: Vec<f64>,
    reference: Vec<f64>,
    vad_threshold: f64,
    speaker_threshold: f64,
) -> PyResult<(Vec<String>, Vec<f64>)> {
    let cfg = DetectorConfig {
        vad_threshold,
        speaker_threshold,
        ..DetectorConfig::default()
    };
    cfg.validate().map_err(err)?;
    let seg = segment(frames, Some(activity), None)?;
    let det = selfaug::decide_segment(&seg, &embedding(reference)?, &cfg).map_err(err)?;
    let labels = det
        .decisions
        .iter()
        .map(|l| l.as_str().to_string())
        .collect();
    Ok((labels, det.scores))
}

/// Metrics report as a dict.
#[pyfunction]
fn evaluate(
    py: Python<'_>,
    labels: Vec<String>,
    activity: Vec<f64>,
    decisions: Vec<String>,
    scores: Vec<f64>,
) -> PyResult<Py<PyAny>> {
    let parse = |v: &[String]| {
        v.iter()
            .map(|l| l.parse::<FrameLabel>())
            .collect::<selfaug::Result<Vec<_>>>()
            .map_err(err)
    };
    let truth = parse(&labels)?;
    let det = selfaug::DetectionResult {
        decisions: parse(&decisions)?,
        scores,
    };
    let report = selfaug::evaluate(&truth, &activity, &det).map_err(err)?;
    let value = serde_json::to_value(&report).map_err(|e| SelfAugError::new_err(e.to_string()))?;
    to_py(py, &value)
}

type SegmentTuple = (Vec<Vec<f64>>, Vec<f64>, Vec<String>);

/// A simulated session.
#[pyclass(name = "Session")]
struct PySession {
    inner: selfaug::SimulatedSession,
}

#[pymethods]
impl PySession {
    #[getter]
    fn num_segments(&self) -> usize {
        self.inner.segments.len()
    }

    #[getter]
    fn target_speaker(&self) -> usize {
        self.inner.target_speaker
    }

    /// `(frames, activity, labels)` for 0-based segment `k`.
    fn segment(&self, k: usize) -> PyResult<SegmentTuple> {
        let seg = self
            .inner
            .segments
            .get(k)
            .ok_or_else(|| pyo3::exceptions::PyIndexError::new_err(k))?;
        let frames = seg
            .embeddings()
            .iter()
            .map(|e| e.as_slice().to_vec())
            .collect();
        let labels = seg
            .labels()
            .unwrap_or_default()
            .iter()
            .map(|l| l.as_str().to_string())
            .collect();
        Ok((frames, seg.activity().to_vec(), labels))
    }

    fn enrollment(&self, tag: &str) -> PyResult<Vec<f64>> {
        let tag: EnrollTag = tag.parse().map_err(err)?;
        Ok(self.inner.enrollment(tag).map_err(err)?.as_slice().to_vec())
    }
}

/// Generate a session; `config` is an optional JSON object of simulation
/// settings.
#[pyfunction]
#[pyo3(signature = (seed, config = None))]
fn simulate(seed: u64, config: Option<&str>) -> PyResult<PySession> {
    let mut cfg: SimulationConfig = match config {
        Some(s) => serde_json::from_str(s).map_err(|e| SelfAugError::new_err(e.to_string()))?,
        None => SimulationConfig::default(),
    };
    cfg.seed = seed;
    let inner = selfaug::generate_session(&cfg).map_err(err)?;
    Ok(PySession { inner })
}

#[pymodule]
fn selfaug_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SelfAugError", m.py().get_type::<SelfAugError>())?;
    m.add_function(wrap_pyfunction!(cosine_similarity, m)?)?;
    m.add_function(wrap_pyfunction!(select_keyframe, m)?)?;
    m.add_function(wrap_pyfunction!(fixed_point, m)?)?;
    m.add_function(wrap_pyfunction!(detect, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_class::<PyAdaptationState>()?;
    m.add_class::<PySession>()?;
    Ok(())
}
