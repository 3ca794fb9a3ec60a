//! Python bindings for `xsum_core`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use xsum_core::clustering::{self, DEFAULT_MAX_ITER};
use xsum_core::metrics::{evaluate_ordinals, MetricOptions, MetricsReport};
use xsum_core::simcore::{self, DistanceMatrix, DEFAULT_GAMMA};
use xsum_core::summarize::{summarize as run_method, SummarizeOptions, DEFAULT_CLASS_THRESHOLD, DEFAULT_K, DEFAULT_SEED};
use xsum_core::synthgen::{self, SynthSpec};
use xsum_core::topics::{self, ReviewRecord, DEFAULT_TOPIC_THRESHOLD};
use xsum_core::{io, EmbeddingVector, ImageRecord, Method, SummaryReport, TopicRecord};

create_exception!(xsum, XsumError, PyValueError);

fn err(e: xsum_core::Error) -> PyErr {
    XsumError::new_err(e.to_string())
}

fn vector(values: Vec<f64>) -> PyResult<EmbeddingVector> {
    EmbeddingVector::new(values).map_err(err)
}

#[pyclass(module = "xsum", skip_from_py_object)]
#[derive(Clone)]
pub struct Gallery {
    inner: xsum_core::Gallery,
}

#[pymethods]
impl Gallery {
    #[new]
    #[pyo3(signature = (gallery_id, image_ids, embeddings, class_probs=None))]
    fn new(
        gallery_id: String,
        image_ids: Vec<String>,
        embeddings: Vec<Vec<f64>>,
        class_probs: Option<Vec<BTreeMap<String, f64>>>,
    ) -> PyResult<Self> {
        if image_ids.len() != embeddings.len() {
            return Err(PyValueError::new_err(format!(
                "{} image ids for {} embeddings",
                image_ids.len(),
                embeddings.len()
            )));
        }
        let mut probs = class_probs.unwrap_or_else(|| vec![BTreeMap::new(); image_ids.len()]);
        if probs.len() != image_ids.len() {
            return Err(PyValueError::new_err("class_probs must have one entry per image"));
        }
        let mut images = Vec::with_capacity(image_ids.len());
        for ((id, e), p) in image_ids.into_iter().zip(embeddings).zip(probs.drain(..)) {
            let mut record = ImageRecord::new(id, vector(e)?);
            record.class_probs = p;
            images.push(record);
        }
        Ok(Gallery {
            inner: xsum_core::Gallery::new(gallery_id, images),
        })
    }

    #[getter]
    fn gallery_id(&self) -> String {
        self.inner.gallery_id.clone()
    }

    #[getter]
    fn image_ids(&self) -> Vec<String> {
        self.inner.images.iter().map(|i| i.image_id.clone()).collect()
    }

    #[getter]
    fn embeddings(&self) -> Vec<Vec<f64>> {
        self.inner.images.iter().map(|i| i.embedding.as_slice().to_vec()).collect()
    }

    #[getter]
    fn class_probs(&self) -> Vec<BTreeMap<String, f64>> {
        self.inner.images.iter().map(|i| i.class_probs.clone()).collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Gallery({:?}, {} images)", self.inner.gallery_id, self.inner.len())
    }
}

#[pyclass(module = "xsum", skip_from_py_object)]
#[derive(Clone)]
pub struct SegmentProfile {
    inner: xsum_core::SegmentProfile,
}

#[pymethods]
impl SegmentProfile {
    /// `topics` is a list of `(topic_id, embedding)` pairs.
    #[new]
    #[pyo3(signature = (segment_id, relevant_classes, topics=Vec::new()))]
    fn new(segment_id: String, relevant_classes: Vec<String>, topics: Vec<(String, Vec<f64>)>) -> PyResult<Self> {
        let topics = topics
            .into_iter()
            .map(|(id, e)| Ok(TopicRecord::new(id, vector(e)?)))
            .collect::<PyResult<Vec<_>>>()?;
        Ok(SegmentProfile {
            inner: xsum_core::SegmentProfile {
                segment_id,
                relevant_classes: relevant_classes.into_iter().collect(),
                topics,
            },
        })
    }

    #[getter]
    fn segment_id(&self) -> String {
        self.inner.segment_id.clone()
    }

    #[getter]
    fn relevant_classes(&self) -> Vec<String> {
        self.inner.relevant_classes.iter().cloned().collect()
    }

    #[getter]
    fn topic_ids(&self) -> Vec<String> {
        self.inner.topics.iter().map(|t| t.topic_id.clone()).collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "SegmentProfile({:?}, {} classes, {} topics)",
            self.inner.segment_id,
            self.inner.relevant_classes.len(),
            self.inner.topics.len()
        )
    }
}

#[pyclass(module = "xsum", get_all, skip_from_py_object)]
#[derive(Clone)]
pub struct Metrics {
    div: f64,
    repr: Option<f64>,
    cov: Option<f64>,
    rcov: Option<f64>,
    skipped_classes: Vec<String>,
    notes: Vec<String>,
}

impl From<MetricsReport> for Metrics {
    fn from(m: MetricsReport) -> Self {
        Metrics {
            div: m.div,
            repr: m.repr,
            cov: m.cov,
            rcov: m.rcov,
            skipped_classes: m.skipped_classes,
            notes: m.notes,
        }
    }
}

#[pymethods]
impl Metrics {
    fn __repr__(&self) -> String {
        format!(
            "Metrics(div={}, repr={:?}, cov={:?}, rcov={:?})",
            self.div, self.repr, self.cov, self.rcov
        )
    }
}

#[pyclass(module = "xsum", skip_from_py_object)]
#[derive(Clone)]
pub struct Summary {
    inner: SummaryReport,
}

#[pymethods]
impl Summary {
    #[getter]
    fn method(&self) -> &'static str {
        self.inner.method.name()
    }

    #[getter]
    fn image_ids(&self) -> Vec<String> {
        self.inner.selected.iter().map(|s| s.image_id.clone()).collect()
    }

    #[getter]
    fn ordinals(&self) -> Vec<usize> {
        self.inner.ordinals()
    }

    #[getter]
    fn cluster_ids(&self) -> Vec<Option<usize>> {
        self.inner.selected.iter().map(|s| s.cluster_id).collect()
    }

    #[getter]
    fn topic_ids(&self) -> Vec<Option<String>> {
        self.inner.selected.iter().map(|s| s.topic_id.clone()).collect()
    }

    #[getter]
    fn scores(&self) -> Vec<Option<f64>> {
        self.inner.selected.iter().map(|s| s.score).collect()
    }

    #[getter]
    fn short_summary(&self) -> bool {
        self.inner.short_summary
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.inner.warnings.clone()
    }

    #[getter]
    fn metrics(&self) -> Option<Metrics> {
        self.inner.metrics.clone().map(Metrics::from)
    }

    fn to_json(&self) -> String {
        io::summary_to_string(&self.inner)
    }

    fn __len__(&self) -> usize {
        self.inner.selected.len()
    }

    fn __repr__(&self) -> String {
        format!("Summary({}, {:?})", self.inner.method, self.image_ids())
    }
}

#[pyclass(module = "xsum", get_all, skip_from_py_object)]
#[derive(Clone)]
pub struct ClusterModel {
    k: usize,
    assignment: Vec<usize>,
    medoids: Vec<usize>,
    cost: f64,
    iterations_run: usize,
}

#[pyclass(module = "xsum")]
pub struct Workspace {
    inner: io::Workspace,
}

#[pymethods]
impl Workspace {
    #[getter]
    fn gallery_ids(&self) -> Vec<String> {
        self.inner.galleries.iter().map(|g| g.gallery.gallery_id.clone()).collect()
    }

    #[getter]
    fn segment_ids(&self) -> Vec<String> {
        self.inner.profiles.iter().map(|p| p.segment_id.clone()).collect()
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.inner.warnings.clone()
    }

    fn gallery(&self, gallery_id: &str) -> PyResult<Gallery> {
        self.inner
            .galleries
            .iter()
            .find(|g| g.gallery.gallery_id == gallery_id)
            .map(|g| Gallery {
                inner: g.gallery.clone(),
            })
            .ok_or_else(|| XsumError::new_err(format!("unknown gallery {gallery_id:?}")))
    }

    fn split(&self, gallery_id: &str) -> Option<String> {
        self.inner.split_of(gallery_id).map(str::to_string)
    }

    fn profile(&self, segment_id: &str) -> PyResult<SegmentProfile> {
        self.inner
            .profile(segment_id)
            .map(|p| SegmentProfile { inner: p.clone() })
            .ok_or_else(|| XsumError::new_err(format!("unknown segment {segment_id:?}")))
    }
}

fn parse_method(name: &str) -> PyResult<Method> {
    name.parse::<Method>().map_err(|_| {
        PyValueError::new_err(format!("unknown method {name:?}; expected default, clustwp, topic or cross"))
    })
}

/// Runs one summarization method; the returned summary carries its metrics.
#[pyfunction]
#[pyo3(signature = (method, gallery, profile, k=DEFAULT_K, seed=DEFAULT_SEED, gamma=DEFAULT_GAMMA, class_threshold=DEFAULT_CLASS_THRESHOLD))]
#[allow(clippy::too_many_arguments)]
fn summarize(
    py: Python<'_>,
    method: &str,
    gallery: &Gallery,
    profile: &SegmentProfile,
    k: usize,
    seed: u64,
    gamma: f64,
    class_threshold: f64,
) -> PyResult<Summary> {
    let method = parse_method(method)?;
    let opts = SummarizeOptions::default()
        .with_k(k)
        .with_seed(seed)
        .with_gamma(gamma)
        .with_class_threshold(class_threshold);
    let (g, p) = (&gallery.inner, &profile.inner);
    let report = py.detach(|| -> xsum_core::Result<SummaryReport> {
        let mut report = run_method(method, g, p, &opts)?;
        let sel = report.ordinals();
        report.metrics = Some(evaluate_ordinals(g, p, &sel, gamma, MetricOptions::default())?);
        Ok(report)
    });
    Ok(Summary {
        inner: report.map_err(err)?,
    })
}

#[pyfunction]
#[pyo3(signature = (gallery, profile, selected, gamma=DEFAULT_GAMMA, repr_normalized=false))]
fn evaluate(
    gallery: &Gallery,
    profile: &SegmentProfile,
    selected: Vec<usize>,
    gamma: f64,
    repr_normalized: bool,
) -> PyResult<Metrics> {
    evaluate_ordinals(
        &gallery.inner,
        &profile.inner,
        &selected,
        gamma,
        MetricOptions { repr_normalized },
    )
    .map(Metrics::from)
    .map_err(err)
}

/// K-medoids over a square distance matrix given as a list of rows.
#[pyfunction]
#[pyo3(signature = (distances, k, seed=DEFAULT_SEED, max_iter=DEFAULT_MAX_ITER))]
fn kmedoids(distances: Vec<Vec<f64>>, k: usize, seed: u64, max_iter: usize) -> PyResult<ClusterModel> {
    let n = distances.len();
    if distances.iter().any(|row| row.len() != n) {
        return Err(PyValueError::new_err("distance matrix must be square"));
    }
    let d = DistanceMatrix::from_square(n, distances.concat()).map_err(err)?;
    let m = clustering::kmedoids(&d, k, seed, max_iter).map_err(err)?;
    Ok(ClusterModel {
        k: m.k,
        assignment: m.assignment,
        medoids: m.medoids,
        cost: m.cost,
        iterations_run: m.iterations_run,
    })
}

#[pyfunction]
fn cosine_similarity(u: Vec<f64>, v: Vec<f64>) -> PyResult<f64> {
    simcore::cosine_similarity(&vector(u)?, &vector(v)?).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (logit, gamma=DEFAULT_GAMMA))]
fn tempered_sigmoid(logit: f64, gamma: f64) -> f64 {
    simcore::tempered_sigmoid(logit, gamma)
}

/// Topic ids whose probability is strictly above `threshold`, sorted.
#[pyfunction]
#[pyo3(signature = (topic_probs, threshold=DEFAULT_TOPIC_THRESHOLD))]
fn detect_topics(topic_probs: BTreeMap<String, f64>, threshold: f64) -> Vec<String> {
    let review = ReviewRecord {
        review_id: String::new(),
        segment_id: String::new(),
        topic_probs,
    };
    topics::detect_topics(&review, threshold).into_iter().collect()
}

#[pyfunction]
#[pyo3(signature = (
    n_images=48, n_clusters=8, dimension=16, noise=0.05, aligned_topics=3,
    distractor_topics=2, classes_per_cluster=1, relevant_fraction=0.5, seed=0
))]
#[allow(clippy::too_many_arguments)]
fn generate_synthetic(
    n_images: usize,
    n_clusters: usize,
    dimension: usize,
    noise: f64,
    aligned_topics: usize,
    distractor_topics: usize,
    classes_per_cluster: usize,
    relevant_fraction: f64,
    seed: u64,
) -> PyResult<(Gallery, SegmentProfile)> {
    let ws = synthgen::generate(&SynthSpec {
        n_images,
        n_clusters,
        dimension,
        intra_cluster_noise: noise,
        n_topics_aligned: aligned_topics,
        n_topics_distractor: distractor_topics,
        classes_per_cluster,
        relevant_fraction,
        seed,
    })
    .map_err(err)?;
    Ok((Gallery { inner: ws.gallery }, SegmentProfile { inner: ws.profile }))
}

#[pyfunction]
fn load_workspace(manifest: PathBuf) -> PyResult<Workspace> {
    io::load_workspace(&manifest, false)
        .map(|inner| Workspace { inner })
        .map_err(err)
}

#[pymodule]
fn xsum(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("XsumError", m.py().get_type::<XsumError>())?;
    m.add("METHODS", Method::ALL.iter().map(|m| m.name()).collect::<Vec<_>>())?;
    m.add("DEFAULT_GAMMA", DEFAULT_GAMMA)?;
    m.add_class::<Gallery>()?;
    m.add_class::<SegmentProfile>()?;
    m.add_class::<Summary>()?;
    m.add_class::<Metrics>()?;
    m.add_class::<ClusterModel>()?;
    m.add_class::<Workspace>()?;
    m.add_function(wrap_pyfunction!(summarize, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(kmedoids, m)?)?;
    m.add_function(wrap_pyfunction!(cosine_similarity, m)?)?;
    m.add_function(wrap_pyfunction!(tempered_sigmoid, m)?)?;
    m.add_function(wrap_pyfunction!(detect_topics, m)?)?;
    m.add_function(wrap_pyfunction!(generate_synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(load_workspace, m)?)?;
    Ok(())
}
