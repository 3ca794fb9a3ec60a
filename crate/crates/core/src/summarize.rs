//! The four summarization methods.
//!
//! * `Default`: k-medoids over the whole gallery, medoids are the summary.
//! * `ClustWP`: same, after dropping images irrelevant to the segment.
//! * `TopicBased`: repeated global argmax over the topic × image
//!   confidence matrix, removing the picked image's column each time.
//! * `CrossSummarizer`: cluster the filtered gallery, then walk clusters in
//!   id order and pick the best (active topic, member image) pair in each,
//!   retiring the topic once used.

use serde::{Deserialize, Serialize};

use crate::clustering::{kmedoids_with_restarts, ClusterModel, Init, DEFAULT_MAX_ITER, DEFAULT_RESTARTS};
use crate::error::{Error, Result};
use crate::model::{ensure_valid, Gallery, Method, SegmentProfile, Selection, SummaryParams, SummaryReport};
use crate::simcore::{ConfidenceMatrix, DistanceMatrix, DEFAULT_GAMMA};

pub const DEFAULT_K: usize = 9;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_CLASS_THRESHOLD: f64 = 0.5;

pub const WARN_NO_TOPICS: &str = "segment has no topics; fell back to clustwp";
pub const WARN_SHORT: &str = "fewer relevant images than k; summary is short";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummarizeOptions {
    pub k: usize,
    pub seed: u64,
    pub gamma: f64,
    pub class_threshold: f64,
    pub max_iter: usize,
    pub init: Init,
    pub restarts: usize,
}

impl Default for SummarizeOptions {
    fn default() -> Self {
        SummarizeOptions {
            k: DEFAULT_K,
            seed: DEFAULT_SEED,
            gamma: DEFAULT_GAMMA,
            class_threshold: DEFAULT_CLASS_THRESHOLD,
            max_iter: DEFAULT_MAX_ITER,
            init: Init::Heuristic,
            restarts: DEFAULT_RESTARTS,
        }
    }
}

impl SummarizeOptions {
    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_class_threshold(mut self, t: f64) -> Self {
        self.class_threshold = t;
        self
    }

    fn check(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidK { k: 0, n: 0 });
        }
        if !(0.0..=1.0).contains(&self.class_threshold) {
            return Err(Error::InvalidParameter(format!(
                "class threshold {} outside [0, 1]",
                self.class_threshold
            )));
        }
        if !self.gamma.is_finite() {
            return Err(Error::InvalidParameter(format!("gamma = {}", self.gamma)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilteredGallery {
    /// Source ordinals, ascending.
    pub kept: Vec<usize>,
    pub dropped: Vec<usize>,
}

/// Keeps an image iff some relevant class is explicitly present in its
/// class probabilities with a value `>= class_threshold`. Absent classes
/// never match, even at threshold 0.
pub fn filter_by_segment(gallery: &Gallery, profile: &SegmentProfile, class_threshold: f64) -> FilteredGallery {
    let (kept, dropped) = (0..gallery.len()).partition(|&j| {
        let probs = &gallery.images[j].class_probs;
        profile
            .relevant_classes
            .iter()
            .any(|c| probs.get(c).is_some_and(|&p| p >= class_threshold))
    });
    FilteredGallery { kept, dropped }
}

fn params(gallery: &Gallery, profile: Option<&SegmentProfile>, opts: &SummarizeOptions, method: Method) -> SummaryParams {
    let personalized = method != Method::Default;
    let scored = matches!(method, Method::TopicBased | Method::CrossSummarizer);
    SummaryParams {
        gallery_id: gallery.gallery_id.clone(),
        segment_id: profile.map(|p| p.segment_id.clone()),
        k: opts.k,
        seed: opts.seed,
        gamma: scored.then_some(opts.gamma),
        class_threshold: personalized.then_some(opts.class_threshold),
    }
}

fn kept_after_filter(gallery: &Gallery, profile: &SegmentProfile, opts: &SummarizeOptions) -> Result<Vec<usize>> {
    let filtered = filter_by_segment(gallery, profile, opts.class_threshold);
    if filtered.kept.is_empty() {
        return Err(Error::NoRelevantImages(gallery.gallery_id.clone()));
    }
    Ok(filtered.kept)
}

/// Clusters the images at `ordinals` (ascending source ordinals) with
/// `k.min(len)` clusters. The returned model is indexed by position in
/// `ordinals`.
fn cluster_subset(gallery: &Gallery, ordinals: &[usize], opts: &SummarizeOptions) -> Result<ClusterModel> {
    let embeddings: Vec<_> = ordinals.iter().map(|&j| &gallery.images[j].embedding).collect();
    let distances = DistanceMatrix::from_embeddings(&embeddings)?;
    let k = opts.k.min(ordinals.len());
    kmedoids_with_restarts(&distances, k, opts.seed, opts.max_iter, opts.init, opts.restarts)
}

fn medoid_report(
    gallery: &Gallery,
    ordinals: &[usize],
    model: &ClusterModel,
    method: Method,
    params: SummaryParams,
) -> SummaryReport {
    let selected = model
        .medoids
        .iter()
        .enumerate()
        .map(|(c, &m)| {
            let ordinal = ordinals[m];
            Selection {
                step: c,
                image_id: gallery.images[ordinal].image_id.clone(),
                ordinal,
                cluster_id: Some(c),
                topic_id: None,
                score: None,
                replenished: false,
            }
        })
        .collect();
    SummaryReport {
        method,
        params,
        selected,
        short_summary: false,
        warnings: Vec::new(),
        metrics: None,
    }
}

fn mark_short(report: &mut SummaryReport, available: usize) {
    if available < report.params.k {
        report.short_summary = true;
        report.warnings.push(WARN_SHORT.to_string());
    }
}

pub fn summarize_default(gallery: &Gallery, opts: &SummarizeOptions) -> Result<SummaryReport> {
    opts.check()?;
    if opts.k > gallery.len() {
        return Err(Error::InvalidK {
            k: opts.k,
            n: gallery.len(),
        });
    }
    let all: Vec<usize> = (0..gallery.len()).collect();
    let model = cluster_subset(gallery, &all, opts)?;
    Ok(medoid_report(
        gallery,
        &all,
        &model,
        Method::Default,
        params(gallery, None, opts, Method::Default),
    ))
}

pub fn summarize_clust_wp(gallery: &Gallery, profile: &SegmentProfile, opts: &SummarizeOptions) -> Result<SummaryReport> {
    opts.check()?;
    ensure_valid(gallery, profile)?;
    let kept = kept_after_filter(gallery, profile, opts)?;
    let model = cluster_subset(gallery, &kept, opts)?;
    let mut report = medoid_report(
        gallery,
        &kept,
        &model,
        Method::ClustWP,
        params(gallery, Some(profile), opts, Method::ClustWP),
    );
    mark_short(&mut report, kept.len());
    Ok(report)
}

pub fn summarize_topic_based(
    gallery: &Gallery,
    profile: &SegmentProfile,
    opts: &SummarizeOptions,
) -> Result<SummaryReport> {
    opts.check()?;
    ensure_valid(gallery, profile)?;
    if profile.topics.is_empty() {
        return Err(Error::NoTopics(profile.segment_id.clone()));
    }
    let kept = kept_after_filter(gallery, profile, opts)?;
    let s = subset_confidence(gallery, profile, &kept, opts.gamma)?;

    // columns of `s` are positions in `kept`
    let mut remaining: Vec<usize> = (0..kept.len()).collect();
    let mut selected = Vec::new();
    while selected.len() < opts.k {
        let Some((i, col)) = s.argmax_over(0..s.rows(), &remaining) else {
            break;
        };
        remaining.retain(|&c| c != col);
        let ordinal = kept[col];
        selected.push(Selection {
            step: selected.len(),
            image_id: gallery.images[ordinal].image_id.clone(),
            ordinal,
            cluster_id: None,
            topic_id: Some(profile.topics[i].topic_id.clone()),
            score: Some(s.get(i, col)),
            replenished: false,
        });
    }

    let mut report = SummaryReport {
        method: Method::TopicBased,
        params: params(gallery, Some(profile), opts, Method::TopicBased),
        selected,
        short_summary: false,
        warnings: Vec::new(),
        metrics: None,
    };
    mark_short(&mut report, kept.len());
    Ok(report)
}

pub fn summarize_cross(gallery: &Gallery, profile: &SegmentProfile, opts: &SummarizeOptions) -> Result<SummaryReport> {
    opts.check()?;
    ensure_valid(gallery, profile)?;
    if profile.topics.is_empty() {
        let mut report = summarize_clust_wp(gallery, profile, opts)?;
        report.method = Method::CrossSummarizer;
        report.params = params(gallery, Some(profile), opts, Method::CrossSummarizer);
        report.warnings.insert(0, WARN_NO_TOPICS.to_string());
        return Ok(report);
    }

    let kept = kept_after_filter(gallery, profile, opts)?;
    let model = cluster_subset(gallery, &kept, opts)?;
    let s = subset_confidence(gallery, profile, &kept, opts.gamma)?;

    let n_topics = profile.topics.len();
    let mut active = vec![true; n_topics];
    let mut n_active = n_topics;
    let mut selected = Vec::with_capacity(model.k);

    for (cluster, members) in model.clusters().iter().enumerate() {
        let mut replenished = false;
        if n_active == 0 {
            active.fill(true);
            n_active = n_topics;
            replenished = true;
        }
        let rows = (0..n_topics).filter(|&i| active[i]);
        let (i, col) = s
            .argmax_over(rows, members)
            .expect("clusters are non-empty and at least one topic is active");
        active[i] = false;
        n_active -= 1;

        let ordinal = kept[col];
        selected.push(Selection {
            step: cluster,
            image_id: gallery.images[ordinal].image_id.clone(),
            ordinal,
            cluster_id: Some(cluster),
            topic_id: Some(profile.topics[i].topic_id.clone()),
            score: Some(s.get(i, col)),
            replenished,
        });
    }

    let mut report = SummaryReport {
        method: Method::CrossSummarizer,
        params: params(gallery, Some(profile), opts, Method::CrossSummarizer),
        selected,
        short_summary: false,
        warnings: Vec::new(),
        metrics: None,
    };
    mark_short(&mut report, kept.len());
    Ok(report)
}

fn subset_confidence(
    gallery: &Gallery,
    profile: &SegmentProfile,
    ordinals: &[usize],
    gamma: f64,
) -> Result<ConfidenceMatrix> {
    let topics: Vec<_> = profile.topics.iter().map(|t| &t.embedding).collect();
    let images: Vec<_> = ordinals.iter().map(|&j| &gallery.images[j].embedding).collect();
    ConfidenceMatrix::from_embeddings(&topics, &images, gamma)
}

/// Dispatches on `method`. `Default` ignores the profile.
pub fn summarize(
    method: Method,
    gallery: &Gallery,
    profile: &SegmentProfile,
    opts: &SummarizeOptions,
) -> Result<SummaryReport> {
    match method {
        Method::Default => summarize_default(gallery, opts),
        Method::ClustWP => summarize_clust_wp(gallery, profile, opts),
        Method::TopicBased => summarize_topic_based(gallery, profile, opts),
        Method::CrossSummarizer => summarize_cross(gallery, profile, opts),
    }
}
