//! Summary quality metrics, each normalized against the full (unfiltered)
//! gallery:
//!
//! * diversity: max pairwise cosine distance inside the summary over the
//!   same quantity for the gallery;
//! * representativeness: cosine similarity of the gallery mean and the
//!   summary mean embedding;
//! * coverage: mean over the segment's classes of best summary probability
//!   over best gallery probability;
//! * reviews coverage: the same ratio over the rows of the topic × image
//!   confidence matrix.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Gallery, SegmentProfile, SummaryReport};
use crate::simcore::{confidence_matrix, cosine_raw, pairwise_distance_matrix, ConfidenceMatrix, DistanceMatrix};

/// Classes whose best gallery probability is below this are skipped.
pub const COVERAGE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub div: f64,
    pub repr: Option<f64>,
    pub cov: Option<f64>,
    pub rcov: Option<f64>,
    #[serde(default)]
    pub skipped_classes: Vec<String>,
    #[serde(default)]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MetricOptions {
    /// Average L2-normalized embeddings instead of raw ones for Repr.
    pub repr_normalized: bool,
}

fn sorted_unique(selected: &[usize], n: usize) -> Result<Vec<usize>> {
    let mut s = selected.to_vec();
    s.sort_unstable();
    s.dedup();
    if let Some(&bad) = s.iter().find(|&&j| j >= n) {
        return Err(Error::InvalidParameter(format!(
            "selected ordinal {bad} out of range for {n} images"
        )));
    }
    Ok(s)
}

/// Diversity from a precomputed gallery distance matrix, plus a note for
/// degenerate cases.
pub fn diversity_from(distances: &DistanceMatrix, selected: &[usize]) -> Result<(f64, Option<String>)> {
    let sel = sorted_unique(selected, distances.len())?;
    let gallery_max = distances.max();
    if gallery_max == 0.0 {
        return Ok((1.0, Some("gallery has no spread; diversity set to 1".into())));
    }
    if sel.len() < 2 {
        return Ok((0.0, Some("fewer than two selected images; diversity set to 0".into())));
    }
    let mut sel_max: f64 = 0.0;
    for (a, &i) in sel.iter().enumerate() {
        for &j in &sel[a + 1..] {
            sel_max = sel_max.max(distances.get(i, j));
        }
    }
    Ok((sel_max / gallery_max, None))
}

pub fn diversity(gallery: &Gallery, selected: &[usize]) -> Result<f64> {
    let d = pairwise_distance_matrix(gallery)?;
    Ok(diversity_from(&d, selected)?.0)
}

fn mean_embedding(gallery: &Gallery, ordinals: &[usize], normalized: bool) -> Vec<f64> {
    let dim = gallery.dimension().unwrap_or(0);
    let mut sum = vec![0.0; dim];
    for &j in ordinals {
        let e = &gallery.images[j].embedding;
        let scale = if normalized { 1.0 / e.norm() } else { 1.0 };
        for (s, v) in sum.iter_mut().zip(e.as_slice()) {
            *s += v * scale;
        }
    }
    let n = ordinals.len() as f64;
    sum.iter().map(|s| s / n).collect()
}

/// `None` when either mean vector is zero.
pub fn representativeness_with(gallery: &Gallery, selected: &[usize], opts: MetricOptions) -> Result<Option<f64>> {
    let sel = sorted_unique(selected, gallery.len())?;
    if sel.is_empty() {
        return Err(Error::InvalidParameter("empty selection".into()));
    }
    let all: Vec<usize> = (0..gallery.len()).collect();
    let mu_g = mean_embedding(gallery, &all, opts.repr_normalized);
    let mu_s = mean_embedding(gallery, &sel, opts.repr_normalized);
    Ok(cosine_raw(&mu_g, &mu_s))
}

pub fn representativeness(gallery: &Gallery, selected: &[usize]) -> Result<Option<f64>> {
    representativeness_with(gallery, selected, MetricOptions::default())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageResult {
    /// `None` when every class was skipped.
    pub value: Option<f64>,
    pub skipped_classes: Vec<String>,
}

pub fn coverage(gallery: &Gallery, selected: &[usize], profile: &SegmentProfile) -> Result<CoverageResult> {
    let sel = sorted_unique(selected, gallery.len())?;
    if profile.relevant_classes.is_empty() {
        return Err(Error::InvalidParameter("segment has no relevant classes".into()));
    }
    let best = |ordinals: &mut dyn Iterator<Item = usize>, class: &str| {
        ordinals
            .map(|j| gallery.images[j].class_prob(class))
            .fold(0.0, f64::max)
    };
    let mut sum = 0.0;
    let mut used = 0usize;
    let mut skipped_classes = Vec::new();
    for class in &profile.relevant_classes {
        let p_g = best(&mut (0..gallery.len()), class);
        if p_g < COVERAGE_EPS {
            skipped_classes.push(class.clone());
            continue;
        }
        let p_s = best(&mut sel.iter().copied(), class);
        sum += p_s / p_g;
        used += 1;
    }
    let value = (used > 0).then(|| sum / used as f64);
    Ok(CoverageResult { value, skipped_classes })
}

/// Columns of `s` index the full gallery.
pub fn reviews_coverage(s: &ConfidenceMatrix, selected: &[usize]) -> Result<f64> {
    if s.rows() == 0 {
        return Err(Error::InvalidParameter("confidence matrix has no rows".into()));
    }
    let sel = sorted_unique(selected, s.cols())?;
    if sel.is_empty() {
        return Err(Error::InvalidParameter("empty selection".into()));
    }
    let mut sum = 0.0;
    for i in 0..s.rows() {
        let row = s.row(i);
        let all_max = row.iter().copied().fold(0.0, f64::max);
        let sel_max = sel.iter().map(|&j| row[j]).fold(0.0, f64::max);
        sum += sel_max / all_max;
    }
    Ok(sum / s.rows() as f64)
}

pub fn evaluate(gallery: &Gallery, profile: &SegmentProfile, report: &SummaryReport, gamma: f64) -> Result<MetricsReport> {
    evaluate_with(gallery, profile, report, gamma, MetricOptions::default())
}

pub fn evaluate_with(
    gallery: &Gallery,
    profile: &SegmentProfile,
    report: &SummaryReport,
    gamma: f64,
    opts: MetricOptions,
) -> Result<MetricsReport> {
    let mut selected = Vec::with_capacity(report.selected.len());
    for s in &report.selected {
        let j = gallery.image_index(&s.image_id)?;
        selected.push(j);
    }
    evaluate_ordinals(gallery, profile, &selected, gamma, opts)
}

pub fn evaluate_ordinals(
    gallery: &Gallery,
    profile: &SegmentProfile,
    selected: &[usize],
    gamma: f64,
    opts: MetricOptions,
) -> Result<MetricsReport> {
    let mut notes = Vec::new();
    if selected.is_empty() {
        return Err(Error::InvalidParameter("empty selection".into()));
    }

    let distances = pairwise_distance_matrix(gallery)?;
    let (div, note) = diversity_from(&distances, selected)?;
    notes.extend(note);

    let repr = representativeness_with(gallery, selected, opts)?;
    if repr.is_none() {
        notes.push("mean embedding is zero; representativeness undefined".into());
    }

    let (cov, skipped_classes) = if profile.relevant_classes.is_empty() {
        notes.push("segment has no relevant classes; coverage omitted".into());
        (None, Vec::new())
    } else {
        let c = coverage(gallery, selected, profile)?;
        if c.value.is_none() {
            notes.push("no relevant class present in the gallery; coverage undefined".into());
        }
        (c.value, c.skipped_classes)
    };

    let rcov = if profile.topics.is_empty() {
        notes.push("segment has no topics; reviews coverage omitted".into());
        None
    } else {
        let s = confidence_matrix(profile, gallery, gamma)?;
        Some(reviews_coverage(&s, selected)?)
    };

    Ok(MetricsReport {
        div,
        repr,
        cov,
        rcov,
        skipped_classes,
        notes,
    })
}
