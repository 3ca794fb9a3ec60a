//! Shared domain types and workspace validation.
//!
//! Indexing is 0-based throughout: the position of an image in
//! [`Gallery::images`] is its column in every matrix built for that gallery,
//! and the position of a topic in [`SegmentProfile::topics`] is its row.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::MetricsReport;

/// A finite, non-zero feature vector. Stored exactly as ingested.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyEmbedding);
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        if values.iter().all(|&v| v == 0.0) {
            return Err(Error::ZeroNorm);
        }
        Ok(EmbeddingVector(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl<'de> Deserialize<'de> for EmbeddingVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let values = Vec::<f64>::deserialize(d)?;
        EmbeddingVector::new(values).map_err(serde::de::Error::custom)
    }
}

impl TryFrom<Vec<f64>> for EmbeddingVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        EmbeddingVector::new(values)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image_id: String,
    pub embedding: EmbeddingVector,
    /// Sparse: a class missing from the map has probability 0.
    #[serde(default)]
    pub class_probs: BTreeMap<String, f64>,
}

impl ImageRecord {
    pub fn new(image_id: impl Into<String>, embedding: EmbeddingVector) -> Self {
        ImageRecord {
            image_id: image_id.into(),
            embedding,
            class_probs: BTreeMap::new(),
        }
    }

    pub fn with_class(mut self, class_id: impl Into<String>, prob: f64) -> Self {
        self.class_probs.insert(class_id.into(), prob);
        self
    }

    pub fn class_prob(&self, class_id: &str) -> f64 {
        self.class_probs.get(class_id).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gallery {
    pub gallery_id: String,
    pub images: Vec<ImageRecord>,
}

impl Gallery {
    pub fn new(gallery_id: impl Into<String>, images: Vec<ImageRecord>) -> Self {
        Gallery {
            gallery_id: gallery_id.into(),
            images,
        }
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Column index of `image_id`.
    pub fn image_index(&self, image_id: &str) -> Result<usize> {
        self.images
            .iter()
            .position(|img| img.image_id == image_id)
            .ok_or_else(|| Error::UnknownImage(image_id.to_string()))
    }

    pub fn embeddings(&self) -> Vec<&EmbeddingVector> {
        self.images.iter().map(|img| &img.embedding).collect()
    }

    pub fn dimension(&self) -> Option<usize> {
        self.images.first().map(|img| img.embedding.dim())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicRecord {
    pub topic_id: String,
    pub embedding: EmbeddingVector,
}

impl TopicRecord {
    pub fn new(topic_id: impl Into<String>, embedding: EmbeddingVector) -> Self {
        TopicRecord {
            topic_id: topic_id.into(),
            embedding,
        }
    }
}

/// The ten segment labels used for traveller types and trip types.
pub const KNOWN_SEGMENTS: [&str; 10] = [
    "Solo",
    "Couple",
    "Group",
    "Family",
    "Business",
    "Beach",
    "Ski",
    "City",
    "Nature Active",
    "Nature Peaceful",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentProfile {
    pub segment_id: String,
    pub relevant_classes: BTreeSet<String>,
    pub topics: Vec<TopicRecord>,
}

impl SegmentProfile {
    pub fn new(
        segment_id: impl Into<String>,
        relevant_classes: impl IntoIterator<Item = impl Into<String>>,
        topics: Vec<TopicRecord>,
    ) -> Self {
        SegmentProfile {
            segment_id: segment_id.into(),
            relevant_classes: relevant_classes.into_iter().map(Into::into).collect(),
            topics,
        }
    }

    pub fn is_known_segment(&self) -> bool {
        KNOWN_SEGMENTS.contains(&self.segment_id.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Default,
    #[serde(rename = "clustwp")]
    ClustWP,
    #[serde(rename = "topic")]
    TopicBased,
    #[serde(rename = "cross")]
    CrossSummarizer,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Default,
        Method::ClustWP,
        Method::TopicBased,
        Method::CrossSummarizer,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Default => "default",
            Method::ClustWP => "clustwp",
            Method::TopicBased => "topic",
            Method::CrossSummarizer => "cross",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "default" => Ok(Method::Default),
            "clustwp" => Ok(Method::ClustWP),
            "topic" => Ok(Method::TopicBased),
            "cross" => Ok(Method::CrossSummarizer),
            other => Err(Error::InvalidParameter(format!("unknown method {other:?}"))),
        }
    }
}

/// One picked image together with the reason it was picked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub step: usize,
    pub image_id: String,
    pub ordinal: usize,
    pub cluster_id: Option<usize>,
    pub topic_id: Option<String>,
    pub score: Option<f64>,
    /// The active topic set was refilled right before this pick.
    #[serde(default)]
    pub replenished: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryParams {
    pub gallery_id: String,
    pub segment_id: Option<String>,
    pub k: usize,
    pub seed: u64,
    pub gamma: Option<f64>,
    pub class_threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub method: Method,
    pub params: SummaryParams,
    pub selected: Vec<Selection>,
    /// Fewer than `k` images were available after filtering.
    #[serde(default)]
    pub short_summary: bool,
    #[serde(default)]
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsReport>,
}

impl SummaryReport {
    pub fn ordinals(&self) -> Vec<usize> {
        self.selected.iter().map(|s| s.ordinal).collect()
    }

    pub fn image_ids(&self) -> Vec<&str> {
        self.selected.iter().map(|s| s.image_id.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    EmptyGallery,
    DimensionMismatch { item: String, expected: usize, actual: usize },
    DuplicateImageId { image_id: String },
    DuplicateTopicId { topic_id: String },
    ProbabilityOutOfRange { image_id: String, class_id: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyGallery => write!(f, "empty gallery"),
            Violation::DimensionMismatch {
                item,
                expected,
                actual,
            } => write!(f, "dimension mismatch for {item}: expected {expected}, got {actual}"),
            Violation::DuplicateImageId { image_id } => write!(f, "duplicate id {image_id:?}"),
            Violation::DuplicateTopicId { topic_id } => {
                write!(f, "duplicate topic id {topic_id:?}")
            }
            Violation::ProbabilityOutOfRange { image_id, class_id } => write!(
                f,
                "probability out of range for image {image_id:?}, class {class_id:?}"
            ),
        }
    }
}

/// Checks the cross-record invariants that the constructors cannot enforce
/// on their own. An empty result means the workspace is valid.
pub fn validate_workspace(gallery: &Gallery, profile: &SegmentProfile) -> Vec<Violation> {
    let mut out = Vec::new();
    let Some(dim) = gallery.dimension() else {
        out.push(Violation::EmptyGallery);
        return out;
    };

    let mut seen = HashSet::new();
    for img in &gallery.images {
        if img.embedding.dim() != dim {
            out.push(Violation::DimensionMismatch {
                item: format!("image {}", img.image_id),
                expected: dim,
                actual: img.embedding.dim(),
            });
        }
        if !seen.insert(img.image_id.as_str()) {
            out.push(Violation::DuplicateImageId {
                image_id: img.image_id.clone(),
            });
        }
        for (class_id, &p) in &img.class_probs {
            if !(0.0..=1.0).contains(&p) {
                out.push(Violation::ProbabilityOutOfRange {
                    image_id: img.image_id.clone(),
                    class_id: class_id.clone(),
                });
            }
        }
    }

    let mut seen = HashSet::new();
    for topic in &profile.topics {
        if topic.embedding.dim() != dim {
            out.push(Violation::DimensionMismatch {
                item: format!("topic {}", topic.topic_id),
                expected: dim,
                actual: topic.embedding.dim(),
            });
        }
        if !seen.insert(topic.topic_id.as_str()) {
            out.push(Violation::DuplicateTopicId {
                topic_id: topic.topic_id.clone(),
            });
        }
    }
    out
}

/// Like [`validate_workspace`] but folds violations into an error.
pub fn ensure_valid(gallery: &Gallery, profile: &SegmentProfile) -> Result<()> {
    let violations = validate_workspace(gallery, profile);
    if violations.is_empty() {
        Ok(())
    } else {
        let msg = violations
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join("; ");
        Err(Error::InvalidWorkspace(msg))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn emb(v: &[f64]) -> EmbeddingVector {
        EmbeddingVector::new(v.to_vec()).unwrap()
    }

    fn gallery(dim: usize, n: usize) -> Gallery {
        let images = (0..n)
            .map(|i| {
                let mut v = vec![0.0; dim];
                v[i % dim] = 1.0 + i as f64;
                ImageRecord::new(format!("img{i}"), emb(&v)).with_class("beach", 0.5)
            })
            .collect();
        Gallery::new("g", images)
    }

    fn profile(dim: usize) -> SegmentProfile {
        let topics = (0..2)
            .map(|i| {
                let mut v = vec![0.5; dim];
                v[0] = i as f64 + 1.0;
                TopicRecord::new(format!("t{i}"), emb(&v))
            })
            .collect();
        SegmentProfile::new("Beach", ["beach"], topics)
    }

    #[test]
    fn embedding_rejects_bad_values() {
        assert!(matches!(EmbeddingVector::new(vec![]), Err(Error::EmptyEmbedding)));
        assert!(matches!(
            EmbeddingVector::new(vec![1.0, f64::NAN]),
            Err(Error::NonFinite(1))
        ));
        assert!(matches!(
            EmbeddingVector::new(vec![0.0, 0.0]),
            Err(Error::ZeroNorm)
        ));
        assert!(serde_json::from_str::<EmbeddingVector>("[0.0]").is_err());
    }

    #[test]
    fn consistent_dims_are_valid() {
        assert!(validate_workspace(&gallery(4, 5), &profile(4)).is_empty());
    }

    #[test]
    fn topic_dimension_mismatch() {
        let v = validate_workspace(&gallery(4, 5), &profile(8));
        assert_eq!(v.len(), 2);
        assert!(v.iter().all(|x| matches!(x, Violation::DimensionMismatch { .. })));
        assert!(v[0].to_string().contains("dimension mismatch"));
    }

    #[test]
    fn duplicate_image_id() {
        let mut g = gallery(4, 3);
        g.images[2].image_id = "img1".into();
        let v = validate_workspace(&g, &profile(4));
        assert_eq!(
            v,
            vec![Violation::DuplicateImageId {
                image_id: "img1".into()
            }]
        );
        assert!(v[0].to_string().contains("duplicate id"));
    }

    #[test]
    fn empty_gallery_is_a_violation() {
        let g = Gallery::new("g", vec![]);
        assert_eq!(validate_workspace(&g, &profile(4)), vec![Violation::EmptyGallery]);
    }

    #[test]
    fn image_index_lookup() {
        let g = gallery(3, 4);
        assert_eq!(g.image_index("img0").unwrap(), 0);
        assert_eq!(g.image_index("img3").unwrap(), 3);
        assert!(matches!(g.image_index("nope"), Err(Error::UnknownImage(_))));
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(json, format!("\"{}\"", m.name()));
        }
        assert!("pam".parse::<Method>().is_err());
    }

    #[derive(Debug, Clone)]
    enum Mutation {
        None,
        ImageDim(usize),
        TopicDim(usize),
        DupImage(usize),
        DupTopic,
        Prob(usize, f64),
    }

    fn mutation() -> impl Strategy<Value = Mutation> {
        prop_oneof![
            Just(Mutation::None),
            (0usize..6).prop_map(Mutation::ImageDim),
            (0usize..2).prop_map(Mutation::TopicDim),
            (1usize..6).prop_map(Mutation::DupImage),
            Just(Mutation::DupTopic),
            (0usize..6, prop_oneof![-5.0..-1e-6, 1.000001..5.0]).prop_map(|(i, p)| Mutation::Prob(i, p)),
        ]
    }

    proptest! {
        #[test]
        fn index_round_trip(n in 1usize..20, dim in 1usize..6) {
            let g = gallery(dim, n);
            for (j, img) in g.images.iter().enumerate() {
                prop_assert_eq!(g.image_index(&img.image_id).unwrap(), j);
            }
        }

        #[test]
        fn single_mutation_is_detected(m in mutation()) {
            let mut g = gallery(4, 6);
            let mut p = profile(4);
            match m.clone() {
                Mutation::None => {}
                Mutation::ImageDim(i) => g.images[i].embedding = emb(&[1.0; 5]),
                Mutation::TopicDim(i) => p.topics[i].embedding = emb(&[1.0; 3]),
                Mutation::DupImage(i) => g.images[i].image_id = "img0".into(),
                Mutation::DupTopic => p.topics[1].topic_id = "t0".into(),
                Mutation::Prob(i, v) => { g.images[i].class_probs.insert("x".into(), v); }
            }
            let violations = validate_workspace(&g, &p);
            match m {
                Mutation::None => prop_assert!(violations.is_empty()),
                // a wrong first image shifts the reference dimension
                Mutation::ImageDim(0) => prop_assert_eq!(violations.len(), 7),
                _ => prop_assert_eq!(violations.len(), 1),
            }
        }
    }
}
