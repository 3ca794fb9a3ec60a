//! Review topic statistics: per-review topic detection, per-segment counts,
//! the segment topic list and the segment × topic frequency table.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EmbeddingVector, TopicRecord};

pub const DEFAULT_TOPIC_THRESHOLD: f64 = 0.5;
pub const DEFAULT_TOP_N: usize = 15;
pub const DEFAULT_MIN_COUNT: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewRecord {
    pub review_id: String,
    pub segment_id: String,
    pub topic_probs: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentTopicStats {
    pub segment_id: String,
    pub counts: BTreeMap<String, usize>,
    pub review_count: usize,
}

impl SegmentTopicStats {
    pub fn empty(segment_id: impl Into<String>) -> Self {
        SegmentTopicStats {
            segment_id: segment_id.into(),
            counts: BTreeMap::new(),
            review_count: 0,
        }
    }

    /// Adds another shard's counts for the same segment.
    pub fn merge(&mut self, other: &SegmentTopicStats) {
        self.review_count += other.review_count;
        for (t, c) in &other.counts {
            *self.counts.entry(t.clone()).or_default() += c;
        }
    }
}

/// Topics whose probability is strictly greater than `threshold`.
pub fn detect_topics(review: &ReviewRecord, threshold: f64) -> BTreeSet<String> {
    review
        .topic_probs
        .iter()
        .filter(|&(_, &p)| p > threshold)
        .map(|(t, _)| t.clone())
        .collect()
}

pub fn aggregate_segment_topics(
    reviews: &[ReviewRecord],
    segment_id: &str,
    threshold: f64,
) -> SegmentTopicStats {
    let mut stats = SegmentTopicStats::empty(segment_id);
    for review in reviews.iter().filter(|r| r.segment_id == segment_id) {
        stats.review_count += 1;
        for topic in detect_topics(review, threshold) {
            *stats.counts.entry(topic).or_default() += 1;
        }
    }
    stats
}

/// Segment ids in first-appearance order.
pub fn segments_in(reviews: &[ReviewRecord]) -> Vec<String> {
    let mut seen = BTreeSet::new();
    reviews
        .iter()
        .filter(|r| seen.insert(r.segment_id.as_str()))
        .map(|r| r.segment_id.clone())
        .collect()
}

/// Topics with at least `min_count` detections, most frequent first
/// (ties by id), truncated to `top_n`.
pub fn rank_topics(stats: &SegmentTopicStats, top_n: usize, min_count: usize) -> Vec<(String, usize)> {
    let mut ranked: Vec<(String, usize)> = stats
        .counts
        .iter()
        .filter(|&(_, &c)| c >= min_count && c > 0)
        .map(|(t, &c)| (t.clone(), c))
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(top_n);
    ranked
}

pub fn build_topic_list(
    stats: &SegmentTopicStats,
    topic_embeddings: &BTreeMap<String, EmbeddingVector>,
    top_n: usize,
    min_count: usize,
) -> Result<Vec<TopicRecord>> {
    rank_topics(stats, top_n, min_count)
        .into_iter()
        .map(|(topic_id, _)| {
            let embedding = topic_embeddings
                .get(&topic_id)
                .cloned()
                .ok_or_else(|| Error::MissingTopicEmbedding(topic_id.clone()))?;
            Ok(TopicRecord { topic_id, embedding })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapTable {
    pub segments: Vec<String>,
    /// Ordered by total detections across segments, descending.
    pub topics: Vec<String>,
    /// `rates[s][t] = counts / review_count`.
    pub rates: Vec<Vec<f64>>,
    pub warnings: Vec<String>,
}

impl HeatmapTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("segment");
        for t in &self.topics {
            out.push(',');
            out.push_str(&csv_field(t));
        }
        out.push('\n');
        for (seg, row) in self.segments.iter().zip(&self.rates) {
            out.push_str(&csv_field(seg));
            for r in row {
                out.push_str(&format!(",{r:.6}"));
            }
            out.push('\n');
        }
        out
    }
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn heatmap_table(all_stats: &[SegmentTopicStats]) -> HeatmapTable {
    let mut warnings = Vec::new();
    let kept: Vec<&SegmentTopicStats> = all_stats
        .iter()
        .filter(|s| {
            if s.review_count == 0 {
                warnings.push(format!("segment {:?} has no reviews; dropped", s.segment_id));
                false
            } else {
                true
            }
        })
        .collect();

    let mut totals: BTreeMap<&str, usize> = BTreeMap::new();
    for s in &kept {
        for (t, &c) in &s.counts {
            *totals.entry(t.as_str()).or_default() += c;
        }
    }
    let mut topics: Vec<(&str, usize)> = totals.into_iter().collect();
    topics.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let topics: Vec<String> = topics.into_iter().map(|(t, _)| t.to_string()).collect();

    let rates = kept
        .iter()
        .map(|s| {
            topics
                .iter()
                .map(|t| s.counts.get(t).copied().unwrap_or(0) as f64 / s.review_count as f64)
                .collect()
        })
        .collect();

    HeatmapTable {
        segments: kept.iter().map(|s| s.segment_id.clone()).collect(),
        topics,
        rates,
        warnings,
    }
}
