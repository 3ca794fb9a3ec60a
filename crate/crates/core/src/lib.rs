//! Segment-personalized summarization of image galleries.
//!
//! The pipeline works entirely on pre-computed artifacts: image embeddings,
//! per-image class probabilities, review topic probabilities and topic
//! embeddings living in the same joint space as the images. From those it
//! builds K-image summaries with four methods (plain clustering, clustering
//! after segment filtering, topic-only matching, and the cross-modal
//! cluster/topic matcher) and scores them with diversity,
//! representativeness, class coverage and review-topic coverage.

pub mod cli;
pub mod clustering;
pub mod error;
pub mod io;
pub mod metrics;
pub mod model;
pub mod simcore;
pub mod summarize;
pub mod synthgen;
pub mod topics;

pub use error::{Error, Result};
pub use model::{
    validate_workspace, EmbeddingVector, Gallery, ImageRecord, Method, SegmentProfile, Selection,
    SummaryReport, TopicRecord, Violation,
};
