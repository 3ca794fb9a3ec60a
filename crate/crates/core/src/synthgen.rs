//! Seeded synthetic workspaces with planted cluster, topic and class
//! structure.
//!
//! Each cluster gets a random unit direction; images are their cluster's
//! direction plus isotropic Gaussian noise, renormalized. A fraction of the
//! clusters is "relevant": their classes form the segment's class set and
//! the aligned topics sit exactly on their directions. An image's
//! probability for its own cluster's classes grows with its alignment to
//! the cluster direction, so the most prototypical image of a cluster is
//! also its class argmax.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EmbeddingVector, Gallery, ImageRecord, SegmentProfile, TopicRecord};
use crate::simcore::{cosine_raw, pairwise_distance_matrix};

pub const SYNTH_SEGMENT: &str = "synthetic";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_images: usize,
    pub n_clusters: usize,
    pub dimension: usize,
    /// Per-component standard deviation of the Gaussian perturbation.
    pub intra_cluster_noise: f64,
    pub n_topics_aligned: usize,
    pub n_topics_distractor: usize,
    pub classes_per_cluster: usize,
    pub relevant_fraction: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_images: 48,
            n_clusters: 8,
            dimension: 16,
            intra_cluster_noise: 0.05,
            n_topics_aligned: 3,
            n_topics_distractor: 2,
            classes_per_cluster: 1,
            relevant_fraction: 0.5,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn n_relevant(&self) -> usize {
        (self.relevant_fraction * self.n_clusters as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidParameter(m));
        if self.n_clusters == 0 || self.n_clusters > self.n_images {
            return fail(format!(
                "need 1 <= n_clusters <= n_images, got {} clusters for {} images",
                self.n_clusters, self.n_images
            ));
        }
        if self.dimension == 0 {
            return fail("dimension must be positive".into());
        }
        if !(self.intra_cluster_noise >= 0.0 && self.intra_cluster_noise.is_finite()) {
            return fail(format!("noise {} must be finite and >= 0", self.intra_cluster_noise));
        }
        if !(0.0..=1.0).contains(&self.relevant_fraction) {
            return fail(format!("relevant_fraction {} outside [0, 1]", self.relevant_fraction));
        }
        if self.n_topics_aligned > self.n_relevant() {
            return fail(format!(
                "{} aligned topics but only {} relevant clusters",
                self.n_topics_aligned,
                self.n_relevant()
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Planted cluster of each gallery ordinal.
    pub assignment: Vec<usize>,
    pub relevant_clusters: BTreeSet<usize>,
    pub cluster_classes: Vec<Vec<String>>,
    /// Planted cluster of each aligned topic; distractors are not listed.
    pub aligned_topics: BTreeMap<String, usize>,
    /// Gallery argmax ordinal per class.
    pub class_argmax: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthWorkspace {
    pub spec: SynthSpec,
    pub gallery: Gallery,
    pub profile: SegmentProfile,
    pub truth: GroundTruth,
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn class_id(cluster: usize, m: usize) -> String {
    format!("class{cluster:02}_{m}")
}

/// Own-class probability for an image at cosine `c` to its cluster
/// direction; class `m` of a cluster is scaled down slightly so classes of
/// one cluster are distinguishable.
fn own_class_prob(c: f64, m: usize) -> f64 {
    ((0.5 + 0.5 * c) * (1.0 - 0.02 * m as f64)).clamp(0.0, 1.0)
}

pub fn generate(spec: &SynthSpec) -> Result<SynthWorkspace> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let dim = spec.dimension;

    let directions: Vec<Vec<f64>> = (0..spec.n_clusters).map(|_| random_unit(&mut rng, dim)).collect();

    let mut cluster_order: Vec<usize> = (0..spec.n_clusters).collect();
    cluster_order.shuffle(&mut rng);
    let relevant: Vec<usize> = cluster_order[..spec.n_relevant()].to_vec();

    // balanced sizes, shuffled gallery order
    let mut planted: Vec<usize> = (0..spec.n_images).map(|i| i % spec.n_clusters).collect();
    planted.shuffle(&mut rng);

    let cluster_classes: Vec<Vec<String>> = (0..spec.n_clusters)
        .map(|c| (0..spec.classes_per_cluster).map(|m| class_id(c, m)).collect())
        .collect();

    let mut images = Vec::with_capacity(spec.n_images);
    for (j, &c) in planted.iter().enumerate() {
        let dir = &directions[c];
        let embedding = loop {
            let v: Vec<f64> = dir
                .iter()
                .map(|&x| x + spec.intra_cluster_noise * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                break v.into_iter().map(|x| x / norm).collect::<Vec<_>>();
            }
        };
        let align = cosine_raw(&embedding, dir).unwrap_or(0.0);
        let mut record = ImageRecord::new(format!("img{j:04}"), EmbeddingVector::new(embedding)?);
        for (m, class) in cluster_classes[c].iter().enumerate() {
            record.class_probs.insert(class.clone(), own_class_prob(align, m));
        }
        images.push(record);
    }

    let mut topics = Vec::new();
    let mut aligned_topics = BTreeMap::new();
    for (t, &c) in relevant.iter().take(spec.n_topics_aligned).enumerate() {
        let id = format!("topic{t:02}");
        aligned_topics.insert(id.clone(), c);
        topics.push(TopicRecord::new(id, EmbeddingVector::new(directions[c].clone())?));
    }
    for t in 0..spec.n_topics_distractor {
        let id = format!("topic{:02}", spec.n_topics_aligned + t);
        topics.push(TopicRecord::new(id, EmbeddingVector::new(random_unit(&mut rng, dim))?));
    }

    let relevant_classes: BTreeSet<String> = relevant
        .iter()
        .flat_map(|&c| cluster_classes[c].iter().cloned())
        .collect();

    let mut class_argmax = BTreeMap::new();
    for classes in &cluster_classes {
        for class in classes {
            let best = (0..images.len())
                .filter(|&j| images[j].class_probs.contains_key(class))
                .max_by(|&a, &b| {
                    images[a].class_prob(class)
                        .total_cmp(&images[b].class_prob(class))
                        .then(b.cmp(&a))
                });
            if let Some(j) = best {
                class_argmax.insert(class.clone(), j);
            }
        }
    }

    Ok(SynthWorkspace {
        spec: spec.clone(),
        gallery: Gallery::new(format!("synth-{}", spec.seed), images),
        profile: SegmentProfile {
            segment_id: SYNTH_SEGMENT.to_string(),
            relevant_classes,
            topics,
        },
        truth: GroundTruth {
            assignment: planted,
            relevant_clusters: relevant.into_iter().collect(),
            cluster_classes,
            aligned_topics,
            class_argmax,
        },
    })
}

/// Smallest distance between images of different planted clusters and the
/// largest distance within one.
pub fn planted_gap(workspace: &SynthWorkspace) -> Result<(f64, f64)> {
    let d = pairwise_distance_matrix(&workspace.gallery)?;
    let a = &workspace.truth.assignment;
    let mut min_inter = f64::INFINITY;
    let mut max_intra: f64 = 0.0;
    for i in 0..a.len() {
        for j in (i + 1)..a.len() {
            if a[i] == a[j] {
                max_intra = max_intra.max(d.get(i, j));
            } else {
                min_inter = min_inter.min(d.get(i, j));
            }
        }
    }
    Ok((min_inter, max_intra))
}

/// Every cross-cluster distance exceeds every within-cluster distance.
pub fn is_well_separated(workspace: &SynthWorkspace) -> Result<bool> {
    let (inter, intra) = planted_gap(workspace)?;
    Ok(inter > intra)
}

/// True when `found` equals `truth` up to a relabeling of clusters.
pub fn same_partition(found: &[usize], truth: &[usize]) -> bool {
    if found.len() != truth.len() {
        return false;
    }
    let mut fwd = BTreeMap::new();
    let mut back = BTreeMap::new();
    found.iter().zip(truth).all(|(&f, &t)| {
        *fwd.entry(f).or_insert(t) == t && *back.entry(t).or_insert(f) == f
    })
}
