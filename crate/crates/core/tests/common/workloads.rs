//! Seeded workspaces for the equivalence and ordering runs.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xsum_core::synthgen::{generate, SynthSpec};
use xsum_core::{EmbeddingVector, Gallery, ImageRecord, SegmentProfile, TopicRecord};

pub struct Case {
    pub gallery: Gallery,
    pub profile: SegmentProfile,
    pub k: usize,
}

pub fn random_vector(rng: &mut ChaCha8Rng, dim: usize) -> EmbeddingVector {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        if let Ok(e) = EmbeddingVector::new(v) {
            if e.norm() > 1e-6 {
                return e;
            }
        }
    }
}

/// Unstructured gallery: uniform embeddings (some duplicated), sparse class
/// tables over six labels, random topics.
pub fn raw_workspace(seed: u64, n: usize, n_topics: usize) -> (Gallery, SegmentProfile) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = rng.random_range(3..=10);
    let mut images: Vec<ImageRecord> = Vec::with_capacity(n);
    for j in 0..n {
        let e = if j > 0 && rng.random_bool(0.15) {
            images[rng.random_range(0..j)].embedding.clone()
        } else {
            random_vector(&mut rng, dim)
        };
        let mut img = ImageRecord::new(format!("img{j:03}"), e);
        for c in 0..6 {
            if rng.random_bool(0.7) {
                img = img.with_class(format!("c{c}"), rng.random_range(0.0..=1.0));
            }
        }
        images.push(img);
    }
    let n_rel = rng.random_range(1..=3);
    let mut relevant = BTreeSet::new();
    while relevant.len() < n_rel {
        relevant.insert(format!("c{}", rng.random_range(0..6)));
    }
    let topics = (0..n_topics)
        .map(|t| TopicRecord::new(format!("t{t:02}"), random_vector(&mut rng, dim)))
        .collect();
    (
        Gallery::new(format!("raw-{seed}"), images),
        SegmentProfile {
            segment_id: "raw".into(),
            relevant_classes: relevant,
            topics,
        },
    )
}

/// A synthetic spec with planted structure and the given topic count.
pub fn planted_spec(rng: &mut ChaCha8Rng, seed: u64, n: usize, n_topics: usize) -> SynthSpec {
    let n_clusters = rng.random_range(1..=8.min(n));
    let mut relevant_fraction = [0.5, 0.75, 1.0][rng.random_range(0..3)];
    if (relevant_fraction * n_clusters as f64).round() < 1.0 {
        relevant_fraction = 1.0;
    }
    let n_relevant = (relevant_fraction * n_clusters as f64).round() as usize;
    let aligned = rng.random_range(0..=n_topics.min(n_relevant));
    SynthSpec {
        n_images: n,
        n_clusters,
        dimension: rng.random_range(4..=16),
        intra_cluster_noise: rng.random_range(0.0..0.3),
        n_topics_aligned: aligned,
        n_topics_distractor: n_topics - aligned,
        classes_per_cluster: rng.random_range(1..=2),
        relevant_fraction,
        seed,
    }
}

/// Workspace `index` of the selection equivalence run: n in 12..=60,
/// k in 2..=9, 1..=12 topics. Even indices carry planted structure, odd
/// ones are unstructured.
pub fn selection_case(index: u64) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e1e_c000 + index);
    let n = rng.random_range(12..=60);
    let k = rng.random_range(2..=9);
    let n_topics = rng.random_range(1..=12);
    if index.is_multiple_of(2) {
        let spec = planted_spec(&mut rng, index, n, n_topics);
        let ws = generate(&spec).expect("valid spec");
        Case {
            gallery: ws.gallery,
            profile: ws.profile,
            k,
        }
    } else {
        let (gallery, profile) = raw_workspace(index, n, n_topics);
        Case { gallery, profile, k }
    }
}

/// The ordering workload: 18 planted clusters of about 5 images, half of
/// them relevant and each relevant cluster with a topic on its direction.
/// With k = 9 the relevant clusters fit in one summary while the full
/// gallery does not.
pub fn ordering_spec(seed: u64) -> SynthSpec {
    SynthSpec {
        n_images: 96,
        n_clusters: 18,
        dimension: 16,
        intra_cluster_noise: 0.05,
        n_topics_aligned: 9,
        n_topics_distractor: 0,
        classes_per_cluster: 1,
        relevant_fraction: 0.5,
        seed,
    }
}
