#![allow(dead_code)]

pub mod oracle;
pub mod workloads;

use std::path::{Path, PathBuf};

use xsum_core::io::{self, GalleryEntry};
use xsum_core::simcore::DEFAULT_GAMMA;
use xsum_core::synthgen::{generate, SynthSpec};

/// One synthetic workspace per seed, merged under the first seed's topics
/// and segment profile. Galleries alternate between the "Small" and "Big"
/// splits.
pub fn write_multi_gallery_workspace(dir: &Path, seeds: &[u64]) -> PathBuf {
    let spec = |seed| SynthSpec {
        n_images: 30,
        n_clusters: 6,
        seed,
        ..SynthSpec::default()
    };
    let first = generate(&spec(seeds[0])).unwrap();
    let manifest_path = io::write_synth_workspace(dir, &first, DEFAULT_GAMMA, 42).unwrap();
    let mut manifest = io::read_manifest(&manifest_path).unwrap();
    manifest.galleries[0].split = Some("Small".into());
    for (i, &seed) in seeds.iter().enumerate().skip(1) {
        let ws = generate(&spec(seed)).unwrap();
        let gid = ws.gallery.gallery_id.clone();
        let blob = PathBuf::from(format!("{gid}.emb"));
        let classes = PathBuf::from(format!("{gid}.classes.jsonl"));
        io::write_embedding_blob(&dir.join(&blob), &ws.gallery.embeddings()).unwrap();
        io::write_class_probs(&dir.join(&classes), &ws.gallery).unwrap();
        manifest.galleries.push(GalleryEntry {
            gallery_id: gid,
            split: Some(if i % 2 == 0 { "Small" } else { "Big" }.into()),
            embeddings: blob,
            image_ids: ws.gallery.images.iter().map(|im| im.image_id.clone()).collect(),
            class_probs: classes,
        });
    }
    io::write_manifest(&manifest_path, &manifest).unwrap();
    manifest_path
}
