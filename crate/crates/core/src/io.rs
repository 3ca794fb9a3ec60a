//! On-disk formats.
//!
//! * Embedding blob: `b"XSUM"`, then `u32` version, `u32` count, `u32` dim,
//!   then `count * dim` little-endian `f32` values, row-major.
//! * Workspace manifest: JSON, paths relative to the manifest's directory.
//! * Class probabilities: JSON lines `{"image_id": .., "class_probs": {..}}`.
//! * Reviews: JSON lines `{"review_id": .., "segment_id": .., "topic_probs": {..}}`.
//! * Segment profile: JSON `{"segment_id": .., "relevant_classes": [..], "topics": [..]}`.
//! * Summary: pretty JSON of [`SummaryReport`].
//! * Metrics: CSV `gallery_id,method,segment,k,div,repr,cov,rcov`.
//!
//! Writers go through a temporary file in the target directory followed by
//! a rename, so readers never see a partial file.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EmbeddingVector, Gallery, ImageRecord, SegmentProfile, SummaryReport, TopicRecord};
use crate::synthgen::SynthWorkspace;
use crate::topics::{csv_field, ReviewRecord};

pub const BLOB_MAGIC: &[u8; 4] = b"XSUM";
pub const BLOB_VERSION: u32 = 1;
pub const MANIFEST_VERSION: &str = "1";
pub const BLOB_HEADER_LEN: usize = 16;
pub const METRICS_HEADER: &str = "gallery_id,method,segment,k,div,repr,cov,rcov";

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn read_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes via a temporary sibling file and an atomic rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(contents).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// embedding blobs

pub fn encode_embedding_blob(rows: &[&EmbeddingVector]) -> Result<Vec<u8>> {
    let dim = rows.first().map_or(0, |r| r.dim());
    let mut out = Vec::with_capacity(BLOB_HEADER_LEN + rows.len() * dim * 4);
    out.extend_from_slice(BLOB_MAGIC);
    out.extend_from_slice(&BLOB_VERSION.to_le_bytes());
    out.extend_from_slice(&(rows.len() as u32).to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    for r in rows {
        if r.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: r.dim(),
            });
        }
        for &v in r.as_slice() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn write_embedding_blob(path: &Path, rows: &[&EmbeddingVector]) -> Result<()> {
    write_atomic(path, &encode_embedding_blob(rows)?)
}

fn le_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

pub fn decode_embedding_blob(
    path: &Path,
    bytes: &[u8],
    expected_count: Option<usize>,
    dimension: Option<usize>,
) -> Result<Vec<EmbeddingVector>> {
    let err = |m: String| Error::format(path, m);
    if bytes.len() < BLOB_HEADER_LEN {
        return Err(err(format!(
            "truncated header: file ends at byte offset {}, header needs {BLOB_HEADER_LEN}",
            bytes.len()
        )));
    }
    if &bytes[..4] != BLOB_MAGIC {
        return Err(err("bad magic, expected \"XSUM\"".into()));
    }
    let version = le_u32(bytes, 4);
    if version != BLOB_VERSION {
        return Err(err(format!("unsupported blob version {version}")));
    }
    let count = le_u32(bytes, 8) as usize;
    let dim = le_u32(bytes, 12) as usize;
    if let Some(n) = expected_count {
        if n != count {
            return Err(err(format!("count mismatch: header says {count}, manifest says {n}")));
        }
    }
    if let Some(d) = dimension {
        if d != dim {
            return Err(err(format!("dimension mismatch: header says {dim}, manifest says {d}")));
        }
    }
    if dim == 0 && count > 0 {
        return Err(err("zero dimension".into()));
    }
    let needed = BLOB_HEADER_LEN + count * dim * 4;
    if bytes.len() < needed {
        return Err(err(format!(
            "truncated data: file ends at byte offset {}, expected {needed} bytes",
            bytes.len()
        )));
    }
    if bytes.len() > needed {
        return Err(err(format!("{} trailing bytes after offset {needed}", bytes.len() - needed)));
    }

    let mut rows = Vec::with_capacity(count);
    for r in 0..count {
        let start = BLOB_HEADER_LEN + r * dim * 4;
        let values: Vec<f64> = bytes[start..start + dim * 4]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect();
        let row = EmbeddingVector::new(values).map_err(|e| match e {
            Error::NonFinite(col) => err(format!("non-finite value at row {r}, column {col}")),
            Error::ZeroNorm => err(format!("zero-norm embedding at row {r}")),
            other => other,
        })?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_embedding_blob(
    path: &Path,
    expected_count: Option<usize>,
    dimension: Option<usize>,
) -> Result<Vec<EmbeddingVector>> {
    decode_embedding_blob(path, &read_bytes(path)?, expected_count, dimension)
}

// ---------------------------------------------------------------------------
// line-delimited records

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for LineError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}, line {}", self.message, self.line)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReviewsRead {
    pub records: Vec<ReviewRecord>,
    /// Rejected lines; only ever non-empty in lenient mode.
    pub errors: Vec<LineError>,
}

fn check_review(r: &ReviewRecord) -> std::result::Result<(), String> {
    for (t, &p) in &r.topic_probs {
        if !(0.0..=1.0).contains(&p) {
            return Err(format!("probability out of range for topic {t:?}"));
        }
    }
    Ok(())
}

pub fn parse_reviews(path: &Path, text: &str, strict: bool) -> Result<ReviewsRead> {
    let mut out = ReviewsRead::default();
    let mut seen = HashSet::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<ReviewRecord>(line)
            .map_err(|e| format!("malformed record ({e})"))
            .and_then(|r| check_review(&r).map(|_| r))
            .and_then(|r| {
                if seen.insert(r.review_id.clone()) {
                    Ok(r)
                } else {
                    Err(format!("duplicate review id {:?}", r.review_id))
                }
            });
        match parsed {
            Ok(r) => out.records.push(r),
            Err(message) => {
                let e = LineError { line: line_no, message };
                if strict {
                    return Err(Error::format(path, e.to_string()));
                }
                out.errors.push(e);
            }
        }
    }
    Ok(out)
}

pub fn read_reviews(path: &Path, strict: bool) -> Result<ReviewsRead> {
    parse_reviews(path, &read_string(path)?, strict)
}

pub fn write_reviews(path: &Path, reviews: &[ReviewRecord]) -> Result<()> {
    let mut text = String::new();
    for r in reviews {
        text.push_str(&serde_json::to_string(r).expect("serializable"));
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassProbRow {
    pub image_id: String,
    pub class_probs: BTreeMap<String, f64>,
}

pub fn read_class_probs(path: &Path) -> Result<Vec<ClassProbRow>> {
    let text = read_string(path)?;
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: ClassProbRow = serde_json::from_str(line)
            .map_err(|e| Error::format(path, format!("malformed record ({e}), line {}", idx + 1)))?;
        for (c, &p) in &row.class_probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::format(
                    path,
                    format!("probability out of range for class {c:?}, line {}", idx + 1),
                ));
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_class_probs(path: &Path, gallery: &Gallery) -> Result<()> {
    let mut text = String::new();
    for img in &gallery.images {
        let row = ClassProbRow {
            image_id: img.image_id.clone(),
            class_probs: img.class_probs.clone(),
        };
        text.push_str(&serde_json::to_string(&row).expect("serializable"));
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())
}

// ---------------------------------------------------------------------------
// segment profiles

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileFile {
    pub segment_id: String,
    pub relevant_classes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topics: Option<Vec<String>>,
}

impl ProfileFile {
    pub fn from_profile(profile: &SegmentProfile) -> Self {
        ProfileFile {
            segment_id: profile.segment_id.clone(),
            relevant_classes: profile.relevant_classes.iter().cloned().collect(),
            topics: Some(profile.topics.iter().map(|t| t.topic_id.clone()).collect()),
        }
    }
}

/// Resolves a profile file against a topic table. Returns the profile and
/// any warnings (duplicate class or topic ids are collapsed).
pub fn resolve_profile(
    path: &Path,
    file: ProfileFile,
    topic_table: &BTreeMap<String, EmbeddingVector>,
    require_classes: bool,
) -> Result<(SegmentProfile, Vec<String>)> {
    let mut warnings = Vec::new();
    if require_classes && file.relevant_classes.is_empty() {
        return Err(Error::format(
            path,
            format!("segment {:?} has no relevant classes", file.segment_id),
        ));
    }
    let mut classes = BTreeSet::new();
    for c in file.relevant_classes {
        if !classes.insert(c.clone()) {
            warnings.push(format!("duplicate class {c:?} removed"));
        }
    }
    let mut topics = Vec::new();
    let mut seen = HashSet::new();
    for t in file.topics.unwrap_or_default() {
        if !seen.insert(t.clone()) {
            warnings.push(format!("duplicate topic {t:?} removed"));
            continue;
        }
        let embedding = topic_table
            .get(&t)
            .cloned()
            .ok_or_else(|| Error::format(path, format!("unknown topic id {t:?}")))?;
        topics.push(TopicRecord::new(t, embedding));
    }
    Ok((
        SegmentProfile {
            segment_id: file.segment_id,
            relevant_classes: classes,
            topics,
        },
        warnings,
    ))
}

pub fn read_segment_profile(
    path: &Path,
    topic_table: &BTreeMap<String, EmbeddingVector>,
    require_classes: bool,
) -> Result<(SegmentProfile, Vec<String>)> {
    let file: ProfileFile =
        serde_json::from_str(&read_string(path)?).map_err(|e| Error::format(path, e.to_string()))?;
    resolve_profile(path, file, topic_table, require_classes)
}

pub fn write_segment_profile(path: &Path, profile: &SegmentProfile) -> Result<()> {
    let mut text = serde_json::to_string_pretty(&ProfileFile::from_profile(profile)).expect("serializable");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

// ---------------------------------------------------------------------------
// manifest and workspace

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GalleryEntry {
    pub gallery_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<String>,
    pub embeddings: PathBuf,
    pub image_ids: Vec<String>,
    pub class_probs: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicTableEntry {
    pub embeddings: PathBuf,
    pub topic_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceManifest {
    pub version: String,
    pub dimension: usize,
    pub galleries: Vec<GalleryEntry>,
    pub topics: TopicTableEntry,
    pub segments: Vec<PathBuf>,
    pub gamma: f64,
    pub class_threshold: f64,
    pub topic_threshold: f64,
    pub seed: u64,
}

pub fn read_manifest(path: &Path) -> Result<WorkspaceManifest> {
    let m: WorkspaceManifest =
        serde_json::from_str(&read_string(path)?).map_err(|e| Error::format(path, e.to_string()))?;
    if m.version != MANIFEST_VERSION {
        return Err(Error::format(path, format!("unsupported manifest version {:?}", m.version)));
    }
    if m.dimension == 0 {
        return Err(Error::format(path, "dimension must be positive"));
    }
    Ok(m)
}

pub fn write_manifest(path: &Path, manifest: &WorkspaceManifest) -> Result<()> {
    let mut text = serde_json::to_string_pretty(manifest).expect("serializable");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedGallery {
    pub gallery: Gallery,
    pub split: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Workspace {
    pub manifest: WorkspaceManifest,
    pub root: PathBuf,
    pub galleries: Vec<LoadedGallery>,
    pub topic_table: BTreeMap<String, EmbeddingVector>,
    pub profiles: Vec<SegmentProfile>,
    pub warnings: Vec<String>,
}

impl Workspace {
    pub fn profile(&self, segment_id: &str) -> Option<&SegmentProfile> {
        self.profiles.iter().find(|p| p.segment_id == segment_id)
    }

    pub fn split_of(&self, gallery_id: &str) -> Option<&str> {
        self.galleries
            .iter()
            .find(|g| g.gallery.gallery_id == gallery_id)
            .and_then(|g| g.split.as_deref())
    }
}

fn load_gallery(root: &Path, dim: usize, entry: &GalleryEntry, warnings: &mut Vec<String>) -> Result<Gallery> {
    let blob = root.join(&entry.embeddings);
    let embeddings = read_embedding_blob(&blob, Some(entry.image_ids.len()), Some(dim))?;
    let probs_path = root.join(&entry.class_probs);
    let mut probs: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for row in read_class_probs(&probs_path)? {
        if !entry.image_ids.contains(&row.image_id) {
            return Err(Error::format(&probs_path, format!("unknown image id {:?}", row.image_id)));
        }
        if probs.insert(row.image_id.clone(), row.class_probs).is_some() {
            return Err(Error::format(&probs_path, format!("duplicate image id {:?}", row.image_id)));
        }
    }
    let mut images = Vec::with_capacity(embeddings.len());
    for (id, embedding) in entry.image_ids.iter().zip(embeddings) {
        let class_probs = probs.remove(id).unwrap_or_else(|| {
            warnings.push(format!(
                "gallery {}: no class probabilities for image {id:?}; treated as empty",
                entry.gallery_id
            ));
            BTreeMap::new()
        });
        images.push(ImageRecord {
            image_id: id.clone(),
            embedding,
            class_probs,
        });
    }
    let gallery = Gallery::new(entry.gallery_id.clone(), images);
    let mut ids = HashSet::new();
    if gallery.is_empty() {
        return Err(Error::format(&blob, "gallery is empty"));
    }
    if let Some(dup) = gallery.images.iter().find(|i| !ids.insert(i.image_id.as_str())) {
        return Err(Error::format(&blob, format!("duplicate image id {:?}", dup.image_id)));
    }
    Ok(gallery)
}

pub fn load_workspace(manifest_path: &Path, require_classes: bool) -> Result<Workspace> {
    let manifest = read_manifest(manifest_path)?;
    let root = manifest_path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut warnings = Vec::new();

    let topics_path = root.join(&manifest.topics.embeddings);
    let topic_vectors = read_embedding_blob(&topics_path, Some(manifest.topics.topic_ids.len()), Some(manifest.dimension))?;
    let mut topic_table = BTreeMap::new();
    for (id, v) in manifest.topics.topic_ids.iter().zip(topic_vectors) {
        if topic_table.insert(id.clone(), v).is_some() {
            return Err(Error::format(&topics_path, format!("duplicate topic id {id:?}")));
        }
    }

    let mut galleries = Vec::new();
    for entry in &manifest.galleries {
        let gallery = load_gallery(&root, manifest.dimension, entry, &mut warnings)?;
        galleries.push(LoadedGallery {
            gallery,
            split: entry.split.clone(),
        });
    }

    let mut profiles = Vec::new();
    for rel in &manifest.segments {
        let (p, w) = read_segment_profile(&root.join(rel), &topic_table, require_classes)?;
        warnings.extend(w.into_iter().map(|w| format!("{}: {w}", rel.display())));
        profiles.push(p);
    }

    Ok(Workspace {
        manifest,
        root,
        galleries,
        topic_table,
        profiles,
        warnings,
    })
}

/// Writes a synthetic workspace: manifest, embedding blobs, class table,
/// segment profile and ground truth. Returns the manifest path.
pub fn write_synth_workspace(dir: &Path, ws: &SynthWorkspace, gamma: f64, seed: u64) -> Result<PathBuf> {
    let gid = &ws.gallery.gallery_id;
    let gallery_blob = PathBuf::from(format!("{gid}.emb"));
    let classes = PathBuf::from(format!("{gid}.classes.jsonl"));
    let topics_blob = PathBuf::from("topics.emb");
    let profile_path = PathBuf::from(format!("segments/{}.json", ws.profile.segment_id));

    write_embedding_blob(&dir.join(&gallery_blob), &ws.gallery.embeddings())?;
    write_class_probs(&dir.join(&classes), &ws.gallery)?;
    let topic_rows: Vec<_> = ws.profile.topics.iter().map(|t| &t.embedding).collect();
    write_embedding_blob(&dir.join(&topics_blob), &topic_rows)?;
    write_segment_profile(&dir.join(&profile_path), &ws.profile)?;

    let mut truth = serde_json::to_string_pretty(&serde_json::json!({
        "spec": ws.spec,
        "truth": ws.truth,
    }))
    .expect("serializable");
    truth.push('\n');
    write_atomic(&dir.join("ground_truth.json"), truth.as_bytes())?;

    let manifest = WorkspaceManifest {
        version: MANIFEST_VERSION.into(),
        dimension: ws.spec.dimension,
        galleries: vec![GalleryEntry {
            gallery_id: gid.clone(),
            split: Some("synthetic".into()),
            embeddings: gallery_blob,
            image_ids: ws.gallery.images.iter().map(|i| i.image_id.clone()).collect(),
            class_probs: classes,
        }],
        topics: TopicTableEntry {
            embeddings: topics_blob,
            topic_ids: ws.profile.topics.iter().map(|t| t.topic_id.clone()).collect(),
        },
        segments: vec![profile_path],
        gamma,
        class_threshold: crate::summarize::DEFAULT_CLASS_THRESHOLD,
        topic_threshold: crate::topics::DEFAULT_TOPIC_THRESHOLD,
        seed,
    };
    let path = dir.join("manifest.json");
    write_manifest(&path, &manifest)?;
    Ok(path)
}

// ---------------------------------------------------------------------------
// summaries and metrics

pub fn summary_to_string(report: &SummaryReport) -> String {
    let mut text = serde_json::to_string_pretty(report).expect("serializable");
    text.push('\n');
    text
}

pub fn write_summary(report: &SummaryReport, path: &Path) -> Result<()> {
    write_atomic(path, summary_to_string(report).as_bytes())
}

pub fn read_summary(path: &Path) -> Result<SummaryReport> {
    serde_json::from_str(&read_string(path)?).map_err(|e| Error::format(path, e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub gallery_id: String,
    pub method: String,
    pub segment: String,
    pub k: usize,
    pub div: f64,
    pub repr: Option<f64>,
    pub cov: Option<f64>,
    pub rcov: Option<f64>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

pub fn metrics_to_csv(rows: &[MetricsRow]) -> String {
    let mut sorted: Vec<&MetricsRow> = rows.iter().collect();
    sorted.sort_by(|a, b| {
        (&a.gallery_id, &a.method, &a.segment, a.k).cmp(&(&b.gallery_id, &b.method, &b.segment, b.k))
    });
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in sorted {
        out.push_str(&format!(
            "{},{},{},{},{:.6},{},{},{}\n",
            csv_field(&r.gallery_id),
            csv_field(&r.method),
            csv_field(&r.segment),
            r.k,
            r.div,
            fmt_opt(r.repr),
            fmt_opt(r.cov),
            fmt_opt(r.rcov)
        ));
    }
    out
}

pub fn write_metrics(rows: &[MetricsRow], path: &Path) -> Result<()> {
    write_atomic(path, metrics_to_csv(rows).as_bytes())
}

fn split_csv_line(line: &str) -> Vec<String> {
    let mut fields = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        match (c, quoted) {
            ('"', true) if chars.peek() == Some(&'"') => {
                cur.push('"');
                chars.next();
            }
            ('"', _) => quoted = !quoted,
            (',', false) => fields.push(std::mem::take(&mut cur)),
            _ => cur.push(c),
        }
    }
    fields.push(cur);
    fields
}

pub fn parse_metrics(path: &Path, text: &str) -> Result<Vec<MetricsRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(METRICS_HEADER) {
        return Err(Error::format(path, "missing or unexpected metrics header"));
    }
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let line_no = idx + 2;
        let f = split_csv_line(line);
        if f.len() != 8 {
            return Err(Error::format(path, format!("expected 8 fields, line {line_no}")));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::format(path, format!("bad number {s:?}, line {line_no}")))
        };
        let opt = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                num(s).map(Some)
            }
        };
        rows.push(MetricsRow {
            gallery_id: f[0].clone(),
            method: f[1].clone(),
            segment: f[2].clone(),
            k: f[3]
                .parse()
                .map_err(|_| Error::format(path, format!("bad k, line {line_no}")))?,
            div: num(&f[4])?,
            repr: opt(&f[5])?,
            cov: opt(&f[6])?,
            rcov: opt(&f[7])?,
        });
    }
    Ok(rows)
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    parse_metrics(path, &read_string(path)?)
}
