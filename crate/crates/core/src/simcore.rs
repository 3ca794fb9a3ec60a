//! Cosine kernels, the pairwise distance matrix and the tempered-sigmoid
//! confidence matrix between segment topics and gallery images.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EmbeddingVector, Gallery, SegmentProfile};

/// ln(100): logits are scaled by 100 before the sigmoid.
pub const DEFAULT_GAMMA: f64 = 4.605_170_185_988_092;

const LOGIT_CLAMP: f64 = 500.0;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_dims(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<()> {
    if u.dim() != v.dim() {
        return Err(Error::DimensionMismatch {
            expected: u.dim(),
            actual: v.dim(),
        });
    }
    Ok(())
}

pub fn cosine_similarity(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64> {
    check_dims(u, v)?;
    cosine_raw(u.as_slice(), v.as_slice()).ok_or(Error::ZeroNorm)
}

/// `None` when either side has zero norm. `sqrt(uu * vv)` makes
/// `cosine(v, v)` exactly 1.
pub(crate) fn cosine_raw(u: &[f64], v: &[f64]) -> Option<f64> {
    let uu = dot(u, u);
    let vv = dot(v, v);
    let denom = (uu * vv).sqrt();
    if denom == 0.0 || !denom.is_finite() {
        // fall back to normalizing first when the product under/overflows
        let (nu, nv) = (uu.sqrt(), vv.sqrt());
        if nu == 0.0 || nv == 0.0 {
            return None;
        }
        let c: f64 = u.iter().zip(v).map(|(a, b)| (a / nu) * (b / nv)).sum();
        return Some(c.clamp(-1.0, 1.0));
    }
    Some((dot(u, v) / denom).clamp(-1.0, 1.0))
}

pub fn l2_normalize(v: &EmbeddingVector) -> Result<EmbeddingVector> {
    let norm = v.norm();
    if norm == 0.0 {
        return Err(Error::ZeroNorm);
    }
    EmbeddingVector::new(v.as_slice().iter().map(|x| x / norm).collect())
}

/// Symmetric cosine-distance matrix, `1 - cos`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    n: usize,
    values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn from_embeddings(embeddings: &[&EmbeddingVector]) -> Result<Self> {
        let n = embeddings.len();
        if let Some(first) = embeddings.first() {
            for e in embeddings {
                check_dims(first, e)?;
            }
        }
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let c = cosine_raw(embeddings[i].as_slice(), embeddings[j].as_slice())
                    .ok_or(Error::ZeroNorm)?;
                let d = 1.0 - c;
                values[i * n + j] = d;
                values[j * n + i] = d;
            }
        }
        Ok(DistanceMatrix { n, values })
    }

    /// Builds from a full square matrix; used by tests and by callers with
    /// precomputed dissimilarities.
    pub fn from_square(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::InvalidParameter(format!(
                "expected {} entries, got {}",
                n * n,
                values.len()
            )));
        }
        for i in 0..n {
            if values[i * n + i] != 0.0 {
                return Err(Error::InvalidParameter("non-zero diagonal".into()));
            }
            for j in 0..n {
                let d = values[i * n + j];
                if !d.is_finite() || d < 0.0 || d != values[j * n + i] {
                    return Err(Error::InvalidParameter(format!(
                        "entry ({i}, {j}) is negative, non-finite or asymmetric"
                    )));
                }
            }
        }
        Ok(DistanceMatrix { n, values })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Restriction to the given ordinals, in the given order.
    pub fn submatrix(&self, ordinals: &[usize]) -> DistanceMatrix {
        let m = ordinals.len();
        let mut values = Vec::with_capacity(m * m);
        for &i in ordinals {
            for &j in ordinals {
                values.push(self.get(i, j));
            }
        }
        DistanceMatrix { n: m, values }
    }
}

pub fn pairwise_distance_matrix(gallery: &Gallery) -> Result<DistanceMatrix> {
    DistanceMatrix::from_embeddings(&gallery.embeddings())
}

/// `σ(exp(γ) · logit)`, with the scaled logit clamped to ±500.
pub fn tempered_sigmoid(logit: f64, gamma: f64) -> f64 {
    let z = (gamma.exp() * logit).clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
    1.0 / (1.0 + (-z).exp())
}

/// Topic × image confidence scores.
///
/// The cosine logits are kept next to the sigmoid values. In f64 the sigmoid
/// rounds to exactly 1.0 once the scaled logit passes ~37, so comparisons
/// that must respect the score order are done on the logits, which rank
/// identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceMatrix {
    rows: usize,
    cols: usize,
    gamma: f64,
    logits: Vec<f64>,
    values: Vec<f64>,
}

impl ConfidenceMatrix {
    pub fn from_embeddings(
        topics: &[&EmbeddingVector],
        images: &[&EmbeddingVector],
        gamma: f64,
    ) -> Result<Self> {
        if !gamma.is_finite() {
            return Err(Error::InvalidParameter(format!("gamma = {gamma}")));
        }
        let (rows, cols) = (topics.len(), images.len());
        let mut logits = Vec::with_capacity(rows * cols);
        for t in topics {
            for y in images {
                logits.push(cosine_similarity(t, y)?);
            }
        }
        let values = logits.iter().map(|&l| tempered_sigmoid(l, gamma)).collect();
        Ok(ConfidenceMatrix {
            rows,
            cols,
            gamma,
            logits,
            values,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    #[inline]
    pub fn logit(&self, i: usize, j: usize) -> f64 {
        self.logits[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    /// Highest-scoring cell among the given rows and columns. Ties go to
    /// the lowest row, then the lowest column, in iteration order.
    pub fn argmax_over(
        &self,
        rows: impl IntoIterator<Item = usize>,
        cols: &[usize],
    ) -> Option<(usize, usize)> {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in rows {
            for &j in cols {
                let l = self.logit(i, j);
                match best {
                    Some((_, _, b)) if l <= b => {}
                    _ => best = Some((i, j, l)),
                }
            }
        }
        best.map(|(i, j, _)| (i, j))
    }
}

/// Rows follow the profile's topic order, columns the gallery order.
pub fn confidence_matrix(
    profile: &SegmentProfile,
    gallery: &Gallery,
    gamma: f64,
) -> Result<ConfidenceMatrix> {
    let topics: Vec<_> = profile.topics.iter().map(|t| &t.embedding).collect();
    ConfidenceMatrix::from_embeddings(&topics, &gallery.embeddings(), gamma)
}
