#![allow(clippy::needless_range_loop)]

//! Naive re-implementations used as test oracles. Nothing here calls into
//! the summarize or metrics modules; clustering is taken as an input, the
//! same way the selection algorithm receives its cluster assignment.

use xsum_core::clustering::{kmedoids, DEFAULT_MAX_ITER};
use xsum_core::simcore::DistanceMatrix;
use xsum_core::{Gallery, SegmentProfile};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

pub fn cos(a: &[f64], b: &[f64]) -> f64 {
    let c = dot(a, b) / (dot(a, a).sqrt() * dot(b, b).sqrt());
    c.clamp(-1.0, 1.0)
}

pub fn sigmoid(x: f64) -> f64 {
    let x = x.clamp(-500.0, 500.0);
    1.0 / (1.0 + (-x).exp())
}

fn emb(g: &Gallery, j: usize) -> &[f64] {
    g.images[j].embedding.as_slice()
}

fn prob(g: &Gallery, j: usize, class: &str) -> f64 {
    match g.images[j].class_probs.get(class) {
        Some(&p) => p,
        None => 0.0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleStep {
    pub ordinal: usize,
    pub cluster: usize,
    pub topic: Option<usize>,
    pub score: Option<f64>,
    pub replenished: bool,
}

pub fn oracle_filter(g: &Gallery, p: &SegmentProfile, class_threshold: f64) -> Vec<usize> {
    let mut kept = Vec::new();
    for j in 0..g.images.len() {
        let mut keep = false;
        for c in &p.relevant_classes {
            if let Some(&v) = g.images[j].class_probs.get(c) {
                if v >= class_threshold {
                    keep = true;
                }
            }
        }
        if keep {
            kept.push(j);
        }
    }
    kept
}

/// Filter, cluster, then for each cluster in ascending id pick the best
/// (active topic, member) pair; the used topic is retired and the full
/// topic set comes back once all are retired. Ties go to the lower topic
/// index, then the lower ordinal. Pairs are ranked on the sigmoid's
/// argument, which orders them the same way as the sigmoid itself.
pub fn oracle_alg1(
    g: &Gallery,
    p: &SegmentProfile,
    k: usize,
    seed: u64,
    gamma: f64,
    class_threshold: f64,
) -> Result<Vec<OracleStep>, String> {
    let kept = oracle_filter(g, p, class_threshold);
    if kept.is_empty() {
        return Err("no relevant images".into());
    }
    let m = kept.len();
    let mut d = vec![0.0; m * m];
    for a in 0..m {
        for b in 0..m {
            if a != b {
                d[a * m + b] = 1.0 - cos(emb(g, kept[a]), emb(g, kept[b]));
            }
        }
    }
    let kk = if k < m { k } else { m };
    let model = kmedoids(&DistanceMatrix::from_square(m, d).unwrap(), kk, seed, DEFAULT_MAX_ITER)
        .map_err(|e| e.to_string())?;

    let nt = p.topics.len();
    let mut steps = Vec::new();
    if nt == 0 {
        for c in 0..kk {
            steps.push(OracleStep {
                ordinal: kept[model.medoids[c]],
                cluster: c,
                topic: None,
                score: None,
                replenished: false,
            });
        }
        return Ok(steps);
    }

    let mut active = vec![true; nt];
    for c in 0..kk {
        let mut replenished = false;
        if !active.contains(&true) {
            for a in active.iter_mut() {
                *a = true;
            }
            replenished = true;
        }
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..nt {
            if !active[i] {
                continue;
            }
            for pos in 0..m {
                if model.assignment[pos] != c {
                    continue;
                }
                let v = cos(p.topics[i].embedding.as_slice(), emb(g, kept[pos]));
                let better = match best {
                    None => true,
                    Some((_, _, bv)) => v > bv,
                };
                if better {
                    best = Some((i, pos, v));
                }
            }
        }
        let (i, pos, v) = best.expect("non-empty cluster");
        active[i] = false;
        steps.push(OracleStep {
            ordinal: kept[pos],
            cluster: c,
            topic: Some(i),
            score: Some(sigmoid(gamma.exp() * v)),
            replenished,
        });
    }
    Ok(steps)
}

/// Iterated global argmax over (topic, remaining image), deleting the
/// chosen image's column. Returns (ordinal, topic index) per step.
pub fn oracle_topic_based(
    g: &Gallery,
    p: &SegmentProfile,
    k: usize,
    class_threshold: f64,
) -> Vec<(usize, usize)> {
    let kept = oracle_filter(g, p, class_threshold);
    let mut taken = vec![false; kept.len()];
    let mut out = Vec::new();
    while out.len() < k {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..p.topics.len() {
            for pos in 0..kept.len() {
                if taken[pos] {
                    continue;
                }
                let v = cos(p.topics[i].embedding.as_slice(), emb(g, kept[pos]));
                if best.is_none() || v > best.unwrap().2 {
                    best = Some((i, pos, v));
                }
            }
        }
        match best {
            Some((i, pos, _)) => {
                taken[pos] = true;
                out.push((kept[pos], i));
            }
            None => break,
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleMetrics {
    pub div: f64,
    pub repr: Option<f64>,
    pub cov: Option<f64>,
    pub rcov: Option<f64>,
}

pub fn oracle_metrics(g: &Gallery, p: &SegmentProfile, selected: &[usize], gamma: f64) -> OracleMetrics {
    let n = g.images.len();
    let mut sel: Vec<usize> = Vec::new();
    for &j in selected {
        if !sel.contains(&j) {
            sel.push(j);
        }
    }

    let mut g_max: f64 = 0.0;
    for a in 0..n {
        for b in 0..n {
            if a != b {
                g_max = g_max.max(1.0 - cos(emb(g, a), emb(g, b)));
            }
        }
    }
    let mut s_max: f64 = 0.0;
    for &a in &sel {
        for &b in &sel {
            if a != b {
                s_max = s_max.max(1.0 - cos(emb(g, a), emb(g, b)));
            }
        }
    }
    let div = if g_max == 0.0 {
        1.0
    } else if sel.len() < 2 {
        0.0
    } else {
        s_max / g_max
    };

    let dim = emb(g, 0).len();
    let mut mu_g = vec![0.0; dim];
    let mut mu_s = vec![0.0; dim];
    for j in 0..n {
        for t in 0..dim {
            mu_g[t] += emb(g, j)[t] / n as f64;
        }
    }
    for &j in &sel {
        for t in 0..dim {
            mu_s[t] += emb(g, j)[t] / sel.len() as f64;
        }
    }
    let repr = if dot(&mu_g, &mu_g) == 0.0 || dot(&mu_s, &mu_s) == 0.0 {
        None
    } else {
        Some(cos(&mu_g, &mu_s))
    };

    let mut cov_terms = Vec::new();
    for c in &p.relevant_classes {
        let mut pg: f64 = 0.0;
        for j in 0..n {
            pg = pg.max(prob(g, j, c));
        }
        if pg < 1e-9 {
            continue;
        }
        let mut ps: f64 = 0.0;
        for &j in &sel {
            ps = ps.max(prob(g, j, c));
        }
        cov_terms.push(ps / pg);
    }
    let cov = if cov_terms.is_empty() {
        None
    } else {
        Some(cov_terms.iter().sum::<f64>() / cov_terms.len() as f64)
    };

    let mut rcov_terms = Vec::new();
    for t in &p.topics {
        let s = |j: usize| sigmoid(gamma.exp() * cos(t.embedding.as_slice(), emb(g, j)));
        let mut all: f64 = 0.0;
        for j in 0..n {
            all = all.max(s(j));
        }
        let mut best: f64 = 0.0;
        for &j in &sel {
            best = best.max(s(j));
        }
        rcov_terms.push(best / all);
    }
    let rcov = if rcov_terms.is_empty() {
        None
    } else {
        Some(rcov_terms.iter().sum::<f64>() / rcov_terms.len() as f64)
    };

    OracleMetrics { div, repr, cov, rcov }
}

/// Lowest total distance to the nearest medoid over every k-subset.
pub fn brute_force_kmedoids(d: &DistanceMatrix, k: usize) -> f64 {
    let n = d.len();
    let mut best = f64::INFINITY;
    for mask in 0u64..(1u64 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let mut cost = 0.0;
        for j in 0..n {
            let mut nearest = f64::INFINITY;
            for m in 0..n {
                if mask >> m & 1 == 1 {
                    nearest = nearest.min(d.get(j, m));
                }
            }
            cost += nearest;
        }
        best = best.min(cost);
    }
    best
}
