//! Alternating (Voronoi-iteration) k-medoids over a precomputed distance
//! matrix.
//!
//! Cluster ids are the rank of the cluster's medoid ordinal, so cluster 0
//! always holds the lowest-ordinal medoid. Assignment ties go to the lowest
//! cluster id; a medoid is always assigned to its own cluster.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simcore::DistanceMatrix;

pub const DEFAULT_MAX_ITER: usize = 300;
/// Runs per call: one from the requested init, the rest seeded k-medoids++.
pub const DEFAULT_RESTARTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Init {
    /// The k points with the smallest total distance to all others.
    #[default]
    Heuristic,
    /// k distinct points drawn with the seeded generator.
    Random,
    /// Seeded k-medoids++: each further medoid is drawn with probability
    /// proportional to its squared distance from the nearest chosen one.
    PlusPlus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub assignment: Vec<usize>,
    /// Medoid ordinals, ascending; `medoids[c]` is the medoid of cluster `c`.
    pub medoids: Vec<usize>,
    pub cost: f64,
    pub seed: u64,
    pub iterations_run: usize,
    /// Cost after the initial assignment and after every iteration.
    pub cost_history: Vec<f64>,
}

impl ClusterModel {
    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    /// Ordinals assigned to `cluster_id`, ascending.
    pub fn cluster_members(&self, cluster_id: usize) -> Result<Vec<usize>> {
        if cluster_id >= self.k {
            return Err(Error::ClusterOutOfRange {
                cluster: cluster_id,
                k: self.k,
            });
        }
        Ok(self
            .assignment
            .iter()
            .enumerate()
            .filter(|&(_, &c)| c == cluster_id)
            .map(|(j, _)| j)
            .collect())
    }

    /// All clusters' members at once, indexed by cluster id.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (j, &c) in self.assignment.iter().enumerate() {
            out[c].push(j);
        }
        out
    }
}

pub fn cluster_members(model: &ClusterModel, cluster_id: usize) -> Result<Vec<usize>> {
    model.cluster_members(cluster_id)
}

/// K-medoids from the heuristic start plus seeded k-medoids++ restarts;
/// the lowest-cost run wins, earlier runs winning ties.
pub fn kmedoids(distances: &DistanceMatrix, k: usize, seed: u64, max_iter: usize) -> Result<ClusterModel> {
    kmedoids_with_restarts(distances, k, seed, max_iter, Init::Heuristic, DEFAULT_RESTARTS)
}

pub fn kmedoids_with_restarts(
    distances: &DistanceMatrix,
    k: usize,
    seed: u64,
    max_iter: usize,
    init: Init,
    restarts: usize,
) -> Result<ClusterModel> {
    if restarts == 0 {
        return Err(Error::InvalidParameter("restarts must be at least 1".into()));
    }
    let mut best = run(distances, k, seed, max_iter, init, 0)?;
    for r in 1..restarts {
        let model = run(distances, k, seed, max_iter, Init::PlusPlus, r as u64)?;
        if model.cost < best.cost {
            best = model;
        }
    }
    Ok(best)
}

/// A single run from `init`.
pub fn kmedoids_with_init(
    distances: &DistanceMatrix,
    k: usize,
    seed: u64,
    max_iter: usize,
    init: Init,
) -> Result<ClusterModel> {
    run(distances, k, seed, max_iter, init, 0)
}

fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn run(
    distances: &DistanceMatrix,
    k: usize,
    seed: u64,
    max_iter: usize,
    init: Init,
    stream: u64,
) -> Result<ClusterModel> {
    let n = distances.len();
    if k == 0 || k > n {
        return Err(Error::InvalidK { k, n });
    }
    if max_iter == 0 {
        return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
    }

    let mut medoids = match init {
        Init::Heuristic => heuristic_init(distances, k),
        Init::Random => sample(&mut seeded(seed, stream), n, k).into_vec(),
        Init::PlusPlus => plus_plus_init(distances, k, &mut seeded(seed, stream)),
    };
    medoids.sort_unstable();

    let (mut assignment, mut cost) = assign(distances, &medoids);
    let mut cost_history = vec![cost];
    let mut iterations_run = 0;

    while iterations_run < max_iter {
        iterations_run += 1;
        let mut next = update_medoids(distances, &medoids, &assignment);
        next.sort_unstable();
        if next == medoids {
            break;
        }
        medoids = next;
        let (a, c) = assign(distances, &medoids);
        assignment = a;
        cost = c;
        cost_history.push(cost);
    }

    Ok(ClusterModel {
        k,
        assignment,
        medoids,
        cost,
        seed,
        iterations_run,
        cost_history,
    })
}

fn heuristic_init(d: &DistanceMatrix, k: usize) -> Vec<usize> {
    let mut totals: Vec<(f64, usize)> = (0..d.len()).map(|i| (d.row(i).iter().sum(), i)).collect();
    totals.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    totals.into_iter().take(k).map(|(_, i)| i).collect()
}

fn plus_plus_init(d: &DistanceMatrix, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = d.len();
    let mut medoids = vec![rng.random_range(0..n)];
    let mut nearest: Vec<f64> = d.row(medoids[0]).to_vec();
    while medoids.len() < k {
        let weights: Vec<f64> = (0..n)
            .map(|j| if medoids.contains(&j) { 0.0 } else { nearest[j] * nearest[j] })
            .collect();
        let next = match WeightedIndex::new(&weights) {
            Ok(w) => w.sample(rng),
            // every remaining point duplicates a medoid
            Err(_) => {
                let free: Vec<usize> = (0..n).filter(|j| !medoids.contains(j)).collect();
                free[rng.random_range(0..free.len())]
            }
        };
        medoids.push(next);
        for (j, slot) in nearest.iter_mut().enumerate() {
            *slot = slot.min(d.get(next, j));
        }
    }
    medoids
}

/// `medoids` must be sorted ascending.
fn assign(d: &DistanceMatrix, medoids: &[usize]) -> (Vec<usize>, f64) {
    let n = d.len();
    let mut assignment = vec![0; n];
    let mut cost = 0.0;
    for (j, slot) in assignment.iter_mut().enumerate() {
        if let Ok(own) = medoids.binary_search(&j) {
            *slot = own;
            continue;
        }
        let mut best = 0;
        let mut best_d = d.get(j, medoids[0]);
        for (c, &m) in medoids.iter().enumerate().skip(1) {
            let dm = d.get(j, m);
            if dm < best_d {
                best = c;
                best_d = dm;
            }
        }
        *slot = best;
        cost += best_d;
    }
    (assignment, cost)
}

/// Per cluster, the member with the least total distance to the other
/// members. The current medoid is kept on ties so the loop terminates.
fn update_medoids(d: &DistanceMatrix, medoids: &[usize], assignment: &[usize]) -> Vec<usize> {
    let mut members = vec![Vec::new(); medoids.len()];
    for (j, &c) in assignment.iter().enumerate() {
        members[c].push(j);
    }
    medoids
        .iter()
        .zip(&members)
        .map(|(&current, group)| {
            let total = |i: usize| group.iter().map(|&j| d.get(i, j)).sum::<f64>();
            let mut best = current;
            let mut best_cost = total(current);
            for &i in group {
                let c = total(i);
                if c < best_cost {
                    best = i;
                    best_cost = c;
                }
            }
            best
        })
        .collect()
}
