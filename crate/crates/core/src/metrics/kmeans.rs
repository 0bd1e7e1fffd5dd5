use ndarray::{Array2, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    pub k: usize,
    pub seed: u64,
    pub inertia: f64,
    pub centers: Array2<f64>,
}

impl ClusterAssignment {
    /// Member indices of every cluster, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        members_of(&self.labels, self.k)
    }
}

pub fn members_of(labels: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); k];
    for (i, &l) in labels.iter().enumerate() {
        out[l].push(i);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KMeansOptions {
    pub restarts: usize,
    pub max_iter: usize,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self {
            restarts: 10,
            max_iter: 300,
        }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding, 10 restarts, Lloyd iterations to an assignment fixpoint
/// (at most 300). The lowest-inertia restart wins; labels are renumbered in
/// order of first appearance.
pub fn kmeans(points: ArrayView2<f64>, k: usize, seed: u64) -> Result<ClusterAssignment> {
    kmeans_with(points, k, seed, KMeansOptions::default(), |_, _| {})
}

/// As [`kmeans`], reporting `(restart, inertia)` after every assignment step.
pub fn kmeans_with(
    points: ArrayView2<f64>,
    k: usize,
    seed: u64,
    options: KMeansOptions,
    mut observe: impl FnMut(usize, f64),
) -> Result<ClusterAssignment> {
    let n = points.nrows();
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    if k > n {
        return Err(Error::TooManyClusters { k, n });
    }
    let rows: Vec<Vec<f64>> = points.rows().into_iter().map(|r| r.to_vec()).collect();

    let mut best: Option<(f64, Vec<usize>, Vec<Vec<f64>>)> = None;
    for restart in 0..options.restarts.max(1) {
        let mut rng = rng::stream(seed, &[rng::tag("kmeans"), restart as u64]);
        let mut centers = plus_plus(&rows, k, &mut rng);
        let mut labels = vec![usize::MAX; n];
        for _ in 0..options.max_iter.max(1) {
            let mut changed = false;
            let mut inertia = 0.0;
            for (i, row) in rows.iter().enumerate() {
                let (c, d) = nearest(row, &centers);
                inertia += d;
                if labels[i] != c {
                    labels[i] = c;
                    changed = true;
                }
            }
            inertia -= repair_empty(&rows, &mut labels, &mut centers);
            observe(restart, inertia);
            if !changed {
                break;
            }
            update_centers(&rows, &labels, &mut centers);
        }
        repair_empty(&rows, &mut labels, &mut centers);
        let inertia: f64 = rows
            .iter()
            .zip(&labels)
            .map(|(r, &l)| sq_dist(r, &centers[l]))
            .sum();
        if best.as_ref().is_none_or(|(b, _, _)| inertia < *b) {
            best = Some((inertia, labels, centers));
        }
    }

    let (inertia, labels, centers) = best.expect("at least one restart");
    let (labels, centers) = canonical_order(labels, centers, k);
    let dim = points.ncols();
    let centers = Array2::from_shape_vec((k, dim), centers.into_iter().flatten().collect())
        .expect("k centers of equal width");
    Ok(ClusterAssignment {
        labels,
        k,
        seed,
        inertia,
        centers,
    })
}

fn nearest(row: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.iter().enumerate() {
        let d = sq_dist(row, center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus(rows: &[Vec<f64>], k: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let n = rows.len();
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    let mut centers = vec![rows[first].clone()];
    let mut d2: Vec<f64> = rows.iter().map(|r| sq_dist(r, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if d > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // rounding can leave target beyond the accumulated sum
            pick.unwrap_or_else(|| d2.iter().rposition(|&d| d > 0.0).expect("total > 0"))
        } else {
            chosen.iter().position(|&c| !c).expect("k <= n")
        };
        chosen[pick] = true;
        centers.push(rows[pick].clone());
        for (i, r) in rows.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(r, &rows[pick]));
        }
    }
    centers
}

fn update_centers(rows: &[Vec<f64>], labels: &[usize], centers: &mut [Vec<f64>]) {
    let dim = rows.first().map_or(0, Vec::len);
    let mut sums = vec![vec![0.0; dim]; centers.len()];
    let mut counts = vec![0usize; centers.len()];
    for (r, &l) in rows.iter().zip(labels) {
        counts[l] += 1;
        for (s, v) in sums[l].iter_mut().zip(r) {
            *s += v;
        }
    }
    for ((center, sum), &count) in centers.iter_mut().zip(sums).zip(&counts) {
        if count > 0 {
            *center = sum.into_iter().map(|s| s / count as f64).collect();
        }
    }
}

/// Moves the point farthest from its own center into each empty cluster and
/// re-seeds that cluster's center on it. Returns the inertia removed.
fn repair_empty(rows: &[Vec<f64>], labels: &mut [usize], centers: &mut [Vec<f64>]) -> f64 {
    let mut removed = 0.0;
    loop {
        let mut counts = vec![0usize; centers.len()];
        for &l in labels.iter() {
            counts[l] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return removed;
        };
        let mut far = None::<(usize, f64)>;
        for (i, r) in rows.iter().enumerate() {
            if counts[labels[i]] < 2 {
                continue;
            }
            let d = sq_dist(r, &centers[labels[i]]);
            if far.is_none_or(|(_, fd)| d > fd) {
                far = Some((i, d));
            }
        }
        let (i, d) = far.expect("k <= n guarantees a cluster with two members");
        labels[i] = empty;
        centers[empty] = rows[i].clone();
        removed += d;
    }
}

fn canonical_order(
    labels: Vec<usize>,
    centers: Vec<Vec<f64>>,
    k: usize,
) -> (Vec<usize>, Vec<Vec<f64>>) {
    let mut map = vec![usize::MAX; k];
    let mut next = 0;
    for &l in &labels {
        if map[l] == usize::MAX {
            map[l] = next;
            next += 1;
        }
    }
    let mut ordered = vec![Vec::new(); k];
    for (old, center) in centers.into_iter().enumerate() {
        ordered[map[old]] = center;
    }
    (labels.into_iter().map(|l| map[l]).collect(), ordered)
}
