use ndarray::{Array2, ArrayView2};
use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::distance::{dist_euclidean, dtw_unchecked, DenseDistances};
use super::kmeans::{kmeans, members_of, ClusterAssignment};
use super::silhouette::{cohesion, separation, silhouette_from_parts};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng;

/// Static and dynamic scores for one unordered pair of latent clusters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SilhouettePair {
    pub cluster_a: usize,
    pub cluster_b: usize,
    pub s_static: f64,
    pub s_dynamic: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quadrant {
    TopRight,
    TopLeft,
    BottomRight,
    BottomLeft,
}

impl Quadrant {
    /// Static score on x, dynamic on y; only strictly positive scores
    /// count as well formed.
    pub fn of(pair: &SilhouettePair) -> Self {
        match (pair.s_static > 0.0, pair.s_dynamic > 0.0) {
            (true, true) => Quadrant::TopRight,
            (false, true) => Quadrant::TopLeft,
            (true, false) => Quadrant::BottomRight,
            (false, false) => Quadrant::BottomLeft,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct QuadrantSummary {
    pub top_right: usize,
    pub top_left: usize,
    pub bottom_right: usize,
    pub bottom_left: usize,
    pub tr_fraction: f64,
    pub tl_fraction: f64,
    pub br_fraction: f64,
    pub bl_fraction: f64,
}

impl QuadrantSummary {
    pub fn from_pairs(pairs: &[SilhouettePair]) -> Self {
        let mut s = Self::default();
        for p in pairs {
            match Quadrant::of(p) {
                Quadrant::TopRight => s.top_right += 1,
                Quadrant::TopLeft => s.top_left += 1,
                Quadrant::BottomRight => s.bottom_right += 1,
                Quadrant::BottomLeft => s.bottom_left += 1,
            }
        }
        let total = pairs.len();
        if total > 0 {
            let f = |c: usize| c as f64 / total as f64;
            s.tr_fraction = f(s.top_right);
            s.tl_fraction = f(s.top_left);
            s.br_fraction = f(s.bottom_right);
            s.bl_fraction = f(s.bottom_left);
        }
        s
    }

    pub fn total(&self) -> usize {
        self.top_right + self.top_left + self.bottom_right + self.bottom_left
    }
}

/// The original (pre-encoding) feature spaces in which cluster quality is
/// measured: Euclidean over static rows, DTW over dynamic rows.
/// Optionally holds full pairwise matrices so several embeddings of the same
/// dataset can be scored without recomputing distances.
#[derive(Debug, Clone)]
pub struct OriginalSpace {
    static_rows: Array2<f64>,
    dynamic_rows: Array2<f64>,
    dense: Option<(DenseDistances, DenseDistances)>,
}

impl OriginalSpace {
    pub fn new(static_rows: Array2<f64>, dynamic_rows: Array2<f64>) -> Result<Self> {
        if static_rows.nrows() != dynamic_rows.nrows() {
            return Err(Error::CountMismatch {
                left_name: "static rows".into(),
                left: static_rows.nrows(),
                right_name: "dynamic rows".into(),
                right: dynamic_rows.nrows(),
            });
        }
        if dynamic_rows.ncols() == 0 {
            return Err(Error::EmptySeries);
        }
        Ok(Self {
            static_rows,
            dynamic_rows,
            dense: None,
        })
    }

    pub fn from_dataset(dataset: &Dataset) -> Result<Self> {
        Self::new(
            dataset.static_features().clone(),
            dataset.dynamic_series().clone(),
        )
    }

    /// Precomputes all pairwise static and DTW distances (O(n²·T²)).
    pub fn with_dense_distances(mut self) -> Result<Self> {
        let s = DenseDistances::euclidean(self.static_rows.view());
        let d = DenseDistances::dtw(self.dynamic_rows.view())?;
        self.dense = Some((s, d));
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.static_rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Distance matrices restricted to `nodes`, indexed by position in
    /// `nodes`.
    fn local_distances(&self, nodes: &[usize]) -> (DenseDistances, DenseDistances) {
        match &self.dense {
            Some((s, d)) => (
                DenseDistances::build(nodes.len(), |i, j| s.get(nodes[i], nodes[j])),
                DenseDistances::build(nodes.len(), |i, j| d.get(nodes[i], nodes[j])),
            ),
            None => {
                let srows: Vec<Vec<f64>> = nodes.iter().map(|&v| self.static_rows.row(v).to_vec()).collect();
                let drows: Vec<Vec<f64>> = nodes.iter().map(|&v| self.dynamic_rows.row(v).to_vec()).collect();
                let mut scratch = Vec::new();
                (
                    DenseDistances::build(nodes.len(), |i, j| dist_euclidean(&srows[i], &srows[j])),
                    DenseDistances::build(nodes.len(), |i, j| {
                        dtw_unchecked(&drows[i], &drows[j], &mut scratch)
                    }),
                )
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub k: usize,
    pub seed: u64,
    /// Maximum members per cluster used for silhouette scoring; `None`
    /// scores every member.
    pub subsample_cap: Option<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            k: 12,
            seed: 0,
            subsample_cap: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub assignment: ClusterAssignment,
    pub pairs: Vec<SilhouettePair>,
    pub quadrants: QuadrantSummary,
}

/// Clusters the embedding with k-means and scores every cluster pair in the
/// original static and dynamic spaces.
pub fn evaluate_embedding(
    space: &OriginalSpace,
    embedding: ArrayView2<f64>,
    config: &EvalConfig,
) -> Result<Evaluation> {
    if embedding.nrows() != space.len() {
        return Err(Error::CountMismatch {
            left_name: "dataset".into(),
            left: space.len(),
            right_name: "embedding".into(),
            right: embedding.nrows(),
        });
    }
    let assignment = kmeans(embedding, config.k, config.seed)?;
    let pairs = evaluate_labels(space, &assignment.labels, config.k, config.subsample_cap, config.seed)?;
    let quadrants = QuadrantSummary::from_pairs(&pairs);
    Ok(Evaluation {
        assignment,
        pairs,
        quadrants,
    })
}

/// Pair scores for a given labeling, pairs ordered `(0,1), (0,2), …`.
pub fn evaluate_labels(
    space: &OriginalSpace,
    labels: &[usize],
    k: usize,
    subsample_cap: Option<usize>,
    seed: u64,
) -> Result<Vec<SilhouettePair>> {
    if labels.len() != space.len() {
        return Err(Error::CountMismatch {
            left_name: "dataset".into(),
            left: space.len(),
            right_name: "labels".into(),
            right: labels.len(),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::Config(format!("label {bad} outside [0, {k})")));
    }
    let mut members = members_of(labels, k);
    if let Some(cap) = subsample_cap {
        for (c, m) in members.iter_mut().enumerate() {
            if m.len() > cap {
                let mut rng = rng::stream(seed, &[rng::tag("subsample"), c as u64]);
                let mut picked: Vec<usize> = index::sample(&mut rng, m.len(), cap)
                    .into_iter()
                    .map(|i| m[i])
                    .collect();
                picked.sort_unstable();
                *m = picked;
            }
        }
    }
    if let Some(c) = members.iter().position(Vec::is_empty) {
        return Err(Error::EmptyCluster(c));
    }

    // Re-index the scored nodes locally so distances come from one matrix.
    let nodes: Vec<usize> = members.iter().flatten().copied().collect();
    let mut local = Vec::with_capacity(k);
    let mut start = 0;
    for m in &members {
        local.push((start..start + m.len()).collect::<Vec<_>>());
        start += m.len();
    }
    let (ds, dd) = space.local_distances(&nodes);
    let fs = |i: usize, j: usize| ds.get(i, j);
    let fd = |i: usize, j: usize| dd.get(i, j);

    let a_static: Vec<f64> = local.iter().map(|m| cohesion(m, &fs)).collect();
    let a_dynamic: Vec<f64> = local.iter().map(|m| cohesion(m, &fd)).collect();
    let mut pairs = Vec::with_capacity(k * k.saturating_sub(1) / 2);
    for a in 0..k {
        for b in a + 1..k {
            let b_static = separation(&local[a], &local[b], &fs);
            let b_dynamic = separation(&local[a], &local[b], &fd);
            pairs.push(SilhouettePair {
                cluster_a: a,
                cluster_b: b,
                s_static: silhouette_from_parts(a_static[a], a_static[b], b_static),
                s_dynamic: silhouette_from_parts(a_dynamic[a], a_dynamic[b], b_dynamic),
            });
        }
    }
    Ok(pairs)
}
