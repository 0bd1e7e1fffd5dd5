//! Cluster-quality evaluation of latent spaces: distances, cohesion and
//! separation, pairwise silhouettes, k-means and quadrant summaries.

mod ari;
mod distance;
mod evaluate;
mod kmeans;
mod silhouette;

pub use ari::adjusted_rand_index;
pub use distance::{dist_dtw, dist_euclidean, DenseDistances};
pub use evaluate::{
    evaluate_embedding, evaluate_labels, EvalConfig, Evaluation, OriginalSpace, Quadrant,
    QuadrantSummary, SilhouettePair,
};
pub use kmeans::{kmeans, kmeans_with, members_of, ClusterAssignment, KMeansOptions};
pub use silhouette::{cohesion, separation, silhouette_from_parts, silhouette_pair, silhouette_term};
