//! Controlled synthetic data on a street graph: spatial k-means clusters,
//! Gaussian static features with cluster-specific means, and Fourier-based
//! cluster series with per-node noise.

use std::f64::consts::TAU;

use ndarray::Array2;
use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FeatureColumn, Node, StreetGraph, YearMonth};
use crate::error::{Error, Result};
use crate::metrics::kmeans;
use crate::rng;

/// Highest harmonic frequency, in cycles over the whole series.
pub const MAX_FREQUENCY: u32 = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub k_clusters: usize,
    pub n_static: usize,
    pub n_timesteps: usize,
    pub static_mean_range: (f64, f64),
    pub static_sigma: f64,
    pub n_harmonics: usize,
    pub amplitude_range: (f64, f64),
    pub offset_range: (f64, f64),
    pub noise_sigma: f64,
    pub start: YearMonth,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            k_clusters: 12,
            n_static: 11,
            n_timesteps: 144,
            static_mean_range: (0.0, 10.0),
            static_sigma: 1.0,
            n_harmonics: 3,
            amplitude_range: (1.0, 4.0),
            offset_range: (2.0, 8.0),
            noise_sigma: 0.5,
            start: YearMonth { year: 2004, month: 1 },
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.k_clusters < 2 {
            return bad(format!("k_clusters = {} (need >= 2)", self.k_clusters));
        }
        if self.n_static == 0 || self.n_timesteps == 0 {
            return bad("n_static and n_timesteps must be positive".into());
        }
        for (name, (lo, hi)) in [
            ("static_mean_range", self.static_mean_range),
            ("amplitude_range", self.amplitude_range),
            ("offset_range", self.offset_range),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return bad(format!("{name} [{lo}, {hi}] is degenerate"));
            }
        }
        if !(self.static_sigma >= 0.0 && self.noise_sigma >= 0.0) {
            return bad("sigma values must be >= 0".into());
        }
        if self.n_harmonics > MAX_FREQUENCY as usize {
            return bad(format!(
                "n_harmonics = {} exceeds the {MAX_FREQUENCY} available frequencies",
                self.n_harmonics
            ));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::json("synth config", e))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn uniform(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    lo + rng.random::<f64>() * (hi - lo)
}

/// k-means (k-means++ init, fixed seed) on node `(lon, lat)`.
pub fn spatial_clusters(graph: &StreetGraph, k: usize, seed: u64) -> Result<Vec<usize>> {
    let coords = Array2::from_shape_fn((graph.len(), 2), |(i, c)| {
        let n = graph.nodes()[i];
        if c == 0 {
            n.lon
        } else {
            n.lat
        }
    });
    Ok(kmeans(coords.view(), k, rng::derive_seed(seed, &[rng::tag("spatial")]))?.labels)
}

fn check_labels(labels: &[usize], k: usize) -> Result<()> {
    match labels.iter().find(|&&l| l >= k) {
        Some(l) => Err(Error::Config(format!("label {l} outside [0, {k})"))),
        None => Ok(()),
    }
}

/// Per-cluster feature means, `k × p`, uniform in `static_mean_range`.
pub fn cluster_means(config: &SynthConfig) -> Array2<f64> {
    let mut means = Array2::zeros((config.k_clusters, config.n_static));
    for (c, mut row) in means.rows_mut().into_iter().enumerate() {
        let mut rng = rng::stream(config.seed, &[rng::tag("static-mean"), c as u64]);
        row.iter_mut()
            .for_each(|m| *m = uniform(&mut rng, config.static_mean_range));
    }
    means
}

/// Static matrix: feature `j` of a node in cluster `c` is drawn from
/// `Normal(mean[c][j], static_sigma²)`.
pub fn gen_static(labels: &[usize], config: &SynthConfig) -> Result<Array2<f64>> {
    config.validate()?;
    check_labels(labels, config.k_clusters)?;
    let means = cluster_means(config);
    let mut out = Array2::zeros((labels.len(), config.n_static));
    for (i, mut row) in out.rows_mut().into_iter().enumerate() {
        let mut rng = rng::stream(config.seed, &[rng::tag("static-node"), i as u64]);
        for (j, v) in row.iter_mut().enumerate() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v = means[[labels[i], j]] + config.static_sigma * z;
        }
    }
    Ok(out)
}

/// One harmonic of a cluster pattern.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub frequency: u32,
    pub amplitude: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterPattern {
    pub offset: f64,
    pub harmonics: Vec<Harmonic>,
}

impl ClusterPattern {
    pub fn value(&self, t: usize, n_timesteps: usize) -> f64 {
        self.offset
            + self
                .harmonics
                .iter()
                .map(|h| {
                    h.amplitude
                        * (TAU * h.frequency as f64 * t as f64 / n_timesteps as f64 + h.phase).sin()
                })
                .sum::<f64>()
    }
}

/// Seeded base patterns, one per cluster. Frequencies within a cluster are
/// distinct integers in `1..=6`.
pub fn cluster_patterns(config: &SynthConfig) -> Vec<ClusterPattern> {
    (0..config.k_clusters)
        .map(|c| {
            let mut rng = rng::stream(config.seed, &[rng::tag("pattern"), c as u64]);
            let offset = uniform(&mut rng, config.offset_range);
            let mut freqs: Vec<u32> = index::sample(&mut rng, MAX_FREQUENCY as usize, config.n_harmonics)
                .into_iter()
                .map(|f| f as u32 + 1)
                .collect();
            freqs.sort_unstable();
            let harmonics = freqs
                .into_iter()
                .map(|frequency| Harmonic {
                    frequency,
                    amplitude: uniform(&mut rng, config.amplitude_range),
                    phase: uniform(&mut rng, (0.0, TAU)),
                })
                .collect();
            ClusterPattern { offset, harmonics }
        })
        .collect()
}

/// Base series as a `k × T` matrix.
pub fn pattern_matrix(config: &SynthConfig) -> Array2<f64> {
    let patterns = cluster_patterns(config);
    Array2::from_shape_fn((config.k_clusters, config.n_timesteps), |(c, t)| {
        patterns[c].value(t, config.n_timesteps)
    })
}

/// Node series: cluster pattern plus i.i.d. Gaussian noise per time step,
/// clamped at zero so values stay count-like.
pub fn gen_dynamic(labels: &[usize], config: &SynthConfig) -> Result<Array2<f64>> {
    config.validate()?;
    check_labels(labels, config.k_clusters)?;
    let base = pattern_matrix(config);
    let mut out = Array2::zeros((labels.len(), config.n_timesteps));
    for (i, mut row) in out.rows_mut().into_iter().enumerate() {
        let mut rng = rng::stream(config.seed, &[rng::tag("dynamic-node"), i as u64]);
        for (t, v) in row.iter_mut().enumerate() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v = (base[[labels[i], t]] + config.noise_sigma * z).max(0.0);
        }
    }
    Ok(out)
}

/// Full synthetic dataset on `graph` with ground-truth labels attached.
pub fn generate(graph: &StreetGraph, config: &SynthConfig) -> Result<Dataset> {
    config.validate()?;
    if config.k_clusters > graph.len() {
        return Err(Error::TooManyClusters {
            k: config.k_clusters,
            n: graph.len(),
        });
    }
    let labels = spatial_clusters(graph, config.k_clusters, config.seed)?;
    let static_features = gen_static(&labels, config)?;
    let dynamic_series = gen_dynamic(&labels, config)?;
    let columns = (1..=config.n_static)
        .map(|j| FeatureColumn::new(format!("s{j:02}")))
        .collect();
    Dataset::new(
        graph.clone(),
        columns,
        static_features,
        dynamic_series,
        config.start.range(config.n_timesteps),
        Some(labels),
    )
}

/// Jittered rectangular street grid at a fixed city-scale origin, with
/// 4-neighbour edges. Node ids are `1..=rows*cols` in row-major order.
pub fn grid_graph(rows: usize, cols: usize, seed: u64) -> Result<StreetGraph> {
    const SPACING_DEG: f64 = 0.001;
    const ORIGIN: (f64, f64) = (-46.66, -23.58);
    let mut rng = rng::stream(seed, &[rng::tag("grid")]);
    let mut nodes = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let jitter = |rng: &mut rand_chacha::ChaCha8Rng| (rng.random::<f64>() - 0.5) * 0.4 * SPACING_DEG;
            nodes.push(Node {
                id: (r * cols + c + 1) as u64,
                lon: ORIGIN.0 + c as f64 * SPACING_DEG + jitter(&mut rng),
                lat: ORIGIN.1 + r as f64 * SPACING_DEG + jitter(&mut rng),
            });
        }
    }
    let id = |r: usize, c: usize| (r * cols + c + 1) as u64;
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                edges.push((id(r, c), id(r, c + 1)));
            }
            if r + 1 < rows {
                edges.push((id(r, c), id(r + 1, c)));
            }
        }
    }
    StreetGraph::new(nodes, &edges)
}
