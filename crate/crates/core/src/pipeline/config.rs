use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::io::load_graph;
use crate::dataset::{NormScheme, StreetGraph};
use crate::error::{Error, Result};
use crate::fusion::ModelSpecs;
use crate::metrics::EvalConfig;
use crate::synth::{grid_graph, SynthConfig};
use crate::tsne::TsneConfig;

/// Default per-cluster cap for DTW scoring on user-supplied data.
pub const REAL_DATA_SUBSAMPLE_CAP: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphSource {
    /// Jittered street grid with `rows × cols` nodes.
    Grid { rows: usize, cols: usize, seed: u64 },
    /// `nodes.csv` / `edges.csv` pair.
    Files { nodes: PathBuf, edges: PathBuf },
}

impl GraphSource {
    pub fn build(&self) -> Result<StreetGraph> {
        match self {
            GraphSource::Grid { rows, cols, seed } => grid_graph(*rows, *cols, *seed),
            GraphSource::Files { nodes, edges } => load_graph(nodes, edges),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Synthetic { graph: GraphSource, synth: SynthConfig },
    /// Directory in the dataset CSV layout.
    Directory { path: PathBuf },
}

/// Everything needed to regenerate a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub source: DataSource,
    #[serde(default)]
    pub normalization: NormScheme,
    #[serde(default)]
    pub models: ModelSpecs,
    #[serde(default)]
    pub evaluation: EvalConfig,
    #[serde(default)]
    pub tsne: TsneConfig,
}

/// Synthetic 40×50 street grid (2,000 nodes) with default generator and
/// model settings.
impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::synthetic(
            GraphSource::Grid {
                rows: 40,
                cols: 50,
                seed: 0,
            },
            SynthConfig::default(),
        )
    }
}

impl ExperimentConfig {
    pub fn synthetic(graph: GraphSource, synth: SynthConfig) -> Self {
        Self {
            source: DataSource::Synthetic { graph, synth },
            normalization: NormScheme::default(),
            models: ModelSpecs::default(),
            evaluation: EvalConfig::default(),
            tsne: TsneConfig::default(),
        }
    }

    /// Real data: DTW scoring is subsampled unless a cap is already set.
    pub fn directory(path: PathBuf) -> Self {
        Self {
            source: DataSource::Directory { path },
            normalization: NormScheme::default(),
            models: ModelSpecs::default(),
            evaluation: EvalConfig {
                subsample_cap: Some(REAL_DATA_SUBSAMPLE_CAP),
                ..EvalConfig::default()
            },
            tsne: TsneConfig::default(),
        }
    }

    /// Sets every seed (data, models, clustering, projection) to `seed`.
    pub fn with_seed(mut self, seed: u64) -> Self {
        if let DataSource::Synthetic { synth, .. } = &mut self.source {
            synth.seed = seed;
        }
        self.models.seed = seed;
        self.evaluation.seed = seed;
        self.tsne.seed = seed;
        self
    }

    /// Parses a config. User-supplied data always gets a DTW subsample cap;
    /// set a large one to score every member.
    pub fn from_json(text: &str) -> Result<Self> {
        let mut config: Self = serde_json::from_str(text).map_err(|e| Error::json("experiment config", e))?;
        if matches!(config.source, DataSource::Directory { .. }) && config.evaluation.subsample_cap.is_none() {
            config.evaluation.subsample_cap = Some(REAL_DATA_SUBSAMPLE_CAP);
        }
        Ok(config)
    }

    /// Reads a config file. Relative data paths are resolved against the
    /// file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut config.source {
            DataSource::Directory { path } => resolve(path),
            DataSource::Synthetic {
                graph: GraphSource::Files { nodes, edges },
                ..
            } => {
                resolve(nodes);
                resolve(edges);
            }
            DataSource::Synthetic { .. } => {}
        }
        Ok(config)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::json("experiment config", e))
    }

    /// Hex SHA-256 prefix of the canonical JSON form; names the session
    /// directory.
    pub fn hash(&self) -> Result<String> {
        let canonical = serde_json::to_vec(self).map_err(|e| Error::json("experiment config", e))?;
        let digest = Sha256::digest(&canonical);
        Ok(hex::encode(&digest[..8]))
    }

    pub fn validate(&self) -> Result<()> {
        if let DataSource::Synthetic { synth, .. } = &self.source {
            synth.validate()?;
        }
        if self.evaluation.k < 2 {
            return Err(Error::Config(format!("evaluation k = {} (need >= 2)", self.evaluation.k)));
        }
        Ok(())
    }
}
