use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::autoencoder::AutoencoderSpec;
use super::layer::MeanAggregator;
use super::train::train;
use crate::error::{Error, Result};

/// Cartesian grid over autoencoder hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecGrid {
    pub hidden_dims: Vec<usize>,
    pub latent_dims: Vec<usize>,
    pub learning_rates: Vec<f64>,
    pub use_gate: Vec<bool>,
    pub epochs: usize,
    pub seed: u64,
}

impl SpecGrid {
    pub fn cells(&self, input_dim: usize) -> Vec<AutoencoderSpec> {
        let mut out = Vec::new();
        for &hidden_dim in &self.hidden_dims {
            for &latent_dim in &self.latent_dims {
                for &learning_rate in &self.learning_rates {
                    for &use_gate in &self.use_gate {
                        out.push(AutoencoderSpec {
                            input_dim,
                            hidden_dim,
                            latent_dim,
                            use_gate,
                            epochs: self.epochs,
                            learning_rate,
                            seed: self.seed,
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub spec: AutoencoderSpec,
    /// `None` when training diverged.
    pub final_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: AutoencoderSpec,
    pub cells: Vec<GridCell>,
}

/// Trains every cell and returns the lowest final reconstruction loss.
/// Equal losses prefer the smaller latent dimension, then the lower
/// learning rate.
pub fn grid_search(grid: &SpecGrid, features: ArrayView2<f64>, aggregator: &MeanAggregator) -> Result<GridResult> {
    let specs = grid.cells(features.ncols());
    if specs.is_empty() {
        return Err(Error::Config("empty hyperparameter grid".into()));
    }
    for s in &specs {
        s.validate()?;
    }
    let mut cells = Vec::with_capacity(specs.len());
    for spec in specs {
        let final_loss = match train(&spec, features, aggregator) {
            Ok(t) => Some(t.report.final_loss),
            Err(Error::Diverged { .. }) => None,
            Err(e) => return Err(e),
        };
        log::info!(
            "grid cell hidden={} latent={} lr={} gate={} -> {:?}",
            spec.hidden_dim,
            spec.latent_dim,
            spec.learning_rate,
            spec.use_gate,
            final_loss
        );
        cells.push(GridCell { spec, final_loss });
    }
    let best = cells
        .iter()
        .filter_map(|c| c.final_loss.map(|l| (l, c.spec)))
        .min_by(|(la, a), (lb, b)| {
            la.total_cmp(lb)
                .then(a.latent_dim.cmp(&b.latent_dim))
                .then(a.learning_rate.total_cmp(&b.learning_rate))
        })
        .map(|(_, s)| s)
        .ok_or(Error::GridDiverged)?;
    Ok(GridResult { best, cells })
}
