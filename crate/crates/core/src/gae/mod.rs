//! Graph autoencoder machinery: GraphSAGE mean layers, a sigmoid feature
//! gate, encoder/decoder stacks trained on feature reconstruction with
//! hand-derived gradients and Adam.

mod artifact;
mod autoencoder;
mod gate;
mod grid;
mod layer;
mod train;

pub use artifact::{TensorRecord, WeightsArtifact, WEIGHTS_FORMAT_VERSION};
pub use autoencoder::{mse_with_grad, Autoencoder, AutoencoderPass, AutoencoderSpec, Parameterized, Reconstruction};
pub use gate::{gate_forward, FeatureGate};
pub use grid::{grid_search, GridCell, GridResult, SpecGrid};
pub use layer::{sage_forward, Activation, MeanAggregator, SageCache, SageLayer};
pub use train::{optimize, train, Adam, Objective, TrainReport, TrainedAutoencoder};
