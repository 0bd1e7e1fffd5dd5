pub mod dataset;
pub mod error;
pub mod fusion;
pub mod gae;
pub mod metrics;
pub mod pipeline;
pub mod rng;
pub mod synth;
pub mod tsne;

pub use error::{Error, Result};
