use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::gate::FeatureGate;
use super::layer::{Activation, MeanAggregator, SageCache, SageLayer};
use crate::error::{Error, Result};
use crate::rng;

/// Hyperparameters of one graph autoencoder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderSpec {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub latent_dim: usize,
    pub use_gate: bool,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl AutoencoderSpec {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dim == 0 || self.latent_dim == 0 {
            return Err(Error::Config("autoencoder dimensions must be >= 1".into()));
        }
        if self.latent_dim >= self.input_dim {
            return Err(Error::Config(format!(
                "latent_dim {} must be below input_dim {}",
                self.latent_dim, self.input_dim
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate {} must be positive",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Anything exposing its parameters as named flat tensors, in a fixed order.
pub trait Parameterized {
    fn visit(&self, f: &mut dyn FnMut(&str, &[usize], &[f64]));
    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64]));

    fn parameter_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_, _, t| n += t.len());
        n
    }

    /// All tensors flattened in visit order.
    fn flat_tensors(&self) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        self.visit(&mut |_, _, t| out.push(t.to_vec()));
        out
    }
}

fn slice(a: &Array2<f64>) -> &[f64] {
    a.as_slice().expect("parameters are kept in standard layout")
}

fn slice_mut(a: &mut Array2<f64>) -> &mut [f64] {
    a.as_slice_mut().expect("parameters are kept in standard layout")
}

pub(crate) fn visit_layer(prefix: &str, l: &SageLayer, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
    f(&format!("{prefix}.w_self"), l.w_self.shape(), slice(&l.w_self));
    f(&format!("{prefix}.w_neigh"), l.w_neigh.shape(), slice(&l.w_neigh));
    f(
        &format!("{prefix}.bias"),
        l.bias.shape(),
        l.bias.as_slice().expect("standard layout"),
    );
}

pub(crate) fn visit_layer_mut(prefix: &str, l: &mut SageLayer, f: &mut dyn FnMut(&str, &mut [f64])) {
    f(&format!("{prefix}.w_self"), slice_mut(&mut l.w_self));
    f(&format!("{prefix}.w_neigh"), slice_mut(&mut l.w_neigh));
    f(
        &format!("{prefix}.bias"),
        l.bias.as_slice_mut().expect("standard layout"),
    );
}

/// Optional gate, two SAGE encoder layers (ReLU, then linear latent) and a
/// mirrored two-layer decoder (ReLU, then linear reconstruction).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Autoencoder {
    pub gate: Option<FeatureGate>,
    pub encoder: [SageLayer; 2],
    pub decoder: [SageLayer; 2],
}

/// Forward intermediates of an [`Autoencoder`].
#[derive(Debug, Clone)]
pub struct AutoencoderPass {
    pub input: Array2<f64>,
    pub gate_weights: Option<Array2<f64>>,
    pub latent: Array2<f64>,
    pub reconstruction: Array2<f64>,
    caches: [SageCache; 4],
}

impl Autoencoder {
    pub fn init(spec: &AutoencoderSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = rng::stream(spec.seed, &[rng::tag("gae-init")]);
        let (d, h, z) = (spec.input_dim, spec.hidden_dim, spec.latent_dim);
        let gate = spec.use_gate.then(|| FeatureGate::init(d, &mut rng));
        Ok(Self {
            encoder: [
                SageLayer::init(d, h, Activation::Relu, &mut rng),
                SageLayer::init(h, z, Activation::Identity, &mut rng),
            ],
            decoder: [
                SageLayer::init(z, h, Activation::Relu, &mut rng),
                SageLayer::init(h, d, Activation::Identity, &mut rng),
            ],
            gate,
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            gate: self.gate.as_ref().map(FeatureGate::zeros_like),
            encoder: [self.encoder[0].zeros_like(), self.encoder[1].zeros_like()],
            decoder: [self.decoder[0].zeros_like(), self.decoder[1].zeros_like()],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.encoder[0].d_in()
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder[1].d_out()
    }

    pub fn forward(&self, x: ArrayView2<f64>, agg: &MeanAggregator) -> Result<AutoencoderPass> {
        let (gated, gate_weights) = match &self.gate {
            Some(g) => {
                let (gated, w) = g.forward(x)?;
                (gated, Some(w))
            }
            None => (x.to_owned(), None),
        };
        let (h1, c0) = self.encoder[0].forward(gated.view(), agg)?;
        let (latent, c1) = self.encoder[1].forward(h1.view(), agg)?;
        let (h2, c2) = self.decoder[0].forward(latent.view(), agg)?;
        let (reconstruction, c3) = self.decoder[1].forward(h2.view(), agg)?;
        Ok(AutoencoderPass {
            input: x.to_owned(),
            gate_weights,
            latent,
            reconstruction,
            caches: [c0, c1, c2, c3],
        })
    }

    /// Encoder output only.
    pub fn encode(&self, x: ArrayView2<f64>, agg: &MeanAggregator) -> Result<Array2<f64>> {
        Ok(self.forward(x, agg)?.latent)
    }

    /// Backpropagates gradients arriving at the reconstruction and, for
    /// stacked models, at the latent code. Returns parameter gradients and
    /// the gradient w.r.t. the input.
    pub fn backward(
        &self,
        pass: &AutoencoderPass,
        d_reconstruction: ArrayView2<f64>,
        d_latent: Option<ArrayView2<f64>>,
        agg: &MeanAggregator,
    ) -> (Autoencoder, Array2<f64>) {
        let (g_dec1, d_h2) = self.decoder[1].backward(d_reconstruction, &pass.caches[3], agg);
        let (g_dec0, mut d_z) = self.decoder[0].backward(d_h2.view(), &pass.caches[2], agg);
        if let Some(extra) = d_latent {
            d_z += &extra;
        }
        let (g_enc1, d_h1) = self.encoder[1].backward(d_z.view(), &pass.caches[1], agg);
        let (g_enc0, d_gated) = self.encoder[0].backward(d_h1.view(), &pass.caches[0], agg);
        let (g_gate, d_x) = match (&self.gate, &pass.gate_weights) {
            (Some(gate), Some(w)) => {
                let (g, dx) = gate.backward(d_gated.view(), pass.input.view(), w.view());
                (Some(g), dx)
            }
            _ => (None, d_gated),
        };
        (
            Autoencoder {
                gate: g_gate,
                encoder: [g_enc0, g_enc1],
                decoder: [g_dec0, g_dec1],
            },
            d_x,
        )
    }
}

impl Parameterized for Autoencoder {
    fn visit(&self, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        if let Some(g) = &self.gate {
            f("gate.w", g.w.shape(), slice(&g.w));
            f("gate.b", g.b.shape(), g.b.as_slice().expect("standard layout"));
        }
        visit_layer("encoder.0", &self.encoder[0], f);
        visit_layer("encoder.1", &self.encoder[1], f);
        visit_layer("decoder.0", &self.decoder[0], f);
        visit_layer("decoder.1", &self.decoder[1], f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        if let Some(g) = &mut self.gate {
            f("gate.w", slice_mut(&mut g.w));
            f("gate.b", g.b.as_slice_mut().expect("standard layout"));
        }
        visit_layer_mut("encoder.0", &mut self.encoder[0], f);
        visit_layer_mut("encoder.1", &mut self.encoder[1], f);
        visit_layer_mut("decoder.0", &mut self.decoder[0], f);
        visit_layer_mut("decoder.1", &mut self.decoder[1], f);
    }
}

/// Mean squared error over all entries and its gradient w.r.t. `pred`.
pub fn mse_with_grad(pred: &Array2<f64>, target: ArrayView2<f64>) -> (f64, Array2<f64>) {
    let diff = pred - &target;
    let count = diff.len().max(1) as f64;
    let loss = diff.iter().map(|v| v * v).sum::<f64>() / count;
    (loss, diff * (2.0 / count))
}

/// Feature-reconstruction objective for a single autoencoder.
pub struct Reconstruction<'a> {
    pub features: ArrayView2<'a, f64>,
    pub aggregator: &'a MeanAggregator,
}

impl super::train::Objective for Reconstruction<'_> {
    type Model = Autoencoder;

    fn loss(&self, model: &Autoencoder) -> Result<f64> {
        let pass = model.forward(self.features, self.aggregator)?;
        Ok(mse_with_grad(&pass.reconstruction, self.features).0)
    }

    fn loss_and_grad(&self, model: &Autoencoder) -> Result<(f64, Autoencoder)> {
        let pass = model.forward(self.features, self.aggregator)?;
        let (loss, d_rec) = mse_with_grad(&pass.reconstruction, self.features);
        let (grads, _) = model.backward(&pass, d_rec.view(), None, self.aggregator);
        Ok((loss, grads))
    }
}
