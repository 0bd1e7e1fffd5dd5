use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::autoencoder::{Autoencoder, AutoencoderSpec, Parameterized, Reconstruction};
use super::layer::MeanAggregator;
use crate::error::{Error, Result};

/// A differentiable training objective over a parameterized model.
pub trait Objective {
    type Model: Parameterized + Clone;

    fn loss(&self, model: &Self::Model) -> Result<f64>;

    /// Loss and a model-shaped gradient.
    fn loss_and_grad(&self, model: &Self::Model) -> Result<(f64, Self::Model)>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Loss at the start of each epoch, before its update.
    pub loss_per_epoch: Vec<f64>,
    /// Loss of the returned parameters.
    pub final_loss: f64,
}

/// Adam with bias correction, `β = (0.9, 0.999)`, `ε = 1e-8`.
#[derive(Debug, Clone)]
pub struct Adam {
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(learning_rate: f64, model: &impl Parameterized) -> Self {
        let zeros: Vec<Vec<f64>> = model
            .flat_tensors()
            .into_iter()
            .map(|t| vec![0.0; t.len()])
            .collect();
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn update<M: Parameterized>(&mut self, model: &mut M, grads: &M) {
        self.step += 1;
        let grads = grads.flat_tensors();
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.step);
        let c2 = 1.0 - b2.powi(self.step);
        let (lr, eps) = (self.learning_rate, self.eps);
        let (ms, vs) = (&mut self.m, &mut self.v);
        let mut k = 0;
        model.visit_mut(&mut |_, params| {
            let (m, v, g) = (&mut ms[k], &mut vs[k], &grads[k]);
            for i in 0..params.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
            k += 1;
        });
    }
}

/// Full-batch Adam for `epochs` steps. Stops with [`Error::Diverged`] on the
/// first non-finite loss.
pub fn optimize<O: Objective>(
    objective: &O,
    mut model: O::Model,
    epochs: usize,
    learning_rate: f64,
) -> Result<(O::Model, TrainReport)> {
    let mut adam = Adam::new(learning_rate, &model);
    let mut losses = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        let (loss, grads) = objective.loss_and_grad(&model)?;
        if !loss.is_finite() {
            return Err(Error::Diverged {
                epoch,
                last_finite_loss: losses.last().copied(),
            });
        }
        losses.push(loss);
        adam.update(&mut model, &grads);
    }
    let final_loss = objective.loss(&model)?;
    if !final_loss.is_finite() {
        return Err(Error::Diverged {
            epoch: epochs,
            last_finite_loss: losses.last().copied(),
        });
    }
    Ok((
        model,
        TrainReport {
            loss_per_epoch: losses,
            final_loss,
        },
    ))
}

#[derive(Debug, Clone)]
pub struct TrainedAutoencoder {
    pub spec: AutoencoderSpec,
    pub model: Autoencoder,
    pub embedding: Array2<f64>,
    pub report: TrainReport,
}

/// Trains one autoencoder to reconstruct `features` on the graph given by
/// `aggregator`; the embedding is the encoder output of the final weights.
pub fn train(spec: &AutoencoderSpec, features: ArrayView2<f64>, aggregator: &MeanAggregator) -> Result<TrainedAutoencoder> {
    if features.ncols() != spec.input_dim {
        return Err(Error::Dimension(format!(
            "spec input_dim {} but features have {} columns",
            spec.input_dim,
            features.ncols()
        )));
    }
    let model = Autoencoder::init(spec)?;
    let objective = Reconstruction {
        features,
        aggregator,
    };
    let (model, report) = optimize(&objective, model, spec.epochs, spec.learning_rate)?;
    let embedding = model.encode(features, aggregator)?;
    Ok(TrainedAutoencoder {
        spec: *spec,
        model,
        embedding,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gae::Activation;
    use rand::{Rng, SeedableRng};

    fn ring(n: usize) -> MeanAggregator {
        let adj: Vec<Vec<usize>> = (0..n)
            .map(|i| {
                let mut v = vec![(i + n - 1) % n, (i + 1) % n];
                v.sort();
                v
            })
            .collect();
        MeanAggregator::new(&adj)
    }

    fn spec(input_dim: usize, use_gate: bool) -> AutoencoderSpec {
        AutoencoderSpec {
            input_dim,
            hidden_dim: 5,
            latent_dim: 2,
            use_gate,
            epochs: 300,
            learning_rate: 1e-2,
            seed: 4,
        }
    }

    #[test]
    fn zero_features_reach_zero_loss() {
        let x = Array2::zeros((6, 4));
        let t = train(&spec(4, true), x.view(), &ring(6)).unwrap();
        assert!(t.report.final_loss < 1e-6);
    }

    /// Central differences over every parameter of an autoencoder.
    fn check_gradients(model: &Autoencoder, x: &Array2<f64>, agg: &MeanAggregator) {
        let objective = Reconstruction {
            features: x.view(),
            aggregator: agg,
        };
        let (_, grads) = objective.loss_and_grad(model).unwrap();
        let analytic = grads.flat_tensors();
        let h = 1e-5;
        let mut names = Vec::new();
        model.visit(&mut |n, _, _| names.push(n.to_string()));
        for (t, name) in names.iter().enumerate() {
            for i in 0..analytic[t].len() {
                let bump = |delta: f64| {
                    let mut m = model.clone();
                    let mut k = 0;
                    m.visit_mut(&mut |_, p| {
                        if k == t {
                            p[i] += delta;
                        }
                        k += 1;
                    });
                    objective.loss(&m).unwrap()
                };
                let numeric = (bump(h) - bump(-h)) / (2.0 * h);
                let a = analytic[t][i];
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
                assert!(rel < 1e-4, "{name}[{i}]: analytic {a} numeric {numeric}");
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        let x = Array2::from_shape_fn((6, 4), |_| rng.random_range(-1.0..1.0));
        let agg = MeanAggregator::new(&[vec![1, 2], vec![0, 3], vec![0, 3, 4], vec![1, 2], vec![2], vec![]]);
        for gate in [false, true] {
            let mut model = Autoencoder::init(&spec(4, gate)).unwrap();
            // non-zero biases exercise the bias paths
            model.visit_mut(&mut |name, p| {
                if name.ends_with("bias") || name.ends_with(".b") {
                    p.iter_mut().for_each(|v| *v = rng.random_range(-0.3..0.3));
                }
            });
            check_gradients(&model, &x, &agg);
        }
        assert_eq!(Autoencoder::init(&spec(4, false)).unwrap().encoder[1].activation, Activation::Identity);
    }

    #[test]
    fn training_reduces_loss_and_is_deterministic() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let x = Array2::from_shape_fn((12, 6), |_| rng.random_range(0.0..1.0));
        let s = spec(6, true);
        let a = train(&s, x.view(), &ring(12)).unwrap();
        let b = train(&s, x.view(), &ring(12)).unwrap();
        assert!(a.report.final_loss < a.report.loss_per_epoch[0]);
        assert_eq!(a.report.loss_per_epoch.len(), 300);
        assert_eq!(a.embedding, b.embedding);
        assert_eq!(a.embedding.dim(), (12, 2));
    }

    #[test]
    fn divergence_is_reported() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let x = Array2::from_shape_fn((6, 4), |_| rng.random_range(0.0..1.0) * 1e200);
        let err = train(&spec(4, false), x.view(), &ring(6)).unwrap_err();
        assert!(matches!(err, Error::Diverged { epoch: 0, last_finite_loss: None }), "{err}");
    }

    #[test]
    fn invalid_spec_rejected() {
        let x = Array2::zeros((6, 4));
        let mut s = spec(4, false);
        s.latent_dim = 4;
        assert!(train(&s, x.view(), &ring(6)).is_err());
        assert!(train(&spec(3, false), x.view(), &ring(6)).is_err());
    }
}
