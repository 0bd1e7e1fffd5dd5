use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layer::standard;
use crate::error::{Error, Result};

/// Input-conditioned sigmoid gate: `w = σ(x W_gᵀ + b_g)`, output `x ⊙ w`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureGate {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

const LOGIT_LIMIT: f64 = 36.0;

/// Logits are clamped so the weight never rounds to exactly 0 or 1.
fn sigmoid(v: f64) -> f64 {
    let v = v.clamp(-LOGIT_LIMIT, LOGIT_LIMIT);
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

impl FeatureGate {
    pub fn init(d: usize, rng: &mut impl Rng) -> Self {
        let limit = (3.0 / d as f64).sqrt();
        Self {
            w: Array2::from_shape_fn((d, d), |_| (rng.random::<f64>() * 2.0 - 1.0) * limit),
            b: Array1::zeros(d),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            w: Array2::zeros(self.w.raw_dim()),
            b: Array1::zeros(self.b.raw_dim()),
        }
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    /// Returns `(gated, weights)`.
    pub fn forward(&self, x: ArrayView2<f64>) -> Result<(Array2<f64>, Array2<f64>)> {
        if x.ncols() != self.dim() {
            return Err(Error::Dimension(format!(
                "gate expects {} features, got {}",
                self.dim(),
                x.ncols()
            )));
        }
        let mut logits = x.dot(&self.w.t());
        logits += &self.b;
        let weights = logits.mapv(sigmoid);
        Ok((&x * &weights, weights))
    }

    /// Gradients of the gate parameters and of its input, given the
    /// upstream gradient on the gated output.
    pub fn backward(&self, d_gated: ArrayView2<f64>, x: ArrayView2<f64>, weights: ArrayView2<f64>) -> (FeatureGate, Array2<f64>) {
        let mut d_logits = &d_gated * &x;
        ndarray::Zip::from(&mut d_logits)
            .and(&weights)
            .for_each(|g, &w| *g *= w * (1.0 - w));
        let grads = FeatureGate {
            w: standard(d_logits.t().dot(&x)),
            b: d_logits.sum_axis(Axis(0)),
        };
        let d_x = &d_gated * &weights + d_logits.dot(&self.w);
        (grads, d_x)
    }
}

pub fn gate_forward(gate: &FeatureGate, x: ArrayView2<f64>) -> Result<(Array2<f64>, Array2<f64>)> {
    gate.forward(x)
}
