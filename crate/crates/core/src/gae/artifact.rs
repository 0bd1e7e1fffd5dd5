use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::autoencoder::Parameterized;
use crate::error::{Error, Result};

pub const WEIGHTS_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// Versioned JSON weight dump with a per-tensor shape manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsArtifact {
    pub format_version: u32,
    pub model: String,
    pub tensors: Vec<TensorRecord>,
}

impl WeightsArtifact {
    pub fn capture(model_name: &str, model: &impl Parameterized) -> Self {
        let mut tensors = Vec::new();
        model.visit(&mut |name, shape, data| {
            tensors.push(TensorRecord {
                name: name.to_string(),
                shape: shape.to_vec(),
                data: data.to_vec(),
            })
        });
        Self {
            format_version: WEIGHTS_FORMAT_VERSION,
            model: model_name.to_string(),
            tensors,
        }
    }

    /// Shape manifest, tensor name to shape.
    pub fn shapes(&self) -> BTreeMap<String, Vec<usize>> {
        self.tensors
            .iter()
            .map(|t| (t.name.clone(), t.shape.clone()))
            .collect()
    }

    /// Copies stored tensors into a model of identical structure.
    pub fn restore(&self, model: &mut impl Parameterized) -> Result<()> {
        if self.format_version != WEIGHTS_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported weights format version {}",
                self.format_version
            )));
        }
        let mut expected = Vec::new();
        model.visit(&mut |name, shape, _| expected.push((name.to_string(), shape.to_vec())));
        if expected.len() != self.tensors.len()
            || expected
                .iter()
                .zip(&self.tensors)
                .any(|((n, s), t)| *n != t.name || *s != t.shape)
        {
            return Err(Error::Dimension(format!(
                "stored tensors of `{}` do not match the model structure",
                self.model
            )));
        }
        let mut k = 0;
        model.visit_mut(&mut |_, p| {
            p.copy_from_slice(&self.tensors[k].data);
            k += 1;
        });
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::json("weights artifact", e))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::json("weights artifact", e))
    }
}
