use ndarray::{Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NormScheme {
    #[default]
    MinMax,
    ZScore,
    None,
}

/// Affine map `normalized = (raw - offset) / scale`. A zero scale marks a
/// constant column, which normalizes to 0 and denormalizes to `offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnNorm {
    pub offset: f64,
    pub scale: f64,
}

impl ColumnNorm {
    pub const IDENTITY: ColumnNorm = ColumnNorm {
        offset: 0.0,
        scale: 1.0,
    };

    fn fit<'a>(scheme: NormScheme, values: impl Iterator<Item = &'a f64> + Clone) -> Self {
        match scheme {
            NormScheme::None => Self::IDENTITY,
            NormScheme::MinMax => {
                let (lo, hi) = values
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                        (lo.min(v), hi.max(v))
                    });
                if !lo.is_finite() {
                    return Self::IDENTITY;
                }
                Self {
                    offset: lo,
                    scale: hi - lo,
                }
            }
            NormScheme::ZScore => {
                let count = values.clone().count();
                if count == 0 {
                    return Self::IDENTITY;
                }
                let mean = values.clone().sum::<f64>() / count as f64;
                let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / count as f64;
                Self {
                    offset: mean,
                    scale: var.sqrt(),
                }
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        self.scale == 0.0
    }

    pub fn apply(&self, raw: f64) -> f64 {
        if self.is_constant() {
            0.0
        } else {
            (raw - self.offset) / self.scale
        }
    }

    pub fn invert(&self, normalized: f64) -> f64 {
        normalized * self.scale + self.offset
    }
}

/// Parameters needed to map normalized values back to original units.
/// Static columns are normalized independently; the dynamic matrix shares
/// one map so that series shapes are preserved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub scheme: NormScheme,
    pub static_columns: Vec<ColumnNorm>,
    pub dynamic: ColumnNorm,
}

impl Normalization {
    pub fn denormalize_static(&self, normalized: &Array2<f64>) -> Array2<f64> {
        let mut out = normalized.clone();
        for (mut col, norm) in out.axis_iter_mut(Axis(1)).zip(&self.static_columns) {
            col.mapv_inplace(|v| norm.invert(v));
        }
        out
    }

    pub fn denormalize_dynamic(&self, normalized: &Array2<f64>) -> Array2<f64> {
        normalized.mapv(|v| self.dynamic.invert(v))
    }

    pub fn denormalize_static_row(&self, row: ArrayView1<f64>) -> Vec<f64> {
        row.iter()
            .zip(&self.static_columns)
            .map(|(&v, n)| n.invert(v))
            .collect()
    }

    pub fn normalize_static(&self, raw: &Array2<f64>) -> Array2<f64> {
        let mut out = raw.clone();
        for (mut col, norm) in out.axis_iter_mut(Axis(1)).zip(&self.static_columns) {
            col.mapv_inplace(|v| norm.apply(v));
        }
        out
    }

    pub fn normalize_dynamic(&self, raw: &Array2<f64>) -> Array2<f64> {
        raw.mapv(|v| self.dynamic.apply(v))
    }
}

/// Normalizes static columns independently and the dynamic matrix globally.
/// Constant static columns become all-zero with a logged warning.
pub fn normalize_features(dataset: &Dataset, scheme: NormScheme) -> Result<Dataset> {
    if dataset.normalization().is_some() {
        return Err(Error::Config("dataset is already normalized".into()));
    }
    let static_columns: Vec<ColumnNorm> = dataset
        .static_features()
        .axis_iter(Axis(1))
        .enumerate()
        .map(|(j, col)| {
            let norm = ColumnNorm::fit(scheme, col.iter());
            if scheme != NormScheme::None && norm.is_constant() {
                log::warn!(
                    "static column `{}` is constant; normalized to 0",
                    dataset.static_columns()[j].name
                );
            }
            norm
        })
        .collect();
    let dynamic = ColumnNorm::fit(scheme, dataset.dynamic_series().iter());
    let normalization = Normalization {
        scheme,
        static_columns,
        dynamic,
    };
    let static_features = normalization.normalize_static(dataset.static_features());
    let dynamic_series = normalization.normalize_dynamic(dataset.dynamic_series());
    Ok(dataset.with_normalized(static_features, dynamic_series, normalization))
}
