use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

/// Row-normalized adjacency in CSR form: row `v` averages the neighbours of
/// `v`. Isolated nodes aggregate to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanAggregator {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
}

impl MeanAggregator {
    pub fn new(adjacency: &[Vec<usize>]) -> Self {
        let mut offsets = Vec::with_capacity(adjacency.len() + 1);
        let mut neighbors = Vec::new();
        offsets.push(0);
        for list in adjacency {
            neighbors.extend_from_slice(list);
            offsets.push(neighbors.len());
        }
        Self { offsets, neighbors }
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn row(&self, v: usize) -> &[usize] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    /// `A_mean · H`.
    pub fn aggregate(&self, h: ArrayView2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros(h.raw_dim());
        for (v, mut row) in out.rows_mut().into_iter().enumerate() {
            let nbrs = self.row(v);
            if nbrs.is_empty() {
                continue;
            }
            for &u in nbrs {
                row += &h.row(u);
            }
            row /= nbrs.len() as f64;
        }
        out
    }

    /// `A_meanᵀ · G`, the adjoint of [`aggregate`](Self::aggregate).
    pub fn aggregate_transpose(&self, g: ArrayView2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros(g.raw_dim());
        for v in 0..self.len() {
            let nbrs = self.row(v);
            if nbrs.is_empty() {
                continue;
            }
            let scaled = &g.row(v) / nbrs.len() as f64;
            for &u in nbrs {
                let mut row = out.row_mut(u);
                row += &scaled;
            }
        }
        out
    }
}

/// GraphSAGE layer with mean aggregation:
/// `h'_v = act(W_self h_v + W_neigh mean_{u∈N(v)} h_u + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SageLayer {
    pub w_self: Array2<f64>,
    pub w_neigh: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

/// Intermediates kept from the forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct SageCache {
    input: Array2<f64>,
    neigh_mean: Array2<f64>,
    pre: Array2<f64>,
}

impl SageLayer {
    /// Glorot-uniform weights, zero bias.
    pub fn init(d_in: usize, d_out: usize, activation: Activation, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / (d_in + d_out) as f64).sqrt();
        let mut draw = |_| (rng.random::<f64>() * 2.0 - 1.0) * limit;
        let w_self = Array2::from_shape_fn((d_out, d_in), &mut draw);
        let w_neigh = Array2::from_shape_fn((d_out, d_in), &mut draw);
        Self {
            w_self,
            w_neigh,
            bias: Array1::zeros(d_out),
            activation,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            w_self: Array2::zeros(self.w_self.raw_dim()),
            w_neigh: Array2::zeros(self.w_neigh.raw_dim()),
            bias: Array1::zeros(self.bias.raw_dim()),
            activation: self.activation,
        }
    }

    pub fn d_in(&self) -> usize {
        self.w_self.ncols()
    }

    pub fn d_out(&self) -> usize {
        self.w_self.nrows()
    }

    pub fn forward(&self, h: ArrayView2<f64>, agg: &MeanAggregator) -> Result<(Array2<f64>, SageCache)> {
        if h.ncols() != self.d_in() {
            return Err(Error::Dimension(format!(
                "layer expects {} input features, got {}",
                self.d_in(),
                h.ncols()
            )));
        }
        if h.nrows() != agg.len() {
            return Err(Error::Dimension(format!(
                "{} feature rows for a graph of {} nodes",
                h.nrows(),
                agg.len()
            )));
        }
        let neigh_mean = agg.aggregate(h);
        let mut pre = h.dot(&self.w_self.t()) + neigh_mean.dot(&self.w_neigh.t());
        pre += &self.bias;
        let out = match self.activation {
            Activation::Relu => pre.mapv(|v| v.max(0.0)),
            Activation::Identity => pre.clone(),
        };
        Ok((
            out,
            SageCache {
                input: h.to_owned(),
                neigh_mean,
                pre,
            },
        ))
    }

    /// Returns parameter gradients and the gradient w.r.t. the layer input.
    pub fn backward(&self, d_out: ArrayView2<f64>, cache: &SageCache, agg: &MeanAggregator) -> (SageLayer, Array2<f64>) {
        let d_pre = match self.activation {
            Activation::Relu => {
                let mut d = d_out.to_owned();
                ndarray::Zip::from(&mut d)
                    .and(&cache.pre)
                    .for_each(|g, &p| {
                        if p <= 0.0 {
                            *g = 0.0;
                        }
                    });
                d
            }
            Activation::Identity => d_out.to_owned(),
        };
        let grads = SageLayer {
            w_self: standard(d_pre.t().dot(&cache.input)),
            w_neigh: standard(d_pre.t().dot(&cache.neigh_mean)),
            bias: d_pre.sum_axis(Axis(0)),
            activation: self.activation,
        };
        let d_input = d_pre.dot(&self.w_self) + agg.aggregate_transpose(d_pre.dot(&self.w_neigh).view());
        (grads, d_input)
    }
}

/// Row-major copy if `a` is not already in standard layout. Parameter
/// tensors are exposed as flat slices, so gradients must be row-major too.
pub(crate) fn standard(a: Array2<f64>) -> Array2<f64> {
    if a.is_standard_layout() {
        a
    } else {
        a.as_standard_layout().into_owned()
    }
}

/// Forward pass of a single layer without keeping intermediates.
pub fn sage_forward(layer: &SageLayer, h: ArrayView2<f64>, agg: &MeanAggregator) -> Result<Array2<f64>> {
    layer.forward(h, agg).map(|(out, _)| out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;

    fn identity_layer(d: usize, act: Activation) -> SageLayer {
        SageLayer {
            w_self: Array2::eye(d),
            w_neigh: Array2::eye(d),
            bias: Array1::zeros(d),
            activation: act,
        }
    }

    #[test]
    fn neighbour_term_is_mean() {
        // node 0 has neighbours 1 and 2 with features 1 and 3
        let agg = MeanAggregator::new(&[vec![1, 2], vec![0], vec![0]]);
        let mut layer = identity_layer(1, Activation::Identity);
        layer.w_self = array![[0.0]];
        let out = sage_forward(&layer, array![[5.0], [1.0], [3.0]].view(), &agg).unwrap();
        assert_eq!(out[[0, 0]], 2.0);
    }

    #[test]
    fn isolated_node_uses_only_self_term() {
        let agg = MeanAggregator::new(&[vec![], vec![2], vec![1]]);
        let layer = SageLayer {
            w_self: array![[2.0, 0.0], [1.0, -1.0]],
            w_neigh: array![[9.0, 9.0], [9.0, 9.0]],
            bias: Array1::zeros(2),
            activation: Activation::Relu,
        };
        let h = array![[1.0, 3.0], [0.5, 0.5], [1.0, 1.0]];
        let out = sage_forward(&layer, h.view(), &agg).unwrap();
        assert_eq!(out.row(0).to_vec(), vec![2.0, 0.0]);
    }

    #[test]
    fn matches_dense_normalized_adjacency_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let adjacency = vec![vec![1, 4], vec![0, 2, 3], vec![1], vec![1, 4], vec![0, 3]];
        let agg = MeanAggregator::new(&adjacency);
        let layer = SageLayer::init(3, 2, Activation::Relu, &mut rng);
        let h = Array2::from_shape_fn((5, 3), |_| rng.random_range(-1.0..1.0));

        // dense D^-1 A
        let mut a = Array2::<f64>::zeros((5, 5));
        for (v, nbrs) in adjacency.iter().enumerate() {
            for &u in nbrs {
                a[[v, u]] = 1.0 / nbrs.len() as f64;
            }
        }
        let pre = h.dot(&layer.w_self.t()) + a.dot(&h).dot(&layer.w_neigh.t()) + &layer.bias;
        let expected = pre.mapv(|v| v.max(0.0));
        let got = sage_forward(&layer, h.view(), &agg).unwrap();
        for (x, y) in got.iter().zip(&expected) {
            assert!((x - y).abs() < 1e-12);
        }

        // adjoint identity: <A h, g> = <h, Aᵀ g>
        let g = Array2::from_shape_fn((5, 3), |_| rng.random_range(-1.0..1.0));
        let lhs = (&agg.aggregate(h.view()) * &g).sum();
        let rhs = (&h * &agg.aggregate_transpose(g.view())).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let agg = MeanAggregator::new(&[vec![], vec![]]);
        let layer = identity_layer(2, Activation::Identity);
        assert!(sage_forward(&layer, Array2::zeros((2, 3)).view(), &agg).is_err());
        assert!(sage_forward(&layer, Array2::zeros((3, 2)).view(), &agg).is_err());
    }
}
