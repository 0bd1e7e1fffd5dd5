//! Exact (O(n²)) t-SNE for 2-D layouts of embeddings.

use ndarray::{Array2, ArrayView2};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Perplexity tolerance of the per-point bandwidth search.
pub const PERPLEXITY_TOLERANCE: f64 = 1e-4;
const MAX_BISECTION_STEPS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub early_exaggeration: f64,
    pub exaggeration_iterations: usize,
    pub learning_rate: f64,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    pub momentum_switch: usize,
    pub init_sigma: f64,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 1000,
            early_exaggeration: 12.0,
            exaggeration_iterations: 250,
            learning_rate: 200.0,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            momentum_switch: 250,
            init_sigma: 1e-4,
            seed: 0,
        }
    }
}

impl TsneConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if n < 10 {
            return Err(Error::Config(format!("t-SNE needs at least 10 points, got {n}")));
        }
        if !(self.perplexity > 0.0) || self.perplexity * 3.0 >= n as f64 {
            return Err(Error::Perplexity {
                perplexity: self.perplexity,
                n,
            });
        }
        if self.iterations < 250 {
            return Err(Error::Config(format!(
                "t-SNE needs at least 250 iterations, got {}",
                self.iterations
            )));
        }
        if !(self.learning_rate > 0.0) || !(self.init_sigma > 0.0) {
            return Err(Error::Config("learning rate and init sigma must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsneResult {
    pub coords: Array2<f64>,
    /// KL(P‖Q) of the layout before each iteration, then of the final one.
    pub kl_trace: Vec<f64>,
    /// Perplexity attained by each point's bandwidth.
    pub perplexities: Vec<f64>,
}

impl TsneResult {
    pub fn initial_kl(&self) -> f64 {
        self.kl_trace[0]
    }

    pub fn final_kl(&self) -> f64 {
        *self.kl_trace.last().expect("trace is never empty")
    }
}

fn squared_distances(x: ArrayView2<f64>) -> Vec<f64> {
    let n = x.nrows();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v: f64 = x
                .row(i)
                .iter()
                .zip(x.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    d
}

/// Gaussian row for precision `beta`; returns entropy (nats).
fn gaussian_row(dist: &[f64], skip: usize, beta: f64, out: &mut [f64]) -> f64 {
    let min = dist
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != skip)
        .map(|(_, &d)| d)
        .fold(f64::INFINITY, f64::min);
    let mut sum = 0.0;
    let mut weighted = 0.0;
    for (j, (&d, p)) in dist.iter().zip(out.iter_mut()).enumerate() {
        if j == skip {
            *p = 0.0;
            continue;
        }
        let shifted = d - min;
        *p = (-beta * shifted).exp();
        sum += *p;
        weighted += shifted * *p;
    }
    for p in out.iter_mut() {
        *p /= sum;
    }
    sum.ln() + beta * weighted / sum
}

/// Row-conditional affinities `p_{j|i}` with each bandwidth bisected to the
/// target perplexity. Returns the matrix and the attained perplexities.
pub fn conditional_affinities(x: ArrayView2<f64>, perplexity: f64) -> Result<(Array2<f64>, Vec<f64>)> {
    let n = x.nrows();
    if perplexity <= 0.0 || perplexity >= n as f64 {
        return Err(Error::Perplexity { perplexity, n });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("t-SNE input contains non-finite values".into()));
    }
    let d = squared_distances(x);
    let mut p = Array2::zeros((n, n));
    let mut achieved = Vec::with_capacity(n);
    let mut row = vec![0.0; n];
    for i in 0..n {
        let dist = &d[i * n..(i + 1) * n];
        let (mut lo, mut hi) = (0.0_f64, f64::INFINITY);
        let mut beta = 1.0;
        let mut perp = 0.0;
        for _ in 0..MAX_BISECTION_STEPS {
            perp = gaussian_row(dist, i, beta, &mut row).exp();
            if (perp - perplexity).abs() <= PERPLEXITY_TOLERANCE {
                break;
            }
            // larger beta, narrower kernel, lower perplexity
            if perp > perplexity {
                lo = beta;
                beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
            } else {
                hi = beta;
                beta = (beta + lo) / 2.0;
            }
        }
        p.row_mut(i).assign(&ndarray::ArrayView1::from(&row[..]));
        achieved.push(perp);
    }
    Ok((p, achieved))
}

/// Runs t-SNE on the rows of `embedding`.
pub fn project(embedding: ArrayView2<f64>, config: &TsneConfig) -> Result<TsneResult> {
    let n = embedding.nrows();
    config.validate(n)?;
    let (cond, perplexities) = conditional_affinities(embedding, config.perplexity)?;

    // symmetrised joint affinities, flat row-major
    let mut p = vec![0.0; n * n];
    let denom = 2.0 * n as f64;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                p[i * n + j] = ((cond[[i, j]] + cond[[j, i]]) / denom).max(1e-12);
            }
        }
    }

    let mut rng = rng::stream(config.seed, &[rng::tag("tsne-init")]);
    let normal = Normal::new(0.0, config.init_sigma).map_err(|e| Error::Config(e.to_string()))?;
    let mut y: Vec<f64> = (0..2 * n).map(|_| normal.sample(&mut rng)).collect();
    let mut update = vec![0.0; 2 * n];
    let mut gains = vec![1.0; 2 * n];
    let mut grad = vec![0.0; 2 * n];
    let mut num = vec![0.0; n * n];
    let mut kl_trace = Vec::with_capacity(config.iterations + 1);

    for iter in 0..config.iterations {
        let exaggeration = if iter < config.exaggeration_iterations {
            config.early_exaggeration
        } else {
            1.0
        };
        let momentum = if iter < config.momentum_switch {
            config.initial_momentum
        } else {
            config.final_momentum
        };
        kl_trace.push(kl_and_gradient(&p, &y, n, exaggeration, &mut num, &mut grad));
        for k in 0..2 * n {
            gains[k] = if (grad[k] > 0.0) != (update[k] > 0.0) {
                gains[k] + 0.2_f64
            } else {
                gains[k] * 0.8
            }
            .max(0.01);
            update[k] = momentum * update[k] - config.learning_rate * gains[k] * grad[k];
            y[k] += update[k];
        }
        for c in 0..2 {
            let mean = (0..n).map(|i| y[2 * i + c]).sum::<f64>() / n as f64;
            (0..n).for_each(|i| y[2 * i + c] -= mean);
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                epoch: iter,
                last_finite_loss: kl_trace.last().copied(),
            });
        }
    }
    let z = student_kernel(&y, n, &mut num);
    kl_trace.push(kl_divergence(&p, &num, z, n));

    let coords = Array2::from_shape_vec((n, 2), y).map_err(|e| Error::Dimension(e.to_string()))?;
    Ok(TsneResult {
        coords,
        kl_trace,
        perplexities,
    })
}

/// KL(P‖Q) of layout `y` and the gradient of the (exaggerated) objective.
fn kl_and_gradient(p: &[f64], y: &[f64], n: usize, exaggeration: f64, num: &mut [f64], grad: &mut [f64]) -> f64 {
    let z = student_kernel(y, n, num);
    for i in 0..n {
        let (mut gx, mut gy) = (0.0, 0.0);
        for j in 0..n {
            if i == j {
                continue;
            }
            let w = num[i * n + j];
            let m = (exaggeration * p[i * n + j] - w / z) * w;
            gx += m * (y[2 * i] - y[2 * j]);
            gy += m * (y[2 * i + 1] - y[2 * j + 1]);
        }
        grad[2 * i] = 4.0 * gx;
        grad[2 * i + 1] = 4.0 * gy;
    }
    kl_divergence(p, num, z, n)
}

/// Fills `num` with `1 / (1 + ‖y_i − y_j‖²)` (zero diagonal); returns the sum.
fn student_kernel(y: &[f64], n: usize, num: &mut [f64]) -> f64 {
    let mut z = 0.0;
    for i in 0..n {
        num[i * n + i] = 0.0;
        for j in i + 1..n {
            let dx = y[2 * i] - y[2 * j];
            let dy = y[2 * i + 1] - y[2 * j + 1];
            let w = 1.0 / (1.0 + dx * dx + dy * dy);
            num[i * n + j] = w;
            num[j * n + i] = w;
            z += 2.0 * w;
        }
    }
    z
}

fn kl_divergence(p: &[f64], num: &[f64], z: f64, n: usize) -> f64 {
    let mut kl = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let pij = p[i * n + j];
                let q = (num[i * n + j] / z).max(1e-300);
                kl += pij * (pij / q).ln();
            }
        }
    }
    kl
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn blobs(per: usize, centers: &[[f64; 3]], seed: u64) -> Array2<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((per * centers.len(), 3), |(i, j)| {
            centers[i / per][j] + rng.random_range(-0.5..0.5)
        })
    }

    #[test]
    fn conditional_rows_sum_to_one_and_hit_perplexity() {
        let x = blobs(15, &[[0.0; 3], [5.0, 0.0, 0.0], [0.0, 5.0, 0.0]], 1);
        let (p, perp) = conditional_affinities(x.view(), 10.0).unwrap();
        for (i, row) in p.rows().into_iter().enumerate() {
            assert!((row.sum() - 1.0).abs() < 1e-9);
            assert_eq!(row[i], 0.0);
            assert!((perp[i] - 10.0).abs() <= PERPLEXITY_TOLERANCE, "{}", perp[i]);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let n = 7;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let raw: Vec<f64> = (0..n * n).map(|_| rng.random_range(0.1..1.0)).collect();
        let mut p = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    p[i * n + j] = raw[i * n + j] + raw[j * n + i];
                }
            }
        }
        let total: f64 = p.iter().sum();
        p.iter_mut().for_each(|v| *v /= total);
        let y: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut num = vec![0.0; n * n];
        let mut grad = vec![0.0; 2 * n];
        kl_and_gradient(&p, &y, n, 1.0, &mut num, &mut grad);
        let h = 1e-6;
        for k in 0..2 * n {
            let mut scratch = vec![0.0; 2 * n];
            let mut yp = y.clone();
            yp[k] += h;
            let up = kl_and_gradient(&p, &yp, n, 1.0, &mut num, &mut scratch);
            yp[k] -= 2.0 * h;
            let down = kl_and_gradient(&p, &yp, n, 1.0, &mut num, &mut scratch);
            let numeric = (up - down) / (2.0 * h);
            assert!((numeric - grad[k]).abs() < 1e-6, "{k}: {numeric} vs {}", grad[k]);
        }
    }

    #[test]
    fn simplex_rows_are_uniform() {
        let x = Array2::<f64>::eye(12);
        let (p, _) = conditional_affinities(x.view(), 3.0).unwrap();
        for i in 0..12 {
            for j in 0..12 {
                let want = if i == j { 0.0 } else { 1.0 / 11.0 };
                assert!((p[[i, j]] - want).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn kl_decreases_and_runs_are_deterministic() {
        let x = blobs(50, &[[0.0; 3], [6.0, 0.0, 0.0], [0.0, 6.0, 0.0]], 2);
        let config = TsneConfig {
            perplexity: 8.0,
            iterations: 1000,
            seed: 9,
            ..TsneConfig::default()
        };
        let a = project(x.view(), &config).unwrap();
        let b = project(x.view(), &config).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.kl_trace.len(), config.iterations + 1);
        assert!(a.final_kl() < a.initial_kl());
        assert!(a.coords.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn infeasible_settings_are_rejected() {
        let x = Array2::<f64>::eye(12);
        assert!(matches!(
            project(x.view(), &TsneConfig::default()),
            Err(Error::Perplexity { n: 12, .. })
        ));
        let tiny = Array2::<f64>::eye(9);
        let config = TsneConfig {
            perplexity: 2.0,
            ..TsneConfig::default()
        };
        assert!(project(tiny.view(), &config).is_err());
        let short = TsneConfig {
            perplexity: 3.0,
            iterations: 100,
            ..TsneConfig::default()
        };
        assert!(project(x.view(), &short).is_err());
    }
}
