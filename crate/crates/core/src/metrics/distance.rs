use ndarray::ArrayView2;

use crate::error::{Error, Result};

pub fn dist_euclidean(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Unconstrained dynamic time warping with absolute-difference local cost
/// and the three classic steps (insertion, deletion, match).
pub fn dist_dtw(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySeries);
    }
    Ok(dtw_unchecked(a, b, &mut Vec::new()))
}

/// DTW core with a caller-provided scratch buffer (two rows of `b.len()+1`).
pub(crate) fn dtw_unchecked(a: &[f64], b: &[f64], scratch: &mut Vec<f64>) -> f64 {
    let m = b.len();
    scratch.clear();
    scratch.resize(2 * (m + 1), f64::INFINITY);
    let (mut prev, mut cur) = scratch.split_at_mut(m + 1);
    prev[0] = 0.0;
    for &x in a {
        cur[0] = f64::INFINITY;
        for j in 1..=m {
            let best = prev[j].min(prev[j - 1]).min(cur[j - 1]);
            cur[j] = (x - b[j - 1]).abs() + best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m]
}

const LANES: usize = 8;

/// DTW of `a` against `LANES` equal-length series at once. Each lane runs
/// exactly the scalar recurrence, so results are bit-identical to
/// `dtw_unchecked`; interleaving only hides the latency of the row chain.
fn dtw_lanes(a: &[f64], bs: [&[f64]; LANES], scratch: &mut Vec<[f64; LANES]>) -> [f64; LANES] {
    let m = bs[0].len();
    debug_assert!(bs.iter().all(|b| b.len() == m));
    // column-major copy so one load feeds every lane
    scratch.clear();
    scratch.resize(3 * (m + 1), [f64::INFINITY; LANES]);
    let (cols, rows) = scratch.split_at_mut(m + 1);
    for j in 0..m {
        for l in 0..LANES {
            cols[j][l] = bs[l][j];
        }
    }
    let (mut prev, mut cur) = rows.split_at_mut(m + 1);
    prev[0] = [0.0; LANES];
    for &x in a {
        cur[0] = [f64::INFINITY; LANES];
        for j in 1..=m {
            let (p, d, left, b) = (prev[j], prev[j - 1], cur[j - 1], cols[j - 1]);
            let mut out = [0.0; LANES];
            for l in 0..LANES {
                let best = p[l].min(d[l]).min(left[l]);
                out[l] = (x - b[l]).abs() + best;
            }
            cur[j] = out;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m]
}

/// Symmetric pairwise distances over the rows of a matrix, stored as the
/// condensed upper triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseDistances {
    n: usize,
    values: Vec<f64>,
}

impl DenseDistances {
    /// Builds the matrix over `rows` with `metric`, row by row in index order.
    pub fn build(n: usize, mut metric: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                values.push(metric(i, j));
            }
        }
        Self { n, values }
    }

    pub fn euclidean(rows: ArrayView2<f64>) -> Self {
        let rows: Vec<Vec<f64>> = rows.rows().into_iter().map(|r| r.to_vec()).collect();
        Self::build(rows.len(), |i, j| dist_euclidean(&rows[i], &rows[j]))
    }

    pub fn dtw(rows: ArrayView2<f64>) -> Result<Self> {
        if rows.ncols() == 0 && rows.nrows() > 1 {
            return Err(Error::EmptySeries);
        }
        let rows: Vec<Vec<f64>> = rows.rows().into_iter().map(|r| r.to_vec()).collect();
        let n = rows.len();
        let mut lanes = Vec::new();
        let mut scratch = Vec::new();
        let mut values = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            let mut j = i + 1;
            while j + LANES <= n {
                let bs = std::array::from_fn(|l| rows[j + l].as_slice());
                values.extend(dtw_lanes(&rows[i], bs, &mut lanes));
                j += LANES;
            }
            for j in j..n {
                values.push(dtw_unchecked(&rows[i], &rows[j], &mut scratch));
            }
        }
        Ok(Self { n, values })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        // offset of row i in the condensed layout
        let row_start = i * (2 * self.n - i - 1) / 2;
        self.values[row_start + (j - i - 1)]
    }
}
