//! Descriptive statistics for the linked views.

use serde::{Deserialize, Serialize};

/// Five-number summary with Tukey whiskers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub count: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    /// Smallest value at or above `q1 - 1.5·IQR`.
    pub whisker_low: f64,
    /// Largest value at or below `q3 + 1.5·IQR`.
    pub whisker_high: f64,
    pub mean: f64,
}

/// Linear-interpolation quantile of sorted data (R type 7).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl BoxStats {
    /// `None` for no values.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q1 = quantile_sorted(&v, 0.25);
        let q3 = quantile_sorted(&v, 0.75);
        let iqr = q3 - q1;
        let lo_fence = q1 - 1.5 * iqr;
        let hi_fence = q3 + 1.5 * iqr;
        Some(Self {
            count: v.len(),
            min: v[0],
            q1,
            median: quantile_sorted(&v, 0.5),
            q3,
            max: v[v.len() - 1],
            whisker_low: *v.iter().find(|&&x| x >= lo_fence).expect("q1 lies inside the fences"),
            whisker_high: *v.iter().rev().find(|&&x| x <= hi_fence).expect("q3 lies inside the fences"),
            mean: v.iter().sum::<f64>() / v.len() as f64,
        })
    }
}

/// True when every value is a whole number: counts and flags.
pub fn is_discrete(values: &[f64]) -> bool {
    !values.is_empty() && values.iter().all(|v| v.fract() == 0.0)
}

/// Sorted distinct values and their counts.
pub fn histogram(values: &[f64]) -> Vec<(f64, usize)> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mut out: Vec<(f64, usize)> = Vec::new();
    for x in v {
        match out.last_mut() {
            Some((val, c)) if *val == x => *c += 1,
            _ => out.push((x, 1)),
        }
    }
    out
}

/// Element-wise arithmetic mean of equal-length series.
pub fn mean_series<'a>(series: impl IntoIterator<Item = &'a [f64]>) -> Option<Vec<f64>> {
    let mut acc: Option<Vec<f64>> = None;
    let mut n = 0usize;
    for s in series {
        n += 1;
        match &mut acc {
            None => acc = Some(s.to_vec()),
            Some(a) => a.iter_mut().zip(s).for_each(|(x, y)| *x += y),
        }
    }
    acc.map(|mut a| {
        a.iter_mut().for_each(|x| *x /= n as f64);
        a
    })
}
