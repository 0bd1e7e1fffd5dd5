//! Street-graph data model: graph topology, aligned static and dynamic node
//! attributes, CSV ingestion and incident-to-node assignment.

mod graph;
mod incidents;
pub mod io;
mod normalize;

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use graph::{Node, NodeId, StreetGraph};
pub use incidents::{assign_incidents, load_incidents, AssignmentReport, IncidentRecord, TimeRange};
pub use io::{load_dataset, load_dataset_dir, save_dataset, DatasetPaths};
pub use normalize::{normalize_features, ColumnNorm, NormScheme, Normalization};

/// Calendar month, the resolution of the dynamic series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct YearMonth {
    pub year: i32,
    pub month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::Config(format!("month {month} out of range")));
        }
        Ok(Self { year, month })
    }

    /// Months elapsed since `origin` (negative if earlier).
    pub fn months_since(&self, origin: YearMonth) -> i64 {
        (self.year as i64 - origin.year as i64) * 12 + self.month as i64 - origin.month as i64
    }

    pub fn plus_months(&self, months: u32) -> YearMonth {
        let total = self.year as i64 * 12 + (self.month as i64 - 1) + months as i64;
        YearMonth {
            year: total.div_euclid(12) as i32,
            month: total.rem_euclid(12) as u32 + 1,
        }
    }

    /// `count` consecutive months starting at `self`.
    pub fn range(&self, count: usize) -> Vec<YearMonth> {
        (0..count as u32).map(|m| self.plus_months(m)).collect()
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("expected YYYY-MM, got `{s}`"));
        let (y, m) = s.trim().split_once('-').ok_or_else(bad)?;
        if y.len() != 4 || m.len() != 2 {
            return Err(bad());
        }
        let year = y.parse().map_err(|_| bad())?;
        let month = m.parse().map_err(|_| bad())?;
        YearMonth::new(year, month)
    }
}

/// A static feature column. Headers of the form `name[unit]` carry a unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureColumn {
    pub name: String,
    pub unit: Option<String>,
}

impl FeatureColumn {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            unit: None,
        }
    }

    pub fn parse_header(header: &str) -> Self {
        let header = header.trim();
        if let Some(stripped) = header.strip_suffix(']') {
            if let Some((name, unit)) = stripped.split_once('[') {
                return Self {
                    name: name.trim().to_string(),
                    unit: Some(unit.trim().to_string()),
                };
            }
        }
        Self::new(header)
    }

    pub fn header(&self) -> String {
        match &self.unit {
            Some(u) => format!("{}[{}]", self.name, u),
            None => self.name.clone(),
        }
    }
}

/// Static and dynamic attributes aligned to the nodes of a street graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    graph: StreetGraph,
    static_columns: Vec<FeatureColumn>,
    static_features: Array2<f64>,
    dynamic_series: Array2<f64>,
    time_axis: Vec<YearMonth>,
    labels: Option<Vec<usize>>,
    normalization: Option<Normalization>,
}

impl Dataset {
    /// Validates shapes and value domains. Static values must be finite,
    /// dynamic values finite and non-negative, the time axis strictly
    /// increasing.
    pub fn new(
        graph: StreetGraph,
        static_columns: Vec<FeatureColumn>,
        static_features: Array2<f64>,
        dynamic_series: Array2<f64>,
        time_axis: Vec<YearMonth>,
        labels: Option<Vec<usize>>,
    ) -> Result<Self> {
        let n = graph.len();
        let mismatch = |name: &str, rows: usize| Error::CountMismatch {
            left_name: "graph".into(),
            left: n,
            right_name: name.into(),
            right: rows,
        };
        if static_features.nrows() != n {
            return Err(mismatch("static features", static_features.nrows()));
        }
        if dynamic_series.nrows() != n {
            return Err(mismatch("dynamic series", dynamic_series.nrows()));
        }
        if static_features.ncols() != static_columns.len() {
            return Err(Error::Dimension(format!(
                "{} static columns named but matrix has {}",
                static_columns.len(),
                static_features.ncols()
            )));
        }
        if dynamic_series.ncols() != time_axis.len() {
            return Err(Error::Dimension(format!(
                "time axis has {} bins but series have {}",
                time_axis.len(),
                dynamic_series.ncols()
            )));
        }
        if let Some(w) = time_axis.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!(
                "time axis not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
        for ((r, c), v) in static_features.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    file: "static".into(),
                    row: r + 1,
                    column: static_columns[c].header(),
                });
            }
        }
        for ((r, c), v) in dynamic_series.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    file: "dynamic".into(),
                    row: r + 1,
                    column: time_axis[c].to_string(),
                });
            }
            if *v < 0.0 {
                return Err(Error::Schema {
                    file: "dynamic".into(),
                    row: r + 1,
                    column: Some(time_axis[c].to_string()),
                    message: format!("negative count {v}"),
                });
            }
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(mismatch("labels", l.len()));
            }
        }
        Ok(Self {
            graph,
            static_columns,
            static_features,
            dynamic_series,
            time_axis,
            labels,
            normalization: None,
        })
    }

    pub fn len(&self) -> usize {
        self.graph.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graph.is_empty()
    }

    pub fn graph(&self) -> &StreetGraph {
        &self.graph
    }

    pub fn static_columns(&self) -> &[FeatureColumn] {
        &self.static_columns
    }

    pub fn static_features(&self) -> &Array2<f64> {
        &self.static_features
    }

    pub fn dynamic_series(&self) -> &Array2<f64> {
        &self.dynamic_series
    }

    pub fn time_axis(&self) -> &[YearMonth] {
        &self.time_axis
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// Number of ground-truth clusters, if labels are attached.
    pub fn label_count(&self) -> Option<usize> {
        self.labels
            .as_ref()
            .map(|l| l.iter().copied().max().map_or(0, |m| m + 1))
    }

    pub fn normalization(&self) -> Option<&Normalization> {
        self.normalization.as_ref()
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::CountMismatch {
                left_name: "graph".into(),
                left: self.len(),
                right_name: "labels".into(),
                right: labels.len(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Static and dynamic columns side by side, `n × (p + T)`.
    pub fn concatenated_features(&self) -> Array2<f64> {
        ndarray::concatenate(
            ndarray::Axis(1),
            &[self.static_features.view(), self.dynamic_series.view()],
        )
        .expect("row counts validated at construction")
    }

    /// Reorders nodes so that new row `i` is old row `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let graph = self.graph.permuted(order)?;
        let static_features = self.static_features.select(ndarray::Axis(0), order);
        let dynamic_series = self.dynamic_series.select(ndarray::Axis(0), order);
        let labels = self
            .labels
            .as_ref()
            .map(|l| order.iter().map(|&i| l[i]).collect());
        Ok(Self {
            graph,
            static_columns: self.static_columns.clone(),
            static_features,
            dynamic_series,
            time_axis: self.time_axis.clone(),
            labels,
            normalization: self.normalization.clone(),
        })
    }

    pub(crate) fn with_normalized(
        &self,
        static_features: Array2<f64>,
        dynamic_series: Array2<f64>,
        normalization: Normalization,
    ) -> Self {
        Self {
            graph: self.graph.clone(),
            static_columns: self.static_columns.clone(),
            static_features,
            dynamic_series,
            time_axis: self.time_axis.clone(),
            labels: self.labels.clone(),
            normalization: Some(normalization),
        }
    }
}
