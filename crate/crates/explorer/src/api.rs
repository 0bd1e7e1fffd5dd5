//! Response types and the pure request handlers behind the HTTP routes.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use urbanfuse_core::dataset::{NodeId, Normalization};
use urbanfuse_core::fusion::FusionModelKind;
use urbanfuse_core::metrics::QuadrantSummary;
use urbanfuse_core::pipeline::Session;
use urbanfuse_core::{Error, Result};

use crate::stats::{histogram, is_discrete, mean_series, BoxStats};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureInfo {
    pub name: String,
    pub unit: Option<String>,
    /// Integer-valued columns are shown as bar plots, the rest as boxes.
    pub discrete: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub model: FusionModelKind,
    pub label: String,
    pub dims: usize,
    pub final_loss: Option<f64>,
    pub quadrants: QuadrantSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub config_hash: String,
    pub node_count: usize,
    pub k: usize,
    pub has_labels: bool,
    pub static_features: Vec<FeatureInfo>,
    pub time_axis: Vec<String>,
    pub models: Vec<ModelMeta>,
    pub normalization: Option<Normalization>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub model: FusionModelKind,
    pub label: String,
    pub node_ids: Vec<NodeId>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Latent k-means cluster per node.
    pub clusters: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projections {
    pub config_hash: String,
    pub projections: Vec<Projection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapPoint {
    pub id: NodeId,
    pub lon: f64,
    pub lat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapData {
    pub config_hash: String,
    pub nodes: Vec<MapPoint>,
    pub edges: Vec<(NodeId, NodeId)>,
    /// Ground-truth cluster per node when the dataset has one.
    pub labels: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRequest {
    pub node_ids: Vec<NodeId>,
    pub source_model: FusionModelKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarData {
    pub feature: String,
    pub unit: Option<String>,
    pub values: Vec<f64>,
    pub global: Vec<usize>,
    pub selected: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedValue {
    pub id: NodeId,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxData {
    pub feature: String,
    pub unit: Option<String>,
    pub global: BoxStats,
    pub selected: Option<BoxStats>,
    /// Per-node values of the selection for the dispersion strip.
    pub paired: Vec<PairedValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSeries {
    pub id: NodeId,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesData {
    pub time_axis: Vec<String>,
    pub series: Vec<NodeSeries>,
    /// Mean of `series`; `None` for an empty selection.
    pub mean: Option<Vec<f64>>,
    pub global_mean: Vec<f64>,
}

/// Everything the coordinated views need for one selection. Values are in
/// original units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkedStats {
    pub config_hash: String,
    pub source_model: FusionModelKind,
    pub selection_size: usize,
    pub map_points: Vec<MapPoint>,
    pub bar_data: Vec<BarData>,
    pub box_data: Vec<BoxData>,
    pub series_data: SeriesData,
    pub normalization: Option<Normalization>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureValue {
    pub feature: String,
    pub unit: Option<String>,
    pub value: f64,
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeDetail {
    pub config_hash: String,
    pub id: NodeId,
    pub lon: f64,
    pub lat: f64,
    pub static_features: Vec<FeatureValue>,
    pub time_axis: Vec<String>,
    pub series: Vec<f64>,
    pub normalized_series: Vec<f64>,
    pub label: Option<usize>,
    pub clusters: BTreeMap<FusionModelKind, usize>,
}

/// Read-only view over a loaded session.
pub struct Explorer {
    session: Session,
    rows: HashMap<NodeId, usize>,
    features: Vec<FeatureInfo>,
}

impl Explorer {
    pub fn new(session: Session) -> Self {
        let rows = session
            .raw
            .graph()
            .nodes()
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id, i))
            .collect();
        let stat = session.raw.static_features();
        let features = session
            .raw
            .static_columns()
            .iter()
            .enumerate()
            .map(|(j, c)| FeatureInfo {
                name: c.name.clone(),
                unit: c.unit.clone(),
                discrete: is_discrete(&stat.column(j).to_vec()),
            })
            .collect();
        Self {
            session,
            rows,
            features,
        }
    }

    pub fn session(&self) -> &Session {
        &self.session
    }

    pub fn config_hash(&self) -> &str {
        &self.session.config_hash
    }

    pub fn row_of(&self, id: NodeId) -> Result<usize> {
        self.rows.get(&id).copied().ok_or(Error::UnknownNode(id))
    }

    fn time_axis(&self) -> Vec<String> {
        self.session.raw.time_axis().iter().map(|t| t.to_string()).collect()
    }

    pub fn meta(&self) -> SessionMeta {
        let s = &self.session;
        let models = FusionModelKind::ALL
            .iter()
            .map(|&kind| {
                let rec = s.embeddings.models.get(&kind);
                ModelMeta {
                    model: kind,
                    label: kind.label().to_string(),
                    dims: rec.map_or(0, |r| r.dims),
                    final_loss: rec.and_then(|r| r.final_loss()),
                    quadrants: s.evaluations[&kind].summary.quadrants,
                }
            })
            .collect();
        SessionMeta {
            config_hash: s.config_hash.clone(),
            node_count: s.raw.len(),
            k: s.config.evaluation.k,
            has_labels: s.raw.labels().is_some(),
            static_features: self.features.clone(),
            time_axis: self.time_axis(),
            models,
            normalization: s.dataset.normalization().cloned(),
        }
    }

    pub fn projections(&self) -> Projections {
        let ids = self.session.node_ids();
        let projections = FusionModelKind::ALL
            .iter()
            .map(|&kind| {
                let coords = &self.session.projections[&kind];
                Projection {
                    model: kind,
                    label: kind.label().to_string(),
                    node_ids: ids.clone(),
                    x: coords.column(0).to_vec(),
                    y: coords.column(1).to_vec(),
                    clusters: self.session.evaluations[&kind].labels.clone(),
                }
            })
            .collect();
        Projections {
            config_hash: self.session.config_hash.clone(),
            projections,
        }
    }

    pub fn map(&self) -> MapData {
        let g = self.session.raw.graph();
        MapData {
            config_hash: self.session.config_hash.clone(),
            nodes: g
                .nodes()
                .iter()
                .map(|n| MapPoint {
                    id: n.id,
                    lon: n.lon,
                    lat: n.lat,
                })
                .collect(),
            edges: g.edge_ids(),
            labels: self.session.raw.labels().map(<[usize]>::to_vec),
        }
    }

    /// Statistics over exactly the selected nodes next to the global ones.
    /// Duplicate ids count once.
    pub fn linked_stats(&self, request: &SelectionRequest) -> Result<LinkedStats> {
        let mut rows = Vec::with_capacity(request.node_ids.len());
        let mut seen = std::collections::HashSet::new();
        for &id in &request.node_ids {
            let r = self.row_of(id)?;
            if seen.insert(r) {
                rows.push(r);
            }
        }
        let raw = &self.session.raw;
        let nodes = raw.graph().nodes();
        let stat = raw.static_features();
        let dynm = raw.dynamic_series();

        let mut bar_data = Vec::new();
        let mut box_data = Vec::new();
        for (j, info) in self.features.iter().enumerate() {
            let column = stat.column(j).to_vec();
            let picked: Vec<f64> = rows.iter().map(|&r| column[r]).collect();
            if info.discrete {
                let global = histogram(&column);
                let sel = histogram(&picked);
                bar_data.push(BarData {
                    feature: info.name.clone(),
                    unit: info.unit.clone(),
                    values: global.iter().map(|&(v, _)| v).collect(),
                    selected: global
                        .iter()
                        .map(|&(v, _)| sel.iter().find(|&&(s, _)| s == v).map_or(0, |&(_, c)| c))
                        .collect(),
                    global: global.iter().map(|&(_, c)| c).collect(),
                });
            } else {
                box_data.push(BoxData {
                    feature: info.name.clone(),
                    unit: info.unit.clone(),
                    global: BoxStats::of(&column).expect("sessions are never empty"),
                    selected: BoxStats::of(&picked),
                    paired: rows
                        .iter()
                        .map(|&r| PairedValue {
                            id: nodes[r].id,
                            value: column[r],
                        })
                        .collect(),
                });
            }
        }

        let series: Vec<NodeSeries> = rows
            .iter()
            .map(|&r| NodeSeries {
                id: nodes[r].id,
                values: dynm.row(r).to_vec(),
            })
            .collect();
        let mean = mean_series(series.iter().map(|s| s.values.as_slice()));
        let all: Vec<Vec<f64>> = dynm.rows().into_iter().map(|r| r.to_vec()).collect();
        let global_mean = mean_series(all.iter().map(Vec::as_slice)).unwrap_or_default();

        Ok(LinkedStats {
            config_hash: self.session.config_hash.clone(),
            source_model: request.source_model,
            selection_size: rows.len(),
            map_points: rows
                .iter()
                .map(|&r| MapPoint {
                    id: nodes[r].id,
                    lon: nodes[r].lon,
                    lat: nodes[r].lat,
                })
                .collect(),
            bar_data,
            box_data,
            series_data: SeriesData {
                time_axis: self.time_axis(),
                series,
                mean,
                global_mean,
            },
            normalization: self.session.dataset.normalization().cloned(),
        })
    }

    /// Original-unit static values and series of one node, with the
    /// normalized values the models saw.
    pub fn feature_values(&self, id: NodeId) -> Result<NodeDetail> {
        let r = self.row_of(id)?;
        let s = &self.session;
        let node = &s.raw.graph().nodes()[r];
        let static_features = self
            .features
            .iter()
            .enumerate()
            .map(|(j, info)| FeatureValue {
                feature: info.name.clone(),
                unit: info.unit.clone(),
                value: s.raw.static_features()[[r, j]],
                normalized: s.dataset.static_features()[[r, j]],
            })
            .collect();
        Ok(NodeDetail {
            config_hash: s.config_hash.clone(),
            id,
            lon: node.lon,
            lat: node.lat,
            static_features,
            time_axis: self.time_axis(),
            series: s.raw.dynamic_series().row(r).to_vec(),
            normalized_series: s.dataset.dynamic_series().row(r).to_vec(),
            label: s.raw.labels().map(|l| l[r]),
            clusters: s.evaluations.iter().map(|(&k, e)| (k, e.labels[r])).collect(),
        })
    }
}
