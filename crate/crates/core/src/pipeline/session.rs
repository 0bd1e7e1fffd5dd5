use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::stages::normalize;
use crate::dataset::io::{read_node_matrix, write_csv_rows, write_labels, write_node_matrix};
use crate::dataset::{load_dataset_dir, Dataset, NodeId};
use crate::error::{Error, Result};
use crate::fusion::{EmbeddingSet, FusionModelKind};
use crate::metrics::{Evaluation, QuadrantSummary, SilhouettePair};
use crate::tsne::TsneResult;

/// File names inside a session directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionLayout {
    pub root: PathBuf,
}

impl SessionLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn config(&self) -> PathBuf {
        self.root.join("config.json")
    }

    pub fn dataset_dir(&self) -> PathBuf {
        self.root.join("dataset")
    }

    pub fn normalization(&self) -> PathBuf {
        self.root.join("normalization.json")
    }

    pub fn embeddings_dir(&self) -> PathBuf {
        self.root.join("embeddings")
    }

    pub fn embedding(&self, kind: FusionModelKind) -> PathBuf {
        self.embeddings_dir().join(format!("{}.csv", kind.stem()))
    }

    pub fn eval(&self, kind: FusionModelKind) -> PathBuf {
        self.root.join(format!("eval_{}.csv", kind.stem()))
    }

    pub fn quadrants(&self, kind: FusionModelKind) -> PathBuf {
        self.root.join(format!("quadrants_{}.json", kind.stem()))
    }

    pub fn clusters(&self, kind: FusionModelKind) -> PathBuf {
        self.root.join(format!("clusters_{}.csv", kind.stem()))
    }

    pub fn projection(&self, kind: FusionModelKind) -> PathBuf {
        self.root.join(format!("proj_{}.csv", kind.stem()))
    }

    pub fn projection_trace(&self, kind: FusionModelKind) -> PathBuf {
        self.root.join(format!("tsne_{}.json", kind.stem()))
    }

    pub fn report(&self) -> PathBuf {
        self.root.join("report.json")
    }

    /// Relative path as listed in the report index.
    pub fn relative(&self, path: &Path) -> String {
        path.strip_prefix(&self.root)
            .unwrap_or(path)
            .to_string_lossy()
            .replace('\\', "/")
    }
}

/// Content of `quadrants_<model>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSummary {
    pub model: FusionModelKind,
    pub k: usize,
    pub seed: u64,
    pub inertia: f64,
    pub subsample_cap: Option<usize>,
    pub quadrants: QuadrantSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationRecord {
    pub summary: EvaluationSummary,
    pub pairs: Vec<SilhouettePair>,
    /// Latent k-means label per node.
    pub labels: Vec<usize>,
}

/// Content of `tsne_<model>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionTrace {
    pub model: FusionModelKind,
    pub initial_kl: f64,
    pub final_kl: f64,
    pub kl_trace: Vec<f64>,
    pub perplexities: Vec<f64>,
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T, context: &str) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::json(context, e))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, context: &str) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(context, e))
}

pub(crate) fn write_evaluation(
    layout: &SessionLayout,
    kind: FusionModelKind,
    ids: &[NodeId],
    evaluation: &Evaluation,
    subsample_cap: Option<usize>,
) -> Result<()> {
    let path = layout.eval(kind);
    write_csv_rows(
        &path,
        &["cluster_a", "cluster_b", "s_static", "s_dynamic"],
        evaluation.pairs.iter().map(|p| {
            vec![
                p.cluster_a.to_string(),
                p.cluster_b.to_string(),
                p.s_static.to_string(),
                p.s_dynamic.to_string(),
            ]
        }),
    )?;
    write_labels(&layout.clusters(kind), ids, &evaluation.assignment.labels)?;
    let summary = EvaluationSummary {
        model: kind,
        k: evaluation.assignment.k,
        seed: evaluation.assignment.seed,
        inertia: evaluation.assignment.inertia,
        subsample_cap,
        quadrants: evaluation.quadrants,
    };
    write_json(&layout.quadrants(kind), &summary, "quadrant summary")
}

pub(crate) fn write_projection(
    layout: &SessionLayout,
    kind: FusionModelKind,
    ids: &[NodeId],
    result: &TsneResult,
) -> Result<()> {
    write_node_matrix(
        &layout.projection(kind),
        ids,
        &["x".to_string(), "y".to_string()],
        &result.coords,
    )?;
    let trace = ProjectionTrace {
        model: kind,
        initial_kl: result.initial_kl(),
        final_kl: result.final_kl(),
        kl_trace: result.kl_trace.clone(),
        perplexities: result.perplexities.clone(),
    };
    write_json(&layout.projection_trace(kind), &trace, "projection trace")
}

/// Parses `eval_<model>.csv`.
pub fn read_eval_csv(path: &Path) -> Result<Vec<SilhouettePair>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut pairs = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let bad = |column: &str| Error::Schema {
            file: path.display().to_string(),
            row: i + 2,
            column: Some(column.to_string()),
            message: "unparsable value".into(),
        };
        let field = |j: usize| rec.get(j).unwrap_or_default().trim().to_string();
        pairs.push(SilhouettePair {
            cluster_a: field(0).parse().map_err(|_| bad("cluster_a"))?,
            cluster_b: field(1).parse().map_err(|_| bad("cluster_b"))?,
            s_static: field(2).parse().map_err(|_| bad("s_static"))?,
            s_dynamic: field(3).parse().map_err(|_| bad("s_dynamic"))?,
        });
    }
    Ok(pairs)
}

fn read_labels_csv(path: &Path, ids: &[NodeId]) -> Result<Vec<usize>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut labels = Vec::with_capacity(ids.len());
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let schema = |message: &str| Error::Schema {
            file: path.display().to_string(),
            row: i + 2,
            column: None,
            message: message.into(),
        };
        let id: NodeId = rec.get(0).unwrap_or_default().parse().map_err(|_| schema("bad node id"))?;
        if ids.get(i) != Some(&id) {
            return Err(schema("node order differs from the dataset"));
        }
        labels.push(rec.get(1).unwrap_or_default().parse().map_err(|_| schema("bad cluster id"))?);
    }
    if labels.len() != ids.len() {
        return Err(Error::CountMismatch {
            left_name: "dataset".into(),
            left: ids.len(),
            right_name: path.display().to_string(),
            right: labels.len(),
        });
    }
    Ok(labels)
}

/// A complete session loaded from disk.
#[derive(Debug, Clone)]
pub struct Session {
    pub layout: SessionLayout,
    pub config: ExperimentConfig,
    pub config_hash: String,
    /// Dataset in original units.
    pub raw: Dataset,
    /// Normalized dataset the models were trained and scored on.
    pub dataset: Dataset,
    pub embeddings: EmbeddingSet,
    pub evaluations: BTreeMap<FusionModelKind, EvaluationRecord>,
    pub projections: BTreeMap<FusionModelKind, Array2<f64>>,
    pub projection_traces: BTreeMap<FusionModelKind, ProjectionTrace>,
}

impl Session {
    /// Loads every artifact; a missing model artifact is reported by model
    /// name.
    pub fn load(dir: &Path) -> Result<Self> {
        let layout = SessionLayout::new(dir);
        let config = ExperimentConfig::from_json(
            &fs::read_to_string(layout.config()).map_err(|e| Error::io(layout.config(), e))?,
        )?;
        let config_hash = config.hash()?;
        let raw = load_dataset_dir(&layout.dataset_dir())?;
        let dataset = normalize(&raw, config.normalization)?;
        let ids = raw.graph().node_ids();

        for kind in FusionModelKind::ALL {
            for path in [
                layout.embedding(kind),
                layout.eval(kind),
                layout.quadrants(kind),
                layout.clusters(kind),
                layout.projection(kind),
            ] {
                if !path.exists() {
                    return Err(Error::IncompleteSession(format!(
                        "{kind}: missing {}",
                        layout.relative(&path)
                    )));
                }
            }
        }
        let embeddings = EmbeddingSet::load(&layout.embeddings_dir())?;
        if embeddings.node_ids != ids {
            return Err(Error::Graph("embedding node order differs from the dataset".into()));
        }
        let mut evaluations = BTreeMap::new();
        let mut projections = BTreeMap::new();
        let mut projection_traces = BTreeMap::new();
        for kind in FusionModelKind::ALL {
            let summary: EvaluationSummary = read_json(&layout.quadrants(kind), "quadrant summary")?;
            let pairs = read_eval_csv(&layout.eval(kind))?;
            let labels = read_labels_csv(&layout.clusters(kind), &ids)?;
            evaluations.insert(
                kind,
                EvaluationRecord {
                    summary,
                    pairs,
                    labels,
                },
            );
            let (_, pids, coords) = read_node_matrix(&layout.projection(kind))?;
            if pids != ids {
                return Err(Error::Graph(format!(
                    "{} node order differs from the dataset",
                    layout.relative(&layout.projection(kind))
                )));
            }
            projections.insert(kind, coords);
            let trace_path = layout.projection_trace(kind);
            if trace_path.exists() {
                projection_traces.insert(kind, read_json(&trace_path, "projection trace")?);
            }
        }
        Ok(Self {
            layout,
            config,
            config_hash,
            raw,
            dataset,
            embeddings,
            evaluations,
            projections,
            projection_traces,
        })
    }

    pub fn node_ids(&self) -> Vec<NodeId> {
        self.raw.graph().node_ids()
    }
}
