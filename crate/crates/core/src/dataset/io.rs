use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use super::{Dataset, FeatureColumn, Node, NodeId, StreetGraph, YearMonth};
use crate::error::{Error, Result};

pub const NODES_FILE: &str = "nodes.csv";
pub const EDGES_FILE: &str = "edges.csv";
pub const STATIC_FILE: &str = "static.csv";
pub const DYNAMIC_FILE: &str = "dynamic.csv";
pub const LABELS_FILE: &str = "labels.csv";

#[derive(Debug, Clone)]
pub struct DatasetPaths {
    pub nodes: PathBuf,
    pub edges: PathBuf,
    pub static_features: PathBuf,
    pub dynamic_series: PathBuf,
    pub labels: Option<PathBuf>,
}

impl DatasetPaths {
    /// Conventional file names inside `dir`; `labels.csv` only if present.
    pub fn in_dir(dir: &Path) -> Self {
        let labels = dir.join(LABELS_FILE);
        Self {
            nodes: dir.join(NODES_FILE),
            edges: dir.join(EDGES_FILE),
            static_features: dir.join(STATIC_FILE),
            dynamic_series: dir.join(DYNAMIC_FILE),
            labels: labels.exists().then_some(labels),
        }
    }
}

struct Table {
    file: String,
    headers: Vec<String>,
    /// (file line, fields)
    rows: Vec<(usize, Vec<String>)>,
}

fn read_table(path: &Path) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::csv(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::csv(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        rows.push((line, record.iter().map(str::to_string).collect()));
    }
    Ok(Table {
        file: path
            .file_name()
            .map_or_else(|| path.display().to_string(), |f| f.to_string_lossy().into_owned()),
        headers,
        rows,
    })
}

impl Table {
    fn expect_headers(&self, prefix: &[&str]) -> Result<()> {
        for (i, want) in prefix.iter().enumerate() {
            if self.headers.get(i).map(String::as_str) != Some(*want) {
                return Err(Error::Schema {
                    file: self.file.clone(),
                    row: 1,
                    column: Some(format!("#{}", i + 1)),
                    message: format!("expected header `{want}`"),
                });
            }
        }
        Ok(())
    }

    fn parse_id(&self, line: usize, field: &str) -> Result<NodeId> {
        field.parse().map_err(|_| Error::Schema {
            file: self.file.clone(),
            row: line,
            column: Some(self.headers[0].clone()),
            message: format!("invalid node id `{field}`"),
        })
    }

    fn parse_f64(&self, line: usize, col: usize, field: &str) -> Result<f64> {
        let v: f64 = field.parse().map_err(|_| Error::Schema {
            file: self.file.clone(),
            row: line,
            column: Some(self.headers[col].clone()),
            message: format!("invalid number `{field}`"),
        })?;
        if !v.is_finite() {
            return Err(Error::NonFinite {
                file: self.file.clone(),
                row: line,
                column: self.headers[col].clone(),
            });
        }
        Ok(v)
    }

    fn check_width(&self, line: usize, fields: &[String]) -> Result<()> {
        if fields.len() != self.headers.len() {
            return Err(Error::Schema {
                file: self.file.clone(),
                row: line,
                column: None,
                message: format!(
                    "expected {} fields, found {}",
                    self.headers.len(),
                    fields.len()
                ),
            });
        }
        Ok(())
    }

    /// Parses a node-keyed numeric table and returns it in graph node order.
    fn node_matrix(&self, graph: &StreetGraph) -> Result<Array2<f64>> {
        let width = self.headers.len() - 1;
        if self.rows.len() != graph.len() {
            return Err(Error::CountMismatch {
                left_name: NODES_FILE.into(),
                left: graph.len(),
                right_name: self.file.clone(),
                right: self.rows.len(),
            });
        }
        let mut out = Array2::zeros((graph.len(), width));
        let mut filled = vec![false; graph.len()];
        for (line, fields) in &self.rows {
            self.check_width(*line, fields)?;
            let id = self.parse_id(*line, &fields[0])?;
            let row = graph.index_of(id).ok_or_else(|| Error::Schema {
                file: self.file.clone(),
                row: *line,
                column: Some(self.headers[0].clone()),
                message: format!("node id {id} not in {NODES_FILE}"),
            })?;
            if std::mem::replace(&mut filled[row], true) {
                return Err(Error::Schema {
                    file: self.file.clone(),
                    row: *line,
                    column: Some(self.headers[0].clone()),
                    message: format!("duplicate node id {id}"),
                });
            }
            for (j, field) in fields[1..].iter().enumerate() {
                out[[row, j]] = self.parse_f64(*line, j + 1, field)?;
            }
        }
        Ok(out)
    }
}

pub fn load_graph(nodes_path: &Path, edges_path: &Path) -> Result<StreetGraph> {
    let nodes_table = read_table(nodes_path)?;
    nodes_table.expect_headers(&["node_id", "lon", "lat"])?;
    let mut nodes = Vec::with_capacity(nodes_table.rows.len());
    for (line, fields) in &nodes_table.rows {
        nodes_table.check_width(*line, fields)?;
        nodes.push(Node {
            id: nodes_table.parse_id(*line, &fields[0])?,
            lon: nodes_table.parse_f64(*line, 1, &fields[1])?,
            lat: nodes_table.parse_f64(*line, 2, &fields[2])?,
        });
    }

    let edges_table = read_table(edges_path)?;
    edges_table.expect_headers(&["src", "dst"])?;
    let mut edges = Vec::with_capacity(edges_table.rows.len());
    for (line, fields) in &edges_table.rows {
        edges_table.check_width(*line, fields)?;
        edges.push((
            edges_table.parse_id(*line, &fields[0])?,
            edges_table.parse_id(*line, &fields[1])?,
        ));
    }
    StreetGraph::new(nodes, &edges).map_err(|e| match e {
        // report the file line rather than the edge ordinal
        Error::DanglingEdge { row, node_id } => Error::DanglingEdge {
            row: edges_table.rows[row - 1].0,
            node_id,
        },
        other => other,
    })
}

/// Loads and validates a dataset. Static column order follows the file
/// header; rows of node-keyed files are aligned to `nodes.csv` order.
pub fn load_dataset(paths: &DatasetPaths) -> Result<Dataset> {
    let graph = load_graph(&paths.nodes, &paths.edges)?;

    let static_table = read_table(&paths.static_features)?;
    static_table.expect_headers(&["node_id"])?;
    let columns = static_table.headers[1..]
        .iter()
        .map(|h| FeatureColumn::parse_header(h))
        .collect();
    let static_features = static_table.node_matrix(&graph)?;

    let dynamic_table = read_table(&paths.dynamic_series)?;
    dynamic_table.expect_headers(&["node_id"])?;
    let time_axis = dynamic_table.headers[1..]
        .iter()
        .enumerate()
        .map(|(j, h)| {
            h.parse::<YearMonth>().map_err(|_| Error::Schema {
                file: dynamic_table.file.clone(),
                row: 1,
                column: Some(h.clone()),
                message: format!("header #{} is not YYYY-MM", j + 2),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if static_table.rows.len() != dynamic_table.rows.len() {
        return Err(Error::CountMismatch {
            left_name: static_table.file.clone(),
            left: static_table.rows.len(),
            right_name: dynamic_table.file.clone(),
            right: dynamic_table.rows.len(),
        });
    }
    let dynamic_series = dynamic_table.node_matrix(&graph)?;

    let labels = match &paths.labels {
        None => None,
        Some(p) => {
            let table = read_table(p)?;
            table.expect_headers(&["node_id", "cluster"])?;
            let mut labels = vec![usize::MAX; graph.len()];
            if table.rows.len() != graph.len() {
                return Err(Error::CountMismatch {
                    left_name: NODES_FILE.into(),
                    left: graph.len(),
                    right_name: table.file.clone(),
                    right: table.rows.len(),
                });
            }
            for (line, fields) in &table.rows {
                table.check_width(*line, fields)?;
                let id = table.parse_id(*line, &fields[0])?;
                let row = graph.index_of(id).ok_or(Error::UnknownNode(id))?;
                labels[row] = fields[1].parse().map_err(|_| Error::Schema {
                    file: table.file.clone(),
                    row: *line,
                    column: Some("cluster".into()),
                    message: format!("invalid cluster id `{}`", fields[1]),
                })?;
            }
            if let Some(row) = labels.iter().position(|&l| l == usize::MAX) {
                return Err(Error::Schema {
                    file: table.file.clone(),
                    row: 0,
                    column: None,
                    message: format!("no label for node {}", graph.nodes()[row].id),
                });
            }
            Some(labels)
        }
    };

    Dataset::new(graph, columns, static_features, dynamic_series, time_axis, labels).map_err(
        |e| match e {
            Error::NonFinite { file, row, column } => Error::NonFinite {
                file: match file.as_str() {
                    "static" => STATIC_FILE.into(),
                    "dynamic" => DYNAMIC_FILE.into(),
                    _ => file,
                },
                row,
                column,
            },
            other => other,
        },
    )
}

pub fn load_dataset_dir(dir: &Path) -> Result<Dataset> {
    load_dataset(&DatasetPaths::in_dir(dir))
}

/// Writes a header row followed by `rows`.
pub fn write_csv_rows(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let header: Vec<String> = header.iter().map(|h| h.to_string()).collect();
    write_csv(path, &header, rows)
}

fn write_csv(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(header).map_err(|e| Error::csv(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes a node-keyed matrix as `node_id,<headers...>`. Floats use the
/// shortest representation that parses back to the same bits.
pub fn write_node_matrix(
    path: &Path,
    ids: &[NodeId],
    headers: &[String],
    matrix: &Array2<f64>,
) -> Result<()> {
    let mut header = vec!["node_id".to_string()];
    header.extend(headers.iter().cloned());
    write_csv(
        path,
        &header,
        ids.iter().zip(matrix.rows()).map(|(id, row)| {
            std::iter::once(id.to_string())
                .chain(row.iter().map(|v| v.to_string()))
                .collect()
        }),
    )
}

/// Reads a node-keyed matrix written by [`write_node_matrix`], in file order.
pub fn read_node_matrix(path: &Path) -> Result<(Vec<String>, Vec<NodeId>, Array2<f64>)> {
    let table = read_table(path)?;
    table.expect_headers(&["node_id"])?;
    let width = table.headers.len() - 1;
    let mut ids = Vec::with_capacity(table.rows.len());
    let mut data = Vec::with_capacity(table.rows.len() * width);
    for (line, fields) in &table.rows {
        table.check_width(*line, fields)?;
        ids.push(table.parse_id(*line, &fields[0])?);
        for (j, f) in fields[1..].iter().enumerate() {
            data.push(table.parse_f64(*line, j + 1, f)?);
        }
    }
    let matrix = Array2::from_shape_vec((ids.len(), width), data)
        .map_err(|e| Error::Dimension(e.to_string()))?;
    Ok((table.headers[1..].to_vec(), ids, matrix))
}

pub fn save_dataset(dataset: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let graph = dataset.graph();
    let ids = graph.node_ids();
    write_csv(
        &dir.join(NODES_FILE),
        &["node_id".into(), "lon".into(), "lat".into()],
        graph
            .nodes()
            .iter()
            .map(|n| vec![n.id.to_string(), n.lon.to_string(), n.lat.to_string()]),
    )?;
    write_csv(
        &dir.join(EDGES_FILE),
        &["src".into(), "dst".into()],
        graph
            .edge_ids()
            .into_iter()
            .map(|(a, b)| vec![a.to_string(), b.to_string()]),
    )?;
    let static_headers: Vec<String> = dataset.static_columns().iter().map(|c| c.header()).collect();
    write_node_matrix(
        &dir.join(STATIC_FILE),
        &ids,
        &static_headers,
        dataset.static_features(),
    )?;
    let time_headers: Vec<String> = dataset.time_axis().iter().map(|t| t.to_string()).collect();
    write_node_matrix(
        &dir.join(DYNAMIC_FILE),
        &ids,
        &time_headers,
        dataset.dynamic_series(),
    )?;
    if let Some(labels) = dataset.labels() {
        write_labels(&dir.join(LABELS_FILE), &ids, labels)?;
    }
    Ok(())
}

pub fn write_labels(path: &Path, ids: &[NodeId], labels: &[usize]) -> Result<()> {
    write_csv(
        path,
        &["node_id".into(), "cluster".into()],
        ids.iter()
            .zip(labels)
            .map(|(id, l)| vec![id.to_string(), l.to_string()]),
    )
}

/// Maps node id to row for quick lookups in tests and tools.
pub fn id_rows(ids: &[NodeId]) -> HashMap<NodeId, usize> {
    ids.iter().enumerate().map(|(i, &id)| (id, i)).collect()
}
