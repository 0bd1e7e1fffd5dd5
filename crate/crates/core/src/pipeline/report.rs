use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::session::{read_json, EvaluationSummary, SessionLayout};
use crate::error::{Error, Result};
use crate::fusion::{EmbeddingSet, FusionModelKind};
use crate::metrics::QuadrantSummary;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub model: FusionModelKind,
    /// Final training loss; `None` for the untrained concatenation.
    pub final_loss: Option<f64>,
    pub quadrants: QuadrantSummary,
    pub embedding_file: String,
    pub projection_file: String,
    pub eval_file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config_hash: String,
    pub models: Vec<ModelReport>,
    /// Embedding, projection and evaluation file of every model.
    pub files: Vec<String>,
}

impl Report {
    /// Fixed-width quadrant table, one row per model.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "session {}", self.config_hash);
        let _ = writeln!(
            s,
            "{:<11} {:>11} {:>6} {:>6} {:>6} {:>6}",
            "model", "final_loss", "TR", "TL", "BR", "BL"
        );
        for m in &self.models {
            let loss = m.final_loss.map_or("-".to_string(), |l| format!("{l:.4e}"));
            let q = &m.quadrants;
            let _ = writeln!(
                s,
                "{:<11} {:>11} {:>6.3} {:>6.3} {:>6.3} {:>6.3}",
                m.model.label(),
                loss,
                q.tr_fraction,
                q.tl_fraction,
                q.br_fraction,
                q.bl_fraction
            );
        }
        s
    }
}

/// Summarises a session directory from its artifacts alone.
pub fn report(dir: &Path) -> Result<Report> {
    let layout = SessionLayout::new(dir);
    for kind in FusionModelKind::ALL {
        for path in [layout.embedding(kind), layout.projection(kind), layout.eval(kind), layout.quadrants(kind)] {
            if !path.exists() {
                return Err(Error::IncompleteSession(format!(
                    "{kind}: missing {}",
                    layout.relative(&path)
                )));
            }
        }
    }
    let config = super::ExperimentConfig::from_json(
        &std::fs::read_to_string(layout.config()).map_err(|e| Error::io(layout.config(), e))?,
    )?;
    let embeddings = EmbeddingSet::load(&layout.embeddings_dir())?;
    let mut models = Vec::new();
    let mut files = Vec::new();
    for kind in FusionModelKind::ALL {
        let summary: EvaluationSummary = read_json(&layout.quadrants(kind), "quadrant summary")?;
        let rec = embeddings.get(kind)?;
        let m = ModelReport {
            model: kind,
            final_loss: rec.final_loss(),
            quadrants: summary.quadrants,
            embedding_file: layout.relative(&layout.embedding(kind)),
            projection_file: layout.relative(&layout.projection(kind)),
            eval_file: layout.relative(&layout.eval(kind)),
        };
        files.extend([m.embedding_file.clone(), m.projection_file.clone(), m.eval_file.clone()]);
        models.push(m);
    }
    Ok(Report {
        config_hash: config.hash()?,
        models,
        files,
    })
}
