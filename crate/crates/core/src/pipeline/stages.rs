use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::config::{DataSource, ExperimentConfig, GraphSource};
use super::report::{report, Report};
use super::session::{write_evaluation, write_json, write_projection, Session, SessionLayout};
use crate::dataset::{load_dataset_dir, normalize_features, save_dataset, Dataset, NormScheme};
use crate::error::{Error, Result};
use crate::fusion::{train_all, EmbeddingSet, FusionModelKind, ModelSpecs};
use crate::metrics::{evaluate_embedding, EvalConfig, Evaluation, OriginalSpace};
use crate::synth::{generate, SynthConfig};
use crate::tsne::{project, TsneConfig, TsneResult};

/// `<out>/session-<config hash>`.
pub fn session_dir(out: &Path, config: &ExperimentConfig) -> Result<PathBuf> {
    Ok(out.join(format!("session-{}", config.hash()?)))
}

/// Dataset in original units, synthetic or loaded.
pub fn build_dataset(config: &ExperimentConfig) -> Result<Dataset> {
    config.validate()?;
    match &config.source {
        DataSource::Synthetic { graph, synth } => generate(&graph.build()?, synth),
        DataSource::Directory { path } => load_dataset_dir(path),
    }
}

pub fn normalize(raw: &Dataset, scheme: NormScheme) -> Result<Dataset> {
    normalize_features(raw, scheme)
}

/// Scoring space over the normalized features. Pairwise distances are
/// precomputed when every cluster member is scored.
pub fn original_space(dataset: &Dataset, evaluation: &EvalConfig) -> Result<OriginalSpace> {
    let space = OriginalSpace::from_dataset(dataset)?;
    if evaluation.subsample_cap.is_none() {
        space.with_dense_distances()
    } else {
        Ok(space)
    }
}

pub fn evaluate_all(
    space: &OriginalSpace,
    embeddings: &EmbeddingSet,
    evaluation: &EvalConfig,
) -> Result<BTreeMap<FusionModelKind, Evaluation>> {
    let mut out = BTreeMap::new();
    for kind in FusionModelKind::ALL {
        let e = evaluate_embedding(space, embeddings.embedding(kind)?.view(), evaluation)?;
        log::info!(
            "{kind}: TR {} / TL {} / BR {} / BL {}",
            e.quadrants.top_right,
            e.quadrants.top_left,
            e.quadrants.bottom_right,
            e.quadrants.bottom_left
        );
        out.insert(kind, e);
    }
    Ok(out)
}

pub fn project_all(embeddings: &EmbeddingSet, tsne: &TsneConfig) -> Result<BTreeMap<FusionModelKind, TsneResult>> {
    let mut out = BTreeMap::new();
    for kind in FusionModelKind::ALL {
        let r = project(embeddings.embedding(kind)?.view(), tsne)?;
        log::info!("{kind}: KL {:.4} -> {:.4}", r.initial_kl(), r.final_kl());
        out.insert(kind, r);
    }
    Ok(out)
}

fn load_generated(layout: &SessionLayout, config: &ExperimentConfig) -> Result<(Dataset, Dataset)> {
    let raw = load_dataset_dir(&layout.dataset_dir())?;
    let dataset = normalize(&raw, config.normalization)?;
    Ok((raw, dataset))
}

fn generate_into(layout: &SessionLayout, config: &ExperimentConfig) -> Result<(Dataset, Dataset)> {
    fs::create_dir_all(&layout.root).map_err(|e| Error::io(&layout.root, e))?;
    fs::write(layout.config(), config.to_json()?).map_err(|e| Error::io(layout.config(), e))?;
    let raw = build_dataset(config)?;
    save_dataset(&raw, &layout.dataset_dir())?;
    let dataset = normalize(&raw, config.normalization)?;
    write_json(
        &layout.normalization(),
        dataset.normalization().expect("just normalized"),
        "normalization",
    )?;
    Ok((raw, dataset))
}

fn train_into(layout: &SessionLayout, config: &ExperimentConfig, dataset: &Dataset) -> Result<EmbeddingSet> {
    let set = train_all(dataset, &config.models)?;
    set.save(&layout.embeddings_dir())?;
    Ok(set)
}

fn evaluate_into(
    layout: &SessionLayout,
    config: &ExperimentConfig,
    dataset: &Dataset,
    embeddings: &EmbeddingSet,
) -> Result<()> {
    let space = original_space(dataset, &config.evaluation)?;
    let ids = dataset.graph().node_ids();
    for (kind, e) in evaluate_all(&space, embeddings, &config.evaluation)? {
        write_evaluation(layout, kind, &ids, &e, config.evaluation.subsample_cap)?;
    }
    Ok(())
}

fn project_into(layout: &SessionLayout, config: &ExperimentConfig, dataset: &Dataset, embeddings: &EmbeddingSet) -> Result<()> {
    let ids = dataset.graph().node_ids();
    for (kind, r) in project_all(embeddings, &config.tsne)? {
        write_projection(layout, kind, &ids, &r)?;
    }
    Ok(())
}

/// Writes `config.json`, `dataset/` and `normalization.json`.
pub fn stage_generate(config: &ExperimentConfig, out: &Path) -> Result<PathBuf> {
    let dir = session_dir(out, config)?;
    generate_into(&SessionLayout::new(&dir), config).map_err(|e| e.in_stage("generate"))?;
    Ok(dir)
}

/// Trains all five models on the generated dataset.
pub fn stage_train(config: &ExperimentConfig, out: &Path) -> Result<PathBuf> {
    let dir = session_dir(out, config)?;
    let layout = SessionLayout::new(&dir);
    (|| {
        let (_, dataset) = load_generated(&layout, config)?;
        train_into(&layout, config, &dataset).map(|_| ())
    })()
    .map_err(|e| e.in_stage("train"))?;
    Ok(dir)
}

pub fn stage_evaluate(config: &ExperimentConfig, out: &Path) -> Result<PathBuf> {
    let dir = session_dir(out, config)?;
    let layout = SessionLayout::new(&dir);
    (|| {
        let (_, dataset) = load_generated(&layout, config)?;
        let embeddings = EmbeddingSet::load(&layout.embeddings_dir())?;
        evaluate_into(&layout, config, &dataset, &embeddings)
    })()
    .map_err(|e| e.in_stage("evaluate"))?;
    Ok(dir)
}

pub fn stage_project(config: &ExperimentConfig, out: &Path) -> Result<PathBuf> {
    let dir = session_dir(out, config)?;
    let layout = SessionLayout::new(&dir);
    (|| {
        let (_, dataset) = load_generated(&layout, config)?;
        let embeddings = EmbeddingSet::load(&layout.embeddings_dir())?;
        project_into(&layout, config, &dataset, &embeddings)
    })()
    .map_err(|e| e.in_stage("project"))?;
    Ok(dir)
}

/// Every stage in order, then the report. Artifacts of completed stages
/// stay on disk when a later stage fails.
pub fn run_all(config: &ExperimentConfig, out: &Path) -> Result<(PathBuf, Report)> {
    let dir = session_dir(out, config)?;
    let layout = SessionLayout::new(&dir);
    let (_, dataset) = generate_into(&layout, config).map_err(|e| e.in_stage("generate"))?;
    let embeddings = train_into(&layout, config, &dataset).map_err(|e| e.in_stage("train"))?;
    evaluate_into(&layout, config, &dataset, &embeddings).map_err(|e| e.in_stage("evaluate"))?;
    project_into(&layout, config, &dataset, &embeddings).map_err(|e| e.in_stage("project"))?;
    let rep = report(&dir).map_err(|e| e.in_stage("report"))?;
    write_json(&layout.report(), &rep, "report").map_err(|e| e.in_stage("report"))?;
    Ok((dir, rep))
}

/// Synthetic experiment on `graph`; prints the quadrant summary table.
pub fn run_synthetic_experiment(
    graph: GraphSource,
    synth: SynthConfig,
    models: ModelSpecs,
    evaluation: EvalConfig,
    out: &Path,
) -> Result<Session> {
    let config = ExperimentConfig {
        models,
        evaluation,
        ..ExperimentConfig::synthetic(graph, synth)
    };
    let (dir, rep) = run_all(&config, out)?;
    println!("{}", rep.table());
    Session::load(&dir)
}

/// Experiment on user-supplied CSVs; DTW scoring is always subsampled.
pub fn run_real_experiment(
    dataset_dir: &Path,
    models: ModelSpecs,
    mut evaluation: EvalConfig,
    out: &Path,
) -> Result<Session> {
    if evaluation.subsample_cap.is_none() {
        evaluation.subsample_cap = Some(super::config::REAL_DATA_SUBSAMPLE_CAP);
    }
    let config = ExperimentConfig {
        models,
        evaluation,
        ..ExperimentConfig::directory(dataset_dir.to_path_buf())
    };
    let (dir, rep) = run_all(&config, out)?;
    println!("{}", rep.table());
    Session::load(&dir)
}
