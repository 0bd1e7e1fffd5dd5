use std::fs;
use std::path::Path;

use urbanfuse_core::dataset::save_dataset;
use urbanfuse_core::fusion::{AeHyper, FusionModelKind, LossWeights, ModelSpecs};
use urbanfuse_core::metrics::{EvalConfig, QuadrantSummary};
use urbanfuse_core::pipeline::{
    report, run_all, run_real_experiment, stage_evaluate, stage_generate, stage_project, stage_train,
    ExperimentConfig, GraphSource, Session,
};
use urbanfuse_core::synth::{generate, grid_graph, SynthConfig};
use urbanfuse_core::tsne::TsneConfig;
use urbanfuse_core::Error;

fn small_models(seed: u64) -> ModelSpecs {
    let h = AeHyper {
        hidden_dim: 8,
        latent_dim: 4,
        epochs: 30,
        learning_rate: 1e-2,
    };
    ModelSpecs {
        static_ae: AeHyper { latent_dim: 3, ..h },
        dynamic_ae: h,
        early: h,
        top: h,
        loss_weights: LossWeights::default(),
        seed,
    }
}

fn small_config() -> ExperimentConfig {
    let synth = SynthConfig {
        k_clusters: 3,
        n_static: 5,
        n_timesteps: 16,
        ..SynthConfig::default()
    };
    ExperimentConfig {
        models: small_models(3),
        evaluation: EvalConfig {
            k: 3,
            seed: 3,
            subsample_cap: None,
        },
        tsne: TsneConfig {
            perplexity: 6.0,
            iterations: 250,
            ..TsneConfig::default()
        },
        ..ExperimentConfig::synthetic(
            GraphSource::Grid {
                rows: 6,
                cols: 6,
                seed: 1,
            },
            synth,
        )
    }
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn toy_session_has_every_artifact() {
    let out = tempfile::tempdir().unwrap();
    let (dir, rep) = run_all(&small_config(), out.path()).unwrap();
    assert_eq!(rep.files.len(), 15);
    for f in &rep.files {
        assert!(dir.join(f).exists(), "{f}");
    }
    assert!(rep.table().contains("M1-Static"));
    let session = Session::load(&dir).unwrap();
    assert_eq!(session.projections.len(), 5);
    assert_eq!(session.evaluations.len(), 5);
    for kind in FusionModelKind::ALL {
        assert_eq!(session.evaluations[&kind].pairs.len(), 3);
        assert_eq!(session.projections[&kind].dim(), (36, 2));
    }
    assert!(dir.file_name().unwrap().to_string_lossy().starts_with("session-"));
}

#[test]
fn staged_run_matches_run_all() {
    let config = small_config();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (dir_a, _) = run_all(&config, a.path()).unwrap();
    stage_generate(&config, b.path()).unwrap();
    stage_train(&config, b.path()).unwrap();
    stage_evaluate(&config, b.path()).unwrap();
    let dir_b = stage_project(&config, b.path()).unwrap();
    let mut ta = tree(&dir_a);
    ta.retain(|(name, _)| name != "report.json");
    assert_eq!(ta, tree(&dir_b));
}

#[test]
fn report_matches_eval_csvs_and_names_missing_model() {
    let out = tempfile::tempdir().unwrap();
    let (dir, rep) = run_all(&small_config(), out.path()).unwrap();
    for m in &rep.models {
        // independent recount from the CSV text
        let text = fs::read_to_string(dir.join(&m.eval_file)).unwrap();
        let mut counts = [0usize; 4];
        for line in text.lines().skip(1) {
            let f: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
            let idx = match (f[2] > 0.0, f[3] > 0.0) {
                (true, true) => 0,
                (false, true) => 1,
                (true, false) => 2,
                (false, false) => 3,
            };
            counts[idx] += 1;
        }
        let total = counts.iter().sum::<usize>() as f64;
        let q: &QuadrantSummary = &m.quadrants;
        assert_eq!([q.top_right, q.top_left, q.bottom_right, q.bottom_left], counts);
        assert_eq!(q.tr_fraction, counts[0] as f64 / total);
        assert_eq!(q.bl_fraction, counts[3] as f64 / total);
    }
    fs::remove_file(dir.join("embeddings/m3.csv")).unwrap();
    let err = report(&dir).unwrap_err();
    assert!(matches!(err, Error::IncompleteSession(_)));
    assert!(err.to_string().contains("M3"), "{err}");
}

fn real_dir(root: &Path) -> std::path::PathBuf {
    let graph = grid_graph(5, 10, 2).unwrap();
    let synth = SynthConfig {
        k_clusters: 3,
        n_static: 4,
        n_timesteps: 12,
        ..SynthConfig::default()
    };
    let dir = root.join("data");
    save_dataset(&generate(&graph, &synth).unwrap(), &dir).unwrap();
    fs::remove_file(dir.join("labels.csv")).unwrap();
    dir
}

#[test]
fn real_miniature_without_labels_runs_end_to_end() {
    let root = tempfile::tempdir().unwrap();
    let data = real_dir(root.path());
    let mut models = small_models(1);
    models.static_ae.latent_dim = 2;
    let eval = EvalConfig {
        k: 4,
        seed: 1,
        subsample_cap: None,
    };
    let out = root.path().join("out");
    // perplexity must fit 50 nodes
    let config = ExperimentConfig {
        models,
        evaluation: EvalConfig {
            subsample_cap: Some(10),
            ..eval
        },
        tsne: TsneConfig {
            perplexity: 10.0,
            iterations: 250,
            ..TsneConfig::default()
        },
        ..ExperimentConfig::directory(data.clone())
    };
    let (dir, rep) = run_all(&config, &out).unwrap();
    assert_eq!(rep.files.len(), 15);
    let session = Session::load(&dir).unwrap();
    assert!(session.raw.labels().is_none());
    assert_eq!(session.evaluations[&FusionModelKind::M2Early].summary.subsample_cap, Some(10));
}

#[test]
fn real_experiment_defaults_to_subsampling() {
    let root = tempfile::tempdir().unwrap();
    let data = real_dir(root.path());
    let mut models = small_models(1);
    models.static_ae.latent_dim = 2;
    let eval = EvalConfig {
        k: 3,
        seed: 1,
        subsample_cap: None,
    };
    // default t-SNE perplexity is infeasible at 50 nodes: the failure is
    // tagged with the projection stage and earlier artifacts survive
    let err = run_real_experiment(&data, models, eval, &root.path().join("out")).unwrap_err();
    assert!(err.to_string().contains("stage `project`"), "{err}");
    let session_root = fs::read_dir(root.path().join("out")).unwrap().next().unwrap().unwrap().path();
    let q = fs::read_to_string(session_root.join("quadrants_m4.json")).unwrap();
    assert!(q.contains("\"subsample_cap\": 200"), "{q}");
}

#[test]
fn static_dynamic_count_mismatch_names_both_counts() {
    let root = tempfile::tempdir().unwrap();
    let data = real_dir(root.path());
    let text = fs::read_to_string(data.join("dynamic.csv")).unwrap();
    let trimmed: Vec<&str> = text.lines().take(text.lines().count() - 1).collect();
    fs::write(data.join("dynamic.csv"), trimmed.join("\n") + "\n").unwrap();
    let config = ExperimentConfig::directory(data);
    let err = run_all(&config, &root.path().join("out")).unwrap_err().to_string();
    assert!(err.contains("stage `generate`"), "{err}");
    assert!(err.contains("50") && err.contains("49"), "{err}");
}
