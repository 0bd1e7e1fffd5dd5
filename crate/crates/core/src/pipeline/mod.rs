//! generate → train → evaluate → project, persisted as a session directory
//! named by the hash of its configuration.

mod config;
mod report;
mod session;
mod stages;

pub use config::{DataSource, ExperimentConfig, GraphSource, REAL_DATA_SUBSAMPLE_CAP};
pub use report::{report, ModelReport, Report};
pub use session::{EvaluationRecord, EvaluationSummary, ProjectionTrace, Session, SessionLayout};
pub use stages::{
    build_dataset, evaluate_all, normalize, original_space, project_all, run_all, run_real_experiment,
    run_synthetic_experiment, session_dir, stage_evaluate, stage_generate, stage_project, stage_train,
};
