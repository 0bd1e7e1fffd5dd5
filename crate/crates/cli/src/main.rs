use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use urbanfuse_core::dataset::io::write_node_matrix;
use urbanfuse_core::dataset::{assign_incidents, load_incidents, NodeId, TimeRange, YearMonth};
use urbanfuse_core::dataset::io::load_graph;
use urbanfuse_core::fusion::aggregator;
use urbanfuse_core::gae::{grid_search, SpecGrid};
use urbanfuse_core::pipeline::{
    build_dataset, normalize, report, run_all, session_dir, stage_evaluate, stage_generate, stage_project,
    stage_train, ExperimentConfig,
};
use urbanfuse_core::{Error, Result};

#[derive(Parser)]
#[command(name = "urbanfuse", version, about = "Train, evaluate and explore fused street-graph embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (JSON). Defaults to the 2,000-node synthetic setup.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides every seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Parent directory of session directories.
    #[arg(long, default_value = "sessions")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Build the dataset and write it into the session.
    Generate(Common),
    /// Train all five embedding models.
    Train(Common),
    /// Cluster embeddings and score silhouette pairs.
    Evaluate(Common),
    /// Project embeddings to 2D with t-SNE.
    Project(Common),
    /// Every stage, then the report.
    RunAll(Common),
    /// Summarise a session from its artifacts.
    Report {
        #[command(flatten)]
        common: Common,
        /// Session directory; derived from the config when omitted.
        #[arg(long)]
        session: Option<PathBuf>,
        /// Print the machine-readable index instead of the table.
        #[arg(long)]
        json: bool,
    },
    /// Serve the explorer API over a session.
    Serve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        session: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
    /// Count geolocated incidents per node and month into a dynamic.csv.
    Assign {
        #[arg(long)]
        nodes: PathBuf,
        #[arg(long)]
        edges: PathBuf,
        #[arg(long)]
        incidents: PathBuf,
        /// First month, YYYY-MM.
        #[arg(long)]
        start: YearMonth,
        /// Last month, YYYY-MM, inclusive.
        #[arg(long)]
        end: YearMonth,
        #[arg(long)]
        output: PathBuf,
    },
    /// Grid search over autoencoder hyperparameters by reconstruction loss.
    Tune {
        #[command(flatten)]
        common: Common,
        /// Hyperparameter grid (JSON).
        #[arg(long)]
        grid: PathBuf,
        #[arg(long, value_enum, default_value_t = Input::Static)]
        input: Input,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Input {
    Static,
    Dynamic,
    Combined,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let config = match &self.config {
            Some(path) => ExperimentConfig::from_file(path),
            None => Ok(ExperimentConfig::default()),
        }
        .map_err(|e| e.in_stage("config"))?;
        Ok(match self.seed {
            Some(seed) => config.with_seed(seed),
            None => config,
        })
    }

    fn session(&self, explicit: &Option<PathBuf>) -> Result<PathBuf> {
        match explicit {
            Some(dir) => Ok(dir.clone()),
            None => session_dir(&self.out, &self.load()?),
        }
    }
}

fn print_dir(dir: &Path) {
    println!("{}", dir.display());
}

fn assign(nodes: &Path, edges: &Path, incidents: &Path, range: TimeRange, output: &Path) -> Result<()> {
    let graph = load_graph(nodes, edges)?;
    let records = load_incidents(incidents)?;
    let (counts, rep) = assign_incidents(&graph, &records, range)?;
    let ids: Vec<NodeId> = graph.node_ids();
    let headers: Vec<String> = range.axis().iter().map(|m| m.to_string()).collect();
    write_node_matrix(output, &ids, &headers, &counts)?;
    println!(
        "assigned {} incidents ({} out of range, {} invalid)",
        rep.assigned, rep.out_of_range, rep.invalid
    );
    Ok(())
}

fn tune(config: &ExperimentConfig, grid: &Path, input: Input) -> Result<()> {
    let text = std::fs::read_to_string(grid).map_err(|e| Error::io(grid, e))?;
    let grid: SpecGrid = serde_json::from_str(&text).map_err(|e| Error::Config(format!("grid: {e}")))?;
    let dataset = normalize(&build_dataset(config)?, config.normalization)?;
    let features = match input {
        Input::Static => dataset.static_features().clone(),
        Input::Dynamic => dataset.dynamic_series().clone(),
        Input::Combined => dataset.concatenated_features(),
    };
    let result = grid_search(&grid, features.view(), &aggregator(&dataset))?;
    println!(
        "{}",
        serde_json::to_string_pretty(&result).map_err(|e| Error::Config(e.to_string()))?
    );
    Ok(())
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Generate(c) => print_dir(&stage_generate(&c.load()?, &c.out)?),
        Command::Train(c) => print_dir(&stage_train(&c.load()?, &c.out)?),
        Command::Evaluate(c) => print_dir(&stage_evaluate(&c.load()?, &c.out)?),
        Command::Project(c) => print_dir(&stage_project(&c.load()?, &c.out)?),
        Command::RunAll(c) => {
            let (dir, rep) = run_all(&c.load()?, &c.out)?;
            print!("{}", rep.table());
            print_dir(&dir);
        }
        Command::Report { common, session, json } => {
            let dir = common.session(&session)?;
            let rep = report(&dir).map_err(|e| e.in_stage("report"))?;
            if json {
                let text = serde_json::to_string_pretty(&rep).map_err(|e| Error::Config(e.to_string()))?;
                println!("{text}");
            } else {
                print!("{}", rep.table());
            }
        }
        Command::Serve { common, session, addr } => {
            let dir = common.session(&session)?;
            let runtime = tokio::runtime::Runtime::new().map_err(|e| Error::io(&dir, e))?;
            runtime
                .block_on(urbanfuse_explorer::serve(&dir, addr))
                .map_err(|e| e.in_stage("serve"))?;
        }
        Command::Assign {
            nodes,
            edges,
            incidents,
            start,
            end,
            output,
        } => (|| assign(&nodes, &edges, &incidents, TimeRange::new(start, end)?, &output))()
            .map_err(|e| e.in_stage("assign"))?,
        Command::Tune { common, grid, input } => tune(&common.load()?, &grid, input).map_err(|e| e.in_stage("tune"))?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
