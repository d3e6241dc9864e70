use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use log::info;
use tvpolar::annotation::TaskQueue;
use tvpolar::fixture::{generate, simulate_annotation_file, write_fixture_dir, AnnotatorConfig, FixtureConfig};
use tvpolar::pipeline::{Outcome, Pipeline, PipelineConfig, Stage, ALL_STAGES};
use tvpolar::window::Window;
use tvpolar::{Error, Exec};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_MISSING: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "tvpolar", version, about = "Topic classification and polarization measures for TV news transcripts")]
pub struct Cli {
    /// Pipeline config file (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; 1 runs sequentially, 0 uses every core.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Calendar window for polarization and divergence series:
    /// daily, monthly, quarterly, yearly or eras.
    #[arg(long, global = true)]
    pub window: Option<String>,
    /// Overrides the layer-1 overlap threshold.
    #[arg(long, global = true)]
    pub threshold: Option<f64>,
    /// Debug-level logging.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate raw episode records.
    Ingest,
    /// Split episodes into segments and count phrases.
    Segment,
    /// Build reviewed topic dictionaries from replacement words.
    ExpandDict,
    /// Layer-1 topic labels by dictionary overlap.
    WeakClassify,
    /// Draw annotation tasks from the layer-1 sets.
    SampleAnnotation,
    /// Serve sampled tasks over HTTP and append records to the annotations file.
    ServeAnnotation {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Directory of the labeling UI's static files.
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
    },
    /// Aggregate annotation records into ground truth.
    ImportAnnotations,
    /// Fit one classifier per station and topic.
    Train,
    /// Layer-2 topic sets from the trained classifiers.
    Refine,
    /// Leave-out polarization series, era estimates and segment scores.
    Polarization,
    /// Topic shares and pairwise topic-selection divergence.
    Divergence,
    /// Monthly audience shares from the viewing panel.
    Consumption,
    /// Write the figure CSVs.
    ExportFigures,
    /// Every stage in dependency order.
    Run,
    /// Write a synthetic corpus, panel and config into a directory.
    Fixture {
        #[arg(long)]
        out: PathBuf,
        /// A few hundred segments instead of the full-size corpus.
        #[arg(long)]
        small: bool,
    },
    /// Answer the sampled tasks from a fixture's planted truth.
    SimulateAnnotations {
        #[arg(long, default_value_t = AnnotatorConfig::default().accuracy)]
        accuracy: f64,
    },
}

impl Command {
    fn stage(&self) -> Option<Stage> {
        use Command::*;
        Some(match self {
            Ingest => Stage::Ingest,
            Segment => Stage::Segment,
            ExpandDict => Stage::ExpandDict,
            WeakClassify => Stage::WeakClassify,
            SampleAnnotation => Stage::SampleAnnotation,
            ImportAnnotations => Stage::ImportAnnotations,
            Train => Stage::Train,
            Refine => Stage::Refine,
            Polarization => Stage::Polarization,
            Divergence => Stage::Divergence,
            Consumption => Stage::Consumption,
            ExportFigures => Stage::ExportFigures,
            _ => return None,
        })
    }
}

/// A usage problem found after argument parsing.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return EXIT_USAGE;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::MissingDependency { .. } | Error::MissingInput { .. } | Error::StaleArtifact { .. }) => EXIT_MISSING,
        _ => EXIT_VALIDATION,
    }
}

fn load_config(cli: &Cli) -> anyhow::Result<PipelineConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| UsageError("--config is required for this command".into()))?;
    let mut cfg = PipelineConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(jobs) = cli.jobs {
        cfg.jobs = jobs;
    }
    if let Some(name) = &cli.window {
        let w = Window::parse(name).ok_or_else(|| UsageError(format!("unknown window `{name}`")))?;
        cfg.polarization.window = w.clone();
        cfg.divergence.window = w;
    }
    if let Some(t) = cli.threshold {
        cfg.weak.threshold = t;
    }
    cfg.validate()?;
    info!("config {} (hash {})", path.display(), cfg.hash());
    Ok(cfg)
}

fn pipeline(cli: &Cli) -> anyhow::Result<Pipeline> {
    let cfg = load_config(cli)?;
    let exec = Exec::with_jobs(cfg.jobs);
    Ok(Pipeline::new(cfg, exec)?)
}

fn report(stage: Stage, outcome: Outcome) {
    let what = match outcome {
        Outcome::Cached => "cached",
        Outcome::Ran => "done",
    };
    // a closed pipe on stdout is not worth a panic
    let _ = writeln!(std::io::stdout(), "{stage}: {what}");
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(stage) = cli.command.stage() {
        let p = pipeline(&cli)?;
        report(stage, p.run(stage)?);
        return Ok(());
    }
    match &cli.command {
        Command::Run => {
            let p = pipeline(&cli)?;
            for stage in ALL_STAGES {
                report(stage, p.run(stage)?);
            }
        }
        Command::ServeAnnotation { addr, static_dir } => {
            let p = pipeline(&cli)?;
            let cfg = p.config();
            let queue = TaskQueue::new(p.load_tasks()?, cfg.annotation.min_annotators, cfg.annotation.max_annotators)?
                .with_log(&cfg.paths.annotations)?;
            serve(Arc::new(queue), *addr, static_dir.clone())?;
        }
        Command::Fixture { out, small } => {
            let seed = cli.seed.unwrap_or(FixtureConfig::default().seed);
            let fc = if *small {
                FixtureConfig::small(seed)
            } else {
                FixtureConfig { seed, ..FixtureConfig::default() }
            };
            let fx = generate(&fc)?;
            std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
            let path = write_fixture_dir(&fx, out)?;
            println!("wrote {} episodes; config at {}", fx.episodes.len(), path.display());
        }
        Command::SimulateAnnotations { accuracy } => {
            let p = pipeline(&cli)?;
            let a = &p.config().annotation;
            let ac = AnnotatorConfig {
                accuracy: *accuracy,
                min_annotators: a.min_annotators,
                cap: a.max_annotators,
                annotators: a.max_annotators.max(AnnotatorConfig::default().annotators),
                ..AnnotatorConfig::default()
            };
            let n = simulate_annotation_file(&p, &ac)?;
            println!("wrote {n} records to {}", p.config().paths.annotations.display());
        }
        _ => return Err(anyhow!("unhandled command")),
    }
    Ok(())
}

fn serve(queue: Arc<TaskQueue>, addr: SocketAddr, static_dir: Option<PathBuf>) -> anyhow::Result<()> {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        println!("annotation service on http://{}", listener.local_addr()?);
        axum::serve(listener, crate::server::router(queue, static_dir))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}
