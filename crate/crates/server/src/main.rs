use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use xa11y_core::embedding::ProviderKind;
use xa11y_core::eval::{self, Method, OverlapMode};
use xa11y_core::ingest::DecoderConfig;
use xa11y_core::postprocess::{IssueStatus, PresenterUnits};
use xa11y_core::project::{load_project, save_project, ExportKind, Project, PROJECT_FILE_SUFFIX};
use xa11y_core::{analyze, AnalysisConfig};
use xa11y_server::store::{read_log, system_clock};
use xa11y_server::{replay, router, AppState, Store};

/// Find where a video's visuals and audio go unexplained.
///
/// The external decoder for `video_file` bundles is read from XA11Y_DECODER.
#[derive(Parser)]
#[command(name = "xa11y", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a media bundle into a project file.
    Analyze(AnalyzeArgs),
    /// Score a detection method against hand labels.
    Eval(EvalArgs),
    /// Write captions, descriptions or the preview schedule of a project.
    Export(ExportArgs),
    /// Re-run a project's analysis, apply its mutation log and compare.
    Replay(ReplayArgs),
    /// Run the HTTP API.
    Serve(ServeArgs),
    /// Write the synthetic 60 s demo bundle and its labels.
    MakeFixture {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(clap::Args)]
struct AnalysisFlags {
    /// Seed of the builtin embedder's projections and hashes.
    #[arg(long, default_value_t = 42)]
    embedding_seed: u64,
    /// Embedding dimension.
    #[arg(long, default_value_t = 32)]
    dim: usize,
    /// Read embeddings from this file instead of the builtin embedder.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    tau: Option<f64>,
    /// Presenter threshold (px²/s, or a frame fraction with --presenter-units frame-fraction).
    #[arg(long)]
    th_presenter: Option<f64>,
    #[arg(long)]
    th_silence: Option<f64>,
    #[arg(long, value_enum, default_value_t = Units::Pixels)]
    presenter_units: Units,
    /// Content threshold for shot cuts.
    #[arg(long)]
    content_threshold: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Units {
    Pixels,
    FrameFraction,
}

impl AnalysisFlags {
    fn config(&self) -> AnalysisConfig {
        let mut cfg = AnalysisConfig::default();
        cfg.provider.seed = self.embedding_seed;
        cfg.provider.dim = self.dim;
        if let Some(path) = &self.embeddings {
            cfg.provider.provider = ProviderKind::File;
            cfg.provider.file_path = Some(path.clone());
        }
        if let Some(t) = self.tau {
            cfg.filters.tau = t;
        }
        match self.presenter_units {
            Units::Pixels => {
                if let Some(t) = self.th_presenter {
                    cfg.filters.th_presenter = t;
                }
            }
            Units::FrameFraction => {
                cfg.filters.presenter_units = PresenterUnits::FrameFraction;
                if let Some(t) = self.th_presenter {
                    cfg.filters.th_presenter_fraction = t;
                }
            }
        }
        if let Some(t) = self.th_silence {
            cfg.filters.th_silence = t;
        }
        if let Some(t) = self.content_threshold {
            cfg.content_threshold = t;
        }
        cfg.load.decoder = DecoderConfig::from_env();
        cfg
    }
}

#[derive(clap::Args)]
struct AnalyzeArgs {
    #[arg(long)]
    bundle: PathBuf,
    /// Project file to write; defaults to `<project_id>.xa11y.json` in the current directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    flags: AnalysisFlags,
}

#[derive(clap::Args)]
struct EvalArgs {
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, default_value = "crossmodal")]
    method: Method,
    /// Seed for the random baseline.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "pred")]
    overlap_mode: OverlapMode,
    #[arg(long)]
    report: PathBuf,
    #[command(flatten)]
    flags: AnalysisFlags,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Captions,
    Descriptions,
    Schedule,
}

#[derive(clap::Args)]
struct ExportArgs {
    #[arg(long)]
    project: PathBuf,
    #[arg(long, value_enum)]
    kind: Kind,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct ReplayArgs {
    /// The saved project to check.
    #[arg(long)]
    project: PathBuf,
    /// Mutation log; defaults to the `.mutations.jsonl` next to the project.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(clap::Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, default_value = "projects")]
    projects_dir: PathBuf,
    /// Directory of static UI files served at `/`.
    #[arg(long)]
    static_dir: Option<PathBuf>,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Analyze(args) => run_analyze(args),
        Command::Eval(args) => run_eval(args),
        Command::Export(args) => run_export(args),
        Command::Replay(args) => run_replay(args),
        Command::Serve(args) => run_serve(args),
        Command::MakeFixture { out } => {
            xa11y_core::fixture::write_fixture(&out).with_context(|| format!("writing fixture to {}", out.display()))?;
            println!("wrote demo bundle to {}", out.display());
            Ok(())
        }
    }
}

fn summarize(p: &Project) {
    println!(
        "{}: {} shots, {} audio segments, revision {}",
        p.project_id,
        p.visual_segments.len(),
        p.audio_segments.len(),
        p.revision
    );
    for issue in &p.issues {
        let marker = if issue.status == IssueStatus::Open { "*" } else { " " };
        println!("{marker} {:<12} score {:.3}  {:?}", issue.issue_id, issue.score, issue.status);
    }
    for w in &p.provenance.warnings {
        eprintln!("warning: {w}");
    }
}

fn run_analyze(args: AnalyzeArgs) -> Result<()> {
    let project = analyze(&args.bundle, &args.flags.config())?;
    let out = args
        .out
        .unwrap_or_else(|| PathBuf::from(format!("{}{PROJECT_FILE_SUFFIX}", project.project_id)));
    save_project(&out, &project).with_context(|| format!("writing {}", out.display()))?;
    summarize(&project);
    println!("project written to {}", out.display());
    Ok(())
}

fn run_eval(args: EvalArgs) -> Result<()> {
    let project = analyze(&args.bundle, &args.flags.config())?;
    let labels = eval::load_labels(&args.labels, Some(project.duration))?;
    let seed = match (args.method, args.seed) {
        (Method::Random, s) => Some(s.unwrap_or(0)),
        (_, s) => s,
    };
    let preds = eval::predictions(args.method, &project, seed.unwrap_or(0));
    let report = eval::evaluate(&preds, &labels, args.overlap_mode, args.method, seed);
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    std::fs::write(&args.report, text).with_context(|| format!("writing {}", args.report.display()))?;
    for (name, r) in [("visual", &report.visual), ("audio", &report.audio)] {
        println!("{name:<6} P {:.3}  R {:.3}  F1 {:.3}  (tp {} fp {} fn {})", r.precision, r.recall, r.f1, r.tp, r.fp, r.fn_);
    }
    Ok(())
}

fn run_export(args: ExportArgs) -> Result<()> {
    let project = load_project(&args.project).with_context(|| format!("reading {}", args.project.display()))?;
    let kind = match args.kind {
        Kind::Captions => ExportKind::Captions,
        Kind::Descriptions => ExportKind::Descriptions,
        Kind::Schedule => ExportKind::Schedule,
    };
    let (text, _) = xa11y_server::api::export(&project, kind);
    match args.out {
        Some(path) => std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn default_log_path(project: &Path) -> PathBuf {
    let name = project.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    let stem = name.strip_suffix(PROJECT_FILE_SUFFIX).unwrap_or(name);
    project.with_file_name(format!("{stem}{}", xa11y_server::store::MUTATION_LOG_SUFFIX))
}

fn run_replay(args: ReplayArgs) -> Result<()> {
    let saved_text = std::fs::read_to_string(&args.project).with_context(|| format!("reading {}", args.project.display()))?;
    let saved = Project::from_json(&saved_text)?;
    let log_path = args.log.unwrap_or_else(|| default_log_path(&args.project));
    let log = read_log(&log_path).with_context(|| format!("reading {}", log_path.display()))?;
    let replayed = replay(&saved, &log)?;
    if replayed.to_json() != saved_text {
        bail!("replaying {} mutations does not reproduce {}", log.len(), args.project.display());
    }
    println!("replayed {} mutations: identical", log.len());
    Ok(())
}

fn run_serve(args: ServeArgs) -> Result<()> {
    tracing_subscriber::fmt().with_target(false).init();
    let store = Store::open(&args.projects_dir, system_clock())
        .with_context(|| format!("opening {}", args.projects_dir.display()))?;
    let app = router(AppState { store: Arc::new(store) }, args.static_dir)
        .layer(tower_http::trace::TraceLayer::new_for_http());
    let addr: SocketAddr = format!("{}:{}", args.host, args.port).parse().context("bad --host/--port")?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await.with_context(|| format!("binding {addr}"))?;
        tracing::info!("listening on http://{addr}");
        axum::serve(listener, app).await?;
        Ok(())
    })
}
