use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use decor_cli::{build_engine, router, AppState, BackendOpts};
use decor_core::metrics::report;
use decor_core::pipeline::{export_svg, write_atomic, EditOp, EditRequest, JobRequest, JobStore, PipelineError};
use decor_core::scene::DecorScene;

#[derive(Parser)]
#[command(name = "decor", version, about = "Decorate furniture surfaces with small objects")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Backend {
    /// Asset catalog (JSON lines).
    #[arg(long)]
    catalog: Option<String>,
    /// Serve stage replies from scripted files in this directory.
    #[arg(long)]
    stub_dir: Option<String>,
    /// Chat completions endpoint; the key is read from DECOR_LLM_API_KEY.
    #[arg(long, env = "DECOR_LLM_ENDPOINT")]
    endpoint: Option<String>,
}

impl Backend {
    fn opts(&self) -> BackendOpts {
        BackendOpts { stub_dir: self.stub_dir.clone(), endpoint: self.endpoint.clone(), catalog: self.catalog.clone() }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a decorated scene for a furniture mesh.
    Decorate {
        /// OBJ path or `fixture:<name>`.
        #[arg(long)]
        mesh: String,
        #[arg(long)]
        prompt: String,
        #[arg(long = "assets")]
        n_assets: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Placement lattice step in centimetres.
        #[arg(long)]
        grid_step: Option<f64>,
        /// Annealing iterations per surface.
        #[arg(long)]
        anneal_iters: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        backend: Backend,
    },
    /// Apply an instruction or a list of edit ops to a scene.
    Edit {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, conflicts_with = "ops", required_unless_present = "ops")]
        instruction: Option<String>,
        /// JSON file holding an array of edit ops.
        #[arg(long)]
        ops: Option<PathBuf>,
        /// Output path; defaults to overwriting the input scene.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        backend: Backend,
    },
    /// Print out-of-bounds rate and bounding-box overlap for scenes.
    Metrics {
        #[arg(long = "scene", required = true)]
        scenes: Vec<PathBuf>,
    },
    /// Render one surface of a scene as SVG.
    Svg {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, default_value_t = 0)]
        surface: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        #[arg(long, default_value = "decor-jobs")]
        store: PathBuf,
        #[command(flatten)]
        backend: Backend,
    },
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Pipeline(PipelineError),
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        Self::Pipeline(e)
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Pipeline(e) => e.exit_code() as u8,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Pipeline(e) => write!(f, "{e}"),
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn load_scene(path: &Path) -> Result<DecorScene, CliError> {
    DecorScene::from_json(&read(path)?).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => write_atomic(p, text.as_bytes()).map_err(CliError::from),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Decorate { mesh, prompt, n_assets, seed, grid_step, anneal_iters, out, backend } => {
            let engine = build_engine(&backend.opts())?;
            let mut req = JobRequest::new(mesh, prompt, n_assets, seed);
            if let Some(step) = grid_step {
                req.solver.grid_step_cm = step;
            }
            if let Some(iters) = anneal_iters {
                req.solver.anneal_iters = iters;
            }
            let scene = engine.decorate(&req)?;
            emit(out.as_deref(), &scene.to_json())
        }
        Command::Edit { scene, instruction, ops, out, backend } => {
            let engine = build_engine(&backend.opts())?;
            let current = load_scene(&scene)?;
            let req = match (instruction, ops) {
                (Some(instruction), _) => EditRequest::Instruction { instruction },
                (None, Some(path)) => {
                    let ops: Vec<EditOp> =
                        serde_json::from_str(&read(&path)?).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
                    EditRequest::Ops { ops }
                }
                (None, None) => return Err(CliError::Usage("either --instruction or --ops is required".into())),
            };
            let next = engine.edit(&current, &req)?;
            emit(Some(out.as_deref().unwrap_or(&scene)), &next.to_json())
        }
        Command::Metrics { scenes } => {
            let loaded = scenes.iter().map(|p| load_scene(p)).collect::<Result<Vec<_>, _>>()?;
            let r = report(&loaded).map_err(|e| CliError::Usage(e.to_string()))?;
            emit(None, &serde_json::to_string_pretty(&r).expect("metrics serialize"))
        }
        Command::Svg { scene, surface, out } => {
            let svg = export_svg(&load_scene(&scene)?, surface)?;
            emit(out.as_deref(), &svg)
        }
        Command::Serve { addr, store, backend } => {
            let engine = build_engine(&backend.opts())?;
            let store = JobStore::open(&store)?;
            let app = router(AppState::new(engine, store));
            let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Usage(e.to_string()))?;
            rt.block_on(async move {
                let listener =
                    tokio::net::TcpListener::bind(&addr).await.map_err(|e| CliError::Usage(format!("bind {addr}: {e}")))?;
                log::info!("listening on {addr}");
                axum::serve(listener, app).await.map_err(|e| CliError::Usage(e.to_string()))
            })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
