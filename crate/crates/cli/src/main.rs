//! `retro`: run the board service, manage its data, and benchmark the
//! comment classifier.
//!
//! Exit codes:
//!   0  success
//!   1  runtime error
//!   2  eval finished but at least one run failed
//!   3  port already in use
//!   4  data directory unusable (not writable, or locked by another process)
//!   5  store is not empty (seed, restore)
//!   64 usage error

use std::fs::{self, File};
use std::io::{self, BufWriter, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use log::{error, info};
use retro_core::classify::{FallbackResponder, MatchPolicy, TemplateId};
use retro_core::domain::KanbanStatus;
use retro_core::eval::{load_dataset, render_benchmark, run_benchmark};
use retro_core::Completion;
use retro_gateway::{GatewayConfig, HttpCompletion, ReplayCompletion};
use retro_server::{KanbanItemInput, RetroService};
use retro_store::{Store, StoreError};

const EXIT_RUNTIME: u8 = 1;
const EXIT_RUN_FAILED: u8 = 2;
const EXIT_PORT_IN_USE: u8 = 3;
const EXIT_DATA_DIR: u8 = 4;
const EXIT_NON_EMPTY: u8 = 5;
const EXIT_USAGE: u8 = 64;

const DEFAULT_DATA_DIR: &str = "retro-data";

#[derive(Parser)]
#[command(name = "retro", version, about = "Retrospective boards with LLM-assisted comment allocation")]
struct Cli {
    /// Data directory; overrides RETRO_DATA_DIR.
    #[arg(long, global = true, value_name = "DIR")]
    data_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve the HTTP API until interrupted.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
    /// Classify a labeled dataset and print match reports.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        /// Prompt template number.
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
        prompt: u8,
        #[arg(long, value_enum, default_value_t = ClassifierKind::Fallback)]
        classifier: ClassifierKind,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
        runs: u32,
        /// Also write the results as JSON to this file.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Directory of recorded responses for `--classifier replay`.
        #[arg(long, env = "LLM_REPLAY_DIR")]
        replay_dir: Option<PathBuf>,
        /// Minimum similarity for matching response lines to comments.
        #[arg(long, default_value_t = 0.9)]
        match_threshold: f64,
    },
    /// Create a demo project with one active board and sample kanban items.
    Seed {
        #[arg(long, default_value_t = true)]
        demo: bool,
    },
    /// Write every stored record as JSON lines.
    Dump {
        /// Output file; standard output when omitted.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Load a dump into an empty store.
    Restore {
        /// Input file; standard input when omitted.
        #[arg(long, short)]
        input: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassifierKind {
    Llm,
    Fallback,
    Replay,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    fn runtime(message: impl ToString) -> Self {
        Self::new(EXIT_RUNTIME, message.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let data_dir = cli
        .data_dir
        .or_else(retro_store::data_dir_from_env)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_DATA_DIR));
    let result = match cli.command {
        Command::Serve { port, host } => serve(&data_dir, &host, port),
        Command::Eval {
            dataset,
            prompt,
            classifier,
            runs,
            report,
            replay_dir,
            match_threshold,
        } => eval(&dataset, prompt, classifier, runs, report.as_deref(), replay_dir, match_threshold),
        Command::Seed { .. } => seed(&data_dir),
        Command::Dump { output } => dump(&data_dir, output.as_deref()),
        Command::Restore { input } => restore(&data_dir, input.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            error!("{}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn open_store(dir: &Path) -> Result<Store, Failure> {
    Store::open(dir).map_err(|e| match e {
        StoreError::Io(io) if matches!(io.kind(), io::ErrorKind::PermissionDenied | io::ErrorKind::ReadOnlyFilesystem) => {
            Failure::new(EXIT_DATA_DIR, format!("data directory {} is not writable: {io}", dir.display()))
        }
        StoreError::Io(io) if io.kind() == io::ErrorKind::NotADirectory => {
            Failure::new(EXIT_DATA_DIR, format!("data directory {} is not a directory", dir.display()))
        }
        e @ StoreError::Locked(_) => Failure::new(EXIT_DATA_DIR, e.to_string()),
        e => Failure::runtime(format!("cannot open store in {}: {e}", dir.display())),
    })
}

fn backend_from_env() -> Result<Arc<dyn Completion>, Failure> {
    retro_gateway::from_env().map_err(Failure::runtime)
}

fn serve(data_dir: &Path, host: &str, port: u16) -> Outcome {
    let store = Arc::new(open_store(data_dir)?);
    let listener = std::net::TcpListener::bind((host, port)).map_err(|e| {
        if e.kind() == io::ErrorKind::AddrInUse {
            Failure::new(EXIT_PORT_IN_USE, format!("port {port} is already in use"))
        } else {
            Failure::runtime(format!("cannot bind {host}:{port}: {e}"))
        }
    })?;
    listener.set_nonblocking(true).map_err(Failure::runtime)?;
    let addr = listener.local_addr().map_err(Failure::runtime)?;
    let backend = backend_from_env()?;
    let service = Arc::new(RetroService::new(store, backend.clone(), backend));

    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(Failure::runtime)?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::from_std(listener).map_err(Failure::runtime)?;
        println!("listening on http://{addr}/api/v1");
        let _ = io::stdout().flush();
        retro_server::serve(listener, service, shutdown_signal())
            .await
            .map_err(Failure::runtime)
    })?;
    // Every commit is already on disk; dropping the store releases the lock.
    info!("shut down cleanly");
    Ok(())
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
    info!("shutdown requested");
}

fn eval(
    dataset: &Path,
    prompt: u8,
    classifier: ClassifierKind,
    runs: u32,
    report: Option<&Path>,
    replay_dir: Option<PathBuf>,
    match_threshold: f64,
) -> Outcome {
    let template = TemplateId::from_number(prompt).ok_or_else(|| Failure::new(EXIT_USAGE, "prompt must be 1, 2 or 3"))?;
    let policy = MatchPolicy::new(match_threshold).map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))?;
    let data = load_dataset(dataset).map_err(|e| Failure::runtime(format!("{}: {e}", dataset.display())))?;
    let backend: Box<dyn Completion> = match classifier {
        ClassifierKind::Fallback => Box::new(FallbackResponder::default()),
        ClassifierKind::Replay => {
            let dir = replay_dir.ok_or_else(|| Failure::new(EXIT_USAGE, "--classifier replay needs --replay-dir"))?;
            if !dir.is_dir() {
                return Err(Failure::runtime(format!("replay directory {} does not exist", dir.display())));
            }
            Box::new(ReplayCompletion::new(dir))
        }
        ClassifierKind::Llm => {
            let config = GatewayConfig::from_env().map_err(Failure::runtime)?;
            Box::new(HttpCompletion::new(config).map_err(Failure::runtime)?)
        }
    };
    info!("evaluating {} items with prompt {prompt}, {runs} run(s)", data.len());
    let outcome = run_benchmark(&data, backend.as_ref(), template, runs as usize, &policy).map_err(Failure::runtime)?;
    print!("{}", render_benchmark(&outcome));
    if let Some(path) = report {
        let json = serde_json::to_string_pretty(&outcome).map_err(Failure::runtime)?;
        fs::write(path, json + "\n").map_err(|e| Failure::runtime(format!("{}: {e}", path.display())))?;
    }
    if outcome.any_failed() {
        return Err(Failure::new(
            EXIT_RUN_FAILED,
            format!("{} of {runs} run(s) failed", outcome.summary.failed),
        ));
    }
    Ok(())
}

fn seed(data_dir: &Path) -> Outcome {
    let store = Arc::new(open_store(data_dir)?);
    if !store.is_empty() {
        return Err(Failure::new(
            EXIT_NON_EMPTY,
            format!("store in {} already has data; refusing to seed", data_dir.display()),
        ));
    }
    let fallback: Arc<dyn Completion> = Arc::new(FallbackResponder::default());
    let svc = RetroService::new(store, fallback.clone(), fallback);
    let project = svc.create_project("Demo Project").map_err(Failure::runtime)?;
    let item = |title: &str, status, points| KanbanItemInput {
        title: title.to_string(),
        status,
        story_points: Some(points),
    };
    svc.set_kanban(
        &project.id,
        1,
        vec![
            item("User login page", KanbanStatus::Done, 5),
            item("Password reset email", KanbanStatus::Done, 3),
            item("Profile settings screen", KanbanStatus::InProgress, 8),
            item("Audit log export", KanbanStatus::ToDo, 5),
        ],
    )
    .map_err(Failure::runtime)?;
    let board = svc.create_board(&project.id, 1).map_err(Failure::runtime)?;
    println!("project {} ({})", project.name, project.id);
    println!("board {} (sprint {}, active)", board.id, board.sprint_number);
    Ok(())
}

fn dump(data_dir: &Path, output: Option<&Path>) -> Outcome {
    let store = open_store(data_dir)?;
    let n = match output {
        Some(path) => {
            let file = File::create(path).map_err(|e| Failure::runtime(format!("{}: {e}", path.display())))?;
            let mut w = BufWriter::new(file);
            let n = store.dump(&mut w).map_err(Failure::runtime)?;
            w.into_inner()
                .map_err(|e| Failure::runtime(e.error().to_string()))?
                .sync_all()
                .map_err(Failure::runtime)?;
            n
        }
        None => store.dump(&mut io::stdout().lock()).map_err(Failure::runtime)?,
    };
    info!("dumped {n} records");
    Ok(())
}

fn restore(data_dir: &Path, input: Option<&Path>) -> Outcome {
    let store = open_store(data_dir)?;
    let result = match input {
        Some(path) => {
            let mut f = File::open(path).map_err(|e| Failure::runtime(format!("{}: {e}", path.display())))?;
            store.restore(&mut f)
        }
        None => store.restore(&mut io::stdin().lock()),
    };
    match result {
        Ok(n) => {
            info!("restored {n} records");
            Ok(())
        }
        Err(StoreError::NonEmptyStore) => Err(Failure::new(
            EXIT_NON_EMPTY,
            format!("store in {} already has data; restore needs an empty store", data_dir.display()),
        )),
        Err(e) => Err(Failure::runtime(e)),
    }
}
