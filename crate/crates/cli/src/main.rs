use aigx_core::engine::{ExplorerConfig, RunStatus};
use aigx_core::llm::{HeuristicBackend, LlmBackend, LlmBridge, RemoteBackend, RemoteConfig, RetryPolicy, API_KEY_ENV};
use aigx_core::run::{explore_to_dir, replay_run_dir, write_report, RunDir, RunError, RunMeta, LLM_LOG_FILE};
use aigx_core::sim::{bundled, load_app_spec, MockAppSpec, SimEnv};
use clap::{Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

const EXIT_MISMATCH: u8 = 1;
const EXIT_ABORTED: u8 = 2;
const EXIT_USAGE: u8 = 64;
const EXIT_DATA: u8 = 65;

/// Knowledge-guided GUI exploration against mock apps.
#[derive(Debug, Parser)]
#[command(name = "aigx", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Explore an app and write a run directory.
    Explore(ExploreArgs),
    /// Write coverage and token tables for a finished run.
    Report {
        run_dir: PathBuf,
    },
    /// Rebuild a run's knowledge from its trace and compare it with the original.
    Replay {
        /// Run directory, or the trace file inside one.
        run: PathBuf,
        /// Grouping script to use instead of the recorded one.
        #[arg(long)]
        groupings: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Backend {
    Heuristic,
    Remote,
}

#[derive(Debug, clap::Args)]
struct ExploreArgs {
    /// App spec file, or `fixtures/<name>` for a bundled fixture.
    #[arg(long)]
    app: String,
    #[arg(long, value_enum, default_value_t = Backend::Heuristic)]
    backend: Backend,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2000)]
    max_steps: usize,
    #[arg(long, default_value_t = 600.0)]
    max_seconds: f64,
    /// Run directory; defaults to `runs/<app>-<seed>`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Log every prompt and answer to the run directory.
    #[arg(long)]
    log_llm: bool,
    #[arg(long, default_value_t = 3)]
    nav_alternatives: u32,
    #[arg(long, default_value_t = 2)]
    edge_failure_threshold: u32,
    /// Chat-completion endpoint for the remote backend.
    #[arg(long, default_value = "https://api.openai.com/v1")]
    base_url: String,
    #[arg(long, default_value = "gpt-4o-mini")]
    model: String,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn data(message: impl ToString) -> Self {
        Failure {
            code: EXIT_DATA,
            message: message.to_string(),
        }
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        Failure::data(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Explore(args) => explore(args),
        Command::Report { run_dir } => report(&run_dir),
        Command::Replay { run, groupings } => replay(&run, groupings.as_deref()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("aigx: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load_app(app: &str) -> Result<(MockAppSpec, String), Failure> {
    if let Some(name) = app.strip_prefix("fixtures/") {
        let name = name.trim_end_matches(".json");
        if let Some(spec) = bundled(name) {
            return Ok((spec, name.to_string()));
        }
    }
    let path = Path::new(app);
    let raw = std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("cannot read app spec {app}: {e}")))?;
    let spec = load_app_spec(&raw).map_err(Failure::data)?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("app").to_string();
    Ok((spec, stem))
}

fn explore(args: ExploreArgs) -> Result<u8, Failure> {
    let (spec, stem) = load_app(&args.app)?;
    if !args.max_seconds.is_finite() || args.max_seconds < 0.0 {
        return Err(Failure::usage("--max-seconds must be a non-negative number"));
    }
    if args.edge_failure_threshold == 0 {
        return Err(Failure::usage("--edge-failure-threshold must be positive"));
    }
    let out = args.out.clone().unwrap_or_else(|| PathBuf::from(format!("runs/{stem}-{}", args.seed)));
    let dir = RunDir::create(&out).map_err(|e| Failure::usage(e.to_string()))?;
    let config = ExplorerConfig {
        max_steps: args.max_steps,
        max_wall_time: Duration::from_secs_f64(args.max_seconds),
        rng_seed: args.seed,
        max_nav_alternatives: args.nav_alternatives,
        edge_failure_threshold: args.edge_failure_threshold,
        ..ExplorerConfig::default()
    };
    let backend: Box<dyn LlmBackend> = match args.backend {
        Backend::Heuristic => Box::new(HeuristicBackend::new()),
        Backend::Remote => {
            let log_dir = args.log_llm.then(|| dir.path("llm"));
            let remote = RemoteConfig::from_env(&args.base_url, &args.model, log_dir)
                .map_err(|e| Failure::usage(format!("{e} (set {API_KEY_ENV})")))?;
            Box::new(RemoteBackend::new(remote))
        }
    };
    let mut bridge = LlmBridge::new(backend, spec.app_name.clone(), RetryPolicy::default());
    if args.log_llm {
        let log = dir.path(LLM_LOG_FILE);
        bridge.log_to(&log).map_err(|e| Failure::usage(format!("{}: {e}", log.display())))?;
    }
    let meta = RunMeta::new(&spec, &args.app, bridge.backend_name(), config);
    let (_, summary) = explore_to_dir(SimEnv::new(spec.clone(), args.seed), bridge, &meta, &dir)?;

    println!("app: {} ({})", summary.app_name, meta.package);
    println!("outcome: {}", describe(&summary.outcome));
    println!("steps: {}", summary.steps);
    println!(
        "coverage: {}/{} activities ({:.2}%)",
        summary.reached_activities.len(),
        summary.declared_activities,
        summary.coverage * 100.0
    );
    println!("abstract states: {}", summary.abstract_states);
    println!(
        "queries: {} ({} grouping, {} input)",
        summary.tokens.queries, summary.grouping_queries, summary.input_queries
    );
    println!(
        "tokens: {} ({} in, {} out)",
        summary.tokens.total_tokens(),
        summary.tokens.input_tokens,
        summary.tokens.output_tokens
    );
    println!("run directory: {}", dir.root().display());
    Ok(if summary.outcome.is_aborted() { EXIT_ABORTED } else { 0 })
}

fn describe(status: &RunStatus) -> String {
    match status {
        RunStatus::Completed => "completed".into(),
        RunStatus::StepBudget => "step budget reached".into(),
        RunStatus::TimeBudget => "time budget reached".into(),
        RunStatus::Aborted(why) => format!("aborted: {why}"),
    }
}

fn report(run_dir: &Path) -> Result<u8, Failure> {
    let report = write_report(&RunDir::open(run_dir))?;
    let s = &report.summary;
    println!("{}", s.app_name);
    println!(
        "steps {}  activities {}/{} ({:.2}%)",
        s.steps,
        s.reached_activities.len(),
        s.declared_activities,
        s.coverage * 100.0
    );
    println!();
    print!("{}", report.query_table);
    println!("\ntables written to {}", run_dir.join("report").display());
    Ok(0)
}

fn replay(run: &Path, groupings: Option<&Path>) -> Result<u8, Failure> {
    let root = if run.is_file() {
        run.parent().unwrap_or(Path::new(".")).to_path_buf()
    } else {
        run.to_path_buf()
    };
    let check = replay_run_dir(&RunDir::open(&root), groupings)?;
    if check.matches {
        println!("replay matches the recorded knowledge");
        Ok(0)
    } else {
        println!(
            "replay differs from the recorded knowledge at line {}",
            check.first_difference.unwrap_or(0)
        );
        Ok(EXIT_MISMATCH)
    }
}
