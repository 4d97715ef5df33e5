//! Run directories: what an exploration leaves on disk, and the offline
//! tools that read it back.
//!
//! | file | content |
//! |---|---|
//! | `config.json` | [`RunMeta`] |
//! | `trace.jsonl` | [`Trace`]: init record, one record per knowledge update, end record |
//! | `groupings.jsonl` | one [`RecordedGrouping`] per registered state |
//! | `knowledge.json` | [`Knowledge::to_document`] |
//! | `graph.json`, `graph.dot` | graph export |
//! | `coverage.csv` | step, seconds, activities, cumulative tokens |
//! | `ledger.csv` | one row per backend attempt |
//! | `summary.json` | [`RunSummary`], written at exit only |
//!
//! Every file is replaced atomically at checkpoints and at exit.

mod replay;
mod report;
mod trace;

pub use replay::{replay_trace, RecordedGrouper, ReplayError};
pub use report::{write_report, Report, ReportRow};
pub use trace::{
    parse_trace, parse_trace_record, StepRecord, Trace, TraceError, TraceHeader, TraceRecord, TraceTrailer,
    TRACE_FORMAT_VERSION,
};

use crate::engine::{EdgeFailure, EngineStats, Environment, ExploreOutcome, Explorer, ExplorerConfig, RunStatus};
use crate::engine::{CoveragePoint, CoverageTracker};
use crate::knowledge::Knowledge;
use crate::sim::MockAppSpec;
use crate::llm::{LlmBridge, Purpose, QueryRecord, RecordedGrouping, TokenTotals};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const CONFIG_FILE: &str = "config.json";
pub const TRACE_FILE: &str = "trace.jsonl";
pub const GROUPINGS_FILE: &str = "groupings.jsonl";
pub const KNOWLEDGE_FILE: &str = "knowledge.json";
pub const REPLAYED_KNOWLEDGE_FILE: &str = "knowledge.replayed.json";
pub const GRAPH_FILE: &str = "graph.json";
pub const DOT_FILE: &str = "graph.dot";
pub const COVERAGE_FILE: &str = "coverage.csv";
pub const LEDGER_FILE: &str = "ledger.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const LLM_LOG_FILE: &str = "llm.jsonl";

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
}

impl RunError {
    fn io(path: &Path, source: io::Error) -> Self {
        RunError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn format(path: &Path, message: impl ToString) -> Self {
        RunError::Format {
            path: path.to_path_buf(),
            message: message.to_string(),
        }
    }
}

/// Echo of what was run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub app_name: String,
    pub package: String,
    /// Path or bundled fixture name the app spec came from.
    pub app_source: String,
    pub declared_activities: Vec<String>,
    pub backend: String,
    pub config: ExplorerConfig,
}

impl RunMeta {
    pub fn new(spec: &MockAppSpec, app_source: impl Into<String>, backend: impl Into<String>, config: ExplorerConfig) -> Self {
        RunMeta {
            app_name: spec.app_name.clone(),
            package: spec.package.clone(),
            app_source: app_source.into(),
            declared_activities: spec.activities.clone(),
            backend: backend.into(),
            config,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub app_name: String,
    pub outcome: RunStatus,
    pub steps: usize,
    pub reached_activities: Vec<String>,
    pub declared_activities: usize,
    pub coverage: f64,
    pub abstract_states: usize,
    pub abstract_actions: usize,
    pub raw_states: usize,
    pub tokens: TokenTotals,
    pub grouping_queries: usize,
    pub input_queries: usize,
    pub stats: EngineStats,
}

/// Borrowed view of a run in progress or finished.
struct RunView<'a> {
    knowledge: &'a Knowledge,
    coverage: &'a CoverageTracker,
    bridge: &'a LlmBridge,
    failures: &'a [EdgeFailure],
    steps: usize,
    outcome: Option<&'a RunStatus>,
}

/// Writes `contents` to `path` through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), RunError> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    let write = || -> io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| RunError::io(path, e))
}

fn read(path: &Path) -> Result<String, RunError> {
    fs::read_to_string(path).map_err(|e| RunError::io(path, e))
}

fn csv_bytes<T: Serialize>(rows: &[T], header: &[&str]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record(header).expect("in-memory write");
    }
    for r in rows {
        w.serialize(r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory write")
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, RunError> {
    let raw = read(path)?;
    csv::Reader::from_reader(raw.as_bytes())
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| RunError::format(path, e))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LedgerRow {
    step: usize,
    purpose: Purpose,
    input_tokens: u64,
    output_tokens: u64,
    latency_ms: u64,
    ok: bool,
}

impl From<&QueryRecord> for LedgerRow {
    fn from(r: &QueryRecord) -> Self {
        LedgerRow {
            step: r.step,
            purpose: r.purpose,
            input_tokens: r.input_tokens,
            output_tokens: r.output_tokens,
            latency_ms: r.latency_ms,
            ok: r.ok,
        }
    }
}

const COVERAGE_HEADER: &[&str] = &["step", "seconds", "activities", "cumulative_tokens"];
const LEDGER_HEADER: &[&str] = &["step", "purpose", "input_tokens", "output_tokens", "latency_ms", "ok"];

/// A run directory on disk.
#[derive(Debug, Clone)]
pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    /// Creates the directory if needed.
    pub fn create(root: impl Into<PathBuf>) -> Result<Self, RunError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| RunError::io(&root, e))?;
        Ok(RunDir { root })
    }

    pub fn open(root: impl Into<PathBuf>) -> Self {
        RunDir { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.root.join(file)
    }

    pub fn checkpoint<E: Environment>(&self, meta: &RunMeta, ex: &Explorer<E>) -> Result<(), RunError> {
        self.write_view(
            meta,
            &RunView {
                knowledge: ex.knowledge(),
                coverage: ex.coverage(),
                bridge: ex.bridge(),
                failures: ex.edge_failures(),
                steps: ex.steps(),
                outcome: None,
            },
        )
    }

    /// Writes every file, summary included.
    pub fn finish(&self, meta: &RunMeta, out: &ExploreOutcome) -> Result<RunSummary, RunError> {
        self.write_view(
            meta,
            &RunView {
                knowledge: &out.knowledge,
                coverage: &out.coverage,
                bridge: &out.bridge,
                failures: &out.edge_failures,
                steps: out.steps,
                outcome: Some(&out.status),
            },
        )?;
        let ledger = out.bridge.ledger();
        let summary = RunSummary {
            app_name: meta.app_name.clone(),
            outcome: out.status.clone(),
            steps: out.steps,
            reached_activities: out.coverage.reached().iter().cloned().collect(),
            declared_activities: meta.declared_activities.len(),
            coverage: out.coverage.ratio(&meta.declared_activities),
            abstract_states: out.knowledge.states().len(),
            abstract_actions: out.knowledge.actions().len(),
            raw_states: out.knowledge.observed_state_count(),
            tokens: ledger.totals(),
            grouping_queries: ledger.count_for(Purpose::Grouping),
            input_queries: ledger.count_for(Purpose::Input),
            stats: out.stats,
        };
        self.write_json(SUMMARY_FILE, &summary)?;
        Ok(summary)
    }

    fn write_json<T: Serialize>(&self, file: &str, value: &T) -> Result<(), RunError> {
        let mut text = serde_json::to_string_pretty(value).expect("serialization cannot fail");
        text.push('\n');
        write_atomic(&self.path(file), text.as_bytes())
    }

    fn write_view(&self, meta: &RunMeta, v: &RunView<'_>) -> Result<(), RunError> {
        self.write_json(CONFIG_FILE, meta)?;
        let header = TraceHeader {
            format_version: TRACE_FORMAT_VERSION,
            app_name: meta.app_name.clone(),
            package: meta.package.clone(),
            backend: meta.backend.clone(),
            config: meta.config,
        };
        let trailer = v.outcome.map(|o| TraceTrailer {
            records: v.knowledge.trace().len(),
            steps: v.steps,
            outcome: o.clone(),
        });
        let trace = Trace::from_run(header, v.knowledge.trace(), v.failures, trailer);
        write_atomic(&self.path(TRACE_FILE), trace.to_jsonl().as_bytes())?;

        let mut groupings = String::new();
        for g in v.bridge.groupings() {
            groupings.push_str(&serde_json::to_string(g).expect("serialization cannot fail"));
            groupings.push('\n');
        }
        write_atomic(&self.path(GROUPINGS_FILE), groupings.as_bytes())?;

        write_atomic(&self.path(KNOWLEDGE_FILE), v.knowledge.to_document().as_bytes())?;
        let graph = v.knowledge.export_graph();
        write_atomic(&self.path(GRAPH_FILE), graph.to_json().as_bytes())?;
        write_atomic(&self.path(DOT_FILE), graph.to_dot().as_bytes())?;
        write_atomic(&self.path(COVERAGE_FILE), &csv_bytes(v.coverage.log(), COVERAGE_HEADER))?;
        let ledger: Vec<LedgerRow> = v.bridge.ledger().records().iter().map(LedgerRow::from).collect();
        write_atomic(&self.path(LEDGER_FILE), &csv_bytes(&ledger, LEDGER_HEADER))?;
        Ok(())
    }

    pub fn read_meta(&self) -> Result<RunMeta, RunError> {
        let path = self.path(CONFIG_FILE);
        serde_json::from_str(&read(&path)?).map_err(|e| RunError::format(&path, e))
    }

    pub fn read_summary(&self) -> Result<RunSummary, RunError> {
        let path = self.path(SUMMARY_FILE);
        serde_json::from_str(&read(&path)?).map_err(|e| RunError::format(&path, e))
    }

    pub fn read_trace(&self) -> Result<Trace, RunError> {
        Ok(parse_trace(&read(&self.path(TRACE_FILE))?)?)
    }

    pub fn read_groupings(&self) -> Result<Vec<RecordedGrouping>, RunError> {
        read_groupings(&self.path(GROUPINGS_FILE))
    }

    pub fn read_knowledge_document(&self) -> Result<String, RunError> {
        read(&self.path(KNOWLEDGE_FILE))
    }

    pub fn read_coverage(&self) -> Result<Vec<CoveragePoint>, RunError> {
        read_csv(&self.path(COVERAGE_FILE))
    }

    pub fn read_ledger(&self) -> Result<Vec<QueryRecord>, RunError> {
        let rows: Vec<LedgerRow> = read_csv(&self.path(LEDGER_FILE))?;
        Ok(rows
            .into_iter()
            .map(|r| QueryRecord {
                step: r.step,
                purpose: r.purpose,
                input_tokens: r.input_tokens,
                output_tokens: r.output_tokens,
                latency_ms: r.latency_ms,
                ok: r.ok,
            })
            .collect())
    }
}

/// Runs an exploration, checkpointing into `dir` and writing every file at
/// the end. A failed checkpoint does not stop the run; the first error is
/// returned after the final write is attempted.
pub fn explore_to_dir<E: Environment>(
    env: E,
    bridge: LlmBridge,
    meta: &RunMeta,
    dir: &RunDir,
) -> Result<(ExploreOutcome, RunSummary), RunError> {
    let mut ex = Explorer::new(env, bridge, meta.config);
    let mut failed = None;
    let status = ex.run(&mut |ex| {
        if failed.is_none() {
            failed = dir.checkpoint(meta, ex).err();
        }
    });
    let out = ex.finish(status);
    let summary = dir.finish(meta, &out)?;
    match failed {
        Some(e) => Err(e),
        None => Ok((out, summary)),
    }
}

/// Reads a grouping script: one recorded grouping per line.
pub fn read_groupings(path: &Path) -> Result<Vec<RecordedGrouping>, RunError> {
    read(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| RunError::format(path, format!("line {}: {e}", i + 1))))
        .collect()
}

/// Result of replaying a run directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayCheck {
    pub matches: bool,
    /// First differing line of the two knowledge documents, 1-based.
    pub first_difference: Option<usize>,
    pub replayed_document: String,
    /// States whose grouping was not in the script.
    pub grouping_misses: usize,
}

/// Rebuilds the knowledge of the run in `dir` from its trace and grouping
/// script (or `groupings` when given), writes it next to the original and
/// compares the two documents byte for byte. An unfinished trace is an
/// integrity error.
pub fn replay_run_dir(dir: &RunDir, groupings: Option<&Path>) -> Result<ReplayCheck, RunError> {
    let trace = dir.read_trace()?;
    trace.require_complete()?;
    let script = match groupings {
        Some(p) => read_groupings(p)?,
        None => dir.read_groupings()?,
    };
    let original = dir.read_knowledge_document()?;
    let mut grouper = RecordedGrouper::new(&script);
    let knowledge = replay_trace(&trace, &mut grouper)?;
    let replayed = knowledge.to_document();
    write_atomic(&dir.path(REPLAYED_KNOWLEDGE_FILE), replayed.as_bytes())?;
    let first_difference = if replayed == original {
        None
    } else {
        let mut a = original.lines();
        let mut b = replayed.lines();
        let mut line = 1;
        loop {
            match (a.next(), b.next()) {
                (Some(x), Some(y)) if x == y => line += 1,
                _ => break Some(line),
            }
        }
    };
    Ok(ReplayCheck {
        matches: first_difference.is_none(),
        first_difference,
        replayed_document: replayed,
        grouping_misses: grouper.misses(),
    })
}
