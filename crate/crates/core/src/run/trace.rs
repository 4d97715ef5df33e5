use crate::engine::{EdgeFailure, ExplorerConfig, RunStatus};
use crate::knowledge::{EdgeKey, TraceStep};
use crate::ui::{UiAction, UiState};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const TRACE_FORMAT_VERSION: u32 = 1;

/// First line of a trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceHeader {
    pub format_version: u32,
    pub app_name: String,
    pub package: String,
    pub backend: String,
    pub config: ExplorerConfig,
}

/// One knowledge update, plus the edge failures charged right after it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepRecord {
    pub index: usize,
    #[serde(default)]
    pub from: Option<String>,
    #[serde(default)]
    pub action: Option<UiAction>,
    pub to: UiState,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub edge_failures: Vec<EdgeKey>,
}

/// Last line of a finished trace file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceTrailer {
    /// Number of step records above.
    pub records: usize,
    /// Performed actions.
    pub steps: usize,
    pub outcome: RunStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum TraceRecord {
    Init(TraceHeader),
    Step(StepRecord),
    End(TraceTrailer),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    pub steps: Vec<StepRecord>,
    /// Absent while a run is in progress or when the file was cut short.
    pub trailer: Option<TraceTrailer>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("trace line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("trace is empty")]
    Empty,
    #[error("trace does not start with an init record")]
    MissingHeader,
    #[error("unsupported trace format version {0}")]
    Version(u32),
    #[error("trace line {line}: expected step {expected}, found {found}")]
    OutOfOrder { line: usize, expected: usize, found: usize },
    #[error("trace line {line}: record after the end record")]
    AfterEnd { line: usize },
    #[error("trace is truncated: {0}")]
    Truncated(String),
}

/// Parses one line of a trace file.
pub fn parse_trace_record(line: &str) -> Result<TraceRecord, serde_json::Error> {
    serde_json::from_str(line)
}

/// Parses a whole trace file. A missing end record is not an error here;
/// see [`Trace::require_complete`].
pub fn parse_trace(raw: &str) -> Result<Trace, TraceError> {
    let mut header = None;
    let mut steps: Vec<StepRecord> = Vec::new();
    let mut trailer = None;
    for (i, line) in raw.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record = parse_trace_record(line).map_err(|e| TraceError::Line {
            line: line_no,
            message: e.to_string(),
        })?;
        if trailer.is_some() {
            return Err(TraceError::AfterEnd { line: line_no });
        }
        match (record, &header) {
            (TraceRecord::Init(h), None) => {
                if h.format_version != TRACE_FORMAT_VERSION {
                    return Err(TraceError::Version(h.format_version));
                }
                header = Some(h);
            }
            (_, None) => return Err(TraceError::MissingHeader),
            (TraceRecord::Init(_), Some(_)) => {
                return Err(TraceError::Line {
                    line: line_no,
                    message: "second init record".into(),
                })
            }
            (TraceRecord::Step(s), Some(_)) => {
                if s.index != steps.len() {
                    return Err(TraceError::OutOfOrder {
                        line: line_no,
                        expected: steps.len(),
                        found: s.index,
                    });
                }
                steps.push(s);
            }
            (TraceRecord::End(t), Some(_)) => trailer = Some(t),
        }
    }
    let header = header.ok_or(TraceError::Empty)?;
    Ok(Trace { header, steps, trailer })
}

impl Trace {
    /// Builds the trace of a run from its knowledge trace and edge failures.
    pub fn from_run(
        header: TraceHeader,
        steps: &[TraceStep],
        failures: &[EdgeFailure],
        trailer: Option<TraceTrailer>,
    ) -> Self {
        let mut records: Vec<StepRecord> = steps
            .iter()
            .enumerate()
            .map(|(index, s)| StepRecord {
                index,
                from: s.from.clone(),
                action: s.action.clone(),
                to: s.to.clone(),
                edge_failures: Vec::new(),
            })
            .collect();
        for f in failures {
            if let Some(r) = records.get_mut(f.trace_index) {
                r.edge_failures.push(f.edge);
            }
        }
        Trace {
            header,
            steps: records,
            trailer,
        }
    }

    /// JSON lines, header first, one step per line, trailer last.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut push = |r: &TraceRecord| {
            out.push_str(&serde_json::to_string(r).expect("trace serialization cannot fail"));
            out.push('\n');
        };
        push(&TraceRecord::Init(self.header.clone()));
        for s in &self.steps {
            push(&TraceRecord::Step(s.clone()));
        }
        if let Some(t) = &self.trailer {
            push(&TraceRecord::End(t.clone()));
        }
        out
    }

    /// Fails unless the trace ends with a trailer that accounts for every
    /// step record.
    pub fn require_complete(&self) -> Result<&TraceTrailer, TraceError> {
        let t = self
            .trailer
            .as_ref()
            .ok_or_else(|| TraceError::Truncated("no end record".into()))?;
        if t.records != self.steps.len() {
            return Err(TraceError::Truncated(format!(
                "end record announces {} steps, found {}",
                t.records,
                self.steps.len()
            )));
        }
        Ok(t)
    }
}
