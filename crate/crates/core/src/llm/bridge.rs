use super::{
    build_grouping_prompt, build_input_prompt, count_tokens, parse_grouping_response, parse_input_response,
    BackendError, CandidateHint, CompletionRequest, FormatError, GroupingInstruction, GroupingRequest, InputRequest,
    LlmBackend, Purpose, QueryRecord, RequestHints, TokenLedger,
};
use crate::knowledge::ElementGrouper;
use crate::ui::UiState;
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};
use thiserror::Error;

/// Input used when the backend cannot produce one.
pub const FALLBACK_INPUT_TEXT: &str = "test input";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    /// Attempts per query, the first one included.
    pub max_attempts: u32,
    pub timeout: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            timeout: Duration::from_secs(30),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QueryError {
    #[error("backend exhausted after {attempts} attempts; last failure: {last}")]
    Exhausted { attempts: u32, last: String },
}

enum AttemptError {
    Backend(BackendError),
    Format(FormatError),
}

impl std::fmt::Display for AttemptError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AttemptError::Backend(e) => e.fmt(f),
            AttemptError::Format(e) => e.fmt(f),
        }
    }
}

/// Sends `request` until `parse` accepts an answer or the attempts run
/// out. Every attempt, failed or not, is written to the ledger. Retries
/// reuse the identical prompt.
pub fn query_with_retry<T>(
    backend: &mut dyn LlmBackend,
    ledger: &mut TokenLedger,
    request: &CompletionRequest,
    policy: &RetryPolicy,
    step: usize,
    mut observe: impl FnMut(u32, Result<&str, &BackendError>),
    parse: impl Fn(&str) -> Result<T, FormatError>,
) -> Result<T, QueryError> {
    let input_tokens = count_tokens(&request.prompt);
    let mut last = None;
    for attempt in 0..policy.max_attempts.max(1) {
        let started = Instant::now();
        let result = backend.complete(request, policy.timeout);
        let latency_ms = started.elapsed().as_millis() as u64;
        observe(attempt, result.as_deref());
        let (output_tokens, parsed) = match result {
            Ok(text) => (count_tokens(&text), parse(&text).map_err(AttemptError::Format)),
            Err(e) => (0, Err(AttemptError::Backend(e))),
        };
        ledger.record(QueryRecord {
            step,
            purpose: request.purpose,
            input_tokens,
            output_tokens,
            latency_ms,
            ok: parsed.is_ok(),
        });
        match parsed {
            Ok(v) => return Ok(v),
            Err(e) => last = Some(e),
        }
    }
    Err(QueryError::Exhausted {
        attempts: policy.max_attempts.max(1),
        last: last.map(|e| e.to_string()).unwrap_or_default(),
    })
}

/// Grouping instruction applied when a state was registered.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordedGrouping {
    pub state_id: String,
    pub instruction: GroupingInstruction,
    /// True when the backend was exhausted and singletons were used.
    #[serde(default)]
    pub fallback: bool,
}

/// The engine's only route to a model.
pub struct LlmBridge {
    backend: Box<dyn LlmBackend>,
    app_name: String,
    policy: RetryPolicy,
    ledger: TokenLedger,
    step: usize,
    groupings: Vec<RecordedGrouping>,
    input_requests: usize,
    log: Option<File>,
}

impl LlmBridge {
    pub fn new(backend: Box<dyn LlmBackend>, app_name: impl Into<String>, policy: RetryPolicy) -> Self {
        LlmBridge {
            backend,
            app_name: app_name.into(),
            policy,
            ledger: TokenLedger::new(),
            step: 0,
            groupings: Vec::new(),
            input_requests: 0,
            log: None,
        }
    }

    /// Appends every prompt and raw answer to `path` as JSON lines.
    pub fn log_to(&mut self, path: &Path) -> std::io::Result<()> {
        self.log = Some(OpenOptions::new().create(true).append(true).open(path)?);
        Ok(())
    }

    pub fn backend_name(&self) -> &str {
        self.backend.name()
    }

    pub fn ledger(&self) -> &TokenLedger {
        &self.ledger
    }

    pub fn policy(&self) -> &RetryPolicy {
        &self.policy
    }

    /// Step number attached to subsequent ledger records.
    pub fn set_step(&mut self, step: usize) {
        self.step = step;
    }

    pub fn groupings(&self) -> &[RecordedGrouping] {
        &self.groupings
    }

    /// Number of grouping requests served (one per registered state).
    pub fn grouping_requests(&self) -> usize {
        self.groupings.len()
    }

    pub fn input_requests(&self) -> usize {
        self.input_requests
    }

    /// Attempts beyond the first, summed over all queries.
    pub fn retries(&self) -> usize {
        self.ledger.query_count() - self.groupings.len() - self.input_requests
    }

    fn query<T>(
        &mut self,
        request: &CompletionRequest,
        parse: impl Fn(&str) -> Result<T, FormatError>,
    ) -> Result<T, QueryError> {
        let LlmBridge {
            backend,
            ledger,
            policy,
            step,
            log,
            ..
        } = self;
        let step = *step;
        query_with_retry(
            backend.as_mut(),
            ledger,
            request,
            policy,
            step,
            |attempt, result| {
                if let Some(f) = log.as_mut() {
                    let entry = match result {
                        Ok(text) => json!({"step": step, "attempt": attempt, "purpose": request.purpose,
                            "prompt": request.prompt, "response": text}),
                        Err(e) => json!({"step": step, "attempt": attempt, "purpose": request.purpose,
                            "prompt": request.prompt, "error": e.to_string()}),
                    };
                    let _ = writeln!(f, "{entry}");
                }
            },
            parse,
        )
    }

    /// Groups the candidate elements of `state`. Falls back to an empty
    /// instruction (all singletons) when the backend is exhausted.
    pub fn request_grouping(&mut self, state: &UiState, candidates: &[u32]) -> GroupingInstruction {
        let request = GroupingRequest::new(&self.app_name, state, candidates);
        let hints = RequestHints {
            candidates: candidates
                .iter()
                .filter_map(|id| state.element(*id))
                .map(|e| CandidateHint {
                    element_id: e.element_id,
                    class_name: e.class_name.clone(),
                    resource_id: e.resource_id.clone(),
                    label: e.label(),
                })
                .collect(),
            field_hint: None,
        };
        let completion = CompletionRequest {
            purpose: Purpose::Grouping,
            prompt: build_grouping_prompt(&request),
            hints,
        };
        let ids = request.candidate_element_ids.clone();
        let (instruction, fallback) = match self.query(&completion, |raw| parse_grouping_response(raw, &ids)) {
            Ok(i) => (i, false),
            Err(_) => (GroupingInstruction::default(), true),
        };
        self.groupings.push(RecordedGrouping {
            state_id: state.state_id.clone(),
            instruction: instruction.clone(),
            fallback,
        });
        instruction
    }

    /// Text for the editable element `element_id` of `state`: one line, at
    /// most 64 characters, or [`FALLBACK_INPUT_TEXT`] if the backend fails.
    pub fn generate_input_text(&mut self, state: &UiState, element_id: u32) -> String {
        let request = InputRequest::new(&self.app_name, state, element_id);
        let completion = CompletionRequest {
            purpose: Purpose::Input,
            prompt: build_input_prompt(&request),
            hints: RequestHints {
                candidates: Vec::new(),
                field_hint: Some(request.field_hint.clone()),
            },
        };
        self.input_requests += 1;
        self.query(&completion, parse_input_response)
            .unwrap_or_else(|_| FALLBACK_INPUT_TEXT.to_string())
    }
}

impl ElementGrouper for LlmBridge {
    fn group_elements(&mut self, state: &UiState, candidates: &[u32]) -> GroupingInstruction {
        self.request_grouping(state, candidates)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{HeuristicBackend, ScriptedBackend};
    use crate::ui::testing::{element, state};
    use crate::ui::Affordances;

    fn req() -> CompletionRequest {
        CompletionRequest {
            purpose: Purpose::Grouping,
            prompt: "p".repeat(40),
            hints: RequestHints::default(),
        }
    }

    fn run(script: Vec<Result<String, BackendError>>) -> (Result<GroupingInstruction, QueryError>, TokenLedger) {
        let mut backend = ScriptedBackend::new(script);
        let mut ledger = TokenLedger::new();
        let r = query_with_retry(
            &mut backend,
            &mut ledger,
            &req(),
            &RetryPolicy::default(),
            7,
            |_, _| {},
            |raw| parse_grouping_response(raw, &[1, 2]),
        );
        (r, ledger)
    }

    #[test]
    fn first_try() {
        let (r, ledger) = run(vec![Ok(r#"{"groups":[]}"#.into())]);
        assert!(r.is_ok());
        assert_eq!(ledger.query_count(), 1);
        assert_eq!(ledger.records()[0].input_tokens, 10);
        assert_eq!(ledger.records()[0].step, 7);
    }

    #[test]
    fn two_failures_then_success() {
        let (r, ledger) = run(vec![
            Err(BackendError::Timeout),
            Ok("no json here".into()),
            Ok(r#"{"x": [1, 2]}"#.into()),
        ]);
        assert_eq!(r.unwrap().groups[0].members, [1, 2]);
        assert_eq!(ledger.query_count(), 3);
        let oks: Vec<bool> = ledger.records().iter().map(|r| r.ok).collect();
        assert_eq!(oks, [false, false, true]);
    }

    #[test]
    fn always_malformed_exhausts() {
        let (r, ledger) = run(vec![Ok("nope".into()), Ok("nope".into()), Ok("nope".into()), Ok("{}".into())]);
        assert!(matches!(r, Err(QueryError::Exhausted { attempts: 3, .. })));
        assert_eq!(ledger.query_count(), 3);
    }

    #[test]
    fn grouping_fallback_is_singletons() {
        let bad: Vec<_> = (0..3).map(|_| Ok("prose".to_string())).collect();
        let mut bridge = LlmBridge::new(Box::new(ScriptedBackend::new(bad)), "App", RetryPolicy::default());
        let s = state("u1", "M", vec![
            element(0, "Button", "a", "", Affordances::TOUCH),
            element(1, "Button", "b", "", Affordances::TOUCH),
        ]);
        let g = bridge.group_elements(&s, &[0, 1]);
        assert!(g.is_empty());
        assert!(bridge.groupings()[0].fallback);
        assert_eq!(bridge.ledger().query_count(), 3);
        assert_eq!(bridge.retries(), 2);
    }

    #[test]
    fn input_fallback_constant() {
        let mut bridge = LlmBridge::new(Box::new(ScriptedBackend::new([])), "App", RetryPolicy::default());
        let s = state("u1", "M", vec![element(0, "EditText", "", "", Affordances {
            editable: true,
            ..Default::default()
        })]);
        assert_eq!(bridge.generate_input_text(&s, 0), FALLBACK_INPUT_TEXT);
        assert_eq!(bridge.input_requests(), 1);
    }

    #[test]
    fn heuristic_input_name_and_email() {
        let mut bridge = LlmBridge::new(Box::new(HeuristicBackend::new()), "Contacts", RetryPolicy::default());
        let mut name = element(0, "EditText", "name", "", Affordances {
            editable: true,
            ..Default::default()
        });
        name.content_desc = "Name".into();
        let mut email = name.clone();
        email.element_id = 1;
        email.structural_path = vec![0, 1];
        email.content_desc = "Email".into();
        let s = state("u1", "NewContact", vec![name, email]);
        assert_eq!(bridge.generate_input_text(&s, 0), "John Doe");
        assert!(bridge.generate_input_text(&s, 1).contains('@'));
        assert_eq!(bridge.ledger().count_for(Purpose::Input), 2);
    }
}
