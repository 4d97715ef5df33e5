use super::Purpose;
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::collections::{BTreeMap, VecDeque};
use std::fs;
use std::path::PathBuf;
use std::time::Duration;
use thiserror::Error;

/// Environment variable holding the key for [`RemoteBackend`].
pub const API_KEY_ENV: &str = "AIGX_API_KEY";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BackendError {
    #[error("request timed out")]
    Timeout,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("backend returned status {0}: {1}")]
    Status(u16, String),
    #[error("backend misconfigured: {0}")]
    Config(String),
}

/// Structured side information about a request. Model backends only see
/// the prompt; offline backends may use these instead of parsing HTML.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestHints {
    pub candidates: Vec<CandidateHint>,
    pub field_hint: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateHint {
    pub element_id: u32,
    pub class_name: String,
    pub resource_id: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompletionRequest {
    pub purpose: Purpose,
    pub prompt: String,
    pub hints: RequestHints,
}

/// Text-in, text-out model contract.
pub trait LlmBackend {
    fn name(&self) -> &str;

    /// Returns the raw completion text for one attempt.
    fn complete(&mut self, request: &CompletionRequest, timeout: Duration) -> Result<String, BackendError>;
}

/// Deterministic offline backend.
///
/// Grouping: candidates sharing a class name and a resource id that is
/// equal after stripping trailing digits are merged; elements without a
/// resource id stay alone. Input: a keyword table over the field hint.
#[derive(Debug, Default, Clone)]
pub struct HeuristicBackend;

impl HeuristicBackend {
    pub fn new() -> Self {
        HeuristicBackend
    }

    fn group_answer(hints: &RequestHints) -> String {
        let mut buckets: BTreeMap<(String, String), Vec<u32>> = BTreeMap::new();
        let mut order = Vec::new();
        for c in &hints.candidates {
            if c.resource_id.is_empty() {
                continue;
            }
            let stem = resource_stem(&c.resource_id).to_string();
            let key = (c.class_name.clone(), stem);
            if !buckets.contains_key(&key) {
                order.push(key.clone());
            }
            buckets.entry(key).or_default().push(c.element_id);
        }
        let groups: Vec<_> = order
            .into_iter()
            .filter_map(|key| {
                let members = &buckets[&key];
                (members.len() > 1).then(|| {
                    json!({
                        "members": members.iter().map(|m| format!("e{m}")).collect::<Vec<_>>(),
                        "function": describe_stem(&key.1, members.len()),
                    })
                })
            })
            .collect();
        format!(
            "Elements sharing an id stem do the same thing with different values.\n{}",
            json!({ "groups": groups })
        )
    }

    fn input_answer(hints: &RequestHints) -> String {
        let hint = hints.field_hint.as_deref().unwrap_or("");
        json!({ "input_text": input_for_hint(hint) }).to_string()
    }
}

/// Resource id with trailing digits and separators removed.
fn resource_stem(rid: &str) -> &str {
    let local = rid.rsplit('/').next().unwrap_or(rid);
    local.trim_end_matches(|c: char| c.is_ascii_digit()).trim_end_matches(['_', '-', '.'])
}

fn describe_stem(stem: &str, n: usize) -> String {
    let words = stem.replace(['_', '-', '.'], " ");
    format!("{} ({n} similar elements)", words.trim())
}

/// Keyword table for the offline input generator.
pub(crate) fn input_for_hint(hint: &str) -> &'static str {
    let h = hint.to_ascii_lowercase();
    let has = |words: &[&str]| words.iter().any(|w| h.contains(w));
    if has(&["mail"]) {
        "john.doe@example.com"
    } else if has(&["phone", "tel", "mobile"]) {
        "+1 555 010 0199"
    } else if has(&["password", "passcode", "pin"]) {
        "Sup3r-secret!"
    } else if has(&["url", "website", "link"]) {
        "https://example.com"
    } else if has(&["date", "birthday"]) {
        "2024-05-17"
    } else if has(&["age", "amount", "number", "quantity", "count", "zip", "postal"]) {
        "42"
    } else if has(&["search", "query", "find"]) {
        "weather"
    } else if has(&["address", "street"]) {
        "221B Baker Street"
    } else if has(&["name", "user"]) {
        "John Doe"
    } else {
        "hello world"
    }
}

impl LlmBackend for HeuristicBackend {
    fn name(&self) -> &str {
        "heuristic"
    }

    fn complete(&mut self, request: &CompletionRequest, _timeout: Duration) -> Result<String, BackendError> {
        Ok(match request.purpose {
            Purpose::Grouping => Self::group_answer(&request.hints),
            Purpose::Input => Self::input_answer(&request.hints),
        })
    }
}

/// Backend replaying a fixed list of answers, for tests and fault scripts.
/// Once the script is exhausted every call fails with a transport error.
#[derive(Debug, Default, Clone)]
pub struct ScriptedBackend {
    script: VecDeque<Result<String, BackendError>>,
    calls: usize,
}

impl ScriptedBackend {
    pub fn new(script: impl IntoIterator<Item = Result<String, BackendError>>) -> Self {
        ScriptedBackend {
            script: script.into_iter().collect(),
            calls: 0,
        }
    }

    pub fn calls(&self) -> usize {
        self.calls
    }
}

impl LlmBackend for ScriptedBackend {
    fn name(&self) -> &str {
        "scripted"
    }

    fn complete(&mut self, _request: &CompletionRequest, _timeout: Duration) -> Result<String, BackendError> {
        self.calls += 1;
        self.script
            .pop_front()
            .unwrap_or_else(|| Err(BackendError::Transport("script exhausted".into())))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemoteConfig {
    /// Base URL of an OpenAI-style API, e.g. `https://api.openai.com/v1`.
    pub base_url: String,
    pub model: String,
    pub api_key: String,
    /// Directory for verbatim request/response bodies, if logging is on.
    pub log_dir: Option<PathBuf>,
}

impl RemoteConfig {
    /// Reads the key from [`API_KEY_ENV`].
    pub fn from_env(base_url: &str, model: &str, log_dir: Option<PathBuf>) -> Result<Self, BackendError> {
        let api_key = std::env::var(API_KEY_ENV)
            .map_err(|_| BackendError::Config(format!("{API_KEY_ENV} is not set")))?;
        if base_url.is_empty() {
            return Err(BackendError::Config("empty base URL".into()));
        }
        Ok(RemoteConfig {
            base_url: base_url.trim_end_matches('/').to_string(),
            model: model.to_string(),
            api_key,
            log_dir,
        })
    }
}

/// Chat-completion HTTP backend.
#[derive(Debug)]
pub struct RemoteBackend {
    config: RemoteConfig,
    logged: usize,
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Self {
        RemoteBackend { config, logged: 0 }
    }

    fn log(&mut self, request: &str, response: &str) {
        let Some(dir) = &self.config.log_dir else {
            return;
        };
        if fs::create_dir_all(dir).is_err() {
            return;
        }
        let n = self.logged;
        self.logged += 1;
        let _ = fs::write(dir.join(format!("{n:05}.request.json")), request);
        let _ = fs::write(dir.join(format!("{n:05}.response.json")), response);
    }
}

impl LlmBackend for RemoteBackend {
    fn name(&self) -> &str {
        "remote"
    }

    fn complete(&mut self, request: &CompletionRequest, timeout: Duration) -> Result<String, BackendError> {
        let body = json!({
            "model": self.config.model,
            "temperature": 0,
            "messages": [{"role": "user", "content": request.prompt}],
        })
        .to_string();
        let url = format!("{}/chat/completions", self.config.base_url);
        let result = ureq::post(&url)
            .timeout(timeout)
            .set("Authorization", &format!("Bearer {}", self.config.api_key))
            .set("Content-Type", "application/json")
            .send_string(&body);
        let text = match result {
            Ok(resp) => resp.into_string().map_err(|e| BackendError::Transport(e.to_string()))?,
            Err(ureq::Error::Status(code, resp)) => {
                let text = resp.into_string().unwrap_or_default();
                self.log(&body, &text);
                return Err(BackendError::Status(code, text));
            }
            Err(ureq::Error::Transport(t)) => {
                let msg = t.to_string();
                return Err(if msg.contains("timed out") || msg.contains("Timeout") {
                    BackendError::Timeout
                } else {
                    BackendError::Transport(msg)
                });
            }
        };
        self.log(&body, &text);
        let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| BackendError::Transport(e.to_string()))?;
        v.pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .map(str::to_string)
            .ok_or_else(|| BackendError::Transport("response has no choices[0].message.content".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{parse_grouping_response, parse_input_response};

    fn hint(id: u32, class: &str, rid: &str) -> CandidateHint {
        CandidateHint {
            element_id: id,
            class_name: class.into(),
            resource_id: rid.into(),
            label: String::new(),
        }
    }

    #[test]
    fn stems() {
        assert_eq!(resource_stem("digit_7"), "digit");
        assert_eq!(resource_stem("com.x:id/row12"), "row");
        assert_eq!(resource_stem("save"), "save");
    }

    #[test]
    fn heuristic_groups_digit_family() {
        let mut b = HeuristicBackend::new();
        let mut hints = RequestHints::default();
        for i in 0..10 {
            hints.candidates.push(hint(i, "Button", &format!("digit_{i}")));
        }
        hints.candidates.push(hint(10, "Button", "equals"));
        hints.candidates.push(hint(11, "Button", ""));
        hints.candidates.push(hint(12, "Button", ""));
        let req = CompletionRequest {
            purpose: Purpose::Grouping,
            prompt: String::new(),
            hints,
        };
        let raw = b.complete(&req, Duration::from_secs(1)).unwrap();
        let g = parse_grouping_response(&raw, &(0..13).collect::<Vec<_>>()).unwrap();
        assert_eq!(g.groups.len(), 1);
        assert_eq!(g.groups[0].members, (0..10).collect::<Vec<_>>());
        assert_eq!(g.groups[0].function, "digit (10 similar elements)");
    }

    #[test]
    fn heuristic_input_table() {
        let cases = [
            ("Email", "@"),
            ("E-mail address", "@"),
            ("Phone number", "555"),
            ("Full name", "John Doe"),
            ("Birthday", "2024"),
            ("", "hello world"),
        ];
        let mut b = HeuristicBackend::new();
        for (h, want) in cases {
            let req = CompletionRequest {
                purpose: Purpose::Input,
                prompt: String::new(),
                hints: RequestHints {
                    candidates: vec![],
                    field_hint: Some(h.into()),
                },
            };
            let text = parse_input_response(&b.complete(&req, Duration::from_secs(1)).unwrap()).unwrap();
            assert!(text.contains(want), "{h} -> {text}");
        }
    }

    #[test]
    fn scripted_runs_out() {
        let mut b = ScriptedBackend::new([Ok("a".to_string())]);
        let req = CompletionRequest {
            purpose: Purpose::Input,
            prompt: String::new(),
            hints: RequestHints::default(),
        };
        assert_eq!(b.complete(&req, Duration::ZERO).unwrap(), "a");
        assert!(b.complete(&req, Duration::ZERO).is_err());
        assert_eq!(b.calls(), 2);
    }

    #[test]
    fn remote_requires_key() {
        if std::env::var(API_KEY_ENV).is_err() {
            assert!(matches!(
                RemoteConfig::from_env("http://localhost:1", "m", None),
                Err(BackendError::Config(_))
            ));
        }
    }
}
