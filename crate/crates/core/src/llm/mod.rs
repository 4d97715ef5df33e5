//! LLM usage: the element-grouping prompt used when a new abstract state
//! is registered and the input-text prompt used for editable fields.
//!
//! Exploration itself never talks to a model; only these two request kinds
//! go through the [`LlmBridge`], which retries malformed answers, accounts
//! every attempt in a [`TokenLedger`], and falls back to singleton groups or
//! a constant input when the backend gives up.

mod backend;
mod bridge;
mod ledger;
mod parse;
mod prompt;

pub use backend::{
    BackendError, CandidateHint, CompletionRequest, HeuristicBackend, LlmBackend, RemoteBackend, RemoteConfig,
    RequestHints, ScriptedBackend, API_KEY_ENV,
};
pub use bridge::{query_with_retry, LlmBridge, QueryError, RecordedGrouping, RetryPolicy, FALLBACK_INPUT_TEXT};
pub use ledger::{count_tokens, QueryRecord, TokenLedger, TokenTotals};
pub use parse::{extract_json_object, parse_grouping_response, parse_input_response, FormatError, MAX_INPUT_CHARS};
pub use prompt::{build_grouping_prompt, build_input_prompt, GroupingRequest, InputRequest};

use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    Grouping,
    Input,
}

impl fmt::Display for Purpose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Purpose::Grouping => "grouping",
            Purpose::Input => "input",
        })
    }
}

/// One set of same-function elements.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionGroup {
    pub members: Vec<u32>,
    pub function: String,
}

/// Merging instruction for the elements of one state. Groups are disjoint
/// and only reference candidate ids; elements not mentioned stay alone.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupingInstruction {
    pub groups: Vec<InstructionGroup>,
}

impl GroupingInstruction {
    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }
}
