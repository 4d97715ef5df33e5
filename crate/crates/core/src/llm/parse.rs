use super::{GroupingInstruction, InstructionGroup};
use serde_json::{Map, Value};
use std::collections::BTreeSet;
use thiserror::Error;

/// Longest input text handed to the driver, in characters.
pub const MAX_INPUT_CHARS: usize = 64;

/// Object starts tried before giving up on a response.
const MAX_OBJECT_STARTS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormatError {
    #[error("response contains no JSON object")]
    NoObject,
    #[error("unexpected response shape: {0}")]
    Shape(String),
    #[error("empty input text")]
    EmptyText,
}

/// First JSON object embedded in `raw`, skipping prose and code fences.
pub fn extract_json_object(raw: &str) -> Option<Map<String, Value>> {
    raw.match_indices('{').take(MAX_OBJECT_STARTS).find_map(|(i, _)| {
        let mut stream = serde_json::Deserializer::from_str(&raw[i..]).into_iter::<Value>();
        match stream.next() {
            Some(Ok(Value::Object(map))) => Some(map),
            _ => None,
        }
    })
}

fn parse_member(v: &Value) -> Option<u32> {
    match v {
        Value::Number(n) => n.as_u64().and_then(|n| u32::try_from(n).ok()),
        Value::String(s) => {
            let s = s.trim();
            s.strip_prefix('e').unwrap_or(s).parse().ok()
        }
        _ => None,
    }
}

/// Reads a grouping answer. Two shapes are accepted:
/// `{"groups": [{"members": [...], "function": "..."}]}` and a plain map
/// from function description to member list. Ids may be numbers or `e<n>`.
///
/// Groups mentioning an id outside `candidates` (or an unreadable id) are
/// dropped whole; a group overlapping an earlier one is dropped too.
pub fn parse_grouping_response(raw: &str, candidates: &[u32]) -> Result<GroupingInstruction, FormatError> {
    let obj = extract_json_object(raw).ok_or(FormatError::NoObject)?;

    let mut proposed: Vec<(Vec<Option<u32>>, String)> = Vec::new();
    if let Some(groups) = obj.get("groups") {
        let list = groups
            .as_array()
            .ok_or_else(|| FormatError::Shape("`groups` is not a list".into()))?;
        for g in list {
            let g = g
                .as_object()
                .ok_or_else(|| FormatError::Shape("group entry is not an object".into()))?;
            let members = g
                .get("members")
                .or_else(|| g.get("element_ids"))
                .and_then(Value::as_array)
                .ok_or_else(|| FormatError::Shape("group without a `members` list".into()))?;
            let function = g.get("function").and_then(Value::as_str).unwrap_or("").to_string();
            proposed.push((members.iter().map(parse_member).collect(), function));
        }
    } else {
        for (function, members) in &obj {
            let Some(members) = members.as_array() else {
                return Err(FormatError::Shape(format!("`{function}` does not map to a list")));
            };
            proposed.push((members.iter().map(parse_member).collect(), function.clone()));
        }
    }

    let allowed: BTreeSet<u32> = candidates.iter().copied().collect();
    let mut used = BTreeSet::new();
    let mut out = GroupingInstruction::default();
    for (members, function) in proposed {
        let Some(members) = members.into_iter().collect::<Option<Vec<u32>>>() else {
            continue;
        };
        let mut unique = Vec::new();
        for m in members {
            if !unique.contains(&m) {
                unique.push(m);
            }
        }
        if unique.is_empty() || !unique.iter().all(|m| allowed.contains(m)) {
            continue;
        }
        if unique.iter().any(|m| used.contains(m)) {
            continue;
        }
        used.extend(unique.iter().copied());
        out.groups.push(InstructionGroup {
            members: unique,
            function: function.trim().to_string(),
        });
    }
    Ok(out)
}

/// Reads `{"input_text": "..."}` and normalizes it to one non-empty line of
/// at most [`MAX_INPUT_CHARS`] characters.
pub fn parse_input_response(raw: &str) -> Result<String, FormatError> {
    let obj = extract_json_object(raw).ok_or(FormatError::NoObject)?;
    let text = obj
        .get("input_text")
        .or_else(|| obj.get("text"))
        .and_then(Value::as_str)
        .ok_or_else(|| FormatError::Shape("missing `input_text` string".into()))?;
    let line = text.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("");
    if line.is_empty() {
        return Err(FormatError::EmptyText);
    }
    Ok(line.chars().take(MAX_INPUT_CHARS).collect())
}
