use super::trace::{Trace, TraceError};
use crate::knowledge::{ElementGrouper, Knowledge, KnowledgeError};
use crate::llm::{GroupingInstruction, RecordedGrouping};
use crate::ui::UiState;
use std::collections::HashMap;
use thiserror::Error;

/// Serves the grouping instructions recorded during a run, keyed by the
/// state they were issued for. Unknown states get singletons.
#[derive(Debug, Clone, Default)]
pub struct RecordedGrouper {
    by_state: HashMap<String, GroupingInstruction>,
    misses: usize,
}

impl RecordedGrouper {
    pub fn new(records: &[RecordedGrouping]) -> Self {
        RecordedGrouper {
            by_state: records
                .iter()
                .map(|r| (r.state_id.clone(), r.instruction.clone()))
                .collect(),
            misses: 0,
        }
    }

    /// Requests for states that had no recorded instruction.
    pub fn misses(&self) -> usize {
        self.misses
    }
}

impl ElementGrouper for RecordedGrouper {
    fn group_elements(&mut self, state: &UiState, _candidates: &[u32]) -> GroupingInstruction {
        match self.by_state.get(&state.state_id) {
            Some(i) => i.clone(),
            None => {
                self.misses += 1;
                GroupingInstruction::default()
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("step {index} starts from {found:?} but the previous step ended in {expected:?}")]
    Discontinuous {
        index: usize,
        expected: Option<String>,
        found: Option<String>,
    },
    #[error("step {index}: {source}")]
    Knowledge {
        index: usize,
        #[source]
        source: KnowledgeError,
    },
}

/// Rebuilds knowledge from a trace through the ordinary update path,
/// charging each recorded edge failure after its step.
pub fn replay_trace(trace: &Trace, grouper: &mut dyn ElementGrouper) -> Result<Knowledge, ReplayError> {
    let mut k = Knowledge::new(trace.header.package.clone(), trace.header.config.knowledge_config());
    let mut prev: Option<&UiState> = None;
    for step in &trace.steps {
        let expected = prev.map(|s| s.state_id.clone());
        if step.from != expected || step.action.is_some() != step.from.is_some() {
            return Err(ReplayError::Discontinuous {
                index: step.index,
                expected,
                found: step.from.clone(),
            });
        }
        let before = prev.zip(step.action.as_ref());
        k.update(before, &step.to, grouper)
            .map_err(|source| ReplayError::Knowledge { index: step.index, source })?;
        for edge in &step.edge_failures {
            k.record_edge_failure(edge)
                .map_err(|source| ReplayError::Knowledge { index: step.index, source })?;
        }
        prev = Some(&step.to);
    }
    Ok(k)
}
