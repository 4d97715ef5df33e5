//! App knowledge: raw trace, abstract states, abstract actions and the
//! abstract interaction graph, plus the per-step update procedure.
//!
//! Raw states are merged into abstract states by [`StateSignature`]
//! equality. When a new abstract state is registered its actionable
//! elements are grouped (by an [`ElementGrouper`], usually backed by an
//! LLM) and one abstract action is created per (group, action kind). Every
//! executed action is matched back to its abstract action, flagged, and
//! recorded as a graph edge.

mod export;
mod graph;
mod ids;

pub use export::{GraphExport, GraphExportEdge, GraphExportNode};
pub use graph::{EdgeKey, EdgeStats, InteractionGraph};
pub use ids::{AbsActionId, AbsStateId, GroupId};

use crate::llm::GroupingInstruction;
use crate::ui::{
    action_kinds, compute_state_signature, ActionType, ElementKey, ScrollAxes, ScrollDirection, StateSignature, UiAction,
    UiElement, UiState,
};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KnowledgeError {
    #[error("state signature already registered as {0}")]
    DuplicateSignature(AbsStateId),
    #[error("knowledge out of sync with driver: {0}")]
    Consistency(String),
    #[error("no live edge {0}")]
    EdgeNotFound(EdgeKey),
    #[error("invalid knowledge document: {0}")]
    Document(#[from] serde_json::Error),
}

/// Element position used to match grouped elements across member states.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ElementSlot {
    pub key: ElementKey,
    pub path: Vec<u32>,
}

impl ElementSlot {
    pub fn of(e: &UiElement) -> Self {
        ElementSlot {
            key: e.key(),
            path: e.structural_path.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementGroup {
    pub group_id: GroupId,
    pub abs_state_id: AbsStateId,
    pub slots: Vec<ElementSlot>,
    pub function: String,
}

impl ElementGroup {
    fn has_exact(&self, slot: &ElementSlot) -> bool {
        self.slots.iter().any(|s| s == slot)
    }

    fn has_key(&self, key: &ElementKey) -> bool {
        self.slots.iter().any(|s| &s.key == key)
    }

    /// Enabled elements of `state` occupying one of the group's slots, or
    /// when none does, the enabled elements sharing a key with a slot.
    pub fn resolve<'s>(&self, state: &'s UiState) -> Vec<&'s UiElement> {
        let mut exact = Vec::new();
        let mut by_key = Vec::new();
        for e in state.elements.iter().filter(|e| e.enabled) {
            let slot = ElementSlot::of(e);
            if self.has_exact(&slot) {
                exact.push(e);
            } else if self.has_key(&slot.key) {
                by_key.push(e);
            }
        }
        if exact.is_empty() {
            by_key
        } else {
            exact
        }
    }
}

/// Exploration status. `unexplored` is the absence of `explored`;
/// `ineffective` is only ever set together with `explored`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct ExplorationFlag {
    explored: bool,
    ineffective: bool,
}

impl ExplorationFlag {
    pub fn is_unexplored(&self) -> bool {
        !self.explored
    }

    pub fn is_explored(&self) -> bool {
        self.explored
    }

    pub fn is_ineffective(&self) -> bool {
        self.ineffective
    }

    pub fn mark_explored(&mut self) {
        self.explored = true;
    }

    pub fn mark_ineffective(&mut self) {
        self.explored = true;
        self.ineffective = true;
    }

    /// Names in canonical order, e.g. `["explored", "ineffective"]`.
    pub fn names(&self) -> Vec<&'static str> {
        match (self.explored, self.ineffective) {
            (false, _) => vec!["unexplored"],
            (true, false) => vec!["explored"],
            (true, true) => vec!["explored", "ineffective"],
        }
    }

    /// Flag order along the only allowed path: unexplored, explored,
    /// explored + ineffective.
    pub fn rank(&self) -> u8 {
        self.explored as u8 + self.ineffective as u8
    }
}

impl Serialize for ExplorationFlag {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.names().serialize(s)
    }
}

impl<'de> Deserialize<'de> for ExplorationFlag {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let names = Vec::<String>::deserialize(d)?;
        let set: BTreeSet<&str> = names.iter().map(String::as_str).collect();
        let flag = match set.into_iter().collect::<Vec<_>>().as_slice() {
            ["unexplored"] => ExplorationFlag::default(),
            ["explored"] => ExplorationFlag {
                explored: true,
                ineffective: false,
            },
            ["explored", "ineffective"] => ExplorationFlag {
                explored: true,
                ineffective: true,
            },
            other => return Err(D::Error::custom(format!("invalid exploration flag {other:?}"))),
        };
        Ok(flag)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbstractAction {
    pub id: AbsActionId,
    pub abs_state_id: AbsStateId,
    pub action_type: ActionType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scroll_direction: Option<ScrollDirection>,
    pub group_id: GroupId,
    pub flag: ExplorationFlag,
    pub function: String,
    pub execution_count: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbstractState {
    pub id: AbsStateId,
    pub signature: StateSignature,
    pub member_state_ids: Vec<String>,
    pub representative: UiState,
    pub visit_count: u32,
    pub groups: Vec<GroupId>,
    pub actions: Vec<AbsActionId>,
}

impl AbstractState {
    pub fn activity(&self) -> &str {
        &self.signature.activity
    }
}

/// Raw trace entry. `from` is absent for the initial observation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub from: Option<String>,
    pub action: Option<UiAction>,
    pub to: UiState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeConfig {
    pub edge_failure_threshold: u32,
    pub scroll_axes: ScrollAxes,
}

impl Default for KnowledgeConfig {
    fn default() -> Self {
        KnowledgeConfig {
            edge_failure_threshold: 2,
            scroll_axes: ScrollAxes::default(),
        }
    }
}

/// Source of element-grouping instructions for newly registered states.
pub trait ElementGrouper {
    /// `candidates` are the ids of enabled elements that admit at least one
    /// action, in ascending order.
    fn group_elements(&mut self, state: &UiState, candidates: &[u32]) -> GroupingInstruction;
}

/// Grouper that leaves every element in its own group.
#[derive(Debug, Default, Clone, Copy)]
pub struct SingletonGrouper;

impl ElementGrouper for SingletonGrouper {
    fn group_elements(&mut self, _state: &UiState, _candidates: &[u32]) -> GroupingInstruction {
        GroupingInstruction::default()
    }
}

/// What one call to [`Knowledge::update`] did.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UpdateOutcome {
    /// Abstract state of the new observation; `None` when it is outside the app.
    pub abs_state: Option<AbsStateId>,
    pub new_state: bool,
    /// Abstract action matched for the previous action, if it was explorable.
    pub action: Option<AbsActionId>,
    pub ineffective: bool,
    pub edge: Option<EdgeKey>,
}

#[derive(Debug, Clone)]
pub struct Knowledge {
    app_package: String,
    config: KnowledgeConfig,
    trace: Vec<TraceStep>,
    states: Vec<AbstractState>,
    groups: Vec<ElementGroup>,
    actions: Vec<AbstractAction>,
    graph: InteractionGraph,
    initial: Option<AbsStateId>,
    by_signature: HashMap<StateSignature, AbsStateId>,
    state_index: HashMap<String, AbsStateId>,
}

impl Knowledge {
    pub fn new(app_package: impl Into<String>, config: KnowledgeConfig) -> Self {
        Knowledge {
            app_package: app_package.into(),
            config,
            trace: Vec::new(),
            states: Vec::new(),
            groups: Vec::new(),
            actions: Vec::new(),
            graph: InteractionGraph::new(),
            initial: None,
            by_signature: HashMap::new(),
            state_index: HashMap::new(),
        }
    }

    pub fn app_package(&self) -> &str {
        &self.app_package
    }

    pub fn config(&self) -> &KnowledgeConfig {
        &self.config
    }

    pub fn trace(&self) -> &[TraceStep] {
        &self.trace
    }

    pub fn states(&self) -> &[AbstractState] {
        &self.states
    }

    pub fn state(&self, id: AbsStateId) -> &AbstractState {
        &self.states[id.index()]
    }

    pub fn actions(&self) -> &[AbstractAction] {
        &self.actions
    }

    pub fn action(&self, id: AbsActionId) -> &AbstractAction {
        &self.actions[id.index()]
    }

    pub fn groups(&self) -> &[ElementGroup] {
        &self.groups
    }

    pub fn group(&self, id: GroupId) -> &ElementGroup {
        &self.groups[id.index()]
    }

    pub fn graph(&self) -> &InteractionGraph {
        &self.graph
    }

    /// Abstract state of the first observation; the landing point of restart.
    pub fn initial_state(&self) -> Option<AbsStateId> {
        self.initial
    }

    pub fn is_in_app(&self, state: &UiState) -> bool {
        state.source_app == self.app_package
    }

    /// Abstract state a previously observed raw state was assigned to.
    pub fn abstract_of(&self, state_id: &str) -> Option<AbsStateId> {
        self.state_index.get(state_id).copied()
    }

    /// Number of distinct raw states assigned to abstract states.
    pub fn observed_state_count(&self) -> usize {
        self.state_index.len()
    }

    /// The abstract state whose signature matches `state`, if any.
    pub fn classify_state(&self, state: &UiState) -> Option<&AbstractState> {
        self.by_signature
            .get(&compute_state_signature(state))
            .map(|id| &self.states[id.index()])
    }

    /// Actions still flagged unexplored, optionally limited to one abstract
    /// state, in id order.
    pub fn unexplored_actions(&self, restrict_to: Option<AbsStateId>) -> Vec<&AbstractAction> {
        match restrict_to {
            Some(s) => self.states[s.index()]
                .actions
                .iter()
                .map(|a| &self.actions[a.index()])
                .filter(|a| a.flag.is_unexplored())
                .collect(),
            None => self.actions.iter().filter(|a| a.flag.is_unexplored()).collect(),
        }
    }

    fn candidate_ids(&self, state: &UiState) -> Vec<u32> {
        let mut ids: Vec<u32> = state
            .elements
            .iter()
            .filter(|e| !action_kinds(e, self.config.scroll_axes).is_empty())
            .map(|e| e.element_id)
            .collect();
        ids.sort_unstable();
        ids
    }

    /// Creates a new abstract state for `state`, its element groups and one
    /// unexplored abstract action per (group, action kind). Elements the
    /// instruction leaves out become singleton groups.
    pub fn register_abstract_state(
        &mut self,
        state: &UiState,
        instruction: &GroupingInstruction,
    ) -> Result<AbsStateId, KnowledgeError> {
        let signature = compute_state_signature(state);
        if let Some(&existing) = self.by_signature.get(&signature) {
            return Err(KnowledgeError::DuplicateSignature(existing));
        }
        let id = AbsStateId(self.states.len() as u32);
        let axes = self.config.scroll_axes;
        let candidates: BTreeSet<u32> = self.candidate_ids(state).into_iter().collect();

        // Instruction groups are split further so that every member of a
        // group admits the same action kinds.
        let mut taken = BTreeSet::new();
        let mut planned: Vec<(Vec<&UiElement>, String)> = Vec::new();
        for g in &instruction.groups {
            let mut parts: Vec<(Vec<(ActionType, Option<ScrollDirection>)>, Vec<&UiElement>)> = Vec::new();
            for m in &g.members {
                if !candidates.contains(m) || !taken.insert(*m) {
                    continue;
                }
                let e = state.element(*m).expect("candidate exists");
                let kinds = action_kinds(e, axes);
                match parts.iter_mut().find(|(k, _)| *k == kinds) {
                    Some((_, members)) => members.push(e),
                    None => parts.push((kinds, vec![e])),
                }
            }
            planned.extend(parts.into_iter().map(|(_, m)| (m, g.function.clone())));
        }
        for c in &candidates {
            if !taken.contains(c) {
                planned.push((vec![state.element(*c).expect("candidate exists")], String::new()));
            }
        }
        for (members, _) in planned.iter_mut() {
            members.sort_by_key(|e| e.element_id);
        }
        planned.sort_by_key(|(members, _)| members[0].element_id);

        let mut abs = AbstractState {
            id,
            signature: signature.clone(),
            member_state_ids: vec![state.state_id.clone()],
            representative: state.clone(),
            visit_count: 1,
            groups: Vec::new(),
            actions: Vec::new(),
        };
        for (members, function) in planned {
            let kinds = action_kinds(members[0], axes);
            let slots = members.iter().map(|e| ElementSlot::of(e)).collect();
            let gid = self.push_group(id, slots, function);
            abs.groups.push(gid);
            for (ty, dir) in kinds {
                abs.actions.push(self.push_action(id, gid, ty, dir));
            }
        }

        self.states.push(abs);
        self.by_signature.insert(signature, id);
        self.state_index.insert(state.state_id.clone(), id);
        self.graph.add_node(id);
        if self.initial.is_none() {
            self.initial = Some(id);
        }
        Ok(id)
    }

    fn push_group(&mut self, owner: AbsStateId, slots: Vec<ElementSlot>, function: String) -> GroupId {
        let gid = GroupId(self.groups.len() as u32);
        self.groups.push(ElementGroup {
            group_id: gid,
            abs_state_id: owner,
            slots,
            function,
        });
        gid
    }

    fn push_action(
        &mut self,
        owner: AbsStateId,
        group: GroupId,
        action_type: ActionType,
        scroll_direction: Option<ScrollDirection>,
    ) -> AbsActionId {
        let aid = AbsActionId(self.actions.len() as u32);
        let function = self.groups[group.index()].function.clone();
        self.actions.push(AbstractAction {
            id: aid,
            abs_state_id: owner,
            action_type,
            scroll_direction,
            group_id: group,
            flag: ExplorationFlag::default(),
            function,
            execution_count: 0,
        });
        aid
    }

    /// Abstract action of `abs` that `(action_type, direction)` on element
    /// `e` corresponds to.
    fn match_element_action(
        &self,
        abs: AbsStateId,
        e: &UiElement,
        action_type: ActionType,
        direction: Option<ScrollDirection>,
    ) -> Option<AbsActionId> {
        let slot = ElementSlot::of(e);
        let candidates = || {
            self.states[abs.index()]
                .actions
                .iter()
                .map(|a| &self.actions[a.index()])
                .filter(move |a| a.action_type == action_type && a.scroll_direction == direction)
        };
        candidates()
            .find(|a| self.groups[a.group_id.index()].has_exact(&slot))
            .or_else(|| candidates().find(|a| self.groups[a.group_id.index()].has_key(&slot.key)))
            .map(|a| a.id)
    }

    /// Matches a concrete action performed on `state` to its abstract action.
    pub fn match_action(&self, state: &UiState, action: &UiAction) -> Option<AbsActionId> {
        let abs = self.abstract_of(&state.state_id)?;
        let e = state.element(action.element_id()?)?;
        let direction = match action.action_type {
            ActionType::Scroll => Some(action.scroll_direction.unwrap_or(ScrollDirection::Down)),
            _ => None,
        };
        self.match_element_action(abs, e, action.action_type, direction)
    }

    /// Adds a singleton group and unexplored action for every candidate
    /// action of a member state that no existing abstract action covers.
    /// This happens when an element disabled in earlier members is enabled.
    fn add_unmatched_actions(&mut self, abs: AbsStateId, state: &UiState) {
        let axes = self.config.scroll_axes;
        let mut elements: Vec<&UiElement> = state.elements.iter().collect();
        elements.sort_by_key(|e| e.element_id);
        for e in elements {
            let missing: Vec<_> = action_kinds(e, axes)
                .into_iter()
                .filter(|(ty, dir)| self.match_element_action(abs, e, *ty, *dir).is_none())
                .collect();
            if missing.is_empty() {
                continue;
            }
            let gid = self.push_group(abs, vec![ElementSlot::of(e)], String::new());
            self.states[abs.index()].groups.push(gid);
            for (ty, dir) in missing {
                let aid = self.push_action(abs, gid, ty, dir);
                self.states[abs.index()].actions.push(aid);
            }
        }
    }

    /// Applies one exploration step: records the trace entry, classifies or
    /// registers the new state, flags the previous action and updates the
    /// graph. `prev` is absent only for the initial observation.
    ///
    /// States outside the app are traced but never abstracted. Restart and
    /// back actions are traced and flag nothing.
    pub fn update(
        &mut self,
        prev: Option<(&UiState, &UiAction)>,
        new_state: &UiState,
        grouper: &mut dyn ElementGrouper,
    ) -> Result<UpdateOutcome, KnowledgeError> {
        // resolve the previous action first so a desync leaves knowledge untouched
        let prev_abs = match prev {
            Some((s_prev, a_prev)) if !a_prev.action_type.is_navigation_only() && self.is_in_app(s_prev) => {
                let abs = self.abstract_of(&s_prev.state_id).ok_or_else(|| {
                    KnowledgeError::Consistency(format!("previous state {} was never observed", s_prev.state_id))
                })?;
                let action = self.match_action(s_prev, a_prev).ok_or_else(|| {
                    KnowledgeError::Consistency(format!(
                        "{} on element {:?} of {} matches no abstract action",
                        a_prev.action_type,
                        a_prev.element_id(),
                        s_prev.state_id
                    ))
                })?;
                Some((abs, action))
            }
            _ => None,
        };

        self.trace.push(TraceStep {
            from: prev.map(|(s, _)| s.state_id.clone()),
            action: prev.map(|(_, a)| a.clone()),
            to: new_state.clone(),
        });

        let mut outcome = UpdateOutcome {
            abs_state: None,
            new_state: false,
            action: None,
            ineffective: false,
            edge: None,
        };

        if self.is_in_app(new_state) {
            let sig = compute_state_signature(new_state);
            let abs = match self.by_signature.get(&sig).copied() {
                Some(abs) => {
                    let st = &mut self.states[abs.index()];
                    st.member_state_ids.push(new_state.state_id.clone());
                    st.visit_count += 1;
                    self.state_index.insert(new_state.state_id.clone(), abs);
                    self.add_unmatched_actions(abs, new_state);
                    abs
                }
                None => {
                    let candidates = self.candidate_ids(new_state);
                    let instruction = grouper.group_elements(new_state, &candidates);
                    outcome.new_state = true;
                    self.register_abstract_state(new_state, &instruction)?
                }
            };
            outcome.abs_state = Some(abs);
        }

        if let Some((src, aid)) = prev_abs {
            let a = &mut self.actions[aid.index()];
            a.flag.mark_explored();
            a.execution_count += 1;
            outcome.action = Some(aid);
            if let Some(dst) = outcome.abs_state {
                if dst == src {
                    a.flag.mark_ineffective();
                    outcome.ineffective = true;
                }
                let key = EdgeKey { src, action: aid, dst };
                let text = prev.and_then(|(_, a)| a.input_text.as_deref());
                if self.graph.record_transition(key, text) {
                    outcome.edge = Some(key);
                }
            }
        }

        Ok(outcome)
    }

    /// Counts a failed traversal of `edge`; removes it from the graph once
    /// failures reach the configured threshold. Flags are left alone.
    pub fn record_edge_failure(&mut self, edge: &EdgeKey) -> Result<bool, KnowledgeError> {
        self.graph
            .record_failure(edge, self.config.edge_failure_threshold)
            .ok_or(KnowledgeError::EdgeNotFound(*edge))
    }

    pub fn export_graph(&self) -> GraphExport {
        GraphExport::from_knowledge(self)
    }

    /// Serializes everything except the raw trace, which lives in its own file.
    pub fn to_document(&self) -> String {
        let doc = KnowledgeDoc {
            app_package: self.app_package.clone(),
            config: self.config,
            initial: self.initial,
            states: self.states.clone(),
            groups: self.groups.clone(),
            actions: self.actions.clone(),
            graph: self.graph.clone(),
        };
        let mut out = serde_json::to_string_pretty(&doc).expect("knowledge serialization cannot fail");
        out.push('\n');
        out
    }

    /// Loads a document written by [`Knowledge::to_document`]. The raw trace
    /// is not restored.
    pub fn from_document(raw: &str) -> Result<Self, KnowledgeError> {
        let doc: KnowledgeDoc = serde_json::from_str(raw)?;
        let mut by_signature = HashMap::new();
        let mut state_index = HashMap::new();
        for s in &doc.states {
            by_signature.insert(s.signature.clone(), s.id);
            for m in &s.member_state_ids {
                state_index.insert(m.clone(), s.id);
            }
        }
        Ok(Knowledge {
            app_package: doc.app_package,
            config: doc.config,
            trace: Vec::new(),
            states: doc.states,
            groups: doc.groups,
            actions: doc.actions,
            graph: doc.graph,
            initial: doc.initial,
            by_signature,
            state_index,
        })
    }

    /// Checks the structural invariants; returns a description of the first
    /// violation found.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut seen = BTreeMap::new();
        for s in &self.states {
            if s.visit_count as usize != s.member_state_ids.len() {
                return Err(format!("{} visit count {} != members {}", s.id, s.visit_count, s.member_state_ids.len()));
            }
            for m in &s.member_state_ids {
                if let Some(other) = seen.insert(m.clone(), s.id) {
                    return Err(format!("raw state {m} in both {other} and {}", s.id));
                }
            }
            for a in &s.actions {
                let act = &self.actions[a.index()];
                if act.abs_state_id != s.id {
                    return Err(format!("{a} listed under {} but owned by {}", s.id, act.abs_state_id));
                }
                let g = &self.groups[act.group_id.index()];
                if g.slots.is_empty() {
                    return Err(format!("{} is empty", g.group_id));
                }
                if !g.slots.iter().all(|sl| sl.key.affordances.admits(act.action_type)) {
                    return Err(format!("{a} not admissible for all of {}", g.group_id));
                }
            }
        }
        let in_app: BTreeSet<&str> = self
            .trace
            .iter()
            .filter(|t| self.is_in_app(&t.to))
            .map(|t| t.to.state_id.as_str())
            .collect();
        if !self.trace.is_empty() && in_app.len() != seen.len() {
            return Err(format!("{} in-app raw states but {} assigned", in_app.len(), seen.len()));
        }
        for (k, _) in self.graph.edges() {
            if !self.graph.contains_node(k.src) || !self.graph.contains_node(k.dst) {
                return Err(format!("edge {k} has a dangling endpoint"));
            }
            if self.actions[k.action.index()].abs_state_id != k.src {
                return Err(format!("edge {k} uses an action of another state"));
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct KnowledgeDoc {
    app_package: String,
    config: KnowledgeConfig,
    initial: Option<AbsStateId>,
    states: Vec<AbstractState>,
    groups: Vec<ElementGroup>,
    actions: Vec<AbstractAction>,
    graph: InteractionGraph,
}

#[cfg(test)]
mod tests;
