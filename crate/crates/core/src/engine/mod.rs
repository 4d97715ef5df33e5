//! The exploration loop.
//!
//! Each step either follows a pending navigation plan or picks an
//! unexplored abstract action (current state first, then app-wide) and,
//! if it belongs to another state, plans a shortest route there over the
//! interaction graph. Every performed action is fed back into the
//! knowledge. No model is consulted for selection or navigation; the
//! bridge is only used to group new states and to fill input fields.

mod coverage;
mod env;
mod navigate;
mod select;

pub use coverage::{CoveragePoint, CoverageTracker};
pub use env::{EnvError, Environment};
pub use navigate::{find_navigate_path, plan_to_action, repair_navigation, NavError, NavStep, NavigationPlan, Repair};
pub use select::select_explore_action;

use crate::knowledge::{AbsActionId, AbsStateId, EdgeKey, Knowledge, KnowledgeConfig, KnowledgeError};
use crate::llm::LlmBridge;
use crate::ui::{parse_snapshot, ActionType, ScrollAxes, ScrollDirection, SnapshotError, UiAction, UiState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplorerConfig {
    /// Performed actions, back and restart included.
    pub max_steps: usize,
    /// Checked between steps only.
    pub max_wall_time: Duration,
    pub rng_seed: u64,
    pub max_nav_alternatives: u32,
    pub edge_failure_threshold: u32,
    pub restart_on_unreachable: bool,
    pub scroll_axes: ScrollAxes,
    pub checkpoint_every: usize,
}

impl Default for ExplorerConfig {
    fn default() -> Self {
        ExplorerConfig {
            max_steps: 2000,
            max_wall_time: Duration::from_secs(600),
            rng_seed: 0,
            max_nav_alternatives: 3,
            edge_failure_threshold: 2,
            restart_on_unreachable: true,
            scroll_axes: ScrollAxes::default(),
            checkpoint_every: 50,
        }
    }
}

impl ExplorerConfig {
    pub fn knowledge_config(&self) -> KnowledgeConfig {
        KnowledgeConfig {
            edge_failure_threshold: self.edge_failure_threshold,
            scroll_axes: self.scroll_axes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum RunStatus {
    /// No selectable unexplored action is left.
    Completed,
    StepBudget,
    TimeBudget,
    Aborted(String),
}

impl RunStatus {
    pub fn is_aborted(&self) -> bool {
        matches!(self, RunStatus::Aborted(_))
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("unreadable snapshot: {0}")]
    Snapshot(#[from] SnapshotError),
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
    #[error("still outside the app after back and restart")]
    StuckOutside,
    #[error("{0} consecutive stale targets")]
    Stale(u32),
}

/// Edge failure charged right after the trace entry at `trace_index`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeFailure {
    pub trace_index: usize,
    pub edge: EdgeKey,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineStats {
    pub explore_steps: usize,
    pub navigation_steps: usize,
    /// Back and restart steps issued to leave a foreign app.
    pub return_steps: usize,
    /// Excursions that needed a restart to get back.
    pub trapped_excursions: usize,
    pub input_actions: usize,
    pub mismatches: usize,
    pub edges_removed: usize,
    pub abandoned_actions: usize,
    pub stale_targets: usize,
}

/// Algorithm state for one run against one environment.
pub struct Explorer<E: Environment> {
    env: E,
    bridge: LlmBridge,
    knowledge: Knowledge,
    coverage: CoverageTracker,
    config: ExplorerConfig,
    rng: ChaCha8Rng,
    current: Option<UiState>,
    plan: Option<NavigationPlan>,
    abandoned: BTreeSet<AbsActionId>,
    steps: usize,
    started: Instant,
    failures: Vec<EdgeFailure>,
    stats: EngineStats,
    stale_in_row: u32,
}

/// Everything a finished run leaves behind.
pub struct ExploreOutcome {
    pub knowledge: Knowledge,
    pub coverage: CoverageTracker,
    pub status: RunStatus,
    pub steps: usize,
    pub stats: EngineStats,
    pub edge_failures: Vec<EdgeFailure>,
    pub bridge: LlmBridge,
}

/// Runs a whole exploration.
pub fn explore_main<E: Environment>(env: E, bridge: LlmBridge, config: ExplorerConfig) -> ExploreOutcome {
    let mut ex = Explorer::new(env, bridge, config);
    let status = ex.run(&mut |_| {});
    ex.finish(status)
}

enum Planned {
    Explore(AbsActionId),
    Navigate(NavStep),
}

impl<E: Environment> Explorer<E> {
    pub fn new(env: E, bridge: LlmBridge, config: ExplorerConfig) -> Self {
        let knowledge = Knowledge::new(env.package(), config.knowledge_config());
        Explorer {
            env,
            bridge,
            knowledge,
            coverage: CoverageTracker::new(),
            config,
            rng: ChaCha8Rng::seed_from_u64(config.rng_seed),
            current: None,
            plan: None,
            abandoned: BTreeSet::new(),
            steps: 0,
            started: Instant::now(),
            failures: Vec::new(),
            stats: EngineStats::default(),
            stale_in_row: 0,
        }
    }

    pub fn knowledge(&self) -> &Knowledge {
        &self.knowledge
    }

    pub fn coverage(&self) -> &CoverageTracker {
        &self.coverage
    }

    pub fn bridge(&self) -> &LlmBridge {
        &self.bridge
    }

    pub fn config(&self) -> &ExplorerConfig {
        &self.config
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn stats(&self) -> &EngineStats {
        &self.stats
    }

    pub fn edge_failures(&self) -> &[EdgeFailure] {
        &self.failures
    }

    pub fn abandoned(&self) -> &BTreeSet<AbsActionId> {
        &self.abandoned
    }

    pub fn env(&self) -> &E {
        &self.env
    }

    /// Runs until termination, a budget, or an error. `checkpoint` is
    /// called every `checkpoint_every` steps.
    pub fn run(&mut self, checkpoint: &mut dyn FnMut(&Self)) -> RunStatus {
        self.started = Instant::now();
        if let Err(e) = self.start() {
            return RunStatus::Aborted(e.to_string());
        }
        let every = self.config.checkpoint_every.max(1);
        loop {
            let before = self.steps;
            match self.tick() {
                Ok(Some(status)) => return status,
                Ok(None) => {}
                Err(e) => return RunStatus::Aborted(e.to_string()),
            }
            if self.steps / every > before / every {
                checkpoint(self);
            }
        }
    }

    pub fn finish(self, status: RunStatus) -> ExploreOutcome {
        ExploreOutcome {
            knowledge: self.knowledge,
            coverage: self.coverage,
            status,
            steps: self.steps,
            stats: self.stats,
            edge_failures: self.failures,
            bridge: self.bridge,
        }
    }

    fn start(&mut self) -> Result<(), EngineError> {
        self.env.reset()?;
        self.bridge.set_step(0);
        let state = self.observe()?;
        self.knowledge.update(None, &state, &mut self.bridge)?;
        if self.knowledge.is_in_app(&state) {
            self.coverage.visit(&state.activity);
        }
        let in_app = self.knowledge.is_in_app(&state);
        self.current = Some(state);
        if !in_app {
            self.return_to_app()?;
        }
        Ok(())
    }

    fn observe(&mut self) -> Result<UiState, EngineError> {
        Ok(parse_snapshot(&self.env.observe()?)?)
    }

    fn current_abstract(&self) -> AbsStateId {
        let s = self.current.as_ref().expect("started");
        self.knowledge.abstract_of(&s.state_id).expect("current state is in the app")
    }

    fn tick(&mut self) -> Result<Option<RunStatus>, EngineError> {
        if self.steps >= self.config.max_steps {
            return Ok(Some(RunStatus::StepBudget));
        }
        if self.started.elapsed() >= self.config.max_wall_time {
            return Ok(Some(RunStatus::TimeBudget));
        }
        match self.next_action() {
            None => Ok(Some(RunStatus::Completed)),
            Some((action, planned)) => self.execute(action, planned).map(|_| None),
        }
    }

    fn abandon(&mut self, action: AbsActionId) {
        if self.abandoned.insert(action) {
            self.stats.abandoned_actions += 1;
        }
    }

    fn charge_failure(&mut self, edge: EdgeKey) {
        if let Ok(removed) = self.knowledge.record_edge_failure(&edge) {
            self.failures.push(EdgeFailure {
                trace_index: self.knowledge.trace().len() - 1,
                edge,
            });
            self.stats.edges_removed += removed as usize;
        }
    }

    /// Chooses the next concrete action, planning routes as needed.
    fn next_action(&mut self) -> Option<(UiAction, Planned)> {
        loop {
            let state = self.current.clone().expect("started");
            let cur = self.current_abstract();
            if let Some((front, target)) = self.plan.as_ref().map(|p| (p.steps.front().copied(), p.target)) {
                match front {
                    Some(step @ NavStep::Restart { .. }) => return Some((UiAction::restart(), Planned::Navigate(step))),
                    Some(NavStep::Edge(e)) if e.src == cur => {
                        let text = self.knowledge.graph().edge(&e).and_then(|s| s.input_text.clone());
                        if let Some(a) = self.concretize(&state, e.action, text) {
                            return Some((a, Planned::Navigate(NavStep::Edge(e))));
                        }
                        self.charge_failure(e);
                        self.plan = None;
                    }
                    Some(NavStep::Edge(_)) => self.plan = None,
                    None => {
                        self.plan = None;
                        let a = self.knowledge.action(target);
                        if a.abs_state_id == cur && a.flag.is_unexplored() && !self.abandoned.contains(&target) {
                            match self.concretize(&state, target, None) {
                                Some(ui) => return Some((ui, Planned::Explore(target))),
                                None => self.abandon(target),
                            }
                        }
                    }
                }
                continue;
            }
            let aid = select_explore_action(&self.knowledge, cur, &mut self.rng, &self.abandoned)?;
            if self.knowledge.action(aid).abs_state_id == cur {
                match self.concretize(&state, aid, None) {
                    Some(ui) => return Some((ui, Planned::Explore(aid))),
                    None => self.abandon(aid),
                }
                continue;
            }
            match plan_to_action(&self.knowledge, cur, aid, self.config.restart_on_unreachable) {
                Ok(plan) => self.plan = Some(plan),
                Err(_) => self.abandon(aid),
            }
        }
    }

    /// Binds an abstract action to an element of `state`. Input text is
    /// `text` when given (navigation reuses the recorded text), otherwise
    /// generated.
    fn concretize(&mut self, state: &UiState, action: AbsActionId, text: Option<String>) -> Option<UiAction> {
        let a = self.knowledge.action(action);
        let (kind, direction) = (a.action_type, a.scroll_direction);
        let candidates: Vec<u32> = self
            .knowledge
            .group(a.group_id)
            .resolve(state)
            .iter()
            .map(|e| e.element_id)
            .collect();
        let element = match candidates.len() {
            0 => return None,
            1 => candidates[0],
            n => candidates[self.rng.gen_range(0..n)],
        };
        let mut ui = UiAction::on(state, element, kind);
        match kind {
            ActionType::Scroll => ui = ui.with_direction(direction.unwrap_or(ScrollDirection::Down)),
            ActionType::Input => {
                let text = text.unwrap_or_else(|| {
                    self.bridge.set_step(self.steps + 1);
                    self.bridge.generate_input_text(state, element)
                });
                ui = ui.with_text(text);
            }
            _ => {}
        }
        Some(ui)
    }

    /// Performs one action and folds the result into the knowledge.
    fn perform_and_update(&mut self, action: &UiAction) -> Result<Option<AbsStateId>, EngineError> {
        let prev = self.current.clone().expect("started");
        self.env.perform(action)?;
        self.steps += 1;
        self.bridge.set_step(self.steps);
        let state = self.observe()?;
        let outcome = self.knowledge.update(Some((&prev, action)), &state, &mut self.bridge)?;
        if self.knowledge.is_in_app(&state) {
            self.coverage.visit(&state.activity);
        }
        if action.action_type == ActionType::Input {
            self.stats.input_actions += 1;
        }
        let tokens = self.bridge.ledger().totals().total_tokens();
        self.coverage.record(self.steps, self.started.elapsed().as_secs_f64(), tokens);
        self.current = Some(state);
        Ok(outcome.abs_state)
    }

    fn execute(&mut self, action: UiAction, planned: Planned) -> Result<(), EngineError> {
        let landed = match self.perform_and_update(&action) {
            Err(EngineError::Env(EnvError::StaleTarget(_))) => {
                self.stats.stale_targets += 1;
                self.stale_in_row += 1;
                if self.stale_in_row >= 3 {
                    return Err(EngineError::Stale(self.stale_in_row));
                }
                match planned {
                    Planned::Navigate(NavStep::Edge(e)) => self.charge_failure(e),
                    Planned::Navigate(NavStep::Restart { .. }) => {}
                    Planned::Explore(a) => self.abandon(a),
                }
                self.plan = None;
                return Ok(());
            }
            other => other?,
        };
        self.stale_in_row = 0;
        let mismatch = match planned {
            Planned::Explore(_) => {
                self.stats.explore_steps += 1;
                false
            }
            Planned::Navigate(step) => {
                self.stats.navigation_steps += 1;
                let plan = self.plan.as_mut().expect("navigation step without a plan");
                if landed == Some(step.expected()) {
                    plan.steps.pop_front();
                    false
                } else {
                    self.stats.mismatches += 1;
                    true
                }
            }
        };
        if landed.is_none() {
            self.return_to_app()?;
        }
        if mismatch {
            let plan = self.plan.take().expect("checked above");
            let observed = self.current_abstract();
            let repair = repair_navigation(
                &mut self.knowledge,
                plan,
                observed,
                self.config.max_nav_alternatives,
                self.config.restart_on_unreachable,
            );
            if let Some(edge) = repair.failed_edge {
                self.failures.push(EdgeFailure {
                    trace_index: self.knowledge.trace().len() - 1,
                    edge,
                });
                self.stats.edges_removed += repair.edge_removed as usize;
            }
            self.plan = repair.plan;
        }
        Ok(())
    }

    /// Leaves a foreign app: back first, restart if that did not help.
    fn return_to_app(&mut self) -> Result<(), EngineError> {
        for (i, action) in [UiAction::back(), UiAction::restart()].into_iter().enumerate() {
            self.stats.return_steps += 1;
            if self.perform_and_update(&action)?.is_some() {
                self.stats.trapped_excursions += i;
                return Ok(());
            }
        }
        Err(EngineError::StuckOutside)
    }
}
