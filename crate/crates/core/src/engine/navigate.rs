use crate::knowledge::{AbsActionId, AbsStateId, EdgeKey, InteractionGraph, Knowledge};
use std::collections::{HashMap, VecDeque};
use thiserror::Error;

/// One step of a navigation plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NavStep {
    /// Relaunch the app; lands on the initial abstract state.
    Restart { expected: AbsStateId },
    /// Follow a graph edge.
    Edge(EdgeKey),
}

impl NavStep {
    /// Abstract state this step should end in.
    pub fn expected(&self) -> AbsStateId {
        match self {
            NavStep::Restart { expected } => *expected,
            NavStep::Edge(e) => e.dst,
        }
    }

    pub fn source(&self) -> Option<AbsStateId> {
        match self {
            NavStep::Restart { .. } => None,
            NavStep::Edge(e) => Some(e.src),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NavigationPlan {
    pub steps: VecDeque<NavStep>,
    /// Action the plan leads to.
    pub target: AbsActionId,
    pub attempts_used: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum NavError {
    #[error("{target} is unreachable from {from}")]
    Unreachable { from: AbsStateId, target: AbsStateId },
}

/// Breadth-first path over live edges. Neighbours are expanded in edge key
/// order, so among shortest paths the one with the smallest edge sequence
/// wins.
fn bfs(graph: &InteractionGraph, from: AbsStateId, to: AbsStateId) -> Option<Vec<EdgeKey>> {
    if from == to {
        return Some(Vec::new());
    }
    let mut parent: HashMap<AbsStateId, EdgeKey> = HashMap::new();
    let mut queue = VecDeque::from([from]);
    while let Some(u) = queue.pop_front() {
        for e in graph.out_edges(u) {
            if e.dst == from || parent.contains_key(&e.dst) {
                continue;
            }
            parent.insert(e.dst, *e);
            if e.dst == to {
                let mut path = vec![*e];
                let mut at = e.src;
                while at != from {
                    let p = parent[&at];
                    path.push(p);
                    at = p.src;
                }
                path.reverse();
                return Some(path);
            }
            queue.push_back(e.dst);
        }
    }
    None
}

/// Shortest route from `from` to `target`. When there is none and
/// `restart` is set, tries again from `initial` behind a restart step.
pub fn find_navigate_path(
    graph: &InteractionGraph,
    initial: AbsStateId,
    from: AbsStateId,
    target: AbsStateId,
    restart: bool,
) -> Result<VecDeque<NavStep>, NavError> {
    if let Some(path) = bfs(graph, from, target) {
        return Ok(path.into_iter().map(NavStep::Edge).collect());
    }
    if restart && from != initial {
        if let Some(path) = bfs(graph, initial, target) {
            let mut steps = VecDeque::from([NavStep::Restart { expected: initial }]);
            steps.extend(path.into_iter().map(NavStep::Edge));
            return Ok(steps);
        }
    }
    Err(NavError::Unreachable { from, target })
}

/// Plan for reaching the state that owns `target` from `from`.
pub fn plan_to_action(
    k: &Knowledge,
    from: AbsStateId,
    target: AbsActionId,
    restart: bool,
) -> Result<NavigationPlan, NavError> {
    let initial = k.initial_state().unwrap_or(from);
    let steps = find_navigate_path(k.graph(), initial, from, k.action(target).abs_state_id, restart)?;
    Ok(NavigationPlan {
        steps,
        target,
        attempts_used: 0,
    })
}

/// Result of [`repair_navigation`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Repair {
    pub plan: Option<NavigationPlan>,
    /// Edge whose failure was recorded.
    pub failed_edge: Option<EdgeKey>,
    pub edge_removed: bool,
}

/// Handles a plan step that did not land where expected. The failed edge
/// is charged a failure; then, within the attempt budget, the plan is cut
/// to the suffix starting at `observed` if that state lies on it, or
/// recomputed from `observed`.
pub fn repair_navigation(
    k: &mut Knowledge,
    mut plan: NavigationPlan,
    observed: AbsStateId,
    max_alternatives: u32,
    restart: bool,
) -> Repair {
    let mut repair = Repair {
        plan: None,
        failed_edge: None,
        edge_removed: false,
    };
    if let Some(NavStep::Edge(e)) = plan.steps.pop_front() {
        if let Ok(removed) = k.record_edge_failure(&e) {
            repair.failed_edge = Some(e);
            repair.edge_removed = removed;
        }
    }
    plan.attempts_used += 1;
    if plan.attempts_used >= max_alternatives {
        return repair;
    }
    let target_state = k.action(plan.target).abs_state_id;
    if observed == target_state {
        plan.steps.clear();
        repair.plan = Some(plan);
        return repair;
    }
    if let Some(i) = plan.steps.iter().position(|s| s.source() == Some(observed)) {
        let live = plan.steps.iter().skip(i).all(|s| match s {
            NavStep::Edge(e) => k.graph().contains_edge(e),
            NavStep::Restart { .. } => true,
        });
        if live {
            plan.steps.drain(..i);
            repair.plan = Some(plan);
            return repair;
        }
    }
    if let Ok(fresh) = plan_to_action(k, observed, plan.target, restart) {
        plan.steps = fresh.steps;
        repair.plan = Some(plan);
    }
    repair
}
