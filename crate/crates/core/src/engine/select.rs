use crate::knowledge::{AbsActionId, AbsStateId, Knowledge};
use rand::Rng;
use std::collections::BTreeSet;

/// Next action to explore: uniform among the unexplored actions of
/// `current`, else uniform among all unexplored actions. Actions in `skip`
/// are never returned. A lone candidate is returned without an rng draw.
pub fn select_explore_action(
    k: &Knowledge,
    current: AbsStateId,
    rng: &mut impl Rng,
    skip: &BTreeSet<AbsActionId>,
) -> Option<AbsActionId> {
    let pick = |ids: Vec<AbsActionId>, rng: &mut dyn rand::RngCore| match ids.len() {
        0 => None,
        1 => Some(ids[0]),
        n => Some(ids[rng.gen_range(0..n)]),
    };
    let local: Vec<_> = k
        .unexplored_actions(Some(current))
        .into_iter()
        .map(|a| a.id)
        .filter(|id| !skip.contains(id))
        .collect();
    if !local.is_empty() {
        return pick(local, rng);
    }
    let global: Vec<_> = k
        .unexplored_actions(None)
        .into_iter()
        .map(|a| a.id)
        .filter(|id| !skip.contains(id))
        .collect();
    pick(global, rng)
}
