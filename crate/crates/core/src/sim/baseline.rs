use crate::engine::{EnvError, Environment};
use crate::ui::{enumerate_candidate_actions, parse_snapshot, ActionType, UiAction, UiState};
use rand::distributions::Alphanumeric;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeSet, HashSet};

/// One uniform-random step: any candidate action of `state`, inputs get
/// eight random characters. Outside the app it presses back; on a screen
/// with no candidates it restarts.
pub fn random_baseline_step(state: &UiState, package: &str, rng: &mut impl Rng) -> UiAction {
    if state.source_app != package {
        return UiAction::back();
    }
    let mut candidates = enumerate_candidate_actions(state);
    if candidates.is_empty() {
        return UiAction::restart();
    }
    let i = if candidates.len() == 1 { 0 } else { rng.gen_range(0..candidates.len()) };
    let action = candidates.swap_remove(i);
    if action.action_type == ActionType::Input {
        let text: String = rng.sample_iter(&Alphanumeric).take(8).map(char::from).collect();
        action.with_text(text)
    } else {
        action
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaselineRun {
    pub actions: Vec<UiAction>,
    /// In-app activities seen, the initial one included.
    pub reached: BTreeSet<String>,
    /// `reached.len()` after each step.
    pub coverage_by_step: Vec<usize>,
    /// Distinct observed screens, compared by full content.
    pub raw_states: usize,
    /// First step after which every activity in the goal was reached.
    pub steps_to_goal: Option<usize>,
}

/// Runs the random baseline for `steps` steps, stopping early once every
/// activity in `goal` has been reached.
pub fn run_random_baseline(
    env: &mut dyn Environment,
    steps: usize,
    seed: u64,
    goal: Option<&BTreeSet<String>>,
) -> Result<BaselineRun, EnvError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let package = env.package().to_string();
    env.reset()?;
    let mut run = BaselineRun {
        actions: Vec::new(),
        reached: BTreeSet::new(),
        coverage_by_step: Vec::new(),
        raw_states: 0,
        steps_to_goal: None,
    };
    let mut seen = HashSet::new();
    let mut observe = |env: &mut dyn Environment, run: &mut BaselineRun| -> Result<UiState, EnvError> {
        let raw = env.observe()?;
        let state = parse_snapshot(&raw).map_err(|e| EnvError::Driver(e.to_string()))?;
        if state.source_app == package {
            run.reached.insert(state.activity.clone());
        }
        let mut content = state.clone();
        content.state_id.clear();
        if seen.insert(crate::ui::emit_snapshot(&content)) {
            run.raw_states += 1;
        }
        Ok(state)
    };
    let done = |run: &BaselineRun| goal.is_some_and(|g| g.is_subset(&run.reached));
    let mut state = observe(env, &mut run)?;
    if done(&run) {
        run.steps_to_goal = Some(0);
        return Ok(run);
    }
    for step in 1..=steps {
        let action = random_baseline_step(&state, &package, &mut rng);
        env.perform(&action)?;
        run.actions.push(action);
        state = observe(env, &mut run)?;
        run.coverage_by_step.push(run.reached.len());
        if done(&run) {
            run.steps_to_goal = Some(step);
            break;
        }
    }
    Ok(run)
}
