use super::spec::{DynamicRule, ElementTemplate, FaultKind, MockAppSpec, ScreenTemplate};
use crate::engine::{EnvError, Environment};
use crate::ui::{emit_snapshot, ActionType, Bounds, UiAction, UiElement, UiState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use std::collections::{HashMap, HashSet};

const WORDS: &[&str] = &[
    "amber", "birch", "cobalt", "delta", "ember", "fjord", "garnet", "harbor", "indigo", "juniper", "kestrel",
    "lagoon", "meadow", "nimbus", "orchid", "prairie", "quartz", "raven", "sierra", "tundra",
];

const FOREIGN_ACTIVITY: &str = "ChooserActivity";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Location {
    Screen(usize),
    Foreign { return_to: usize, trapped: bool },
}

#[derive(Debug, Clone)]
struct Rendered {
    state_id: String,
    /// Snapshot element id to template element id.
    template_of: HashMap<u32, u32>,
}

/// Runtime for a [`MockAppSpec`]. Dynamic content and probabilistic
/// transitions draw from the env's own rng.
#[derive(Debug, Clone)]
pub struct SimEnv {
    spec: MockAppSpec,
    screen_index: HashMap<String, usize>,
    patterns: Vec<Option<Regex>>,
    seed: u64,
    rng: ChaCha8Rng,
    location: Location,
    toggled: HashSet<(usize, u32)>,
    fault_triggers: Vec<u32>,
    fault_matches: Vec<u32>,
    visits: Vec<u32>,
    observations: u64,
    last: Option<Rendered>,
}

impl SimEnv {
    /// `spec` must have passed validation.
    pub fn new(spec: MockAppSpec, seed: u64) -> Self {
        let screen_index = spec.screens.iter().enumerate().map(|(i, s)| (s.id.clone(), i)).collect();
        let patterns = spec
            .transitions
            .iter()
            .map(|t| t.input_pattern.as_deref().map(|p| Regex::new(p).expect("validated pattern")))
            .collect();
        let n_screens = spec.screens.len();
        let n_faults = spec.faults.len();
        let mut env = SimEnv {
            spec,
            screen_index,
            patterns,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            location: Location::Screen(0),
            toggled: HashSet::new(),
            fault_triggers: vec![0; n_faults],
            fault_matches: vec![0; n_faults],
            visits: vec![0; n_screens],
            observations: 0,
            last: None,
        };
        env.restart();
        env
    }

    pub fn spec(&self) -> &MockAppSpec {
        &self.spec
    }

    /// Id of the current screen, or `None` while outside the app.
    pub fn current_screen(&self) -> Option<&str> {
        match self.location {
            Location::Screen(i) => Some(&self.spec.screens[i].id),
            Location::Foreign { .. } => None,
        }
    }

    /// Arrivals per screen id, restarts included.
    pub fn visits(&self) -> HashMap<&str, u32> {
        self.spec
            .screens
            .iter()
            .zip(&self.visits)
            .map(|(s, v)| (s.id.as_str(), *v))
            .collect()
    }

    /// Current screen rendered without consuming an observation id.
    pub fn peek(&mut self) -> UiState {
        let saved = (self.rng.clone(), self.observations, self.last.clone());
        let s = self.render();
        (self.rng, self.observations, self.last) = saved;
        s
    }

    fn restart(&mut self) {
        let i = self.screen_index[&self.spec.initial_screen];
        self.location = Location::Screen(i);
        self.toggled.clear();
        self.visits[i] += 1;
    }

    fn enter(&mut self, screen: usize) {
        self.location = Location::Screen(screen);
        self.visits[screen] += 1;
    }

    fn random_text(&mut self) -> String {
        let a = WORDS[self.rng.gen_range(0..WORDS.len())];
        let b = WORDS[self.rng.gen_range(0..WORDS.len())];
        format!("{a} {b} {}", self.rng.gen_range(1..1000))
    }

    fn render(&mut self) -> UiState {
        self.observations += 1;
        let state_id = format!("ui-{}", self.observations);
        let mut template_of = HashMap::new();
        let state = match self.location {
            Location::Foreign { .. } => {
                let elements = vec![
                    instance(&foreign_element(0, "android.widget.TextView", "Share with"), 0, vec![0]),
                    instance(&foreign_element(1, "android.widget.Button", "Copy link"), 1, vec![1]),
                ];
                template_of.extend([(0, 0), (1, 1)]);
                UiState {
                    state_id: state_id.clone(),
                    activity: FOREIGN_ACTIVITY.to_string(),
                    source_app: self.spec.foreign_package.clone(),
                    elements,
                }
            }
            Location::Screen(i) => {
                let screen = self.spec.screens[i].clone();
                let elements = self.render_screen(i, &screen, &mut template_of);
                UiState {
                    state_id: state_id.clone(),
                    activity: screen.activity.clone(),
                    source_app: self.spec.package.clone(),
                    elements,
                }
            }
        };
        self.last = Some(Rendered { state_id, template_of });
        state
    }

    fn render_screen(&mut self, index: usize, screen: &ScreenTemplate, template_of: &mut HashMap<u32, u32>) -> Vec<UiElement> {
        let mut next_id = screen
            .elements
            .iter()
            .map(|e| e.id)
            .chain(screen.dynamic.iter().filter_map(|d| match d {
                DynamicRule::ListRows { row, .. } => Some(row.id),
                _ => None,
            }))
            .max()
            .map_or(0, |m| m + 1);
        let mut out = Vec::new();
        for t in &screen.elements {
            let mut e = instance(t, t.id, t.structural_path());
            e.checked ^= self.toggled.contains(&(index, t.id));
            template_of.insert(t.id, t.id);
            let path = e.structural_path.clone();
            out.push(e);
            for d in &screen.dynamic {
                match d {
                    DynamicRule::RandomText { element } if *element == t.id => {
                        let n: u32 = self.rng.gen_range(0..1_000_000);
                        out.last_mut().expect("just pushed").text = n.to_string();
                    }
                    DynamicRule::ListRows {
                        parent,
                        row,
                        min_rows,
                        max_rows,
                    } if *parent == t.id => {
                        let n = self.rng.gen_range(*min_rows..=*max_rows);
                        for k in 0..n {
                            let mut child = path.clone();
                            child.push(k);
                            let mut r = instance(row, next_id, child);
                            r.text = self.random_text();
                            template_of.insert(next_id, row.id);
                            next_id += 1;
                            out.push(r);
                        }
                    }
                    _ => {}
                }
            }
        }
        for (n, e) in out.iter_mut().enumerate() {
            let top = n as u32 * 48;
            e.bounds = Bounds {
                left: 0,
                top,
                right: 720,
                bottom: top + 48,
            };
        }
        out
    }

    fn toggles(&self, screen: usize, element: u32) -> bool {
        self.spec.screens[screen]
            .dynamic
            .iter()
            .any(|d| matches!(d, DynamicRule::ToggleChecked { element: e } if *e == element))
    }

    /// Fires the first matching transition of `screen`, if any.
    fn fire(&mut self, screen: usize, element: Option<u32>, action: &UiAction) {
        let screen_id = self.spec.screens[screen].id.clone();
        for i in 0..self.spec.transitions.len() {
            let t = &self.spec.transitions[i];
            if t.screen != screen_id || t.element != element || t.action != action.action_type {
                continue;
            }
            if t.direction.is_some() && t.direction != action.scroll_direction {
                continue;
            }
            if let Some(re) = &self.patterns[i] {
                if !re.is_match(action.input_text.as_deref().unwrap_or("")) {
                    continue;
                }
            }
            let p = t.probability;
            if p < 1.0 && !self.rng.gen_bool(p) {
                continue;
            }
            let rule = t.clone();
            let mut trapped = false;
            match self.trigger_fault(&screen_id, element, rule.out_of_app) {
                Some((FaultKind::Drop, _)) => return,
                Some((FaultKind::Divert, to)) => {
                    self.enter(to.expect("validated divert target"));
                    return;
                }
                Some((FaultKind::TrapBack, _)) => trapped = true,
                None => {}
            }
            match &rule.target {
                Some(target) if !rule.out_of_app => self.enter(self.screen_index[target]),
                _ => {
                    self.location = Location::Foreign {
                        return_to: screen,
                        trapped,
                    }
                }
            }
            return;
        }
    }

    fn trigger_fault(&mut self, screen: &str, element: Option<u32>, out_of_app: bool) -> Option<(FaultKind, Option<usize>)> {
        for i in 0..self.spec.faults.len() {
            let f = &self.spec.faults[i];
            if !f.applies(screen, element) || (f.kind == FaultKind::TrapBack) != out_of_app {
                continue;
            }
            self.fault_matches[i] += 1;
            if self.fault_matches[i] <= f.after || f.max_triggers.is_some_and(|m| self.fault_triggers[i] >= m) {
                continue;
            }
            let (kind, p, to) = (f.kind, f.probability, f.divert_to.clone());
            if p < 1.0 && !self.rng.gen_bool(p) {
                continue;
            }
            self.fault_triggers[i] += 1;
            return Some((kind, to.map(|s| self.screen_index[&s])));
        }
        None
    }
}

fn foreign_element(id: u32, class: &str, text: &str) -> ElementTemplate {
    ElementTemplate {
        id,
        class: class.to_string(),
        resource_id: String::new(),
        text: text.to_string(),
        content_desc: String::new(),
        touchable: class.ends_with("Button"),
        long_touchable: false,
        scrollable: false,
        editable: false,
        checked: false,
        enabled: true,
        path: Vec::new(),
    }
}

fn instance(t: &ElementTemplate, element_id: u32, structural_path: Vec<u32>) -> UiElement {
    UiElement {
        element_id,
        class_name: t.class.clone(),
        resource_id: t.resource_id.clone(),
        text: t.text.clone(),
        content_desc: t.content_desc.clone(),
        bounds: Bounds::default(),
        affordances: t.affordances(),
        checked: t.checked,
        selected: false,
        enabled: t.enabled,
        structural_path,
    }
}

impl Environment for SimEnv {
    fn app_name(&self) -> &str {
        &self.spec.app_name
    }

    fn package(&self) -> &str {
        &self.spec.package
    }

    fn reset(&mut self) -> Result<(), EnvError> {
        let seed = self.seed;
        *self = SimEnv::new(self.spec.clone(), seed);
        Ok(())
    }

    fn observe(&mut self) -> Result<String, EnvError> {
        Ok(emit_snapshot(&self.render()))
    }

    fn perform(&mut self, action: &UiAction) -> Result<(), EnvError> {
        match action.action_type {
            ActionType::Restart => {
                self.restart();
                return Ok(());
            }
            ActionType::Back => {
                match self.location {
                    Location::Foreign {
                        return_to,
                        trapped: false,
                    } => self.enter(return_to),
                    Location::Foreign { trapped: true, .. } => {}
                    Location::Screen(i) => self.fire(i, None, action),
                }
                return Ok(());
            }
            _ => {}
        }
        let target = action
            .target
            .as_ref()
            .ok_or_else(|| EnvError::StaleTarget(format!("{} without a target", action.action_type)))?;
        let last = self
            .last
            .as_ref()
            .ok_or_else(|| EnvError::StaleTarget("nothing observed yet".into()))?;
        if last.state_id != target.state_id {
            return Err(EnvError::StaleTarget(format!(
                "target state {} is not the current observation {}",
                target.state_id, last.state_id
            )));
        }
        let Some(&template) = last.template_of.get(&target.element_id) else {
            return Err(EnvError::StaleTarget(format!("no element {} on screen", target.element_id)));
        };
        let Location::Screen(screen) = self.location else {
            return Ok(());
        };
        let t = self.spec.screens[screen].element(template).expect("rendered from template");
        if !t.enabled || !t.affordances().admits(action.action_type) {
            return Ok(());
        }
        if action.action_type == ActionType::Touch && self.toggles(screen, template) {
            let key = (screen, template);
            if !self.toggled.remove(&key) {
                self.toggled.insert(key);
            }
        }
        self.fire(screen, Some(template), action);
        Ok(())
    }
}
