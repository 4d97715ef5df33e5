use crate::ui::{ActionType, Affordances, ScrollDirection};
use regex::Regex;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};
use std::fmt;
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

fn default_true() -> bool {
    true
}

fn default_probability() -> f64 {
    1.0
}

fn default_foreign() -> String {
    "com.android.chooser".to_string()
}

fn is_false(b: &bool) -> bool {
    !*b
}

fn is_true(b: &bool) -> bool {
    *b
}

fn is_zero(n: &u32) -> bool {
    *n == 0
}

fn is_one(p: &f64) -> bool {
    *p == 1.0
}

/// Declarative description of a mock app.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockAppSpec {
    pub schema_version: u32,
    pub app_name: String,
    pub package: String,
    pub activities: Vec<String>,
    pub initial_screen: String,
    pub screens: Vec<ScreenTemplate>,
    #[serde(default)]
    pub transitions: Vec<TransitionRule>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub faults: Vec<FaultRule>,
    /// Package reported by screens outside the app.
    #[serde(default = "default_foreign")]
    pub foreign_package: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScreenTemplate {
    pub id: String,
    pub activity: String,
    pub elements: Vec<ElementTemplate>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dynamic: Vec<DynamicRule>,
}

impl ScreenTemplate {
    pub fn element(&self, id: u32) -> Option<&ElementTemplate> {
        self.elements.iter().find(|e| e.id == id).or_else(|| {
            self.dynamic.iter().find_map(|d| match d {
                DynamicRule::ListRows { row, .. } if row.id == id => Some(row),
                _ => None,
            })
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementTemplate {
    pub id: u32,
    pub class: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub resource_id: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub text: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub content_desc: String,
    #[serde(default, skip_serializing_if = "is_false")]
    pub touchable: bool,
    #[serde(default, skip_serializing_if = "is_false")]
    pub long_touchable: bool,
    #[serde(default, skip_serializing_if = "is_false")]
    pub scrollable: bool,
    #[serde(default, skip_serializing_if = "is_false")]
    pub editable: bool,
    #[serde(default, skip_serializing_if = "is_false")]
    pub checked: bool,
    #[serde(default = "default_true", skip_serializing_if = "is_true")]
    pub enabled: bool,
    /// Structural path; defaults to `[id]`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub path: Vec<u32>,
}

impl ElementTemplate {
    pub fn affordances(&self) -> Affordances {
        Affordances {
            touchable: self.touchable,
            long_touchable: self.long_touchable,
            scrollable: self.scrollable,
            editable: self.editable,
        }
    }

    pub fn structural_path(&self) -> Vec<u32> {
        if self.path.is_empty() {
            vec![self.id]
        } else {
            self.path.clone()
        }
    }
}

/// Per-observation content changes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DynamicRule {
    /// Emits between `min_rows` and `max_rows` copies of `row` under the
    /// element `parent`, each with fresh random text. Transitions address
    /// all rows through `row.id`.
    ListRows {
        parent: u32,
        row: ElementTemplate,
        min_rows: u32,
        max_rows: u32,
    },
    /// Replaces the element's text with fresh random digits.
    RandomText { element: u32 },
    /// Touching the element flips its checked flag.
    ToggleChecked { element: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionRule {
    pub screen: String,
    /// Template element id; absent for back rules.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub element: Option<u32>,
    pub action: ActionType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<ScrollDirection>,
    /// Regular expression the input text must match.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_pattern: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    #[serde(default = "default_probability", skip_serializing_if = "is_one")]
    pub probability: f64,
    #[serde(default, skip_serializing_if = "is_false")]
    pub out_of_app: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKind {
    /// The transition does not happen.
    Drop,
    /// The transition lands on `divert_to` instead.
    Divert,
    /// Back no longer returns from the foreign app entered through the
    /// matching transition.
    TrapBack,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultRule {
    pub kind: FaultKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub screen: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub element: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub divert_to: Option<String>,
    pub probability: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_triggers: Option<u32>,
    /// Matching transitions let through before the fault becomes active.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub after: u32,
}

impl FaultRule {
    pub fn applies(&self, screen: &str, element: Option<u32>) -> bool {
        self.screen.as_deref().is_none_or(|s| s == screen) && self.element.is_none_or(|e| element == Some(e))
    }
}

/// Every problem found in a spec, in document order.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ValidationError {
    pub problems: Vec<String>,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid app spec: {}", self.problems.join("; "))
    }
}

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("malformed app spec at {path}: {message}")]
    Malformed { path: String, message: String },
    #[error(transparent)]
    Invalid(#[from] ValidationError),
}

/// Parses and validates a mock-app document.
pub fn load_app_spec(raw: &str) -> Result<MockAppSpec, SpecError> {
    let de = &mut serde_json::Deserializer::from_str(raw);
    let spec: MockAppSpec = serde_path_to_error::deserialize(de).map_err(|e| SpecError::Malformed {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    spec.validate()?;
    Ok(spec)
}

/// Pretty document accepted by [`load_app_spec`].
pub fn emit_app_spec(spec: &MockAppSpec) -> String {
    let mut out = serde_json::to_string_pretty(spec).expect("spec serialization cannot fail");
    out.push('\n');
    out
}

impl MockAppSpec {
    pub fn screen(&self, id: &str) -> Option<&ScreenTemplate> {
        self.screens.iter().find(|s| s.id == id)
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        let mut problems = Vec::new();
        if self.schema_version != SCHEMA_VERSION {
            problems.push(format!("unsupported schema_version {}", self.schema_version));
        }
        if self.package.is_empty() {
            problems.push("package is empty".into());
        }
        if self.package == self.foreign_package {
            problems.push("foreign_package equals package".into());
        }
        if self.screens.is_empty() {
            problems.push("screens is empty".into());
        }
        let activities: BTreeSet<&str> = self.activities.iter().map(String::as_str).collect();
        if activities.len() != self.activities.len() {
            problems.push("duplicate activity names".into());
        }
        let mut screens: HashMap<&str, &ScreenTemplate> = HashMap::new();
        for s in &self.screens {
            if screens.insert(&s.id, s).is_some() {
                problems.push(format!("duplicate screen id {:?}", s.id));
            }
            if !activities.contains(s.activity.as_str()) {
                problems.push(format!("screen {:?} uses undeclared activity {:?}", s.id, s.activity));
            }
            check_screen(s, &mut problems);
        }
        if !self.screens.is_empty() && !screens.contains_key(self.initial_screen.as_str()) {
            problems.push(format!("initial_screen {:?} does not exist", self.initial_screen));
        }
        for (i, t) in self.transitions.iter().enumerate() {
            check_transition(i, t, &screens, &mut problems);
        }
        for (i, f) in self.faults.iter().enumerate() {
            let at = format!("faults[{i}]");
            if !(f.probability > 0.0 && f.probability <= 1.0) {
                problems.push(format!("{at}: probability {} outside (0, 1]", f.probability));
            }
            if let Some(s) = &f.screen {
                match screens.get(s.as_str()) {
                    None => problems.push(format!("{at}: screen {s:?} does not exist")),
                    Some(scr) => {
                        if let Some(e) = f.element {
                            if scr.element(e).is_none() {
                                problems.push(format!("{at}: element {e} does not exist on screen {s:?}"));
                            }
                        }
                    }
                }
            }
            match (f.kind, &f.divert_to) {
                (FaultKind::Divert, None) => problems.push(format!("{at}: divert fault without divert_to")),
                (FaultKind::Divert, Some(t)) if !screens.contains_key(t.as_str()) => {
                    problems.push(format!("{at}: divert_to {t:?} does not exist"))
                }
                (FaultKind::Drop | FaultKind::TrapBack, Some(_)) => {
                    problems.push(format!("{at}: divert_to only applies to divert faults"))
                }
                _ => {}
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ValidationError { problems })
        }
    }
}

fn check_element(screen: &str, e: &ElementTemplate, problems: &mut Vec<String>) {
    if e.editable && (e.touchable || e.long_touchable || e.scrollable) {
        problems.push(format!("screen {screen:?} element {}: editable elements accept input only", e.id));
    }
}

fn check_screen(s: &ScreenTemplate, problems: &mut Vec<String>) {
    if s.elements.is_empty() {
        problems.push(format!("screen {:?} has no elements", s.id));
    }
    let mut ids = BTreeSet::new();
    let mut paths = BTreeSet::new();
    for e in &s.elements {
        if !ids.insert(e.id) {
            problems.push(format!("screen {:?}: duplicate element id {}", s.id, e.id));
        }
        if !paths.insert(e.structural_path()) {
            problems.push(format!("screen {:?}: duplicate path {:?}", s.id, e.structural_path()));
        }
        check_element(&s.id, e, problems);
    }
    for d in &s.dynamic {
        match d {
            DynamicRule::ListRows {
                parent,
                row,
                min_rows,
                max_rows,
            } => {
                if !ids.contains(parent) {
                    problems.push(format!("screen {:?}: list parent {parent} does not exist", s.id));
                }
                if !ids.insert(row.id) {
                    problems.push(format!("screen {:?}: duplicate element id {}", s.id, row.id));
                }
                if min_rows > max_rows || *max_rows == 0 {
                    problems.push(format!("screen {:?}: bad row range {min_rows}..={max_rows}", s.id));
                }
                check_element(&s.id, row, problems);
            }
            DynamicRule::RandomText { element } | DynamicRule::ToggleChecked { element } => {
                if !s.elements.iter().any(|e| e.id == *element) {
                    problems.push(format!("screen {:?}: dynamic rule targets missing element {element}", s.id));
                }
            }
        }
    }
}

fn check_transition(i: usize, t: &TransitionRule, screens: &HashMap<&str, &ScreenTemplate>, problems: &mut Vec<String>) {
    let at = format!("transitions[{i}]");
    let screen = screens.get(t.screen.as_str());
    if screen.is_none() {
        problems.push(format!("{at}: screen {:?} does not exist", t.screen));
    }
    match (t.action, t.element) {
        (ActionType::Restart, _) => problems.push(format!("{at}: restart cannot be a trigger")),
        (ActionType::Back, Some(_)) => problems.push(format!("{at}: back rules take no element")),
        (ActionType::Back, None) => {}
        (_, None) => problems.push(format!("{at}: {} rule needs an element", t.action)),
        (kind, Some(id)) => {
            if let Some(s) = screen {
                match s.element(id) {
                    None => problems.push(format!("{at}: element {id} does not exist on screen {:?}", t.screen)),
                    Some(e) if !e.affordances().admits(kind) => {
                        problems.push(format!("{at}: element {id} does not admit {kind}"))
                    }
                    _ => {}
                }
            }
        }
    }
    if t.direction.is_some() && t.action != ActionType::Scroll {
        problems.push(format!("{at}: direction only applies to scroll rules"));
    }
    if let Some(p) = &t.input_pattern {
        if t.action != ActionType::Input {
            problems.push(format!("{at}: input_pattern only applies to input rules"));
        }
        if let Err(e) = Regex::new(p) {
            problems.push(format!("{at}: bad input_pattern: {e}"));
        }
    }
    match (&t.target, t.out_of_app) {
        (Some(_), true) => problems.push(format!("{at}: out_of_app rules take no target")),
        (None, false) => problems.push(format!("{at}: missing target")),
        (Some(target), false) if !screens.contains_key(target.as_str()) => {
            problems.push(format!("{at}: target screen {target:?} does not exist"))
        }
        _ => {}
    }
    if !(t.probability > 0.0 && t.probability <= 1.0) {
        problems.push(format!("{at}: probability {} outside (0, 1]", t.probability));
    }
}
