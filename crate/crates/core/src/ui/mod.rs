//! Raw GUI entities as observed from an environment driver.
//!
//! A [`UiState`] is one observed screen. Everything here is immutable once
//! built; the abstraction layer in [`crate::knowledge`] works on the
//! [`StateSignature`] computed from a state.

mod actions;
mod html;
mod signature;
mod snapshot;

pub use actions::{action_kinds, enumerate_candidate_actions, enumerate_candidate_actions_with, ScrollAxes};
pub use html::render_html;
pub use signature::{compute_state_signature, ElementKey, StateSignature};
pub use snapshot::{emit_snapshot, parse_snapshot, SnapshotError};

use serde::{Deserialize, Serialize};
use std::fmt;

/// Interaction capabilities of an element.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Affordances {
    pub touchable: bool,
    pub long_touchable: bool,
    pub scrollable: bool,
    pub editable: bool,
}

impl Affordances {
    pub const TOUCH: Affordances = Affordances {
        touchable: true,
        long_touchable: false,
        scrollable: false,
        editable: false,
    };

    pub fn is_empty(&self) -> bool {
        !(self.touchable || self.long_touchable || self.scrollable || self.editable)
    }

    /// Whether an element with these affordances accepts `action_type`.
    /// Editable elements only accept input.
    pub fn admits(&self, action_type: ActionType) -> bool {
        if self.editable {
            return action_type == ActionType::Input;
        }
        match action_type {
            ActionType::Touch => self.touchable,
            ActionType::LongTouch => self.long_touchable,
            ActionType::Scroll => self.scrollable,
            ActionType::Input => false,
            ActionType::Restart | ActionType::Back => false,
        }
    }
}

/// Pixel rectangle, `left <= right` and `top <= bottom`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bounds {
    pub left: u32,
    pub top: u32,
    pub right: u32,
    pub bottom: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UiElement {
    pub element_id: u32,
    pub class_name: String,
    pub resource_id: String,
    pub text: String,
    pub content_desc: String,
    pub bounds: Bounds,
    pub affordances: Affordances,
    pub checked: bool,
    pub selected: bool,
    pub enabled: bool,
    pub structural_path: Vec<u32>,
}

impl UiElement {
    /// Text shown to a reader: text and content description, whichever are set.
    pub fn label(&self) -> String {
        match (self.text.is_empty(), self.content_desc.is_empty()) {
            (false, false) => format!("{} {}", self.text, self.content_desc),
            (false, true) => self.text.clone(),
            (true, false) => self.content_desc.clone(),
            (true, true) => String::new(),
        }
    }

    pub fn key(&self) -> ElementKey {
        ElementKey {
            class_name: self.class_name.clone(),
            resource_id: self.resource_id.clone(),
            affordances: self.affordances,
        }
    }
}

/// One observed GUI screen.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UiState {
    pub state_id: String,
    pub activity: String,
    pub source_app: String,
    pub elements: Vec<UiElement>,
}

impl UiState {
    pub fn element(&self, element_id: u32) -> Option<&UiElement> {
        self.elements.iter().find(|e| e.element_id == element_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionType {
    Touch,
    LongTouch,
    Scroll,
    Input,
    Restart,
    /// System back. Only used to leave foreign apps; never explored.
    Back,
}

impl ActionType {
    pub fn as_str(&self) -> &'static str {
        match self {
            ActionType::Touch => "touch",
            ActionType::LongTouch => "long_touch",
            ActionType::Scroll => "scroll",
            ActionType::Input => "input",
            ActionType::Restart => "restart",
            ActionType::Back => "back",
        }
    }

    /// Restart and back move between screens but are not part of the
    /// explorable action space.
    pub fn is_navigation_only(&self) -> bool {
        matches!(self, ActionType::Restart | ActionType::Back)
    }
}

impl fmt::Display for ActionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScrollDirection {
    Up,
    Down,
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ElementRef {
    pub state_id: String,
    pub element_id: u32,
}

/// A concrete action against one observed state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UiAction {
    pub action_type: ActionType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<ElementRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scroll_direction: Option<ScrollDirection>,
}

impl UiAction {
    pub fn restart() -> Self {
        UiAction {
            action_type: ActionType::Restart,
            target: None,
            input_text: None,
            scroll_direction: None,
        }
    }

    pub fn back() -> Self {
        UiAction {
            action_type: ActionType::Back,
            target: None,
            input_text: None,
            scroll_direction: None,
        }
    }

    pub fn on(state: &UiState, element_id: u32, action_type: ActionType) -> Self {
        UiAction {
            action_type,
            target: Some(ElementRef {
                state_id: state.state_id.clone(),
                element_id,
            }),
            input_text: None,
            scroll_direction: if action_type == ActionType::Scroll {
                Some(ScrollDirection::Down)
            } else {
                None
            },
        }
    }

    pub fn with_text(mut self, text: impl Into<String>) -> Self {
        self.input_text = Some(text.into());
        self
    }

    pub fn with_direction(mut self, direction: ScrollDirection) -> Self {
        self.scroll_direction = Some(direction);
        self
    }

    pub fn element_id(&self) -> Option<u32> {
        self.target.as_ref().map(|t| t.element_id)
    }
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;

    /// Builder for hand-written test states.
    pub fn element(id: u32, class: &str, rid: &str, text: &str, aff: Affordances) -> UiElement {
        UiElement {
            element_id: id,
            class_name: class.to_string(),
            resource_id: rid.to_string(),
            text: text.to_string(),
            content_desc: String::new(),
            bounds: Bounds {
                left: 0,
                top: id * 10,
                right: 100,
                bottom: id * 10 + 10,
            },
            affordances: aff,
            checked: false,
            selected: false,
            enabled: true,
            structural_path: vec![0, id],
        }
    }

    pub fn state(id: &str, activity: &str, elements: Vec<UiElement>) -> UiState {
        UiState {
            state_id: id.to_string(),
            activity: activity.to_string(),
            source_app: "com.example.app".to_string(),
            elements,
        }
    }
}
