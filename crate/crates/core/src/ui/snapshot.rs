use super::{Affordances, Bounds, UiElement, UiState};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SnapshotError {
    #[error("malformed snapshot at `{path}`: {message}")]
    Malformed { path: String, message: String },
    #[error("snapshot `{state_id}` has no elements")]
    EmptyState { state_id: String },
}

impl SnapshotError {
    fn at(path: impl Into<String>, message: impl Into<String>) -> Self {
        SnapshotError::Malformed {
            path: path.into(),
            message: message.into(),
        }
    }
}

/// Wire form of a snapshot document. Field names are fixed by the driver
/// contract; unknown fields are ignored.
#[derive(Debug, Serialize, Deserialize)]
struct SnapshotDoc {
    state_id: String,
    activity: String,
    #[serde(default)]
    source_app: String,
    elements: Vec<ElementDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ElementDoc {
    element_id: u32,
    #[serde(default, rename = "class")]
    class_name: String,
    #[serde(default)]
    resource_id: String,
    #[serde(default)]
    text: String,
    #[serde(default)]
    content_desc: String,
    #[serde(default)]
    bounds: [u32; 4],
    #[serde(default)]
    touchable: bool,
    #[serde(default)]
    long_touchable: bool,
    #[serde(default)]
    scrollable: bool,
    #[serde(default)]
    editable: bool,
    #[serde(default)]
    checked: bool,
    #[serde(default)]
    selected: bool,
    #[serde(default = "default_enabled")]
    enabled: bool,
    #[serde(default)]
    path: Vec<u32>,
}

fn default_enabled() -> bool {
    true
}

/// Parses a snapshot document emitted by an environment driver.
pub fn parse_snapshot(raw: &str) -> Result<UiState, SnapshotError> {
    let de = &mut serde_json::Deserializer::from_str(raw);
    let doc: SnapshotDoc = serde_path_to_error::deserialize(de).map_err(|err| {
        let path = err.path().to_string();
        SnapshotError::at(path, err.into_inner().to_string())
    })?;

    if doc.elements.is_empty() {
        return Err(SnapshotError::EmptyState {
            state_id: doc.state_id,
        });
    }

    let mut ids = HashSet::new();
    let mut paths = HashSet::new();
    let mut elements = Vec::with_capacity(doc.elements.len());
    for (i, e) in doc.elements.into_iter().enumerate() {
        if !ids.insert(e.element_id) {
            return Err(SnapshotError::at(
                format!("elements[{i}].element_id"),
                format!("duplicate element id {}", e.element_id),
            ));
        }
        let [left, top, right, bottom] = e.bounds;
        if left > right || top > bottom {
            return Err(SnapshotError::at(
                format!("elements[{i}].bounds"),
                format!("inverted rectangle [{left},{top},{right},{bottom}]"),
            ));
        }
        if !e.path.is_empty() && !paths.insert(e.path.clone()) {
            return Err(SnapshotError::at(
                format!("elements[{i}].path"),
                format!("duplicate structural path {:?}", e.path),
            ));
        }
        elements.push(UiElement {
            element_id: e.element_id,
            class_name: e.class_name,
            resource_id: e.resource_id,
            text: e.text,
            content_desc: e.content_desc,
            bounds: Bounds {
                left,
                top,
                right,
                bottom,
            },
            affordances: Affordances {
                touchable: e.touchable,
                long_touchable: e.long_touchable,
                scrollable: e.scrollable,
                editable: e.editable,
            },
            checked: e.checked,
            selected: e.selected,
            enabled: e.enabled,
            structural_path: e.path,
        });
    }

    Ok(UiState {
        state_id: doc.state_id,
        activity: doc.activity,
        source_app: doc.source_app,
        elements,
    })
}

/// Renders a state as a snapshot document; the inverse of [`parse_snapshot`].
pub fn emit_snapshot(state: &UiState) -> String {
    let doc = SnapshotDoc {
        state_id: state.state_id.clone(),
        activity: state.activity.clone(),
        source_app: state.source_app.clone(),
        elements: state
            .elements
            .iter()
            .map(|e| ElementDoc {
                element_id: e.element_id,
                class_name: e.class_name.clone(),
                resource_id: e.resource_id.clone(),
                text: e.text.clone(),
                content_desc: e.content_desc.clone(),
                bounds: [e.bounds.left, e.bounds.top, e.bounds.right, e.bounds.bottom],
                touchable: e.affordances.touchable,
                long_touchable: e.affordances.long_touchable,
                scrollable: e.affordances.scrollable,
                editable: e.affordances.editable,
                checked: e.checked,
                selected: e.selected,
                enabled: e.enabled,
                path: e.structural_path.clone(),
            })
            .collect(),
    };
    serde_json::to_string(&doc).expect("snapshot serialization cannot fail")
}
