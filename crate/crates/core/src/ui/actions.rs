use super::{ActionType, ScrollDirection, UiAction, UiElement, UiState};
use serde::{Deserialize, Serialize};

/// Which scroll directions are offered for scrollable elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ScrollAxes {
    pub horizontal: bool,
}

impl ScrollAxes {
    pub fn directions(&self) -> &'static [ScrollDirection] {
        if self.horizontal {
            &[
                ScrollDirection::Up,
                ScrollDirection::Down,
                ScrollDirection::Left,
                ScrollDirection::Right,
            ]
        } else {
            &[ScrollDirection::Up, ScrollDirection::Down]
        }
    }
}

/// Candidate actions with vertical scrolling only.
pub fn enumerate_candidate_actions(state: &UiState) -> Vec<UiAction> {
    enumerate_candidate_actions_with(state, ScrollAxes::default())
}

/// Admissible (action type, scroll direction) pairs for one element in the
/// fixed order touch, long touch, input, scroll. Disabled elements have none.
pub fn action_kinds(e: &UiElement, axes: ScrollAxes) -> Vec<(ActionType, Option<ScrollDirection>)> {
    let mut out = Vec::new();
    if !e.enabled {
        return out;
    }
    for ty in [ActionType::Touch, ActionType::LongTouch, ActionType::Input] {
        if e.affordances.admits(ty) {
            out.push((ty, None));
        }
    }
    if e.affordances.admits(ActionType::Scroll) {
        for &dir in axes.directions() {
            out.push((ActionType::Scroll, Some(dir)));
        }
    }
    out
}

/// One action per admissible (element, action type) pair, ordered by
/// element id and then touch, long touch, input, scroll.
pub fn enumerate_candidate_actions_with(state: &UiState, axes: ScrollAxes) -> Vec<UiAction> {
    let mut elements: Vec<&UiElement> = state.elements.iter().collect();
    elements.sort_by_key(|e| e.element_id);

    let mut out = Vec::new();
    for e in elements {
        for (ty, dir) in action_kinds(e, axes) {
            let mut a = UiAction::on(state, e.element_id, ty);
            a.scroll_direction = dir;
            out.push(a);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ui::testing::{element, state};
    use crate::ui::Affordances;

    #[test]
    fn touch_and_long_touch() {
        let aff = Affordances {
            touchable: true,
            long_touchable: true,
            ..Default::default()
        };
        let s = state("u1", "M", vec![element(0, "Button", "b", "", aff)]);
        let acts = enumerate_candidate_actions(&s);
        let types: Vec<_> = acts.iter().map(|a| a.action_type).collect();
        assert_eq!(types, [ActionType::Touch, ActionType::LongTouch]);
    }

    #[test]
    fn disabled_elements_offer_nothing() {
        let mut e = element(0, "Button", "b", "", Affordances::TOUCH);
        e.enabled = false;
        let s = state("u1", "M", vec![e]);
        assert!(enumerate_candidate_actions(&s).is_empty());
    }

    #[test]
    fn scrollable_gets_up_and_down() {
        let aff = Affordances {
            scrollable: true,
            ..Default::default()
        };
        let s = state("u1", "M", vec![element(2, "ListView", "list", "", aff)]);
        let acts = enumerate_candidate_actions(&s);
        assert_eq!(acts.len(), 2);
        assert!(acts.iter().all(|a| a.action_type == ActionType::Scroll));
        let dirs: Vec<_> = acts.iter().map(|a| a.scroll_direction.unwrap()).collect();
        assert_eq!(dirs, [ScrollDirection::Up, ScrollDirection::Down]);

        let all = enumerate_candidate_actions_with(&s, ScrollAxes { horizontal: true });
        assert_eq!(all.len(), 4);
    }

    #[test]
    fn editable_only_accepts_input() {
        let aff = Affordances {
            touchable: true,
            long_touchable: true,
            editable: true,
            ..Default::default()
        };
        let s = state("u1", "M", vec![element(5, "EditText", "phone", "", aff)]);
        let acts = enumerate_candidate_actions(&s);
        assert_eq!(acts.len(), 1);
        assert_eq!(acts[0].action_type, ActionType::Input);
        assert_eq!(acts[0].input_text, None);
    }

    #[test]
    fn stable_order_by_element_id() {
        let s = state(
            "u1",
            "M",
            vec![
                element(3, "Button", "c", "", Affordances::TOUCH),
                element(1, "Button", "a", "", Affordances::TOUCH),
                element(2, "View", "b", "", Affordances::default()),
            ],
        );
        let ids: Vec<_> = enumerate_candidate_actions(&s)
            .iter()
            .map(|a| a.element_id().unwrap())
            .collect();
        assert_eq!(ids, [1, 3]);
    }

    #[test]
    fn every_candidate_is_admissible() {
        let mut elements = Vec::new();
        for bits in 0u32..16 {
            let aff = Affordances {
                touchable: bits & 1 != 0,
                long_touchable: bits & 2 != 0,
                scrollable: bits & 4 != 0,
                editable: bits & 8 != 0,
            };
            elements.push(element(bits, "V", "r", "", aff));
        }
        let s = state("u1", "M", elements);
        for a in enumerate_candidate_actions_with(&s, ScrollAxes { horizontal: true }) {
            let e = s.element(a.element_id().unwrap()).unwrap();
            assert!(e.affordances.admits(a.action_type), "{a:?} on {e:?}");
            assert_eq!(a.scroll_direction.is_some(), a.action_type == ActionType::Scroll);
        }
    }
}
