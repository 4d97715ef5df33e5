use super::{Affordances, UiState};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Identity of an element once dynamic properties are removed.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ElementKey {
    pub class_name: String,
    pub resource_id: String,
    pub affordances: Affordances,
}

/// Structure of a screen with text, check/selection state, bounds and
/// ordering removed. Two states with equal signatures belong to the same
/// abstract state.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StateSignature {
    pub activity: String,
    pub element_keys: BTreeSet<ElementKey>,
}

pub fn compute_state_signature(state: &UiState) -> StateSignature {
    StateSignature {
        activity: state.activity.clone(),
        element_keys: state.elements.iter().map(|e| e.key()).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ui::testing::{element, state};
    use crate::ui::{parse_snapshot, emit_snapshot, Bounds};
    use proptest::prelude::*;

    fn contacts(names: &[&str]) -> UiState {
        let mut elements = vec![element(0, "Toolbar", "toolbar", "Contacts", Affordances::default())];
        for (i, n) in names.iter().enumerate() {
            elements.push(element(i as u32 + 1, "TextView", "contact_name", n, Affordances::TOUCH));
        }
        state("u1", "ContactsActivity", elements)
    }

    #[test]
    fn contact_lists_with_different_names_merge() {
        let a = contacts(&["Alice", "Bob"]);
        let b = contacts(&["Carol", "Dave", "Erin"]);
        assert_eq!(compute_state_signature(&a), compute_state_signature(&b));
    }

    #[test]
    fn activity_is_part_of_signature() {
        let a = contacts(&["Alice"]);
        let mut b = a.clone();
        b.activity = "OtherActivity".into();
        assert_ne!(compute_state_signature(&a), compute_state_signature(&b));
    }

    #[test]
    fn checkbox_toggle_keeps_signature() {
        let mut cb = element(1, "CheckBox", "wifi", "Wi-Fi", Affordances::TOUCH);
        let a = state("u1", "Settings", vec![cb.clone()]);
        cb.checked = true;
        let b = state("u2", "Settings", vec![cb]);
        let expected = StateSignature {
            activity: "Settings".into(),
            element_keys: [ElementKey {
                class_name: "CheckBox".into(),
                resource_id: "wifi".into(),
                affordances: Affordances::TOUCH,
            }]
            .into_iter()
            .collect(),
        };
        assert_eq!(compute_state_signature(&a), expected);
        assert_eq!(compute_state_signature(&b), expected);
    }

    #[test]
    fn affordance_change_splits() {
        let a = state("u1", "M", vec![element(0, "View", "x", "", Affordances::TOUCH)]);
        let b = state("u2", "M", vec![element(0, "View", "x", "", Affordances::default())]);
        assert_ne!(compute_state_signature(&a), compute_state_signature(&b));
    }

    fn arb_state() -> impl Strategy<Value = UiState> {
        let el = (
            0u8..4,
            0u8..4,
            any::<[bool; 4]>(),
            ".{0,8}",
            ".{0,8}",
            any::<(bool, bool)>(),
            (0u32..500, 0u32..500),
        );
        ("[A-C]", prop::collection::vec(el, 1..12)).prop_map(|(activity, els)| {
            let elements = els
                .into_iter()
                .enumerate()
                .map(|(i, (c, r, aff, text, desc, (checked, selected), (x, y)))| {
                    let mut e = element(
                        i as u32,
                        &format!("Class{c}"),
                        &format!("rid{r}"),
                        &text,
                        Affordances {
                            touchable: aff[0],
                            long_touchable: aff[1],
                            scrollable: aff[2],
                            editable: aff[3],
                        },
                    );
                    e.content_desc = desc;
                    e.checked = checked;
                    e.selected = selected;
                    e.bounds = Bounds { left: x, top: y, right: x + 10, bottom: y + 10 };
                    e
                })
                .collect();
            state("u0", &activity, elements)
        })
    }

    proptest! {
        #[test]
        fn blind_to_dynamic_properties(
            s in arb_state(),
            texts in prop::collection::vec(".{0,6}", 12),
            flags in prop::collection::vec(any::<(bool, bool)>(), 12),
            shift in 0u32..300,
            reverse in any::<bool>(),
        ) {
            let mut m = s.clone();
            for (i, e) in m.elements.iter_mut().enumerate() {
                e.text = texts[i].clone();
                e.content_desc = texts[11 - i].clone();
                e.checked = flags[i].0;
                e.selected = flags[i].1;
                e.bounds.top += shift;
                e.bounds.bottom += shift;
            }
            if reverse {
                m.elements.reverse();
            }
            prop_assert_eq!(compute_state_signature(&s), compute_state_signature(&m));
        }

        #[test]
        fn idempotent_across_round_trip(s in arb_state()) {
            let sig = compute_state_signature(&s);
            prop_assert_eq!(&sig, &compute_state_signature(&s));
            let back = parse_snapshot(&emit_snapshot(&s)).unwrap();
            prop_assert_eq!(&back, &s);
            prop_assert_eq!(sig, compute_state_signature(&back));
        }
    }
}
