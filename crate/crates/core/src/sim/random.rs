use super::spec::{ElementTemplate, MockAppSpec, ScreenTemplate, TransitionRule, SCHEMA_VERSION};
use crate::ui::ActionType;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Deterministic mock app with up to `max_screens` screens, one activity
/// each. Every screen carries one to five buttons; each button either
/// leads to a random screen or does nothing. Some screens may be
/// unreachable.
pub fn random_app_spec(seed: u64, max_screens: usize) -> MockAppSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=max_screens.max(1));
    let mut screens = Vec::new();
    let mut transitions = Vec::new();
    for i in 0..n {
        let buttons = rng.gen_range(1..=5u32);
        let mut elements = vec![ElementTemplate {
            id: 0,
            class: "android.widget.TextView".into(),
            resource_id: "title".into(),
            text: format!("Screen {i}"),
            content_desc: String::new(),
            touchable: false,
            long_touchable: false,
            scrollable: false,
            editable: false,
            checked: false,
            enabled: true,
            path: Vec::new(),
        }];
        for b in 1..=buttons {
            elements.push(ElementTemplate {
                id: b,
                class: "android.widget.Button".into(),
                resource_id: format!("btn_{}", (b'a' + b as u8) as char),
                text: format!("Button {b}"),
                content_desc: String::new(),
                touchable: true,
                long_touchable: rng.gen_bool(0.2),
                scrollable: false,
                editable: false,
                checked: false,
                enabled: true,
                path: Vec::new(),
            });
            if rng.gen_bool(0.75) {
                transitions.push(TransitionRule {
                    screen: format!("s{i}"),
                    element: Some(b),
                    action: ActionType::Touch,
                    direction: None,
                    input_pattern: None,
                    target: Some(format!("s{}", rng.gen_range(0..n))),
                    probability: 1.0,
                    out_of_app: false,
                });
            }
        }
        screens.push(ScreenTemplate {
            id: format!("s{i}"),
            activity: format!("Activity{i}"),
            elements,
            dynamic: Vec::new(),
        });
    }
    MockAppSpec {
        schema_version: SCHEMA_VERSION,
        app_name: format!("Random{seed}"),
        package: format!("com.example.random{seed}"),
        activities: (0..n).map(|i| format!("Activity{i}")).collect(),
        initial_screen: "s0".into(),
        screens,
        transitions,
        faults: Vec::new(),
        foreign_package: "com.android.chooser".into(),
    }
}
