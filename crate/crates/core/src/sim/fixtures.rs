use super::spec::{load_app_spec, MockAppSpec};

/// Mock apps shipped with the crate, by name.
pub const BUNDLED: &[(&str, &str)] = &[
    ("linear3", include_str!("../../fixtures/linear3.json")),
    ("calculator", include_str!("../../fixtures/calculator.json")),
    ("dynamic_list", include_str!("../../fixtures/dynamic_list.json")),
    ("wide_fanout", include_str!("../../fixtures/wide_fanout.json")),
    ("probabilistic", include_str!("../../fixtures/probabilistic.json")),
    ("form", include_str!("../../fixtures/form.json")),
    ("cross_app", include_str!("../../fixtures/cross_app.json")),
];

pub fn bundled_names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}

pub fn bundled_source(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

/// Loads a bundled fixture. Panics if a shipped fixture fails validation.
pub fn bundled(name: &str) -> Option<MockAppSpec> {
    bundled_source(name).map(|raw| load_app_spec(raw).unwrap_or_else(|e| panic!("bundled fixture {name}: {e}")))
}
