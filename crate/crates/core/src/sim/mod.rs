//! Declarative mock apps standing in for a device.
//!
//! A [`MockAppSpec`] lists screens, transition rules and fault rules;
//! [`SimEnv`] runs one as an [`crate::engine::Environment`]. Screens may
//! regenerate list rows and texts on every observation, transitions may be
//! gated on input patterns or fire with a probability, and some lead out of
//! the app.

mod baseline;
mod env;
mod fixtures;
mod random;
mod spec;

pub use baseline::{random_baseline_step, run_random_baseline, BaselineRun};
pub use env::SimEnv;
pub use fixtures::{bundled, bundled_names, bundled_source, BUNDLED};
pub use random::random_app_spec;
pub use spec::{
    emit_app_spec, load_app_spec, DynamicRule, ElementTemplate, FaultKind, FaultRule, MockAppSpec, ScreenTemplate,
    SpecError, TransitionRule, ValidationError, SCHEMA_VERSION,
};
