use crate::ui::UiAction;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnvError {
    /// The action's target is not on the current screen.
    #[error("stale target: {0}")]
    StaleTarget(String),
    #[error("driver failure: {0}")]
    Driver(String),
}

/// Device driver contract. Calls are blocking and must return; every
/// `perform` is followed by an `observe` of the resulting screen.
pub trait Environment {
    fn app_name(&self) -> &str;

    /// Package of the app under test.
    fn package(&self) -> &str;

    /// Launches the app from a clean state.
    fn reset(&mut self) -> Result<(), EnvError>;

    /// Snapshot document of the current screen.
    fn observe(&mut self) -> Result<String, EnvError>;

    fn perform(&mut self, action: &UiAction) -> Result<(), EnvError>;
}

impl<E: Environment + ?Sized> Environment for &mut E {
    fn app_name(&self) -> &str {
        (**self).app_name()
    }

    fn package(&self) -> &str {
        (**self).package()
    }

    fn reset(&mut self) -> Result<(), EnvError> {
        (**self).reset()
    }

    fn observe(&mut self) -> Result<String, EnvError> {
        (**self).observe()
    }

    fn perform(&mut self, action: &UiAction) -> Result<(), EnvError> {
        (**self).perform(action)
    }
}
