use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveragePoint {
    pub step: usize,
    pub seconds: f64,
    pub activities: usize,
    pub cumulative_tokens: u64,
}

/// Activities reached so far and one log row per executed step.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CoverageTracker {
    reached: BTreeSet<String>,
    log: Vec<CoveragePoint>,
}

impl CoverageTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn visit(&mut self, activity: &str) -> bool {
        self.reached.insert(activity.to_string())
    }

    pub fn record(&mut self, step: usize, seconds: f64, cumulative_tokens: u64) {
        self.log.push(CoveragePoint {
            step,
            seconds,
            activities: self.reached.len(),
            cumulative_tokens,
        });
    }

    pub fn reached(&self) -> &BTreeSet<String> {
        &self.reached
    }

    pub fn log(&self) -> &[CoveragePoint] {
        &self.log
    }

    /// Fraction of `declared` reached.
    pub fn ratio(&self, declared: &[String]) -> f64 {
        if declared.is_empty() {
            return 0.0;
        }
        declared.iter().filter(|a| self.reached.contains(*a)).count() as f64 / declared.len() as f64
    }
}
