//! Knowledge-guided GUI exploration.
//!
//! Observed screens ([`ui::UiState`]) are merged into abstract states, and
//! their elements into LLM-grouped abstract actions, held in
//! [`knowledge::Knowledge`] together with an abstract interaction graph.
//! The [`engine`] explores an app by picking unexplored abstract actions
//! app-wide and navigating to them along the graph; the [`sim`] module
//! provides declarative mock apps to explore.

pub mod knowledge;
pub mod llm;
pub mod ui;
pub mod engine;
pub mod run;
pub mod sim;
