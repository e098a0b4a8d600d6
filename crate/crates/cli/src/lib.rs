//! Benchmark harness around the adaptation space reducer: scenario files,
//! the collect/design/run/summarize commands and their artifacts.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod design;
pub mod scenario;
pub mod summary;

pub use commands::{
    cmd_collect, cmd_design, cmd_run, cmd_summarize, load_scenario, Overrides, RunOutput,
};
pub use config::ScenarioConfig;
pub use scenario::Scenario;
