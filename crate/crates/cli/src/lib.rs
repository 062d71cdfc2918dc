//! Batch experiment runner for the zmix toolkit: JSON configurations,
//! deterministic seeded execution, CSV and JSON reports, built-in recipes.
//!
//! Exit codes: 0 when every verdict passes, 2 when a verdict fails, 1 on
//! configuration or runtime errors.

pub mod config;
pub mod experiments;
pub mod output;
pub mod plotdata;
pub mod recipes;
pub mod registry;

pub use config::ExperimentConfig;
pub use experiments::{execute, Outcome, Verdict};
pub use output::{
    run_config, run_path, RunManifest, RunOptions, RunResult, EXIT_ERROR, EXIT_PASS, EXIT_VERDICT,
};
pub use recipes::{find, recipes, Recipe};
