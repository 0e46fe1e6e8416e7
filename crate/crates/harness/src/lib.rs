//! Scenario generation, experiment runs, sweeps and batch verification on
//! top of `soco-core`, plus the JSON/CSV file formats used by the `soco` CLI.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiment;
pub mod lqr_sim;
pub mod scenario;
pub mod sweep;
pub mod verify;

pub use config::{Family, ScenarioConfig};
pub use error::{HarnessError, Result};
pub use experiment::{run_experiment, write_outputs, ExperimentResult};
pub use lqr_sim::{lqr_sim, write_lqr_outputs, LqrSimResult};
pub use scenario::{generate_scenario, Scenario};
pub use sweep::sweep;
pub use verify::{verify_suites, SuiteOutcome, SUITES};
