use rayon::prelude::*;

use crate::config::ScenarioConfig;
use crate::error::Result;
use crate::experiment::{run_experiment, ExperimentResult};

/// Runs `base` once per value of `param`, in parallel. Results keep the
/// order of `values`.
pub fn sweep(base: &ScenarioConfig, param: &str, values: &[f64]) -> Result<Vec<(f64, ExperimentResult)>> {
    let configs = values
        .iter()
        .map(|&v| base.with_param(param, v).map(|c| (v, c)))
        .collect::<Result<Vec<_>>>()?;
    configs
        .into_par_iter()
        .map(|(v, c)| run_experiment(&c).map(|r| (v, r)))
        .collect()
}
