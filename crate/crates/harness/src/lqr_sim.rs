//! Closed-loop simulation of the balanced-descent controller on a generated
//! LQR system.

use std::fs;
use std::io::Write;
use std::path::Path;

use soco_core::analysis::Verdicts;
use soco_core::applications::{lqr_cost, run_obd_controller, ControllerOutcome, LqrSystem};
use soco_core::ObdConfig;

use crate::config::{Family, ScenarioConfig};
use crate::error::{HarnessError, Result};
use crate::experiment::Written;
use crate::scenario::{generate_scenario, Context};

#[derive(Clone, Debug)]
pub struct LqrSimResult {
    pub config: ScenarioConfig,
    pub system: LqrSystem,
    pub outcome: ControllerOutcome,
    pub controller_cost: f64,
    pub offline_cost: f64,
    pub verdicts: Verdicts,
}

impl LqrSimResult {
    pub fn passed(&self) -> bool {
        self.verdicts.passed() && self.controller_cost >= self.offline_cost * (1.0 - 1e-9)
    }
}

pub fn lqr_sim(config: &ScenarioConfig) -> Result<LqrSimResult> {
    if config.family != Family::Lqr {
        return Err(HarnessError::Config(format!(
            "lqr-sim needs family `lqr`, got `{}`",
            config.family.as_str()
        )));
    }
    let scenario = generate_scenario(config)?;
    let Context::Lqr(system) = scenario.context else {
        return Err(HarnessError::Config("lqr scenario without a system".into()));
    };
    let beta = config.beta.resolve(scenario.modulus);
    let obd = ObdConfig::for_modulus(beta, scenario.modulus)?.with_balance_mode(config.balance_mode.into());
    let outcome = run_obd_controller(&system, &obd)?;
    let controller_cost = lqr_cost(&system, &outcome.controls)?;
    let offline_cost = lqr_cost(&system, &outcome.offline_controls)?;
    let verdicts = outcome
        .report
        .verdicts(&config.tolerances.verdicts(), config.smooth_checks());
    Ok(LqrSimResult {
        config: config.clone(),
        system,
        outcome,
        controller_cost,
        offline_cost,
        verdicts,
    })
}

/// Header `t,u_1..u_d,u_opt_1..u_opt_d`.
pub fn write_controls_csv<W: Write>(result: &LqrSimResult, out: W) -> Result<()> {
    let d = result.system.dim();
    let mut writer = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((1..=d).map(|i| format!("u_{i}")));
    header.extend((1..=d).map(|i| format!("u_opt_{i}")));
    writer.write_record(&header)?;
    for (t, (u, u_opt)) in result.outcome.controls.iter().zip(&result.outcome.offline_controls).enumerate() {
        let mut record = vec![(t + 1).to_string()];
        record.extend(u.iter().chain(u_opt.iter()).map(|x| x.to_string()));
        writer.write_record(&record)?;
    }
    writer.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn lqr_summary_json(result: &LqrSimResult) -> serde_json::Value {
    let r = &result.outcome.report;
    let verdicts: serde_json::Map<String, serde_json::Value> = result
        .verdicts
        .all()
        .iter()
        .map(|(k, v)| ((*k).to_string(), v.as_str().into()))
        .collect();
    serde_json::json!({
        "name": result.config.name(),
        "seed": result.config.seed,
        "dimension": result.system.dim(),
        "horizon": r.horizon,
        "modulus_lower_bound": r.modulus,
        "beta": r.beta,
        "controller_cost": result.controller_cost,
        "offline_cost": result.offline_cost,
        "competitive_ratio": r.competitive_ratio.value,
        "cr_bound": r.bounds.competitive_ratio,
        "verdicts": verdicts,
        "passed": result.passed(),
    })
}

pub fn write_lqr_outputs(result: &LqrSimResult, dir: &Path) -> Result<Written> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let stem = result.config.stem();
    let csv_path = dir.join(format!("{stem}.controls.csv"));
    let summary_path = dir.join(format!("{stem}.lqr.summary.json"));
    let file = fs::File::create(&csv_path).map_err(|e| HarnessError::io(&csv_path, e))?;
    write_controls_csv(result, std::io::BufWriter::new(file))?;
    let text = serde_json::to_string_pretty(&lqr_summary_json(result))?;
    fs::write(&summary_path, text + "\n").map_err(|e| HarnessError::io(&summary_path, e))?;
    Ok(Written {
        csv: csv_path,
        summary: summary_path,
    })
}
