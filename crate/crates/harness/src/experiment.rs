//! End-to-end runs: generate, solve online and offline, measure, write.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use soco_core::analysis::{
    accuracy_bound, regret_bound, theoretical_cr_bound, CompetitiveRatio, MetricsReport, RatioFlag, Verdict,
    VerdictTolerances, Verdicts,
};
use soco_core::{obd_run, solve_offline, ObdConfig, ObdRun, OfflineSolution};

use crate::config::ScenarioConfig;
use crate::error::{HarnessError, Result};
use crate::scenario::{generate_scenario, Scenario};

pub const CSV_HEADER: [&str; 8] = ["t", "H", "M", "level", "balance_residual", "tracking_error", "H_opt", "M_opt"];

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RoundRow {
    pub t: usize,
    #[serde(rename = "H")]
    pub hitting: f64,
    #[serde(rename = "M")]
    pub movement: f64,
    pub level: f64,
    pub balance_residual: f64,
    pub tracking_error: f64,
    #[serde(rename = "H_opt")]
    pub hitting_opt: f64,
    #[serde(rename = "M_opt")]
    pub movement_opt: f64,
}

/// Everything besides the rows needed to recompute the verdicts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VerdictInputs {
    pub modulus: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub measured_gradient: f64,
    pub smooth_checks: bool,
    #[serde(skip)]
    pub tolerances: VerdictTolerances,
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub config: ScenarioConfig,
    pub scenario: Scenario,
    pub run: ObdRun,
    pub offline: OfflineSolution,
    pub report: MetricsReport,
    pub rows: Vec<RoundRow>,
    pub inputs: VerdictInputs,
    pub verdicts: Verdicts,
    pub wall_time_ms: f64,
}

impl ExperimentResult {
    pub fn passed(&self) -> bool {
        self.verdicts.passed()
    }
}

pub fn run_experiment(config: &ScenarioConfig) -> Result<ExperimentResult> {
    let started = Instant::now();
    let scenario = generate_scenario(config)?;
    run_scenario(config, scenario, started)
}

/// Runs OBD and the offline solver on an already generated scenario.
pub fn run_scenario(config: &ScenarioConfig, scenario: Scenario, started: Instant) -> Result<ExperimentResult> {
    let instance = &scenario.instance;
    let beta = config.beta.resolve(scenario.modulus);
    let obd = ObdConfig::for_modulus(beta, scenario.modulus)?.with_balance_mode(config.balance_mode.into());
    let run = obd_run(instance, &obd)?;
    let offline = solve_offline(instance, config.tolerances.offline)?;
    let mut report = MetricsReport::compute(instance, &run, &offline, beta)?;
    // Bounds at the scenario's declared modulus, which may sit below the
    // instance's exact one (the LQR reduction only knows a lower bound).
    report.modulus = scenario.modulus;
    report.bounds.competitive_ratio = theoretical_cr_bound(scenario.modulus, beta).ok();
    report.bounds.accuracy = accuracy_bound(scenario.modulus, beta, report.epsilon).ok();
    report.bounds.regret = regret_bound(report.measured_gradient, scenario.modulus, beta, report.epsilon, instance.horizon()).ok();

    let rows = run
        .steps
        .iter()
        .zip(&offline.trajectory.hitting)
        .zip(&offline.trajectory.movement)
        .enumerate()
        .map(|(t, ((s, &h_opt), &m_opt))| RoundRow {
            t: t + 1,
            hitting: s.hitting,
            movement: s.movement,
            level: s.level,
            balance_residual: s.balance_residual,
            tracking_error: (&s.x - &s.v).norm(),
            hitting_opt: h_opt,
            movement_opt: m_opt,
        })
        .collect();
    let inputs = VerdictInputs {
        modulus: scenario.modulus,
        beta,
        epsilon: report.epsilon,
        measured_gradient: report.measured_gradient,
        smooth_checks: config.smooth_checks(),
        tolerances: config.tolerances.verdicts(),
    };
    let verdicts = report.verdicts(&inputs.tolerances, inputs.smooth_checks);
    Ok(ExperimentResult {
        config: config.clone(),
        scenario,
        run,
        offline,
        report,
        rows,
        inputs,
        verdicts,
        wall_time_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}

/// Recomputes every verdict from the per-round rows and the scalar inputs.
pub fn rederive_verdicts(rows: &[RoundRow], inputs: &VerdictInputs) -> Verdicts {
    let alg: f64 = rows.iter().map(|r| r.hitting + r.movement).sum();
    let opt: f64 = rows.iter().map(|r| r.hitting_opt + r.movement_opt).sum();
    let ratio = CompetitiveRatio::from_costs(alg, opt).value;
    let regret = alg - opt;
    let tracking = rows.iter().map(|r| r.tracking_error).fold(0.0, f64::max);
    let step = rows.iter().map(|r| (2.0 * r.movement).sqrt()).fold(0.0, f64::max);
    let tol = &inputs.tolerances;
    let cr = match theoretical_cr_bound(inputs.modulus, inputs.beta) {
        Ok(b) => Verdict::from_check(ratio <= b + tol.ratio),
        Err(_) => Verdict::NotApplicable,
    };
    let acc = accuracy_bound(inputs.modulus, inputs.beta, inputs.epsilon).ok().filter(|_| inputs.smooth_checks);
    let bound = regret_bound(inputs.measured_gradient, inputs.modulus, inputs.beta, inputs.epsilon, rows.len())
        .ok()
        .filter(|_| inputs.smooth_checks);
    Verdicts {
        competitive_ratio: cr,
        tracking: acc.map_or(Verdict::NotApplicable, |a| Verdict::from_check(tracking <= a.tracking + tol.accuracy)),
        trajectory_smoothness: acc.map_or(Verdict::NotApplicable, |a| Verdict::from_check(step <= a.step + tol.accuracy)),
        regret: bound.map_or(Verdict::NotApplicable, |b| Verdict::from_check(regret <= b + tol.accuracy)),
        regret_nonnegative: Verdict::from_check(regret >= tol.regret_floor),
    }
}

pub fn write_rows_csv<W: Write>(rows: &[RoundRow], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for row in rows {
        writer.serialize(row)?;
    }
    if rows.is_empty() {
        writer.write_record(CSV_HEADER)?;
    }
    writer.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn ratio_flag(flag: RatioFlag) -> &'static str {
    match flag {
        RatioFlag::Finite => "finite",
        RatioFlag::OptZero => "opt-zero",
        RatioFlag::BothZero => "both-zero",
    }
}

/// Non-finite numbers become `null`.
fn num(x: f64) -> serde_json::Value {
    serde_json::Number::from_f64(x).map_or(serde_json::Value::Null, serde_json::Value::Number)
}

pub fn summary_json(result: &ExperimentResult) -> serde_json::Value {
    let r = &result.report;
    let verdicts: serde_json::Map<String, serde_json::Value> = result
        .verdicts
        .all()
        .iter()
        .map(|(k, v)| ((*k).to_string(), v.as_str().into()))
        .collect();
    serde_json::json!({
        "name": result.config.name(),
        "family": result.config.family.as_str(),
        "seed": result.config.seed,
        "dimension": result.config.dimension,
        "horizon": r.horizon,
        "modulus": num(r.modulus),
        "beta": num(r.beta),
        "alg_cost": num(r.alg_cost),
        "opt_cost": num(r.opt_cost),
        "competitive_ratio": num(r.competitive_ratio.value),
        "ratio_flag": ratio_flag(r.competitive_ratio.flag),
        "dynamic_regret": num(r.dynamic_regret),
        "epsilon": num(r.epsilon),
        "max_tracking_error": num(r.max_tracking_error),
        "trajectory_smoothness": num(r.trajectory_smoothness),
        "measured_G": num(r.measured_gradient),
        "worst_balance_residual": num(r.worst_balance_residual),
        "opt_residual": num(r.opt_residual),
        "bounds": {
            "cr_bound": r.bounds.competitive_ratio.map_or(serde_json::Value::Null, num),
            "alpha": r.bounds.accuracy.map_or(serde_json::Value::Null, |a| num(a.alpha)),
            "accuracy_bound": r.bounds.accuracy.map_or(serde_json::Value::Null, |a| num(a.tracking)),
            "traj_smooth_bound": r.bounds.accuracy.map_or(serde_json::Value::Null, |a| num(a.step)),
            "regret_bound": r.bounds.regret.map_or(serde_json::Value::Null, num),
        },
        "smooth_checks": result.inputs.smooth_checks,
        "verdicts": verdicts,
        "passed": result.passed(),
        "wall_time_ms": num(result.wall_time_ms),
    })
}

/// Paths of the files written for one result.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Written {
    pub csv: PathBuf,
    pub summary: PathBuf,
}

pub fn write_outputs(result: &ExperimentResult, dir: &Path) -> Result<Written> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let stem = result.config.stem();
    let csv_path = dir.join(format!("{stem}.csv"));
    let summary_path = dir.join(format!("{stem}.summary.json"));
    let file = fs::File::create(&csv_path).map_err(|e| HarnessError::io(&csv_path, e))?;
    write_rows_csv(&result.rows, std::io::BufWriter::new(file))?;
    let text = serde_json::to_string_pretty(&summary_json(result))?;
    fs::write(&summary_path, text + "\n").map_err(|e| HarnessError::io(&summary_path, e))?;
    Ok(Written {
        csv: csv_path,
        summary: summary_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;

    fn cfg(extra: &str) -> ScenarioConfig {
        ScenarioConfig::from_json(&format!(
            r#"{{"family": "quadratic-walk", "dimension": 3, "horizon": 30, "epsilon": 0.1, "seed": 4, "modulus": 10 {extra}}}"#
        ))
        .unwrap()
    }

    #[test]
    fn totals_match_rows() {
        let res = run_experiment(&cfg("")).unwrap();
        let alg: f64 = res.rows.iter().map(|r| r.hitting + r.movement).sum();
        let opt: f64 = res.rows.iter().map(|r| r.hitting_opt + r.movement_opt).sum();
        assert!((alg - res.report.alg_cost).abs() <= 1e-9 * res.report.alg_cost.abs());
        assert!((opt - res.report.opt_cost).abs() <= 1e-9 * res.report.opt_cost.abs());
        assert!(res.passed(), "{:?}", res.verdicts);
        assert!(res.report.competitive_ratio.value <= 6.4616);
    }

    #[test]
    fn verdicts_rederive_from_rows() {
        for extra in ["", r#", "walk": "adversarial""#, r#", "walk": "lazy", "beta": 0.2"#] {
            let res = run_experiment(&cfg(extra)).unwrap();
            assert_eq!(rederive_verdicts(&res.rows, &res.inputs), res.verdicts, "{extra}");
        }
    }

    #[test]
    fn stationary_scenario_flags_ratio() {
        let res = run_experiment(&cfg("").with_param("epsilon", 0.0).unwrap()).unwrap();
        assert_eq!(res.report.competitive_ratio.flag, RatioFlag::BothZero);
        assert_eq!(res.report.competitive_ratio.value, 1.0);
        assert!(res.report.dynamic_regret.abs() < 1e-20);
    }

    #[test]
    fn csv_header_is_exact_and_output_deterministic() {
        let a = run_experiment(&cfg("")).unwrap();
        let b = run_experiment(&cfg("")).unwrap();
        let mut buf_a = Vec::new();
        let mut buf_b = Vec::new();
        write_rows_csv(&a.rows, &mut buf_a).unwrap();
        write_rows_csv(&b.rows, &mut buf_b).unwrap();
        assert_eq!(buf_a, buf_b);
        let text = String::from_utf8(buf_a).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
        assert_eq!(text.lines().count(), 31);
    }
}
