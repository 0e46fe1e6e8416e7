//! Batch property suites with fixed seeds.
//!
//! Each case returns a margin: how far inside its tolerance the checked
//! inequality holds. A suite passes when every margin is nonnegative.

use rand::Rng;
use rayon::prelude::*;
use soco_core::analysis::{check_potential_lemmas, potential_hitting_slack, LEMMA_SLACK_TOL};
use soco_core::applications::{
    lqr_cost, lqr_to_soco, make_smoothed_regression_instance, soco_to_controls, LogisticCost, LqrSystem,
    RegressionRound, RegressionTask, SmoothedRegressionConfig,
};
use soco_core::cost::SmoothConvex;
use soco_core::obd::balance_residual;
use soco_core::offline::{brute_force_offline, offline_drift_check};
use soco_core::projection::default_projection_tol;
use soco_core::{
    make_quadratic, obd_run, obd_step, project_sublevel, solve_offline, CostFunction, ObdConfig, PotentialChecker,
    DMatrix, DVector, SocoInstance,
};

use crate::config::{Family, ScenarioConfig, WalkMode};
use crate::error::Result;
use crate::scenario::{generate_scenario, gaussian_vec, random_spd, rng_for, uniform_vec};

const SUITE_SEED: u64 = 0x50c0_2024;

pub const SUITES: [&str; 7] = [
    "potential-lemmas",
    "projection-optimality",
    "oracle-1d",
    "reduction-roundtrip",
    "balance",
    "gradients",
    "offline-drift",
];

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteOutcome {
    pub name: String,
    pub cases: usize,
    pub worst_margin: f64,
    pub passed: bool,
    /// Seed and message of the first failing case.
    pub failure: Option<String>,
}

fn case_seed(suite: &str, index: usize) -> u64 {
    let salt = suite.bytes().fold(0u64, |h, b| h.wrapping_mul(31).wrapping_add(b as u64));
    SUITE_SEED ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ index as u64
}

fn run_cases(
    name: &str,
    cases: usize,
    check: impl Fn(u64) -> soco_core::Result<f64> + Sync,
) -> SuiteOutcome {
    let results: Vec<(u64, std::result::Result<f64, String>)> = (0..cases)
        .into_par_iter()
        .map(|i| {
            let seed = case_seed(name, i);
            (seed, check(seed).map_err(|e| e.to_string()))
        })
        .collect();
    let mut worst = f64::INFINITY;
    let mut failure = None;
    for (seed, r) in results {
        match r {
            Ok(margin) => {
                worst = worst.min(margin);
                if !(margin >= 0.0) && failure.is_none() {
                    failure = Some(format!("case seed {seed}: margin {margin:e}"));
                }
            }
            Err(e) => {
                worst = f64::NEG_INFINITY;
                if failure.is_none() {
                    failure = Some(format!("case seed {seed}: {e}"));
                }
            }
        }
    }
    SuiteOutcome {
        name: name.to_string(),
        cases,
        worst_margin: worst,
        passed: failure.is_none(),
        failure,
    }
}

fn merge(name: &str, parts: Vec<SuiteOutcome>) -> SuiteOutcome {
    SuiteOutcome {
        name: name.to_string(),
        cases: parts.iter().map(|p| p.cases).sum(),
        worst_margin: parts.iter().map(|p| p.worst_margin).fold(f64::INFINITY, f64::min),
        passed: parts.iter().all(|p| p.passed),
        failure: parts.into_iter().find_map(|p| p.failure.map(|f| format!("{}: {f}", p.name))),
    }
}

fn quadratic(rng: &mut impl Rng, d: usize, m: f64, radius: f64) -> soco_core::Result<CostFunction> {
    make_quadratic(random_spd(rng, d, m, 10.0 * m), uniform_vec(rng, d, radius), 0.0)
}

pub fn potential_lemmas(triples: usize, hitting_cases: usize) -> SuiteOutcome {
    let triangles = run_cases("potential-lemmas/triples", triples, |seed| {
        let mut rng = rng_for(seed);
        let d = rng.random_range(1..=6);
        let checker = PotentialChecker::new(rng.random_range(1.0..5.0))?;
        let a = uniform_vec(&mut rng, d, 5.0);
        let b = uniform_vec(&mut rng, d, 5.0);
        let c = uniform_vec(&mut rng, d, 5.0);
        let r = check_potential_lemmas(&a, &b, &c, &checker)?;
        Ok(r.triangle_slack.min(r.obtuse_slack.unwrap_or(f64::INFINITY)) - LEMMA_SLACK_TOL)
    });
    let hitting = run_cases("potential-lemmas/hitting", hitting_cases, |seed| {
        let mut rng = rng_for(seed);
        let d = rng.random_range(1..=5);
        let m = rng.random_range(0.1..10.0);
        let f = quadratic(&mut rng, d, m, 2.0)?;
        let checker = PotentialChecker::for_beta(rng.random_range(0.5..20.0))?;
        let x = uniform_vec(&mut rng, d, 4.0);
        let x_star = uniform_vec(&mut rng, d, 4.0);
        Ok(potential_hitting_slack(&f, &x, &x_star, &checker)? - LEMMA_SLACK_TOL)
    });
    merge("potential-lemmas", vec![triangles, hitting])
}

pub fn projection_optimality(cases: usize) -> SuiteOutcome {
    run_cases("projection-optimality", cases, |seed| {
        let mut rng = rng_for(seed);
        let d = rng.random_range(1..=6);
        let m = rng.random_range(0.2..5.0);
        let f = quadratic(&mut rng, d, m, 1.0)?;
        let y = uniform_vec(&mut rng, d, 4.0);
        let fy = f.eval(&y);
        let level = f.min_value() + rng.random_range(0.0..1.0) * (fy - f.min_value());
        let tol = default_projection_tol(level);
        let p = project_sublevel(&f, level, &y, tol)?;
        let mut margin = level + tol - f.eval(&p.point);
        let base = (&p.point - &y).norm();
        for _ in 0..30 {
            let dir = gaussian_vec(&mut rng, d);
            for scale in [1e-1, 1e-2, 1e-3, 1e-4] {
                let q = &p.point + &dir * scale;
                if f.eval(&q) <= level {
                    margin = margin.min((&q - &y).norm() - base + 1e-7);
                }
            }
        }
        Ok(margin)
    })
}

/// One-dimensional instances with `T ≤ 3` against the grid dynamic program.
pub fn oracle_1d(cases: usize, grid_points: usize) -> SuiteOutcome {
    run_cases("oracle-1d", cases, |seed| {
        let mut rng = rng_for(seed);
        let horizon = rng.random_range(1..=3);
        let costs = (0..horizon)
            .map(|_| {
                let p = rng.random_range(0.5..5.0);
                make_quadratic(DMatrix::from_element(1, 1, p), uniform_vec(&mut rng, 1, 2.0), 0.0)
            })
            .collect::<soco_core::Result<Vec<_>>>()?;
        let inst = SocoInstance::new(uniform_vec(&mut rng, 1, 2.0), costs)?;
        let centers: Vec<f64> = inst.minimizers().iter().map(|v| v[0]).collect();
        let lo = centers.iter().copied().fold(f64::INFINITY, f64::min) - 3.0;
        let hi = centers.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 3.0;
        let exact = solve_offline(&inst, 1e-12)?;
        let grid = brute_force_offline(&inst, lo, hi, grid_points)?;
        let alg = obd_run(&inst, &ObdConfig::auto(inst.modulus())?)?;
        let gap = (grid.trajectory.total_cost - exact.trajectory.total_cost).abs();
        let lower = alg.trajectory.total_cost + 1e-9 - exact.trajectory.total_cost;
        Ok((1e-3 - gap).min(lower))
    })
}

pub fn random_lqr(rng: &mut impl Rng, d: usize, horizon: usize) -> soco_core::Result<LqrSystem> {
    let b = loop {
        let b = DMatrix::identity(d, d) + DMatrix::from_fn(d, d, |_, _| rng.random_range(-0.4..=0.4));
        let sv = b.clone().singular_values();
        if sv.min() > 0.1 {
            break b;
        }
    };
    let r = random_spd(rng, d, 0.5, 3.0);
    let q = (0..horizon).map(|_| random_spd(rng, d, 0.5, 5.0)).collect();
    let w = (0..horizon).map(|_| uniform_vec(rng, d, 0.5)).collect();
    LqrSystem::new(b, r, q, w, uniform_vec(rng, d, 1.0))
}

pub fn reduction_roundtrip(cases: usize) -> SuiteOutcome {
    run_cases("reduction-roundtrip", cases, |seed| {
        let mut rng = rng_for(seed);
        let d = rng.random_range(1..=4);
        let horizon = rng.random_range(1..=20);
        let sys = random_lqr(&mut rng, d, horizon)?;
        let red = lqr_to_soco(&sys)?;
        let controls: Vec<DVector<f64>> = (0..horizon).map(|_| uniform_vec(&mut rng, d, 1.0)).collect();
        let z = red.controls_to_z(&controls)?;
        let back = soco_to_controls(&z, &red)?;
        let roundtrip = controls
            .iter()
            .zip(&back)
            .map(|(u, v)| (u - v).norm())
            .fold(0.0, f64::max);
        let direct = lqr_cost(&sys, &controls)?;
        let soco = red.soco.evaluate(z)?.total_cost;
        let rel = (direct - soco).abs() / direct.abs().max(f64::MIN_POSITIVE);
        let modulus = red.soco.modulus() - sys.modulus_lower_bound()? + 1e-9;
        Ok((1e-10f64 - roundtrip).min(1e-8 - rel).min(modulus))
    })
}

pub fn balance(cases: usize) -> SuiteOutcome {
    run_cases("balance", cases, |seed| {
        let mut rng = rng_for(seed);
        let d = rng.random_range(1..=8);
        let m = [0.5, 1.0, 2.0, 10.0][rng.random_range(0..4)];
        let f = quadratic(&mut rng, d, m, 2.0)?;
        let x_prev = uniform_vec(&mut rng, d, 3.0);
        let config = ObdConfig::auto(m)?;
        let step = obd_step(&f, &x_prev, &config)?;
        let target = config.beta * (step.hitting - step.min_value);
        let residual = balance_residual(&step, config.beta, config.balance_mode);
        if step.stopped_at_minimizer {
            Ok(-residual)
        } else {
            Ok(1e-6 * target.max(1.0) - residual.abs())
        }
    })
}

fn fd_margin(value: impl Fn(&DVector<f64>) -> f64, grad: &DVector<f64>, x: &DVector<f64>) -> f64 {
    let mut fd = DVector::zeros(x.len());
    for i in 0..x.len() {
        let h = 1e-6 * (1.0 + x[i].abs());
        let mut a = x.clone();
        let mut b = x.clone();
        a[i] += h;
        b[i] -= h;
        fd[i] = (value(&a) - value(&b)) / (2.0 * h);
    }
    1e-5 - (&fd - grad).norm() / grad.norm().max(1.0)
}

/// Analytic gradients against central differences for every cost family.
pub fn gradients(points: usize) -> SuiteOutcome {
    let quad = run_cases("gradients/quadratic", points, |seed| {
        let mut rng = rng_for(seed);
        let d = rng.random_range(1..=6);
        let f = quadratic(&mut rng, d, 1.0, 2.0)?;
        let x = uniform_vec(&mut rng, d, 3.0);
        Ok(fd_margin(|y| f.eval(y), &f.grad(&x), &x))
    });
    let ridge = run_cases("gradients/ridge", points, |seed| {
        let mut rng = rng_for(seed);
        let d = rng.random_range(1..=5);
        let n = d + rng.random_range(0..5);
        let round = RegressionRound::new(
            DMatrix::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0)),
            uniform_vec(&mut rng, n, 1.0),
        )?;
        let cfg = SmoothedRegressionConfig::new(rng.random_range(0.1..3.0), rng.random_range(0.1..3.0), RegressionTask::Ridge)?;
        let inst = make_smoothed_regression_instance(&[round], &cfg, DVector::zeros(d))?;
        let f = &inst.costs()[0];
        let x = uniform_vec(&mut rng, d, 3.0);
        Ok(fd_margin(|y| f.eval(y), &f.grad(&x), &x))
    });
    let logistic = run_cases("gradients/logistic", points, |seed| {
        let mut rng = rng_for(seed);
        let d = rng.random_range(1..=5);
        let n = rng.random_range(1..=12);
        let x = DMatrix::from_fn(n, d, |_, _| rng.random_range(-2.0..2.0));
        let labels = DVector::from_fn(n, |_, _| if rng.random_bool(0.5) { 1.0 } else { 0.0 });
        let f = LogisticCost::new(x, &labels, rng.random_range(0.5..3.0), rng.random_range(0.1..2.0))?;
        let th = uniform_vec(&mut rng, d, 3.0);
        Ok(fd_margin(|y| f.value(y), &f.gradient(&th), &th))
    });
    let lqr = run_cases("gradients/lqr", points, |seed| {
        let mut rng = rng_for(seed);
        let d = rng.random_range(1..=4);
        let red = lqr_to_soco(&random_lqr(&mut rng, d, 2)?)?;
        let f = &red.soco.costs()[1];
        let z = uniform_vec(&mut rng, d, 3.0);
        Ok(fd_margin(|y| f.eval(y), &f.grad(&z), &z))
    });
    merge("gradients", vec![quad, ridge, logistic, lqr])
}

pub fn offline_drift(cases: usize) -> SuiteOutcome {
    run_cases("offline-drift", cases, |seed| {
        let mut rng = rng_for(seed);
        let config = ScenarioConfig {
            name: None,
            family: Family::QuadraticWalk,
            dimension: rng.random_range(1..=6),
            horizon: rng.random_range(5..=40),
            modulus: Some([0.5, 1.0, 2.0, 10.0][rng.random_range(0..4)]),
            lambda1: None,
            lambda2: None,
            system: None,
            epsilon: [0.05, 0.1, 0.5][rng.random_range(0..3)],
            beta: Default::default(),
            seed,
            walk: WalkMode::Fixed,
            condition_number: 10.0,
            samples_per_round: None,
            balance_mode: Default::default(),
            tolerances: Default::default(),
            output: Default::default(),
        };
        let scenario = generate_scenario(&config).map_err(|_| soco_core::Error::Internal("scenario generation failed"))?;
        let inst = &scenario.instance;
        let opt = solve_offline(inst, 1e-10)?;
        let report = offline_drift_check(&opt, &inst.minimizers(), inst.modulus())?;
        Ok(report.rhs + report.tolerance - report.lhs)
    })
}

/// Runs the named suites (all of them when `names` is empty) at their
/// default sizes.
pub fn verify_suites(names: &[String]) -> Result<Vec<SuiteOutcome>> {
    let selected: Vec<&str> = if names.is_empty() {
        SUITES.to_vec()
    } else {
        names.iter().map(String::as_str).collect()
    };
    selected
        .into_iter()
        .map(|name| {
            Ok(match name {
                "potential-lemmas" => potential_lemmas(100_000, 10_000),
                "projection-optimality" => projection_optimality(1000),
                "oracle-1d" => oracle_1d(50, 4001),
                "reduction-roundtrip" => reduction_roundtrip(50),
                "balance" => balance(1000),
                "gradients" => gradients(100),
                "offline-drift" => offline_drift(50),
                other => {
                    return Err(crate::error::HarnessError::Config(format!(
                        "unknown suite `{other}` (known: {})",
                        SUITES.join(", ")
                    )))
                }
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suites_pass() {
        for outcome in [
            potential_lemmas(500, 100),
            projection_optimality(50),
            oracle_1d(5, 1001),
            reduction_roundtrip(10),
            balance(100),
            gradients(20),
            offline_drift(10),
        ] {
            assert!(outcome.passed, "{outcome:?}");
        }
    }

    #[test]
    fn unknown_suite_is_an_error() {
        assert!(verify_suites(&["nope".to_string()]).is_err());
    }

    #[test]
    fn suites_are_deterministic() {
        assert_eq!(balance(40), balance(40));
    }
}
