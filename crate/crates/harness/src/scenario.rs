//! Seeded scenario generators.
//!
//! Every generator starts the minimizer walk at the start point `x_0`, so the
//! smoothness of `x_0, v_1 … v_T` is what the walk mode prescribes.

use soco_core::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use soco_core::applications::{
    lqr_to_soco, make_smoothed_regression_instance, LqrSystem, RegressionRound, RegressionTask,
    SmoothedRegressionConfig,
};
use soco_core::cost::{CostFunction, DEFAULT_MINIMIZER_TOL};
use soco_core::applications::LogisticCost;
use soco_core::{make_quadratic, SocoInstance};

use crate::config::{Disturbance, Family, ScenarioConfig, WalkMode};
use crate::error::{HarnessError, Result};

/// Largest accepted condition number of a generated control matrix.
const MAX_GENERATED_CONDITION: f64 = 100.0;
const LOGISTIC_RETRIES: usize = 40;

#[derive(Clone, Debug)]
pub enum Context {
    Plain,
    Regression {
        rounds: Vec<RegressionRound>,
        config: SmoothedRegressionConfig,
    },
    Lqr(LqrSystem),
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub instance: SocoInstance,
    pub context: Context,
    /// Modulus the balance parameter and the bounds are evaluated at.
    pub modulus: f64,
}

pub fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vec(rng: &mut impl Rng, d: usize) -> DVector<f64> {
    DVector::from_fn(d, |_, _| StandardNormal.sample(rng))
}

pub fn unit_vec(rng: &mut impl Rng, d: usize) -> DVector<f64> {
    loop {
        let g = gaussian_vec(rng, d);
        let n = g.norm();
        if n > 1e-8 {
            return g / n;
        }
    }
}

pub fn uniform_vec(rng: &mut impl Rng, d: usize, radius: f64) -> DVector<f64> {
    DVector::from_fn(d, |_, _| rng.random_range(-radius..=radius))
}

/// Haar-distributed orthogonal matrix.
pub fn random_orthogonal(rng: &mut impl Rng, d: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// SPD matrix with eigenvalues in `[lo, hi]`; `lo` is always one of them.
pub fn random_spd(rng: &mut impl Rng, d: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    let q = random_orthogonal(rng, d);
    let mut eig = DVector::from_fn(d, |_, _| if hi > lo { rng.random_range(lo..=hi) } else { lo });
    eig[0] = lo;
    let p = &q * DMatrix::from_diagonal(&eig) * q.transpose();
    (&p + p.transpose()) * 0.5
}

/// `v_1 … v_T` starting from `start`.
pub fn minimizer_walk(
    rng: &mut impl Rng,
    start: &DVector<f64>,
    horizon: usize,
    epsilon: f64,
    mode: WalkMode,
) -> Vec<DVector<f64>> {
    let d = start.len();
    match mode {
        WalkMode::Fixed | WalkMode::Lazy => {
            let mut v = start.clone();
            (0..horizon)
                .map(|_| {
                    let len = if mode == WalkMode::Fixed {
                        epsilon
                    } else {
                        epsilon * rng.random_range(0.0..=1.0)
                    };
                    v += unit_vec(rng, d) * len;
                    v.clone()
                })
                .collect()
        }
        WalkMode::Adversarial => {
            let jump = (10.0 * epsilon).max(1.0);
            let far = start + unit_vec(rng, d) * jump;
            (0..horizon)
                .map(|t| {
                    let center = if t % 2 == 0 { &far } else { start };
                    center + unit_vec(rng, d) * (0.05 * jump * rng.random_range(0.0..=1.0))
                })
                .collect()
        }
    }
}

pub fn generate_scenario(config: &ScenarioConfig) -> Result<Scenario> {
    config.validate()?;
    let mut rng = rng_for(config.seed);
    match config.family {
        Family::QuadraticWalk => quadratic_walk(config, &mut rng),
        Family::RidgeStream => ridge_stream(config, &mut rng),
        Family::LogisticStream => logistic_stream(config, &mut rng),
        Family::Lqr => lqr(config, &mut rng),
    }
}

fn quadratic_walk(config: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Result<Scenario> {
    let d = config.dimension;
    let m = config.modulus_or_default();
    let x0 = uniform_vec(rng, d, 1.0);
    let centers = minimizer_walk(rng, &x0, config.horizon, config.epsilon, config.walk);
    let costs = centers
        .into_iter()
        .map(|v| make_quadratic(random_spd(rng, d, m, m * config.condition_number), v, 0.0))
        .collect::<soco_core::Result<Vec<_>>>()?;
    Ok(Scenario {
        instance: SocoInstance::new(x0, costs)?,
        context: Context::Plain,
        modulus: m,
    })
}

fn regression_config(config: &ScenarioConfig, task: RegressionTask) -> Result<SmoothedRegressionConfig> {
    let (l1, l2) = match (config.lambda1, config.lambda2) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(HarnessError::Config("regression families need lambda1 and lambda2".into())),
    };
    Ok(SmoothedRegressionConfig::new(l1, l2, task)?)
}

/// Responses are chosen so that the round's regularized minimizer is exactly
/// the walk point: `Xᵀy = XᵀXθ + (λ1/2w)θ`.
fn ridge_stream(config: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Result<Scenario> {
    let reg = regression_config(config, RegressionTask::Ridge)?;
    let d = config.dimension;
    let n = config.samples();
    let theta0 = uniform_vec(rng, d, 1.0);
    let targets = minimizer_walk(rng, &theta0, config.horizon, config.epsilon, config.walk);
    let shrink = reg.modulus() / (2.0 * reg.data_weight());
    let rounds = targets
        .iter()
        .map(|theta| {
            let x = DMatrix::from_fn(n, d, |_, _| StandardNormal.sample(&mut *rng)) / (n as f64).sqrt();
            let gram = x.tr_mul(&x);
            let lift = gram
                .cholesky()
                .ok_or_else(|| HarnessError::Config("generated data matrix is rank deficient".into()))?
                .solve(theta);
            let y = &x * theta + &x * lift * shrink;
            Ok(RegressionRound::new(x, y)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let instance = make_smoothed_regression_instance(&rounds, &reg, theta0)?;
    let modulus = instance.modulus();
    Ok(Scenario {
        instance,
        context: Context::Regression { rounds, config: reg },
        modulus,
    })
}

fn logistic_round(
    x: &DMatrix<f64>,
    labels: &DVector<f64>,
    reg: &SmoothedRegressionConfig,
) -> Result<CostFunction> {
    let cost = LogisticCost::new(x.clone(), labels, reg.data_weight(), reg.modulus())?;
    Ok(CostFunction::new(cost, DEFAULT_MINIMIZER_TOL)?)
}

fn logistic_sample(rng: &mut ChaCha8Rng, theta: &DVector<f64>) -> (DVector<f64>, f64) {
    let x = gaussian_vec(rng, theta.len());
    let p: f64 = 1.0 / (1.0 + (-x.dot(theta)).exp());
    (x, if rng.random_bool(p.clamp(0.0, 1.0)) { 1.0 } else { 0.0 })
}

/// Each round replaces one sample of the previous round's data; a round is
/// redrawn while its minimizer moves more than `epsilon`, and falls back to
/// repeating the previous round.
fn logistic_stream(config: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Result<Scenario> {
    let reg = regression_config(config, RegressionTask::Logistic)?;
    let d = config.dimension;
    let n = config.samples();
    let truth_start = gaussian_vec(rng, d);
    let truths = minimizer_walk(rng, &truth_start, config.horizon, config.epsilon, config.walk);
    let mut x = DMatrix::zeros(n, d);
    let mut labels = DVector::zeros(n);
    for i in 0..n {
        let (row, label) = logistic_sample(rng, &truth_start);
        x.row_mut(i).copy_from(&row.transpose());
        labels[i] = label;
    }
    let mut rounds = Vec::with_capacity(config.horizon);
    let mut costs: Vec<CostFunction> = Vec::with_capacity(config.horizon);
    for (t, truth) in truths.iter().enumerate() {
        let slot = t % n;
        let mut accepted = None;
        for _ in 0..LOGISTIC_RETRIES {
            let (row, label) = logistic_sample(rng, truth);
            let mut x_try = x.clone();
            let mut labels_try = labels.clone();
            x_try.row_mut(slot).copy_from(&row.transpose());
            labels_try[slot] = label;
            let f = logistic_round(&x_try, &labels_try, &reg)?;
            let close = costs
                .last()
                .is_none_or(|prev| (f.minimizer() - prev.minimizer()).norm() <= config.epsilon);
            if close {
                accepted = Some((x_try, labels_try, f));
                break;
            }
        }
        let (x_new, labels_new, f) = match accepted {
            Some(a) => a,
            None => {
                let f = logistic_round(&x, &labels, &reg)?;
                (x.clone(), labels.clone(), f)
            }
        };
        x = x_new;
        labels = labels_new;
        rounds.push(RegressionRound::new(x.clone(), labels.clone())?);
        costs.push(f);
    }
    // Start at the first minimizer so the anchored sequence is smooth too.
    let x0 = costs[0].minimizer().clone();
    let instance = SocoInstance::new(x0, costs)?;
    let modulus = instance.modulus();
    Ok(Scenario {
        instance,
        context: Context::Regression { rounds, config: reg },
        modulus,
    })
}

fn lqr(config: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Result<Scenario> {
    let d = config.dimension;
    let spec = config.system_spec();
    let b = loop {
        let b = DMatrix::identity(d, d) + DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..=1.0) * spec.control_spread);
        let sv = b.clone().singular_values();
        if sv.min() > 0.0 && sv.max() / sv.min() <= MAX_GENERATED_CONDITION {
            break b;
        }
    };
    let r = random_spd(rng, d, 1.0, spec.control_cost_max);
    let q: Vec<DMatrix<f64>> = (0..config.horizon)
        .map(|_| random_spd(rng, d, spec.state_modulus, spec.state_modulus * config.condition_number))
        .collect();
    let r_inv_sqrt = soco_core::linalg::spd_inv_sqrt(&r)?;
    let back = &b * r_inv_sqrt;
    let w = match spec.disturbance {
        Disturbance::Bounded => {
            // s_t − s_{t−1} = −R^{½}B^{−1}w_t follows the walk.
            let origin = DVector::zeros(d);
            let walk = minimizer_walk(rng, &origin, config.horizon, config.epsilon, config.walk);
            let mut prev = origin;
            walk.into_iter()
                .map(|s| {
                    let w = -(&back * (&s - &prev));
                    prev = s;
                    w
                })
                .collect()
        }
        Disturbance::HeavyTailed => {
            let tails = StudentT::new(2.0).map_err(|e| HarnessError::Config(e.to_string()))?;
            (0..config.horizon)
                .map(|_| {
                    let magnitude: f64 = tails.sample(&mut *rng);
                    -(&back * unit_vec(rng, d)) * (config.epsilon * magnitude.abs())
                })
                .collect()
        }
    };
    let system = LqrSystem::new(b, r, q, w, DVector::zeros(d))?;
    let instance = lqr_to_soco(&system)?.soco;
    let modulus = system.modulus_lower_bound()?;
    Ok(Scenario {
        instance,
        context: Context::Lqr(system),
        modulus,
    })
}
