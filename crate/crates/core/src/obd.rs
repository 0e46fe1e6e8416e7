//! Online Balanced Descent.
//!
//! Each round projects the previous point onto a sublevel set of the current
//! cost, choosing the level at which the movement cost balances `β` times the
//! hitting level.
//!
//! # Stopping rule
//!
//! The search starts at `l₀ = f(v)`, where the projection is the minimizer
//! itself. If moving straight to `v` costs no more than `β` times the balance
//! target at `l₀`, the step stops at the minimizer. Otherwise the level is
//! bisected over `[l₀, f(x_prev)]` for the root of
//!
//! ```text
//! h(l) = ½‖x(l) − x_prev‖² − β·target(l)
//! ```
//!
//! which is unique: movement is nonincreasing in `l`, the target strictly
//! increasing, `h(l₀) > 0` and `h(f(x_prev)) < 0`.
//!
//! [`BalanceMode::ZeroShifted`] balances against `f(x) − f(v)`, so the
//! trajectory does not depend on the cost's minimum value;
//! [`BalanceMode::AbsoluteLevel`] balances against the raw level `l`.

use alloc::vec::Vec;

use log::warn;
use nalgebra::DVector;

use crate::cost::CostFunction;
use crate::error::{Error, Result};
use crate::instance::{SocoInstance, Trajectory};
use crate::linalg;
use crate::projection::project_sublevel;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum BalanceMode {
    AbsoluteLevel,
    #[default]
    ZeroShifted,
}

impl BalanceMode {
    /// Balance target for a round whose cost has minimum `min_value`, at
    /// level (or hitting cost) `level`.
    pub fn target(self, level: f64, min_value: f64) -> f64 {
        match self {
            BalanceMode::AbsoluteLevel => level,
            BalanceMode::ZeroShifted => level - min_value,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObdConfig {
    pub beta: f64,
    /// Bisection stops once `|h(l)| ≤ level_tol · max(1, β·target)`.
    pub level_tol: f64,
    /// Projection tolerance relative to `max(1, l)`.
    pub projection_tol: f64,
    pub balance_mode: BalanceMode,
    pub max_bisection_iters: usize,
}

impl ObdConfig {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::InvalidParameter {
                name: "beta",
                reason: "must be finite and positive",
            });
        }
        Ok(Self {
            beta,
            level_tol: 1e-10,
            projection_tol: 1e-12,
            balance_mode: BalanceMode::default(),
            max_bisection_iters: 300,
        })
    }

    /// `β = 2 + 10/m`.
    pub fn auto(modulus: f64) -> Result<Self> {
        if !(modulus > 0.0) {
            return Err(Error::InvalidParameter {
                name: "modulus",
                reason: "must be positive",
            });
        }
        Self::new(default_beta(modulus))
    }

    /// Like [`ObdConfig::new`], warning when `β ≤ 4/m` (outside the regime
    /// where the competitive guarantee holds).
    pub fn for_modulus(beta: f64, modulus: f64) -> Result<Self> {
        let config = Self::new(beta)?;
        if !config.in_guarantee_regime(modulus) {
            warn!(
                "beta = {beta} is at or below 4/m = {}; OBD carries no competitive guarantee here",
                4.0 / modulus
            );
        }
        Ok(config)
    }

    pub fn in_guarantee_regime(&self, modulus: f64) -> bool {
        self.beta * modulus > 4.0
    }

    pub fn with_balance_mode(mut self, mode: BalanceMode) -> Self {
        self.balance_mode = mode;
        self
    }

    pub fn with_level_tol(mut self, tol: f64) -> Self {
        self.level_tol = tol;
        self
    }

    pub fn with_projection_tol(mut self, tol: f64) -> Self {
        self.projection_tol = tol;
        self
    }
}

pub fn default_beta(modulus: f64) -> f64 {
    2.0 + 10.0 / modulus
}

/// One OBD round.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub x: DVector<f64>,
    pub v: DVector<f64>,
    /// Level of the sublevel set the step projected onto.
    pub level: f64,
    /// `H_t = f_t(x_t)`.
    pub hitting: f64,
    /// `M_t = ½‖x_t − x_{t−1}‖²`.
    pub movement: f64,
    /// Minimum value `f_t(v_t)`.
    pub min_value: f64,
    /// `M_t − β·target(H_t)`.
    pub balance_residual: f64,
    pub stopped_at_minimizer: bool,
    pub projection_residual: f64,
    pub iterations: usize,
}

/// Runs one OBD round from `x_prev` on cost `f`.
pub fn obd_step(f: &CostFunction, x_prev: &DVector<f64>, config: &ObdConfig) -> Result<StepRecord> {
    linalg::check_dim(x_prev, f.dim())?;
    let beta = config.beta;
    let mode = config.balance_mode;
    let v = f.minimizer();
    let min_value = f.min_value();
    let target = |level: f64| mode.target(level, min_value);

    let to_minimizer = linalg::half_sq_dist(v, x_prev);
    if to_minimizer <= beta * target(min_value) {
        return Ok(StepRecord {
            x: v.clone(),
            v: v.clone(),
            level: min_value,
            hitting: min_value,
            movement: to_minimizer,
            min_value,
            balance_residual: to_minimizer - beta * target(min_value),
            stopped_at_minimizer: true,
            projection_residual: 0.0,
            iterations: 0,
        });
    }

    let mut lo = min_value;
    let mut hi = f.eval(x_prev);
    let mut best: Option<(f64, StepRecord)> = None;
    for iteration in 1..=config.max_bisection_iters {
        let level = 0.5 * (lo + hi);
        let collapsed = level <= lo || level >= hi;
        let tol = config.projection_tol * level.abs().max(1.0);
        let proj = project_sublevel(f, level, x_prev, tol)?;
        let hitting = f.eval(&proj.point);
        let movement = linalg::half_sq_dist(&proj.point, x_prev);
        let balance_target = beta * target(hitting);
        let h = movement - balance_target;
        let record = StepRecord {
            x: proj.point,
            v: v.clone(),
            level,
            hitting,
            movement,
            min_value,
            balance_residual: h,
            stopped_at_minimizer: false,
            projection_residual: proj.residual,
            iterations: iteration,
        };
        if h.abs() <= config.level_tol * balance_target.abs().max(1.0) {
            return Ok(record);
        }
        if best.as_ref().is_none_or(|(b, _)| h.abs() < *b) {
            best = Some((h.abs(), record));
        }
        if collapsed {
            // Adjacent floats bracket the root; nothing finer is representable.
            break;
        }
        if h > 0.0 {
            lo = level;
        } else {
            hi = level;
        }
    }
    match best {
        Some((_, record)) if hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(f64::MIN_POSITIVE) => {
            Ok(record)
        }
        Some((residual, _)) => Err(Error::NonConvergence {
            solver: "obd balance bisection",
            iterations: config.max_bisection_iters,
            residual,
        }),
        None => Err(Error::Internal("balance bisection ran zero iterations")),
    }
}

/// `M_t − β·target` for a recorded step, recomputed from its costs.
pub fn balance_residual(step: &StepRecord, beta: f64, mode: BalanceMode) -> f64 {
    step.movement - beta * mode.target(step.hitting, step.min_value)
}

/// The per-round records of a full OBD run and the resulting trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct ObdRun {
    pub steps: Vec<StepRecord>,
    pub trajectory: Trajectory,
}

impl ObdRun {
    pub fn worst_balance_residual(&self) -> f64 {
        self.steps
            .iter()
            .filter(|s| !s.stopped_at_minimizer)
            .map(|s| s.balance_residual.abs())
            .fold(0.0, f64::max)
    }
}

/// Runs OBD over the whole instance. Round `t` only sees `f_t` and `x_{t−1}`.
pub fn obd_run(instance: &SocoInstance, config: &ObdConfig) -> Result<ObdRun> {
    let mut steps = Vec::with_capacity(instance.horizon());
    let mut prev = instance.x0().clone();
    for (t, f) in instance.costs().iter().enumerate() {
        let step = obd_step(f, &prev, config).map_err(|e| e.at_round(t + 1))?;
        prev = step.x.clone();
        steps.push(step);
    }
    let trajectory = Trajectory::from_parts(
        instance.x0().clone(),
        steps.iter().map(|s| s.x.clone()).collect(),
        steps.iter().map(|s| s.hitting).collect(),
        steps.iter().map(|s| s.movement).collect(),
    );
    Ok(ObdRun { steps, trajectory })
}
