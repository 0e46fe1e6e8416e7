//! Smoothed online regression: at round `t` pick `θ_t` to minimize
//! `w·ℓ_t(θ_t) + (λ1/2)‖θ_t‖² + (λ2/2)‖θ_t − θ_{t−1}‖²`.
//!
//! Dividing by `λ2` gives an online problem with unit switching cost and
//! round cost `f̃_t = (w/λ2)·ℓ_t + (λ1/2λ2)‖θ‖²`, which is at least
//! `λ1/λ2`-strongly convex. The two ratios are formed first so that jointly
//! rescaling `(w, λ1, λ2)` reproduces the same instance.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::analysis::theoretical_cr_bound;
use crate::cost::{CostFunction, QuadraticCost, SmoothConvex, DEFAULT_MINIMIZER_TOL};
use crate::error::{Error, Result};
use crate::instance::SocoInstance;

/// Data `X_t` (`n × d`) and responses `y_t` for one round.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionRound {
    x: DMatrix<f64>,
    y: DVector<f64>,
}

impl RegressionRound {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::InvalidParameter {
                name: "x",
                reason: "needs at least one sample and one feature",
            });
        }
        if y.len() != x.nrows() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                found: y.len(),
            });
        }
        Ok(Self { x, y })
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn responses(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn features(&self) -> usize {
        self.x.ncols()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RegressionTask {
    /// `ℓ(θ) = ‖Xθ − y‖²`.
    #[default]
    Ridge,
    /// Mean logistic loss with labels in `{0, 1}` (or `±1`).
    Logistic,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothedRegressionConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub task: RegressionTask,
    /// Weight `w` on the data loss.
    pub loss_weight: f64,
    pub minimizer_tol: f64,
}

impl SmoothedRegressionConfig {
    pub fn new(lambda1: f64, lambda2: f64, task: RegressionTask) -> Result<Self> {
        let config = Self {
            lambda1,
            lambda2,
            task,
            loss_weight: 1.0,
            minimizer_tol: DEFAULT_MINIMIZER_TOL,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_loss_weight(mut self, weight: f64) -> Self {
        self.loss_weight = weight;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if !positive(self.lambda1) {
            return Err(Error::InvalidParameter {
                name: "lambda1",
                reason: "must be finite and positive",
            });
        }
        if !positive(self.lambda2) {
            return Err(Error::InvalidParameter {
                name: "lambda2",
                reason: "must be finite and positive",
            });
        }
        if !positive(self.loss_weight) {
            return Err(Error::InvalidParameter {
                name: "loss_weight",
                reason: "must be finite and positive",
            });
        }
        Ok(())
    }

    /// `w/λ2`.
    pub fn data_weight(&self) -> f64 {
        self.loss_weight / self.lambda2
    }

    /// `λ1/λ2`, the guaranteed modulus of every round.
    pub fn modulus(&self) -> f64 {
        self.lambda1 / self.lambda2
    }
}

/// `(a/n)·Σ log(1 + exp(−ỹ_i x_iᵀθ)) + (r/2)‖θ‖²` with `ỹ_i = ±1`.
#[derive(Clone, Debug, PartialEq)]
pub struct LogisticCost {
    x: DMatrix<f64>,
    signs: DVector<f64>,
    weight: f64,
    ridge: f64,
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + libm::log1p(libm::exp(-z.abs()))
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

impl LogisticCost {
    /// `labels` take values in `{0, 1}` or `{−1, 1}`; `0` maps to `−1`.
    pub fn new(x: DMatrix<f64>, labels: &DVector<f64>, weight: f64, ridge: f64) -> Result<Self> {
        if labels.len() != x.nrows() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                found: labels.len(),
            });
        }
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::InvalidParameter {
                name: "x",
                reason: "needs at least one sample and one feature",
            });
        }
        if !(ridge > 0.0) || !(weight > 0.0) {
            return Err(Error::InvalidParameter {
                name: "weight/ridge",
                reason: "must be positive",
            });
        }
        let mut signs = DVector::zeros(labels.len());
        for (s, &label) in signs.iter_mut().zip(labels.iter()) {
            *s = if label == 1.0 {
                1.0
            } else if label == 0.0 || label == -1.0 {
                -1.0
            } else {
                return Err(Error::InvalidParameter {
                    name: "labels",
                    reason: "must be 0, 1 or -1",
                });
            };
        }
        Ok(Self { x, signs, weight, ridge })
    }

    fn margins(&self, theta: &DVector<f64>) -> DVector<f64> {
        (&self.x * theta).component_mul(&self.signs)
    }

    fn scale(&self) -> f64 {
        self.weight / self.x.nrows() as f64
    }
}

impl SmoothConvex for LogisticCost {
    fn dim(&self) -> usize {
        self.x.ncols()
    }

    fn value(&self, theta: &DVector<f64>) -> f64 {
        let loss: f64 = self.margins(theta).iter().map(|&z| softplus(-z)).sum();
        self.scale() * loss + 0.5 * self.ridge * theta.norm_squared()
    }

    fn gradient(&self, theta: &DVector<f64>) -> DVector<f64> {
        // d/dz softplus(−z) = −σ(−z)
        let coeffs = self
            .margins(theta)
            .zip_map(&self.signs, |z, s| -s * sigmoid(-z));
        self.x.tr_mul(&coeffs) * self.scale() + theta * self.ridge
    }

    fn modulus(&self) -> f64 {
        self.ridge
    }

    fn lipschitz(&self) -> Option<f64> {
        Some(self.scale() * self.x.norm_squared() / 4.0 + self.ridge)
    }

    fn hessian(&self, theta: &DVector<f64>) -> Option<DMatrix<f64>> {
        let weights = self.margins(theta).map(|z| {
            let s = sigmoid(z);
            s * (1.0 - s)
        });
        let mut weighted = self.x.clone();
        for (mut row, w) in weighted.row_iter_mut().zip(weights.iter()) {
            row *= *w;
        }
        let d = self.x.ncols();
        Some(self.x.tr_mul(&weighted) * self.scale() + DMatrix::identity(d, d) * self.ridge)
    }
}

fn ridge_cost(round: &RegressionRound, a: f64, r: f64) -> Result<CostFunction> {
    let x = &round.x;
    let d = x.ncols();
    let p = x.tr_mul(x) * (2.0 * a) + DMatrix::identity(d, d) * r;
    let b = x.tr_mul(&round.y) * (2.0 * a);
    let center = p
        .clone()
        .cholesky()
        .ok_or(Error::Internal("ridge normal matrix is not positive definite"))?
        .solve(&b);
    // The minimum value, evaluated directly so it is never negative.
    let offset = a * (x * &center - &round.y).norm_squared() + 0.5 * r * center.norm_squared();
    let q = QuadraticCost::new(p, center, offset)?;
    CostFunction::new(q, DEFAULT_MINIMIZER_TOL)
}

/// Builds the unit-switching instance for a regression stream.
pub fn make_smoothed_regression_instance(
    rounds: &[RegressionRound],
    config: &SmoothedRegressionConfig,
    theta0: DVector<f64>,
) -> Result<SocoInstance> {
    config.validate()?;
    let a = config.data_weight();
    let r = config.modulus();
    let costs = rounds
        .iter()
        .enumerate()
        .map(|(t, round)| {
            if round.features() != theta0.len() {
                return Err(Error::DimensionMismatch {
                    expected: theta0.len(),
                    found: round.features(),
                }
                .at_round(t + 1));
            }
            match config.task {
                RegressionTask::Ridge => ridge_cost(round, a, r),
                RegressionTask::Logistic => {
                    CostFunction::new(LogisticCost::new(round.x.clone(), &round.y, a, r)?, config.minimizer_tol)
                }
            }
            .map_err(|e| e.at_round(t + 1))
        })
        .collect::<Result<Vec<_>>>()?;
    SocoInstance::new(theta0, costs)
}

/// Competitive bound for the smoothed stream at modulus `λ1/λ2 + extra`, with
/// the default balance parameter.
pub fn regularized_ratio_bound(extra_modulus: f64, lambda1: f64, lambda2: f64) -> Result<f64> {
    if !(lambda1 > 0.0) || !(lambda2 > 0.0) || !(extra_modulus >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "lambda",
            reason: "lambdas must be positive and the extra modulus nonnegative",
        });
    }
    let m = lambda1 / lambda2 + extra_modulus;
    theoretical_cr_bound(m, crate::obd::default_beta(m))
}
