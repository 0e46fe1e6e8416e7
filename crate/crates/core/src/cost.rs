//! Strongly convex per-round costs.
//!
//! A cost family implements [`SmoothConvex`]: value, gradient and its exact
//! strong-convexity modulus `m`. [`CostFunction`] wraps a family together with
//! its minimizer `v` and minimum value `f(v)`, shifting the family upward when
//! needed so that every cost seen by the solvers is nonnegative.

use alloc::sync::Arc;
use core::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg;

/// Default gradient-norm tolerance when a cost's minimizer has to be found
/// numerically.
pub const DEFAULT_MINIMIZER_TOL: f64 = 1e-10;

const MAX_DESCENT_ITERS: usize = 200_000;
const MAX_NEWTON_ITERS: usize = 100;

/// A differentiable, `m`-strongly convex function on `R^d`.
pub trait SmoothConvex: fmt::Debug + Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &DVector<f64>) -> f64;

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;

    /// Strong-convexity modulus with respect to the Euclidean norm.
    fn modulus(&self) -> f64;

    /// Upper bound on the Lipschitz constant of the gradient, if known.
    fn lipschitz(&self) -> Option<f64> {
        None
    }

    fn hessian(&self, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
        None
    }

    fn closed_form_minimizer(&self) -> Option<DVector<f64>> {
        None
    }

    /// `argmin_x ½‖x − y‖² + μ·f(x)` when it has a closed form.
    fn prox(&self, _y: &DVector<f64>, _mu: f64) -> Option<DVector<f64>> {
        None
    }

    /// `(P, v)` when `f(x) = ½(x − v)ᵀP(x − v) + const`.
    fn quadratic_form(&self) -> Option<(&DMatrix<f64>, &DVector<f64>)> {
        None
    }
}

/// `f(x) = ½(x − v)ᵀP(x − v) + c0` with `P` symmetric positive definite.
#[derive(Clone)]
pub struct QuadraticCost {
    p: DMatrix<f64>,
    center: DVector<f64>,
    offset: f64,
    eigen: SymmetricEigen<f64, nalgebra::Dyn>,
}

impl fmt::Debug for QuadraticCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("QuadraticCost")
            .field("p", &self.p)
            .field("center", &self.center)
            .field("offset", &self.offset)
            .finish()
    }
}

impl QuadraticCost {
    pub fn new(p: DMatrix<f64>, center: DVector<f64>, offset: f64) -> Result<Self> {
        let d = linalg::require_square(&p)?;
        linalg::check_dim(&center, d)?;
        if !(offset >= 0.0) || !offset.is_finite() {
            return Err(Error::InvalidParameter {
                name: "offset",
                reason: "must be finite and nonnegative",
            });
        }
        let eigen = linalg::spd_eigen(&p)?;
        // Store the symmetrized matrix so value/gradient agree exactly with
        // the eigendecomposition used by `prox`.
        let p = (&p + p.transpose()) * 0.5;
        Ok(Self {
            p,
            center,
            offset,
            eigen,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Eigenvalues of `P`, ascending.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigen.eigenvalues
    }
}

impl SmoothConvex for QuadraticCost {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        let d = x - &self.center;
        0.5 * d.dot(&(&self.p * &d)) + self.offset
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.p * (x - &self.center)
    }

    fn modulus(&self) -> f64 {
        self.eigen.eigenvalues[0]
    }

    fn lipschitz(&self) -> Option<f64> {
        Some(self.eigen.eigenvalues[self.eigen.eigenvalues.len() - 1])
    }

    fn hessian(&self, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
        Some(self.p.clone())
    }

    fn closed_form_minimizer(&self) -> Option<DVector<f64>> {
        Some(self.center.clone())
    }

    fn prox(&self, y: &DVector<f64>, mu: f64) -> Option<DVector<f64>> {
        // (I + μP)(x − v) = y − v, solved in the eigenbasis of P.
        let u = &self.eigen.eigenvectors;
        let mut coords = u.transpose() * (y - &self.center);
        for (c, lambda) in coords.iter_mut().zip(self.eigen.eigenvalues.iter()) {
            *c /= 1.0 + mu * lambda;
        }
        Some(&self.center + u * coords)
    }

    fn quadratic_form(&self) -> Option<(&DMatrix<f64>, &DVector<f64>)> {
        Some((&self.p, &self.center))
    }
}

/// A strongly convex cost with its minimizer and minimum value resolved.
///
/// Immutable after construction and cheap to clone.
#[derive(Clone, Debug)]
pub struct CostFunction {
    inner: Arc<dyn SmoothConvex>,
    minimizer: DVector<f64>,
    min_value: f64,
    shift: f64,
}

impl CostFunction {
    /// Resolves the minimizer of `f` to gradient norm `tol` and shifts `f` by
    /// a constant if its minimum is negative.
    pub fn new<F: SmoothConvex + 'static>(f: F, tol: f64) -> Result<Self> {
        Self::from_arc(Arc::new(f), tol)
    }

    pub fn from_arc(inner: Arc<dyn SmoothConvex>, tol: f64) -> Result<Self> {
        let m = inner.modulus();
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::InvalidParameter {
                name: "modulus",
                reason: "must be finite and positive",
            });
        }
        let (minimizer, raw_min) = minimize_cost(inner.as_ref(), tol)?;
        let shift = if raw_min < 0.0 { -raw_min } else { 0.0 };
        Ok(Self {
            inner,
            minimizer,
            min_value: raw_min + shift,
            shift,
        })
    }

    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        self.inner.value(x) + self.shift
    }

    pub fn grad(&self, x: &DVector<f64>) -> DVector<f64> {
        self.inner.gradient(x)
    }

    pub fn modulus(&self) -> f64 {
        self.inner.modulus()
    }

    pub fn minimizer(&self) -> &DVector<f64> {
        &self.minimizer
    }

    pub fn min_value(&self) -> f64 {
        self.min_value
    }

    /// Constant added to the underlying family to keep the cost nonnegative.
    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn family(&self) -> &dyn SmoothConvex {
        self.inner.as_ref()
    }

    pub fn quadratic_form(&self) -> Option<(&DMatrix<f64>, &DVector<f64>)> {
        self.inner.quadratic_form()
    }

    /// `argmin_x ½‖x − y‖² + μ·f(x)`; closed form when the family has one,
    /// otherwise Newton (with a Hessian) or gradient descent started at
    /// `warm` (or `y`).
    pub fn prox(&self, y: &DVector<f64>, mu: f64, warm: Option<&DVector<f64>>) -> Result<DVector<f64>> {
        if mu == 0.0 {
            return Ok(y.clone());
        }
        if let Some(x) = self.inner.prox(y, mu) {
            return Ok(x);
        }
        let start = warm.cloned().unwrap_or_else(|| y.clone());
        let f = self.inner.as_ref();
        let objective = |x: &DVector<f64>| linalg::half_sq_dist(x, y) + mu * f.value(x);
        let gradient = |x: &DVector<f64>| (x - y) + f.gradient(x) * mu;
        if f.hessian(&start).is_some() {
            let hessian = |x: &DVector<f64>| {
                let h = f.hessian(x).expect("hessian availability is stable");
                DMatrix::identity(x.len(), x.len()) + h * mu
            };
            newton(objective, gradient, hessian, start, "prox newton")
        } else {
            let lip = f.lipschitz().map(|l| 1.0 + mu * l);
            let tol = 1e-11 * (1.0 + y.norm());
            gradient_descent(gradient, lip, start, tol, "prox descent")
        }
    }
}

/// Builds `½(x − v)ᵀP(x − v) + c0`. The modulus is the smallest eigenvalue of
/// `P`.
pub fn make_quadratic(p: DMatrix<f64>, v: DVector<f64>, c0: f64) -> Result<CostFunction> {
    let q = QuadraticCost::new(p, v, c0)?;
    let minimizer = q.center.clone();
    Ok(CostFunction {
        inner: Arc::new(q),
        minimizer,
        min_value: c0,
        shift: 0.0,
    })
}

/// Minimizes `f`, returning `(v, f(v))` with `‖∇f(v)‖ ≤ tol`.
///
/// Uses the family's closed-form minimizer when it has one, otherwise
/// gradient descent from the origin with step `1/L`, where `L` is the
/// family's Lipschitz bound or is found by backtracking.
pub fn minimize_cost(f: &dyn SmoothConvex, tol: f64) -> Result<(DVector<f64>, f64)> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter {
            name: "tol",
            reason: "must be positive",
        });
    }
    if let Some(v) = f.closed_form_minimizer() {
        let value = f.value(&v);
        return Ok((v, value));
    }
    let start = DVector::zeros(f.dim());
    let v = gradient_descent(
        |x| f.gradient(x),
        f.lipschitz(),
        start,
        tol,
        "minimize_cost",
    )?;
    let value = f.value(&v);
    Ok((v, value))
}

fn gradient_descent(
    gradient: impl Fn(&DVector<f64>) -> DVector<f64>,
    lipschitz: Option<f64>,
    mut x: DVector<f64>,
    tol: f64,
    solver: &'static str,
) -> Result<DVector<f64>> {
    // Steps are accepted on a local Lipschitz test of the gradient rather
    // than on function decrease, which stops resolving near the optimum.
    let mut lip = lipschitz.unwrap_or(1.0);
    let mut g = gradient(&x);
    let mut residual = g.norm();
    for _ in 0..MAX_DESCENT_ITERS {
        if residual <= tol {
            return Ok(x);
        }
        loop {
            let candidate = &x - &g * (1.0 / lip);
            let gc = gradient(&candidate);
            let at_bound = lipschitz.is_some_and(|l| lip >= l);
            // ‖∇f(c) − ∇f(x)‖ ≤ lip·‖c − x‖ with ‖c − x‖ = ‖g‖/lip.
            if (&gc - &g).norm() <= residual || at_bound || lip > 1e30 {
                x = candidate;
                g = gc;
                residual = g.norm();
                break;
            }
            lip *= 2.0;
        }
        if lipschitz.is_none() {
            lip *= 0.8;
        }
    }
    Err(Error::NonConvergence {
        solver,
        iterations: MAX_DESCENT_ITERS,
        residual,
    })
}

fn newton(
    value: impl Fn(&DVector<f64>) -> f64,
    gradient: impl Fn(&DVector<f64>) -> DVector<f64>,
    hessian: impl Fn(&DVector<f64>) -> DMatrix<f64>,
    mut x: DVector<f64>,
    solver: &'static str,
) -> Result<DVector<f64>> {
    let mut fx = value(&x);
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_NEWTON_ITERS {
        let g = gradient(&x);
        residual = g.norm();
        if residual == 0.0 {
            return Ok(x);
        }
        let chol = hessian(&x)
            .cholesky()
            .ok_or(Error::Internal("prox Hessian is not positive definite"))?;
        let step = -chol.solve(&g);
        let decrement = -g.dot(&step);
        if decrement <= 1e-28 * fx.abs().max(1.0) || step.norm() <= 1e-15 * (1.0 + x.norm()) {
            return Ok(&x + step);
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let candidate = &x + &step * t;
            let fc = value(&candidate);
            if fc <= fx - 1e-4 * t * decrement {
                x = candidate;
                fx = fc;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // No representable decrease left; x is as good as it gets.
            return Ok(x);
        }
    }
    Err(Error::NonConvergence {
        solver,
        iterations: MAX_NEWTON_ITERS,
        residual,
    })
}

/// Outcome of [`strong_convexity_probe`].
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeReport {
    pub pairs: usize,
    /// Smallest observed `f(y) − f(x) − ∇f(x)ᵀ(y − x) − (m/2)‖y − x‖²`.
    pub worst_slack: f64,
    pub passed: bool,
}

/// Slack below which the probe reports a violation.
pub const PROBE_SLACK_TOL: f64 = -1e-9;

/// Samples random pairs around the minimizer and reports the worst slack of
/// the strong-convexity inequality at the cost's claimed modulus.
pub fn strong_convexity_probe(f: &CostFunction, n_pairs: usize, seed: u64) -> ProbeReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = f.dim();
    let m = f.modulus();
    let v = f.minimizer();
    let radius = 1.0 + v.norm();
    let sample = |rng: &mut ChaCha8Rng| {
        DVector::from_fn(d, |i, _| v[i] + radius * rng.random_range(-1.0..1.0))
    };
    let mut worst = f64::INFINITY;
    for _ in 0..n_pairs.max(1) {
        let x = sample(&mut rng);
        let y = sample(&mut rng);
        let diff = &y - &x;
        let slack = f.eval(&y) - f.eval(&x) - f.grad(&x).dot(&diff) - 0.5 * m * diff.norm_squared();
        worst = worst.min(slack);
    }
    ProbeReport {
        pairs: n_pairs.max(1),
        worst_slack: worst,
        passed: worst >= PROBE_SLACK_TOL,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_relative_eq;

    fn diag(values: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(values))
    }

    /// `½xᵀAx + bᵀx` with no closed-form hooks, forcing the descent path.
    #[derive(Debug)]
    struct LinearTermQuadratic {
        a: DMatrix<f64>,
        b: DVector<f64>,
    }

    impl SmoothConvex for LinearTermQuadratic {
        fn dim(&self) -> usize {
            self.b.len()
        }
        fn value(&self, x: &DVector<f64>) -> f64 {
            0.5 * x.dot(&(&self.a * x)) + self.b.dot(x)
        }
        fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
            &self.a * x + &self.b
        }
        fn modulus(&self) -> f64 {
            self.a.symmetric_eigenvalues().min()
        }
    }

    #[derive(Debug)]
    struct ClaimsModulus<F>(F, f64);

    impl<F: SmoothConvex> SmoothConvex for ClaimsModulus<F> {
        fn dim(&self) -> usize {
            self.0.dim()
        }
        fn value(&self, x: &DVector<f64>) -> f64 {
            self.0.value(x)
        }
        fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
            self.0.gradient(x)
        }
        fn modulus(&self) -> f64 {
            self.1
        }
        fn closed_form_minimizer(&self) -> Option<DVector<f64>> {
            self.0.closed_form_minimizer()
        }
    }

    #[test]
    fn identity_quadratic() {
        let f = make_quadratic(DMatrix::identity(2, 2), DVector::zeros(2), 0.0).unwrap();
        assert_eq!(f.modulus(), 1.0);
        let x = DVector::from_vec(vec![3.0, 4.0]);
        assert_eq!(f.eval(&x), 12.5);
        assert_eq!(f.min_value(), 0.0);
    }

    #[test]
    fn anisotropic_quadratic() {
        let f = make_quadratic(diag(&[2.0, 8.0]), DVector::from_vec(vec![1.0, 0.0]), 0.0).unwrap();
        assert_relative_eq!(f.modulus(), 2.0, epsilon = 1e-12);
        assert_relative_eq!(f.eval(&DVector::from_vec(vec![1.0, 1.0])), 4.0, epsilon = 1e-12);
        assert_eq!(f.minimizer(), &DVector::from_vec(vec![1.0, 0.0]));
    }

    #[test]
    fn rejects_indefinite_matrix() {
        let err = make_quadratic(diag(&[1.0, -1.0]), DVector::zeros(2), 0.0).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { .. }));
    }

    #[test]
    fn rejects_asymmetric_and_negative_offset() {
        let asym = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 2.0]);
        assert!(matches!(
            make_quadratic(asym, DVector::zeros(2), 0.0),
            Err(Error::NotSymmetric { .. })
        ));
        assert!(make_quadratic(DMatrix::identity(1, 1), DVector::zeros(1), -1.0).is_err());
    }

    #[test]
    fn minimize_scalar_quadratic() {
        let q = QuadraticCost::new(DMatrix::identity(1, 1), DVector::from_vec(vec![3.0]), 0.0).unwrap();
        let (v, fv) = minimize_cost(&q, 1e-8).unwrap();
        assert_eq!(v[0], 3.0);
        assert_eq!(fv, 0.0);
    }

    #[test]
    fn descent_path_matches_linear_solve_and_shifts_to_nonnegative() {
        let a = diag(&[1.0, 4.0]);
        let b = DVector::from_vec(vec![1.0, 0.0]);
        let raw = LinearTermQuadratic { a: a.clone(), b: b.clone() };
        let (v, fv) = minimize_cost(&raw, 1e-12).unwrap();
        let exact = a.clone().lu().solve(&(-&b)).unwrap();
        assert_relative_eq!(v, exact, epsilon = 1e-8);
        assert_relative_eq!(v, DVector::from_vec(vec![-1.0, 0.0]), epsilon = 1e-8);
        assert_relative_eq!(fv, -0.5, epsilon = 1e-12);

        let f = CostFunction::new(LinearTermQuadratic { a, b }, 1e-12).unwrap();
        assert_relative_eq!(f.shift(), 0.5, epsilon = 1e-12);
        assert!(f.min_value().abs() < 1e-12);
        assert!(f.eval(&DVector::from_vec(vec![5.0, -2.0])) >= 0.0);
    }

    #[test]
    fn generic_prox_matches_closed_form() {
        let q = QuadraticCost::new(diag(&[1.0, 4.0]), DVector::from_vec(vec![0.5, -1.0]), 0.0).unwrap();
        let y = DVector::from_vec(vec![2.0, 2.0]);
        let closed = q.prox(&y, 0.7).unwrap();
        // Same function behind a family with no closed-form prox.
        let raw = LinearTermQuadratic {
            a: diag(&[1.0, 4.0]),
            b: -(diag(&[1.0, 4.0]) * DVector::from_vec(vec![0.5, -1.0])),
        };
        let f = CostFunction::new(raw, 1e-12).unwrap();
        let generic = f.prox(&y, 0.7, None).unwrap();
        assert_relative_eq!(closed, generic, epsilon = 1e-9);
    }

    #[test]
    fn probe_passes_on_isotropic_and_true_modulus() {
        let f = make_quadratic(DMatrix::identity(3, 3), DVector::zeros(3), 0.0).unwrap();
        let r = strong_convexity_probe(&f, 200, 7);
        assert!(r.passed);
        assert!(r.worst_slack >= -1e-12);

        let g = make_quadratic(diag(&[2.0, 8.0]), DVector::zeros(2), 0.0).unwrap();
        assert!(strong_convexity_probe(&g, 200, 7).passed);
    }

    #[test]
    fn probe_flags_overclaimed_modulus() {
        let q = QuadraticCost::new(diag(&[2.0, 8.0]), DVector::zeros(2), 0.0).unwrap();
        let f = CostFunction::new(ClaimsModulus(q, 3.0), 1e-10).unwrap();
        let r = strong_convexity_probe(&f, 200, 11);
        assert!(!r.passed);
        assert!(r.worst_slack < 0.0);
    }

    #[test]
    fn probe_is_deterministic() {
        let f = make_quadratic(diag(&[2.0, 8.0]), DVector::zeros(2), 0.0).unwrap();
        assert_eq!(strong_convexity_probe(&f, 50, 3), strong_convexity_probe(&f, 50, 3));
    }
}
