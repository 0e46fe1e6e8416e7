//! Euclidean projection onto sublevel sets `{x : f(x) ≤ l}` and the squared
//! distance potential used by the competitive analysis.
//!
//! The projection bisects the multiplier `μ` of the penalized problem
//! `x(μ) = argmin ½‖x − y‖² + μ·f(x)`. Along that path `f(x(μ))` is
//! nonincreasing in `μ`, and every `x(μ)` is the projection of `y` onto the
//! sublevel set at its own level, so stopping anywhere on the path yields an
//! exact projection onto a level within `tol` of the requested one.

use nalgebra::DVector;

use crate::cost::CostFunction;
use crate::error::{Error, Result};
use crate::linalg;

const MAX_DOUBLINGS: usize = 1100;
const MAX_BISECTIONS: usize = 400;

/// Default absolute tolerance on `|f(x) − l|` for a requested level `l`.
pub fn default_projection_tol(level: f64) -> f64 {
    1e-9 * level.abs().max(1.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SublevelProjection {
    pub point: DVector<f64>,
    pub level: f64,
    /// Multiplier `μ` of the active constraint; `0` when `y` already lies in
    /// the set and `+∞` when the set collapses to the minimizer.
    pub multiplier: f64,
    /// `|f(point) − level|` when the constraint is active, the constraint
    /// violation `max(0, f(point) − level)` otherwise.
    pub residual: f64,
    pub iterations: usize,
}

/// Projects `y` onto `{x : f(x) ≤ level}`.
pub fn project_sublevel(
    f: &CostFunction,
    level: f64,
    y: &DVector<f64>,
    tol: f64,
) -> Result<SublevelProjection> {
    linalg::check_dim(y, f.dim())?;
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter {
            name: "tol",
            reason: "must be positive",
        });
    }
    if !level.is_finite() {
        return Err(Error::InvalidParameter {
            name: "level",
            reason: "must be finite",
        });
    }
    let min_value = f.min_value();
    if level < min_value {
        return Err(Error::EmptySublevelSet { level, min_value });
    }

    let fy = f.eval(y);
    if fy <= level + tol {
        return Ok(SublevelProjection {
            point: y.clone(),
            level,
            multiplier: 0.0,
            residual: (fy - level).max(0.0),
            iterations: 0,
        });
    }
    if level - min_value <= tol {
        let v = f.minimizer().clone();
        return Ok(SublevelProjection {
            residual: (min_value - level).abs(),
            point: v,
            level,
            multiplier: f64::INFINITY,
            iterations: 0,
        });
    }

    let mut iterations = 0;
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    let mut x_hi = f.prox(y, hi, None)?;
    let mut f_hi = f.eval(&x_hi);
    while f_hi > level + tol {
        iterations += 1;
        if iterations > MAX_DOUBLINGS {
            return Err(Error::NonConvergence {
                solver: "project_sublevel bracket",
                iterations,
                residual: f_hi - level,
            });
        }
        lo = hi;
        hi *= 2.0;
        x_hi = f.prox(y, hi, Some(&x_hi))?;
        f_hi = f.eval(&x_hi);
    }
    if (f_hi - level).abs() <= tol {
        return Ok(SublevelProjection {
            point: x_hi,
            level,
            multiplier: hi,
            residual: (f_hi - level).abs(),
            iterations,
        });
    }

    let mut warm = x_hi.clone();
    for _ in 0..MAX_BISECTIONS {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let x = f.prox(y, mid, Some(&warm))?;
        let fx = f.eval(&x);
        if (fx - level).abs() <= tol {
            return Ok(SublevelProjection {
                point: x,
                level,
                multiplier: mid,
                residual: (fx - level).abs(),
                iterations,
            });
        }
        if fx > level {
            lo = mid;
        } else {
            hi = mid;
            x_hi = x.clone();
            f_hi = fx;
        }
        warm = x;
    }
    // The multiplier bracket collapsed to adjacent floats: x_hi is the
    // feasible endpoint and the closest representable answer.
    Ok(SublevelProjection {
        residual: (f_hi - level).abs(),
        point: x_hi,
        level,
        multiplier: hi,
        iterations,
    })
}

/// Weight `η` of the potential `φ(x, x*) = η‖x − x*‖²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PotentialChecker {
    eta: f64,
}

impl PotentialChecker {
    pub fn new(eta: f64) -> Result<Self> {
        if !(eta >= 1.0) || !eta.is_finite() {
            return Err(Error::InvalidParameter {
                name: "eta",
                reason: "must be finite and at least 1",
            });
        }
        Ok(Self { eta })
    }

    /// `η = 1 + 1/β`, the weight the competitive bound is built on.
    pub fn for_beta(beta: f64) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(Error::InvalidParameter {
                name: "beta",
                reason: "must be positive",
            });
        }
        Self::new(1.0 + 1.0 / beta)
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }
}

/// `η‖a − b‖²`.
pub fn potential(a: &DVector<f64>, b: &DVector<f64>, checker: &PotentialChecker) -> Result<f64> {
    linalg::check_dim(b, a.len())?;
    Ok(checker.eta * (a - b).norm_squared())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::make_quadratic;
    use alloc::vec::Vec;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn half_norm_sq(d: usize) -> CostFunction {
        make_quadratic(DMatrix::identity(d, d), DVector::zeros(d), 0.0).unwrap()
    }

    #[test]
    fn radial_projection_onto_unit_ball() {
        let f = half_norm_sq(2);
        let p = project_sublevel(&f, 0.5, &v(&[2.0, 0.0]), 1e-12).unwrap();
        assert_relative_eq!(p.point, v(&[1.0, 0.0]), epsilon = 1e-9);
        assert!(p.multiplier > 0.0);
        assert!(p.residual <= 1e-12);
    }

    #[test]
    fn interior_point_is_returned_unchanged() {
        let f = half_norm_sq(2);
        let y = v(&[0.3, -0.2]);
        let p = project_sublevel(&f, 0.5, &y, 1e-12).unwrap();
        assert_eq!(p.point, y);
        assert_eq!(p.multiplier, 0.0);
    }

    #[test]
    fn empty_sublevel_set_is_an_error() {
        let f = make_quadratic(DMatrix::identity(1, 1), v(&[0.0]), 1.0).unwrap();
        let err = project_sublevel(&f, 0.5, &v(&[3.0]), 1e-9).unwrap_err();
        assert!(matches!(err, Error::EmptySublevelSet { .. }));
    }

    #[test]
    fn level_at_minimum_returns_minimizer() {
        let f = make_quadratic(DMatrix::identity(2, 2), v(&[1.0, 1.0]), 0.25).unwrap();
        let p = project_sublevel(&f, 0.25, &v(&[4.0, 0.0]), 1e-9).unwrap();
        assert_eq!(p.point, v(&[1.0, 1.0]));
    }

    /// Brute-force oracle: minimize distance over a dense parametrization of
    /// the ellipse boundary `½(x² + 4y²) = l`.
    fn ellipse_boundary_oracle(y: &DVector<f64>, level: f64, samples: usize) -> DVector<f64> {
        let a = (2.0 * level).sqrt();
        let b = (2.0 * level / 4.0).sqrt();
        let mut best = (f64::INFINITY, v(&[0.0, 0.0]));
        for k in 0..samples {
            let t = 2.0 * core::f64::consts::PI * (k as f64) / (samples as f64);
            let p = v(&[a * libm::cos(t), b * libm::sin(t)]);
            let d = (&p - y).norm();
            if d < best.0 {
                best = (d, p);
            }
        }
        best.1
    }

    #[test]
    fn anisotropic_projection_matches_grid_oracle() {
        let f = make_quadratic(DMatrix::from_diagonal(&v(&[1.0, 4.0])), DVector::zeros(2), 0.0).unwrap();
        let y = v(&[2.0, 2.0]);
        let p = project_sublevel(&f, 0.5, &y, 1e-12).unwrap();
        let oracle = ellipse_boundary_oracle(&y, 0.5, 200_000);
        assert!((&p.point - &oracle).norm() <= 1e-3);
        assert!((f.eval(&p.point) - 0.5).abs() <= 1e-12);
    }

    #[test]
    fn potential_examples() {
        let one = PotentialChecker::new(1.0).unwrap();
        let a = v(&[0.0, 0.0]);
        assert_eq!(potential(&a, &a, &one).unwrap(), 0.0);
        assert_eq!(potential(&a, &v(&[3.0, 4.0]), &one).unwrap(), 25.0);
        let beta3 = PotentialChecker::for_beta(3.0).unwrap();
        assert_relative_eq!(potential(&a, &v(&[1.0, 1.0]), &beta3).unwrap(), 8.0 / 3.0, epsilon = 1e-15);
        assert!(potential(&a, &v(&[1.0]), &one).is_err());
        assert!(PotentialChecker::new(0.5).is_err());
    }

    #[test]
    fn movement_nonincreasing_in_level() {
        let f = make_quadratic(
            DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0]),
            v(&[0.5, -0.5]),
            0.1,
        )
        .unwrap();
        let y = v(&[3.0, 2.0]);
        let fy = f.eval(&y);
        let levels: Vec<f64> = (0..=40).map(|k| 0.1 + (fy - 0.1) * (k as f64) / 41.0).collect();
        let moves: Vec<f64> = levels
            .iter()
            .map(|&l| {
                let p = project_sublevel(&f, l, &y, default_projection_tol(l)).unwrap();
                0.5 * (&p.point - &y).norm_squared()
            })
            .collect();
        for w in moves.windows(2) {
            assert!(w[0] >= w[1] - 1e-9);
        }
    }
}
