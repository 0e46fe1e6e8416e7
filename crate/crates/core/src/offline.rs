//! The offline optimum of `Σ f_t(x_t) + ½‖x_t − x_{t−1}‖²`, the comparator for
//! competitive ratio and dynamic regret.
//!
//! The joint objective is strictly convex and its stationarity conditions are
//!
//! ```text
//! ∇f_t(x_t) + (x_t − x_{t−1}) + (x_t − x_{t+1}) = 0    t < T
//! ∇f_T(x_T) + (x_T − x_{T−1})                   = 0
//! ```
//!
//! All-quadratic instances turn these into a block-tridiagonal SPD system,
//! solved exactly by block elimination. Anything else goes through
//! accelerated gradient descent on the stacked trajectory, stopped on the
//! first-order residual. A grid dynamic program for one-dimensional
//! instances serves as an independent oracle.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::instance::{SocoInstance, Trajectory};
use crate::linalg;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum OfflineMethod {
    /// Block-tridiagonal solve when every cost is quadratic, iterative
    /// otherwise.
    #[default]
    Auto,
    BlockTridiagonal,
    Iterative,
    GridDynamicProgram,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OfflineOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub method: OfflineMethod,
}

impl Default for OfflineOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iters: 500_000,
            method: OfflineMethod::Auto,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OfflineSolution {
    pub trajectory: Trajectory,
    /// `max_t ‖stacked gradient at round t‖`.
    pub first_order_residual: f64,
    pub iterations: usize,
    pub method: OfflineMethod,
    /// Set by the grid oracle when some minimizer lies outside the grid.
    pub grid_excludes_minimizer: bool,
}

pub fn solve_offline(instance: &SocoInstance, tol: f64) -> Result<OfflineSolution> {
    solve_offline_with(
        instance,
        &OfflineOptions {
            tol,
            ..OfflineOptions::default()
        },
    )
}

pub fn solve_offline_with(instance: &SocoInstance, options: &OfflineOptions) -> Result<OfflineSolution> {
    if !(options.tol > 0.0) {
        return Err(Error::InvalidParameter {
            name: "tol",
            reason: "must be positive",
        });
    }
    let all_quadratic = instance.costs().iter().all(|f| f.quadratic_form().is_some());
    match options.method {
        OfflineMethod::Auto if all_quadratic => solve_block_tridiagonal(instance, options.tol),
        OfflineMethod::BlockTridiagonal => {
            if !all_quadratic {
                return Err(Error::InvalidParameter {
                    name: "method",
                    reason: "block-tridiagonal solve needs every cost to be quadratic",
                });
            }
            solve_block_tridiagonal(instance, options.tol)
        }
        OfflineMethod::Auto | OfflineMethod::Iterative => solve_iterative(instance, options),
        OfflineMethod::GridDynamicProgram => Err(Error::InvalidParameter {
            name: "method",
            reason: "use brute_force_offline for the grid oracle",
        }),
    }
}

fn stacked_gradient(instance: &SocoInstance, points: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let t_max = points.len();
    (0..t_max)
        .map(|t| {
            let prev = if t == 0 { instance.x0() } else { &points[t - 1] };
            let mut g = instance.costs()[t].grad(&points[t]) + (&points[t] - prev);
            if t + 1 < t_max {
                g += &points[t] - &points[t + 1];
            }
            g
        })
        .collect()
}

/// Largest per-round norm of the stacked gradient of the offline objective.
pub fn optimality_residual(trajectory: &Trajectory, instance: &SocoInstance) -> Result<f64> {
    if trajectory.len() != instance.horizon() {
        return Err(Error::LengthMismatch {
            expected: instance.horizon(),
            found: trajectory.len(),
        });
    }
    Ok(points_residual(instance, &trajectory.points))
}

fn points_residual(instance: &SocoInstance, points: &[DVector<f64>]) -> f64 {
    stacked_gradient(instance, points)
        .iter()
        .map(DVector::norm)
        .fold(0.0, f64::max)
}

fn solve_block_tridiagonal(instance: &SocoInstance, tol: f64) -> Result<OfflineSolution> {
    let d = instance.dim();
    let horizon = instance.horizon();
    let identity = DMatrix::<f64>::identity(d, d);

    // Forward elimination. Block row t: D_t x_t − x_{t−1} − x_{t+1} = r_t with
    // D_t = P_t + 2I (t < T), P_T + I, and r_t = P_t v_t (+ x0 for t = 1).
    let mut factors = Vec::with_capacity(horizon);
    let mut rhs = Vec::with_capacity(horizon);
    for (t, f) in instance.costs().iter().enumerate() {
        let (p, v) = f.quadratic_form().ok_or(Error::Internal("cost lost its quadratic form"))?;
        let couplings = if t + 1 < horizon { 2.0 } else { 1.0 };
        let mut diag = p + &identity * couplings;
        let mut r = p * v;
        if t == 0 {
            r += instance.x0();
        } else {
            let prev: &nalgebra::Cholesky<f64, nalgebra::Dyn> = &factors[t - 1];
            diag -= prev.inverse();
            r += prev.solve(&rhs[t - 1]);
        }
        let chol = diag
            .cholesky()
            .ok_or(Error::Internal("offline block system is not positive definite"))?;
        factors.push(chol);
        rhs.push(r);
    }
    let mut points = vec![DVector::zeros(d); horizon];
    for t in (0..horizon).rev() {
        let mut r = rhs[t].clone();
        if t + 1 < horizon {
            r += &points[t + 1];
        }
        points[t] = factors[t].solve(&r);
    }
    let residual = points_residual(instance, &points);
    if residual > tol.max(1e-9 * scale(instance)) {
        return Err(Error::NonConvergence {
            solver: "block-tridiagonal offline solve",
            iterations: 1,
            residual,
        });
    }
    Ok(OfflineSolution {
        trajectory: Trajectory::evaluate(instance, points)?,
        first_order_residual: residual,
        iterations: 1,
        method: OfflineMethod::BlockTridiagonal,
        grid_excludes_minimizer: false,
    })
}

/// Magnitude of the instance's data, for judging linear-algebra round-off.
fn scale(instance: &SocoInstance) -> f64 {
    instance
        .costs()
        .iter()
        .map(|f| {
            let lip = f.family().lipschitz().unwrap_or(1.0);
            lip * (f.minimizer().norm() + instance.x0().norm() + 1.0)
        })
        .fold(1.0, f64::max)
        * f64::EPSILON
        / 1e-9
}

fn solve_iterative(instance: &SocoInstance, options: &OfflineOptions) -> Result<OfflineSolution> {
    let objective = |pts: &[DVector<f64>]| -> f64 {
        let mut prev = instance.x0();
        let mut total = 0.0;
        for (x, f) in pts.iter().zip(instance.costs()) {
            total += f.eval(x) + linalg::half_sq_dist(x, prev);
            prev = x;
        }
        total
    };
    let axpy = |a: &[DVector<f64>], s: f64, b: &[DVector<f64>]| -> Vec<DVector<f64>> {
        a.iter().zip(b).map(|(x, y)| x + y * s).collect()
    };
    let sq_norm = |a: &[DVector<f64>]| a.iter().map(DVector::norm_squared).sum::<f64>();

    let m = instance.modulus();
    // Switching adds at most 4 to the curvature (the second-difference
    // operator has spectral radius below 4).
    let known_lip = instance
        .costs()
        .iter()
        .map(|f| f.family().lipschitz())
        .try_fold(0.0f64, |acc, l| l.map(|l| acc.max(l)))
        .map(|l| l + 4.0);
    let mut lip = known_lip.unwrap_or(m + 4.0);

    // Warm start at the minimizers.
    let mut x: Vec<DVector<f64>> = instance.minimizers();
    let mut y = x.clone();
    let mut fx = objective(&x);
    let mut residual = points_residual(instance, &x);
    let mut restarted = false;
    let mut iteration = 0;
    while iteration < options.max_iters {
        if residual <= options.tol {
            return Ok(OfflineSolution {
                trajectory: Trajectory::evaluate(instance, x)?,
                first_order_residual: residual,
                iterations: iteration,
                method: OfflineMethod::Iterative,
                grid_excludes_minimizer: false,
            });
        }
        let g = stacked_gradient(instance, &y);
        let fy = objective(&y);
        let gn2 = sq_norm(&g);
        let (x_next, f_next) = loop {
            let c = axpy(&y, -1.0 / lip, &g);
            let fc = objective(&c);
            let at_bound = known_lip.is_some_and(|l| lip >= l);
            let slack = 4.0 * f64::EPSILON * fy.abs();
            if fc <= fy - 0.5 * gn2 / lip + slack || at_bound || lip > 1e30 {
                break (c, fc);
            }
            lip *= 2.0;
        };
        if f_next > fx + 4.0 * f64::EPSILON * fx.abs() && !restarted {
            // Adaptive restart: drop the momentum when the objective rises.
            y = x.clone();
            restarted = true;
            continue;
        }
        restarted = false;
        iteration += 1;
        let q = libm::sqrt(m / lip).min(1.0);
        let momentum = (1.0 - q) / (1.0 + q);
        let dx: Vec<DVector<f64>> = x_next.iter().zip(&x).map(|(a, b)| a - b).collect();
        y = axpy(&x_next, momentum, &dx);
        x = x_next;
        fx = f_next;
        residual = points_residual(instance, &x);
        if known_lip.is_none() {
            lip = (lip * 0.9).max(m + 4.0);
        }
    }
    Err(Error::NonConvergence {
        solver: "iterative offline solve",
        iterations: options.max_iters,
        residual,
    })
}

/// Exact dynamic program over a uniform grid of `grid_points` values in
/// `[grid_lo, grid_hi]` for a one-dimensional instance.
pub fn brute_force_offline(
    instance: &SocoInstance,
    grid_lo: f64,
    grid_hi: f64,
    grid_points: usize,
) -> Result<OfflineSolution> {
    if instance.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: instance.dim(),
        });
    }
    if !(grid_hi > grid_lo) || grid_points < 2 {
        return Err(Error::InvalidParameter {
            name: "grid",
            reason: "needs grid_hi > grid_lo and at least two points",
        });
    }
    let n = grid_points;
    let step = (grid_hi - grid_lo) / (n - 1) as f64;
    let grid: Vec<f64> = (0..n).map(|i| grid_lo + step * i as f64).collect();
    let costs = instance.costs();
    let horizon = costs.len();
    let point = |g: f64| DVector::from_element(1, g);
    let hitting: Vec<Vec<f64>> = costs
        .iter()
        .map(|f| grid.iter().map(|&g| f.eval(&point(g))).collect())
        .collect();

    // to_go[t][i]: best cost of rounds t..T given x_t = grid[i].
    let mut to_go = vec![vec![0.0; n]; horizon];
    let mut next_choice = vec![vec![0usize; n]; horizon];
    to_go[horizon - 1].clone_from(&hitting[horizon - 1]);
    for t in (0..horizon - 1).rev() {
        for i in 0..n {
            let (best_j, best) = (0..n)
                .map(|j| {
                    let gap = grid[j] - grid[i];
                    (j, 0.5 * gap * gap + to_go[t + 1][j])
                })
                .fold((0, f64::INFINITY), |acc, c| if c.1 < acc.1 { c } else { acc });
            to_go[t][i] = hitting[t][i] + best;
            next_choice[t][i] = best_j;
        }
    }
    let x0 = instance.x0()[0];
    let mut idx = (0..n)
        .map(|i| {
            let gap = grid[i] - x0;
            (i, 0.5 * gap * gap + to_go[0][i])
        })
        .fold((0, f64::INFINITY), |acc, c| if c.1 < acc.1 { c } else { acc })
        .0;
    let mut points = Vec::with_capacity(horizon);
    points.push(point(grid[idx]));
    for choice in next_choice.iter().take(horizon - 1) {
        idx = choice[idx];
        points.push(point(grid[idx]));
    }
    let excluded = costs.iter().any(|f| {
        let v = f.minimizer()[0];
        v < grid_lo || v > grid_hi
    });
    let trajectory = Trajectory::evaluate(instance, points)?;
    let residual = optimality_residual(&trajectory, instance)?;
    Ok(OfflineSolution {
        trajectory,
        first_order_residual: residual,
        iterations: horizon * n * n,
        method: OfflineMethod::GridDynamicProgram,
        grid_excludes_minimizer: excluded,
    })
}

/// Both sides of `Σ‖x*_t − v_t‖ ≤ (2/m)·Σ‖v_t − v_{t−1}‖` (with `v_0 = x_0`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriftReport {
    pub lhs: f64,
    pub rhs: f64,
    /// Slack granted for an inexact optimum: `T·residual/m`.
    pub tolerance: f64,
    pub passed: bool,
}

pub fn offline_drift_check(
    solution: &OfflineSolution,
    minimizers: &[DVector<f64>],
    m: f64,
) -> Result<DriftReport> {
    let traj = &solution.trajectory;
    if minimizers.len() != traj.len() {
        return Err(Error::LengthMismatch {
            expected: traj.len(),
            found: minimizers.len(),
        });
    }
    if !(m > 0.0) {
        return Err(Error::InvalidParameter {
            name: "m",
            reason: "must be positive",
        });
    }
    let lhs: f64 = traj
        .points
        .iter()
        .zip(minimizers)
        .map(|(x, v)| linalg::dist(x, v))
        .sum();
    let mut prev = &traj.x0;
    let mut path = 0.0;
    for v in minimizers {
        path += linalg::dist(v, prev);
        prev = v;
    }
    let rhs = 2.0 / m * path;
    let tolerance = traj.len() as f64 * solution.first_order_residual / m + 1e-12;
    Ok(DriftReport {
        lhs,
        rhs,
        tolerance,
        passed: lhs <= rhs + tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::make_quadratic;
    use crate::cost::CostFunction;
    use approx::assert_relative_eq;

    fn scalar(p: f64, center: f64) -> CostFunction {
        make_quadratic(DMatrix::from_element(1, 1, p), DVector::from_element(1, center), 0.0).unwrap()
    }

    fn pt(x: f64) -> DVector<f64> {
        DVector::from_element(1, x)
    }

    #[test]
    fn single_round_stationarity() {
        // (x − 1) + x = 0.
        let inst = SocoInstance::new(pt(0.0), vec![scalar(1.0, 1.0)]).unwrap();
        let sol = solve_offline(&inst, 1e-12).unwrap();
        assert_relative_eq!(sol.trajectory.points[0][0], 0.5, epsilon = 1e-14);
        assert_relative_eq!(sol.trajectory.total_cost, 0.25, epsilon = 1e-14);
        assert!(optimality_residual(&sol.trajectory, &inst).unwrap() <= 1e-15);
    }

    #[test]
    fn zero_cost_instance() {
        let inst = SocoInstance::new(pt(2.0), vec![scalar(3.0, 2.0); 5]).unwrap();
        let sol = solve_offline(&inst, 1e-12).unwrap();
        assert!(sol.trajectory.points.iter().all(|p| (p[0] - 2.0).abs() < 1e-14));
        assert!(sol.trajectory.total_cost < 1e-24);
    }

    #[test]
    fn perturbed_optimum_has_positive_residual() {
        let inst = SocoInstance::new(pt(0.0), vec![scalar(1.0, 1.0), scalar(2.0, -1.0)]).unwrap();
        let sol = solve_offline(&inst, 1e-12).unwrap();
        let mut pts = sol.trajectory.points.clone();
        pts[1][0] += 1e-3;
        let perturbed = inst.evaluate(pts).unwrap();
        assert!(optimality_residual(&perturbed, &inst).unwrap() > 1e-4);
        assert!(optimality_residual(&perturbed, &SocoInstance::new(pt(0.0), vec![scalar(1.0, 1.0)]).unwrap()).is_err());
    }

    #[test]
    fn iterative_agrees_with_block_solve() {
        let costs = vec![scalar(0.5, 1.0), scalar(4.0, -2.0), scalar(1.5, 0.3), scalar(0.7, 3.0)];
        let inst = SocoInstance::new(pt(-1.0), costs).unwrap();
        let exact = solve_offline(&inst, 1e-12).unwrap();
        let iterative = solve_offline_with(
            &inst,
            &OfflineOptions {
                tol: 1e-11,
                method: OfflineMethod::Iterative,
                ..OfflineOptions::default()
            },
        )
        .unwrap();
        assert_eq!(exact.method, OfflineMethod::BlockTridiagonal);
        for (a, b) in exact.trajectory.points.iter().zip(&iterative.trajectory.points) {
            assert!((a - b).norm() <= 1e-8);
        }
    }

    #[test]
    fn grid_oracle_matches_single_round() {
        let inst = SocoInstance::new(pt(0.0), vec![scalar(1.0, 1.0)]).unwrap();
        let sol = brute_force_offline(&inst, -2.0, 2.0, 4001).unwrap();
        assert!((sol.trajectory.points[0][0] - 0.5).abs() <= 1e-3);
        assert!((sol.trajectory.total_cost - 0.25).abs() <= 1e-5);
        assert!(!sol.grid_excludes_minimizer);
    }

    #[test]
    fn grid_oracle_brackets_the_exact_cost() {
        let inst = SocoInstance::new(pt(0.2), vec![scalar(2.0, 1.3), scalar(0.5, -0.4)]).unwrap();
        let exact = solve_offline(&inst, 1e-12).unwrap().trajectory.total_cost;
        let grid = brute_force_offline(&inst, -3.0, 3.0, 4001).unwrap();
        let step = 6.0 / 4000.0;
        assert!(grid.trajectory.total_cost >= exact - 1e-12);
        assert!(grid.trajectory.total_cost <= exact + 10.0 * step * step);
    }

    #[test]
    fn grid_oracle_zero_cost_and_warning() {
        let inst = SocoInstance::new(pt(0.0), vec![scalar(1.0, 0.0); 3]).unwrap();
        let sol = brute_force_offline(&inst, -1.0, 1.0, 201).unwrap();
        assert_eq!(sol.trajectory.total_cost, 0.0);
        let far = SocoInstance::new(pt(0.0), vec![scalar(1.0, 5.0)]).unwrap();
        assert!(brute_force_offline(&far, -1.0, 1.0, 201).unwrap().grid_excludes_minimizer);
    }

    #[test]
    fn drift_stationary_is_zero() {
        let inst = SocoInstance::new(pt(1.0), vec![scalar(2.0, 1.0); 4]).unwrap();
        let sol = solve_offline(&inst, 1e-12).unwrap();
        let r = offline_drift_check(&sol, &inst.minimizers(), 2.0).unwrap();
        assert!(r.lhs < 1e-14);
        assert_eq!(r.rhs, 0.0);
        assert!(r.passed);
    }

    #[test]
    fn drift_shrinks_with_stiffness() {
        let centers = [0.3, 0.1, 0.5, 0.9, 0.6];
        let lhs_for = |m: f64| {
            let costs = centers.iter().map(|&c| scalar(m, c)).collect();
            let inst = SocoInstance::new(pt(0.0), costs).unwrap();
            let sol = solve_offline(&inst, 1e-12).unwrap();
            let r = offline_drift_check(&sol, &inst.minimizers(), m).unwrap();
            assert!(r.passed);
            (r.lhs, r.rhs * m)
        };
        let (soft, path_soft) = lhs_for(1.0);
        let (stiff, path_stiff) = lhs_for(100.0);
        assert!(stiff < soft / 10.0);
        assert_relative_eq!(path_soft, path_stiff, epsilon = 1e-15);
    }
}
