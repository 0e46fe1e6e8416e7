//! Performance metrics, closed-form guarantees and the potential inequalities
//! behind the competitive analysis.

use alloc::vec::Vec;

use nalgebra::DVector;

use crate::cost::CostFunction;
use crate::error::{Error, Result};
use crate::instance::{SocoInstance, Trajectory};
use crate::linalg;
use crate::obd::ObdRun;
use crate::offline::OfflineSolution;
use crate::projection::{potential, PotentialChecker};

/// Totals at or below this are treated as zero when forming ratios.
pub const ZERO_COST_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RatioFlag {
    Finite,
    /// Offline cost is zero but the online cost is not; the ratio is `+∞`.
    OptZero,
    /// Both costs are zero; the ratio is `1` by convention.
    BothZero,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompetitiveRatio {
    pub value: f64,
    pub flag: RatioFlag,
}

impl CompetitiveRatio {
    pub fn from_costs(alg: f64, opt: f64) -> Self {
        if opt > ZERO_COST_TOL {
            Self {
                value: alg / opt,
                flag: RatioFlag::Finite,
            }
        } else if alg > ZERO_COST_TOL {
            Self {
                value: f64::INFINITY,
                flag: RatioFlag::OptZero,
            }
        } else {
            Self {
                value: 1.0,
                flag: RatioFlag::BothZero,
            }
        }
    }
}

fn same_length(alg: &Trajectory, opt: &Trajectory) -> Result<()> {
    if alg.len() != opt.len() {
        return Err(Error::LengthMismatch {
            expected: opt.len(),
            found: alg.len(),
        });
    }
    Ok(())
}

pub fn competitive_ratio(alg: &Trajectory, opt: &Trajectory) -> Result<CompetitiveRatio> {
    same_length(alg, opt)?;
    Ok(CompetitiveRatio::from_costs(alg.total_cost, opt.total_cost))
}

pub fn dynamic_regret(alg: &Trajectory, opt: &Trajectory) -> Result<f64> {
    same_length(alg, opt)?;
    Ok(alg.total_cost - opt.total_cost)
}

fn require_regime(modulus: f64, beta: f64) -> Result<()> {
    if !(modulus > 0.0) || !(beta > 0.0) {
        return Err(Error::InvalidParameter {
            name: "modulus/beta",
            reason: "must be positive",
        });
    }
    let product = beta * modulus;
    if !(product > 4.0) {
        return Err(Error::OutOfRegime { product });
    }
    Ok(())
}

/// `max(1 + β + 12η/m, 2η) / (1 − 4η/(m(1 + β)))` with `η = 1 + 1/β`.
pub fn theoretical_cr_bound(modulus: f64, beta: f64) -> Result<f64> {
    require_regime(modulus, beta)?;
    let eta = 1.0 + 1.0 / beta;
    let numerator = (1.0 + beta + 12.0 * eta / modulus).max(2.0 * eta);
    let denominator = 1.0 - 4.0 * eta / (modulus * (1.0 + beta));
    if !(denominator > 0.0) {
        return Err(Error::OutOfRegime {
            product: beta * modulus,
        });
    }
    Ok(numerator / denominator)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Smoothness {
    pub epsilon: f64,
    /// Fewer than two points: no adjacent pair exists and `epsilon` is `0`.
    pub degenerate: bool,
}

/// Largest distance between adjacent points.
pub fn smoothness(points: &[DVector<f64>]) -> Smoothness {
    if points.len() < 2 {
        return Smoothness {
            epsilon: 0.0,
            degenerate: true,
        };
    }
    let epsilon = points
        .windows(2)
        .map(|w| linalg::dist(&w[1], &w[0]))
        .fold(0.0, f64::max);
    Smoothness {
        epsilon,
        degenerate: false,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AccuracyBound {
    /// `1/(√(βm) − 2)`.
    pub alpha: f64,
    /// Bound on `‖x_t − v_t‖`.
    pub tracking: f64,
    /// Bound on `‖x_t − x_{t−1}‖`.
    pub step: f64,
}

pub fn accuracy_bound(modulus: f64, beta: f64, epsilon: f64) -> Result<AccuracyBound> {
    require_regime(modulus, beta)?;
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            reason: "must be nonnegative",
        });
    }
    let alpha = 1.0 / (libm::sqrt(beta * modulus) - 2.0);
    Ok(AccuracyBound {
        alpha,
        tracking: alpha * epsilon,
        step: (1.0 + 2.0 * alpha) * epsilon,
    })
}

/// `[Gαε + 2Gε/m + ½(1 + 2α)²ε²]·T`.
pub fn regret_bound(gradient_bound: f64, modulus: f64, beta: f64, epsilon: f64, horizon: usize) -> Result<f64> {
    if !(gradient_bound >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "gradient_bound",
            reason: "must be nonnegative",
        });
    }
    let acc = accuracy_bound(modulus, beta, epsilon)?;
    let g = gradient_bound;
    let per_round = g * acc.alpha * epsilon
        + 2.0 * g * epsilon / modulus
        + 0.5 * (1.0 + 2.0 * acc.alpha).powi(2) * epsilon * epsilon;
    Ok(per_round * horizon as f64)
}

/// Slack of each potential inequality; nonnegative means it holds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LemmaReport {
    /// `−φ(b,c) − (φ(a,c) − φ(a,b))`, only when the angle at `c` between
    /// `a − c` and `b − c` is at least a right angle.
    pub obtuse_slack: Option<f64>,
    /// `2φ(b,c) + φ(a,b) − (φ(a,c) − φ(a,b))`.
    pub triangle_slack: f64,
    pub passed: bool,
}

/// Accepted rounding slack for the potential inequalities.
pub const LEMMA_SLACK_TOL: f64 = -1e-9;

pub fn check_potential_lemmas(
    a: &DVector<f64>,
    b: &DVector<f64>,
    c: &DVector<f64>,
    checker: &PotentialChecker,
) -> Result<LemmaReport> {
    let ac = potential(a, c, checker)?;
    let ab = potential(a, b, checker)?;
    let bc = potential(b, c, checker)?;
    let change = ac - ab;
    let obtuse = (a - c).dot(&(b - c)) <= 0.0;
    let obtuse_slack = obtuse.then(|| -bc - change);
    let triangle_slack = 2.0 * bc + ab - change;
    let passed = triangle_slack >= LEMMA_SLACK_TOL && obtuse_slack.is_none_or(|s| s >= LEMMA_SLACK_TOL);
    Ok(LemmaReport {
        obtuse_slack,
        triangle_slack,
        passed,
    })
}

/// Slack of `φ(x, x*) ≤ (4η/m)(f(x) + f(x*))` for a nonnegative `m`-strongly
/// convex `f`.
pub fn potential_hitting_slack(
    f: &CostFunction,
    x: &DVector<f64>,
    x_star: &DVector<f64>,
    checker: &PotentialChecker,
) -> Result<f64> {
    linalg::check_dim(x, f.dim())?;
    let phi = potential(x, x_star, checker)?;
    let bound = 4.0 * checker.eta() / f.modulus() * (f.eval(x) + f.eval(x_star));
    Ok(bound - phi)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    NotApplicable,
}

impl Verdict {
    pub fn from_check(holds: bool) -> Self {
        if holds {
            Self::Pass
        } else {
            Self::Fail
        }
    }

    pub fn is_failure(self) -> bool {
        self == Self::Fail
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Pass => "pass",
            Self::Fail => "fail",
            Self::NotApplicable => "n/a",
        }
    }
}

/// Closed-form guarantees evaluated at the run's parameters; `None` outside
/// the regime `βm > 4`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bounds {
    pub competitive_ratio: Option<f64>,
    pub accuracy: Option<AccuracyBound>,
    pub regret: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VerdictTolerances {
    pub ratio: f64,
    pub accuracy: f64,
    pub regret_floor: f64,
}

impl Default for VerdictTolerances {
    fn default() -> Self {
        Self {
            ratio: 1e-3,
            accuracy: 1e-6,
            regret_floor: -1e-6,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Verdicts {
    pub competitive_ratio: Verdict,
    pub tracking: Verdict,
    pub trajectory_smoothness: Verdict,
    pub regret: Verdict,
    pub regret_nonnegative: Verdict,
}

impl Verdicts {
    pub fn all(&self) -> [(&'static str, Verdict); 5] {
        [
            ("competitive_ratio", self.competitive_ratio),
            ("tracking", self.tracking),
            ("trajectory_smoothness", self.trajectory_smoothness),
            ("regret", self.regret),
            ("regret_nonnegative", self.regret_nonnegative),
        ]
    }

    pub fn passed(&self) -> bool {
        self.all().iter().all(|(_, v)| !v.is_failure())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub horizon: usize,
    pub modulus: f64,
    pub beta: f64,
    pub alg_cost: f64,
    pub opt_cost: f64,
    pub competitive_ratio: CompetitiveRatio,
    pub dynamic_regret: f64,
    /// Smoothness of `x_0, v_1 … v_T`.
    pub epsilon: f64,
    pub max_tracking_error: f64,
    pub trajectory_smoothness: f64,
    /// Largest gradient norm at any point visited by either trajectory.
    pub measured_gradient: f64,
    pub worst_balance_residual: f64,
    pub opt_residual: f64,
    pub bounds: Bounds,
}

impl MetricsReport {
    pub fn compute(instance: &SocoInstance, run: &ObdRun, opt: &OfflineSolution, beta: f64) -> Result<Self> {
        let alg = &run.trajectory;
        let opt_traj = &opt.trajectory;
        let ratio = competitive_ratio(alg, opt_traj)?;
        let regret = dynamic_regret(alg, opt_traj)?;
        let modulus = instance.modulus();
        let epsilon = smoothness(&instance.anchored_minimizers()).epsilon;
        let tracking = alg
            .points
            .iter()
            .zip(instance.costs())
            .map(|(x, f)| linalg::dist(x, f.minimizer()))
            .fold(0.0, f64::max);
        let steps = alg.step_lengths().into_iter().fold(0.0, f64::max);
        let measured_gradient = max_gradient_norm(instance, [&alg.points, &opt_traj.points]);
        let horizon = instance.horizon();
        let bounds = Bounds {
            competitive_ratio: theoretical_cr_bound(modulus, beta).ok(),
            accuracy: accuracy_bound(modulus, beta, epsilon).ok(),
            regret: regret_bound(measured_gradient, modulus, beta, epsilon, horizon).ok(),
        };
        Ok(Self {
            horizon,
            modulus,
            beta,
            alg_cost: alg.total_cost,
            opt_cost: opt_traj.total_cost,
            competitive_ratio: ratio,
            dynamic_regret: regret,
            epsilon,
            max_tracking_error: tracking,
            trajectory_smoothness: steps,
            measured_gradient,
            worst_balance_residual: run.worst_balance_residual(),
            opt_residual: opt.first_order_residual,
            bounds,
        })
    }

    /// Checks each guarantee; the accuracy and regret checks are skipped when
    /// `smooth_checks` is false.
    pub fn verdicts(&self, tol: &VerdictTolerances, smooth_checks: bool) -> Verdicts {
        let ratio = match self.bounds.competitive_ratio {
            None => Verdict::NotApplicable,
            Some(bound) => Verdict::from_check(self.competitive_ratio.value <= bound + tol.ratio),
        };
        let (tracking, smooth) = match (smooth_checks, self.bounds.accuracy) {
            (true, Some(acc)) => (
                Verdict::from_check(self.max_tracking_error <= acc.tracking + tol.accuracy),
                Verdict::from_check(self.trajectory_smoothness <= acc.step + tol.accuracy),
            ),
            _ => (Verdict::NotApplicable, Verdict::NotApplicable),
        };
        let regret = match (smooth_checks, self.bounds.regret) {
            (true, Some(bound)) => Verdict::from_check(self.dynamic_regret <= bound + tol.accuracy),
            _ => Verdict::NotApplicable,
        };
        Verdicts {
            competitive_ratio: ratio,
            tracking,
            trajectory_smoothness: smooth,
            regret,
            regret_nonnegative: Verdict::from_check(self.dynamic_regret >= tol.regret_floor),
        }
    }
}

/// Largest `‖∇f_t(x_t)‖` over the given trajectories.
pub fn max_gradient_norm<'a>(
    instance: &SocoInstance,
    trajectories: impl IntoIterator<Item = &'a Vec<DVector<f64>>>,
) -> f64 {
    trajectories
        .into_iter()
        .flat_map(|pts| pts.iter().zip(instance.costs()))
        .map(|(x, f)| f.grad(x).norm())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::make_quadratic;
    use crate::obd::{obd_run, ObdConfig};
    use crate::offline::solve_offline;
    use alloc::vec;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn ratio_conventions() {
        assert_eq!(CompetitiveRatio::from_costs(1.0, 0.25).value, 4.0);
        let inf = CompetitiveRatio::from_costs(1.0, 0.0);
        assert_eq!(inf.flag, RatioFlag::OptZero);
        assert!(inf.value.is_infinite());
        let both = CompetitiveRatio::from_costs(0.0, 0.0);
        assert_eq!((both.value, both.flag), (1.0, RatioFlag::BothZero));
    }

    #[test]
    fn identical_trajectories() {
        let f = make_quadratic(DMatrix::identity(1, 1), v(&[1.0]), 0.0).unwrap();
        let inst = SocoInstance::new(v(&[0.0]), vec![f]).unwrap();
        let opt = solve_offline(&inst, 1e-12).unwrap().trajectory;
        assert_eq!(competitive_ratio(&opt, &opt).unwrap().value, 1.0);
        assert_eq!(dynamic_regret(&opt, &opt).unwrap(), 0.0);
    }

    #[test]
    fn running_example_ratio_is_finite_and_at_least_one() {
        let f = make_quadratic(DMatrix::identity(1, 1), v(&[0.0]), 0.0).unwrap();
        let inst = SocoInstance::new(v(&[1.0]), vec![f; 3]).unwrap();
        let alg = obd_run(&inst, &ObdConfig::new(1.0).unwrap()).unwrap();
        let opt = solve_offline(&inst, 1e-12).unwrap();
        let r = competitive_ratio(&alg.trajectory, &opt.trajectory).unwrap();
        assert_eq!(r.flag, RatioFlag::Finite);
        assert!(r.value >= 1.0 && r.value.is_finite());
    }

    #[test]
    fn cr_bound_values() {
        assert_relative_eq!(theoretical_cr_bound(10.0, 3.0).unwrap(), 5.6 / (1.0 - 2.0 / 15.0), epsilon = 1e-12);
        assert!((theoretical_cr_bound(10.0, 3.0).unwrap() - 6.4615).abs() < 1e-4);
        assert!((theoretical_cr_bound(1e9, 2.0).unwrap() - 3.0).abs() <= 1e-7);
        assert!(matches!(theoretical_cr_bound(1.0, 3.0), Err(Error::OutOfRegime { .. })));
    }

    #[test]
    fn cr_bound_decreases_toward_three() {
        let bounds: Vec<f64> = [1.0, 10.0, 100.0, 1000.0]
            .iter()
            .map(|&m| theoretical_cr_bound(m, 2.0 + 10.0 / m).unwrap())
            .collect();
        assert!(bounds.windows(2).all(|w| w[1] < w[0]));
        assert!(bounds[3] <= 3.1);
    }

    #[test]
    fn smoothness_examples() {
        let s = smoothness(&[v(&[0.0]), v(&[0.5]), v(&[1.0])]);
        assert_eq!(s.epsilon, 0.5);
        assert_eq!(smoothness(&vec![v(&[2.0]); 4]).epsilon, 0.0);
        assert!(smoothness(&[v(&[2.0])]).degenerate);
    }

    #[test]
    fn accuracy_values() {
        let a = accuracy_bound(10.0, 3.0, 0.1).unwrap();
        assert_relative_eq!(a.alpha, 1.0 / (libm::sqrt(30.0) - 2.0), epsilon = 1e-15);
        assert!((a.alpha - 0.2876).abs() < 1e-4);
        for m in [0.1, 1.0, 10.0, 1e3] {
            assert!(accuracy_bound(m, 2.0 + 10.0 / m, 1.0).unwrap().alpha < 1.0 / (libm::sqrt(10.0) - 2.0));
        }
        let zero = accuracy_bound(10.0, 3.0, 0.0).unwrap();
        assert_eq!((zero.tracking, zero.step), (0.0, 0.0));
        assert!(accuracy_bound(1.0, 4.0, 0.1).is_err());
    }

    #[test]
    fn regret_bound_values() {
        let r = regret_bound(1.0, 10.0, 3.0, 0.1, 100).unwrap();
        assert!((r - 6.12).abs() < 0.01);
        assert_eq!(regret_bound(1.0, 10.0, 3.0, 0.0, 100).unwrap(), 0.0);
        assert_relative_eq!(regret_bound(1.0, 10.0, 3.0, 0.1, 200).unwrap(), 2.0 * r, epsilon = 1e-12);
    }

    #[test]
    fn lemma_examples() {
        let one = PotentialChecker::new(1.0).unwrap();
        let r = check_potential_lemmas(&v(&[0.0, 0.0]), &v(&[2.0, 1.0]), &v(&[1.0, 1.0]), &one).unwrap();
        assert_eq!(r.obtuse_slack, Some(2.0));
        assert!(r.passed);
        let z = v(&[0.5, 0.5]);
        let d = check_potential_lemmas(&z, &z, &z, &one).unwrap();
        assert_eq!((d.obtuse_slack, d.triangle_slack), (Some(0.0), 0.0));

        let f = make_quadratic(DMatrix::identity(2, 2), DVector::zeros(2), 0.0).unwrap();
        let slack = potential_hitting_slack(&f, &v(&[1.0, 0.0]), &v(&[0.0, 1.0]), &one).unwrap();
        assert_eq!(slack, 2.0);
    }

    #[test]
    fn stationary_report_passes_with_flag() {
        let f = make_quadratic(DMatrix::identity(2, 2), v(&[1.0, 1.0]), 0.0).unwrap();
        let inst = SocoInstance::new(v(&[1.0, 1.0]), vec![f; 5]).unwrap();
        let config = ObdConfig::auto(1.0).unwrap();
        let run = obd_run(&inst, &config).unwrap();
        let opt = solve_offline(&inst, 1e-12).unwrap();
        let report = MetricsReport::compute(&inst, &run, &opt, config.beta).unwrap();
        assert_eq!(report.competitive_ratio.flag, RatioFlag::BothZero);
        assert!(report.dynamic_regret.abs() < 1e-20);
        assert!(report.verdicts(&VerdictTolerances::default(), true).passed());
    }
}
