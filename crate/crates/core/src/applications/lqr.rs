//! LQR with identity dynamics as an online problem.
//!
//! The system evolves as `x_t = x_{t−1} + B·u_t + w_t` and pays
//! `½x_tᵀQ_t x_t + ½u_tᵀR u_t` per round. With `y_t = Σ_{i≤t} B·u_i` and
//! `v_t = −x_0 − Σ_{i≤t} w_i` the state is `x_t = y_t − v_t`, and the change of
//! variables `z = R^{½}B^{−1}y` turns the control cost into `½‖z_t − z_{t−1}‖²`
//! and the state cost into `½(z_t − s_t)ᵀP_t(z_t − s_t)` with
//! `s_t = R^{½}B^{−1}v_t` and `P_t = (BR^{−½})ᵀQ_t(BR^{−½})`.
//!
//! The disturbance `w_t` is observed before `u_t` is chosen.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::analysis::MetricsReport;
use crate::cost::{make_quadratic, CostFunction};
use crate::error::{Error, Result};
use crate::instance::{SocoInstance, Trajectory};
use crate::linalg;
use crate::obd::{obd_step, ObdConfig, ObdRun};
use crate::offline::{solve_offline, OfflineSolution};

/// Control matrices whose condition number exceeds this are rejected.
pub const MAX_CONTROL_CONDITION: f64 = 1e12;

#[derive(Clone, Debug, PartialEq)]
pub struct LqrSystem {
    b: DMatrix<f64>,
    r: DMatrix<f64>,
    q: Vec<DMatrix<f64>>,
    w: Vec<DVector<f64>>,
    x0: DVector<f64>,
    state_modulus: f64,
}

impl LqrSystem {
    pub fn new(
        b: DMatrix<f64>,
        r: DMatrix<f64>,
        q: Vec<DMatrix<f64>>,
        w: Vec<DVector<f64>>,
        x0: DVector<f64>,
    ) -> Result<Self> {
        let d = linalg::require_square(&b)?;
        if d == 0 {
            return Err(Error::InvalidParameter {
                name: "b",
                reason: "dimension must be at least 1",
            });
        }
        let (smin, smax) = linalg::singular_range(&b);
        let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        if !(condition <= MAX_CONTROL_CONDITION) {
            return Err(Error::SingularControl { condition });
        }
        if r.nrows() != d || linalg::require_square(&r)? != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: r.nrows(),
            });
        }
        linalg::spd_eigen(&r)?;
        if q.is_empty() {
            return Err(Error::EmptyInstance);
        }
        if q.len() != w.len() {
            return Err(Error::LengthMismatch {
                expected: q.len(),
                found: w.len(),
            });
        }
        linalg::check_dim(&x0, d)?;
        let mut state_modulus = f64::INFINITY;
        for (t, (qt, wt)) in q.iter().zip(&w).enumerate() {
            let round = t + 1;
            if linalg::require_square(qt).map_err(|e| e.at_round(round))? != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: qt.nrows(),
                }
                .at_round(round));
            }
            let eig = linalg::spd_eigen(qt).map_err(|e| e.at_round(round))?;
            state_modulus = state_modulus.min(eig.eigenvalues[0]);
            linalg::check_dim(wt, d).map_err(|e| e.at_round(round))?;
        }
        Ok(Self {
            b,
            r,
            q,
            w,
            x0,
            state_modulus,
        })
    }

    pub fn dim(&self) -> usize {
        self.b.nrows()
    }

    pub fn horizon(&self) -> usize {
        self.q.len()
    }

    pub fn control_matrix(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn control_cost(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn state_costs(&self) -> &[DMatrix<f64>] {
        &self.q
    }

    pub fn disturbances(&self) -> &[DVector<f64>] {
        &self.w
    }

    pub fn x0(&self) -> &DVector<f64> {
        &self.x0
    }

    /// Smallest eigenvalue over all `Q_t`.
    pub fn state_modulus(&self) -> f64 {
        self.state_modulus
    }

    /// `σ_min(B)²·λ / λ_max(R)`, a lower bound on the modulus of every
    /// transformed round cost.
    pub fn modulus_lower_bound(&self) -> Result<f64> {
        let (smin, _) = linalg::singular_range(&self.b);
        Ok(smin * smin * self.state_modulus / linalg::max_eigenvalue(&self.r)?)
    }

    /// States `x_1 … x_T` under the given controls.
    pub fn roll_out(&self, controls: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
        if controls.len() != self.horizon() {
            return Err(Error::LengthMismatch {
                expected: self.horizon(),
                found: controls.len(),
            });
        }
        let mut x = self.x0.clone();
        controls
            .iter()
            .zip(&self.w)
            .enumerate()
            .map(|(t, (u, w))| {
                linalg::check_dim(u, self.dim()).map_err(|e| e.at_round(t + 1))?;
                x = &x + &self.b * u + w;
                Ok(x.clone())
            })
            .collect()
    }
}

/// Total `Σ ½x_tᵀQ_t x_t + ½u_tᵀR u_t` along the rolled-out dynamics.
pub fn lqr_cost(system: &LqrSystem, controls: &[DVector<f64>]) -> Result<f64> {
    let states = system.roll_out(controls)?;
    Ok(states
        .iter()
        .zip(controls)
        .zip(&system.q)
        .map(|((x, u), q)| 0.5 * x.dot(&(q * x)) + 0.5 * u.dot(&(&system.r * u)))
        .sum())
}

#[derive(Clone, Debug)]
pub struct LqrReduction {
    pub soco: SocoInstance,
    /// `R^{½}B^{−1}`, mapping `y` to `z`.
    pub to_z: DMatrix<f64>,
    /// `BR^{−½}`, mapping `z` to `y`.
    pub from_z: DMatrix<f64>,
    r_sqrt: DMatrix<f64>,
    r_inv_sqrt: DMatrix<f64>,
}

struct Transform {
    to_z: DMatrix<f64>,
    from_z: DMatrix<f64>,
    r_sqrt: DMatrix<f64>,
    r_inv_sqrt: DMatrix<f64>,
}

impl Transform {
    fn new(system: &LqrSystem) -> Result<Self> {
        let r_eig = linalg::spd_eigen(&system.r)?;
        let r_sqrt = linalg::spectral_map(&r_eig, libm::sqrt);
        let r_inv_sqrt = linalg::spectral_map(&r_eig, |x| 1.0 / libm::sqrt(x));
        let b_inv = system
            .b
            .clone()
            .try_inverse()
            .ok_or(Error::SingularControl { condition: f64::INFINITY })?;
        Ok(Self {
            to_z: &r_sqrt * b_inv,
            from_z: &system.b * &r_inv_sqrt,
            r_sqrt,
            r_inv_sqrt,
        })
    }

    /// `½(z − s)ᵀP(z − s)` for the state offset `v`.
    fn round_cost(&self, q: &DMatrix<f64>, v: &DVector<f64>) -> Result<CostFunction> {
        let p = self.from_z.tr_mul(q) * &self.from_z;
        let p = (&p + p.transpose()) * 0.5;
        make_quadratic(p, &self.to_z * v, 0.0)
    }
}

/// Offsets `v_t = −x_0 − Σ_{i≤t} w_i`.
fn state_offsets(system: &LqrSystem) -> Vec<DVector<f64>> {
    let mut v = -system.x0.clone();
    system
        .w
        .iter()
        .map(|w| {
            v -= w;
            v.clone()
        })
        .collect()
}

pub fn lqr_to_soco(system: &LqrSystem) -> Result<LqrReduction> {
    let transform = Transform::new(system)?;
    let costs = system
        .q
        .iter()
        .zip(state_offsets(system))
        .enumerate()
        .map(|(t, (q, v))| transform.round_cost(q, &v).map_err(|e| e.at_round(t + 1)))
        .collect::<Result<Vec<_>>>()?;
    let soco = SocoInstance::new(DVector::zeros(system.dim()), costs)?;
    Ok(LqrReduction {
        soco,
        to_z: transform.to_z,
        from_z: transform.from_z,
        r_sqrt: transform.r_sqrt,
        r_inv_sqrt: transform.r_inv_sqrt,
    })
}

impl LqrReduction {
    /// `z_t = z_{t−1} + R^{½}u_t` from `z_0 = 0`.
    pub fn controls_to_z(&self, controls: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
        let d = self.soco.dim();
        let mut z = DVector::zeros(d);
        controls
            .iter()
            .enumerate()
            .map(|(t, u)| {
                linalg::check_dim(u, d).map_err(|e| e.at_round(t + 1))?;
                z += &self.r_sqrt * u;
                Ok(z.clone())
            })
            .collect()
    }
}

/// `u_t = B^{−1}(y_t − y_{t−1})`, computed as `R^{−½}(z_t − z_{t−1})`.
pub fn soco_to_controls(z_points: &[DVector<f64>], reduction: &LqrReduction) -> Result<Vec<DVector<f64>>> {
    let d = reduction.soco.dim();
    let mut prev = DVector::zeros(d);
    z_points
        .iter()
        .enumerate()
        .map(|(t, z)| {
            linalg::check_dim(z, d).map_err(|e| e.at_round(t + 1))?;
            let u = &reduction.r_inv_sqrt * (z - &prev);
            prev.clone_from(z);
            Ok(u)
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct ControllerOutcome {
    pub controls: Vec<DVector<f64>>,
    pub offline_controls: Vec<DVector<f64>>,
    pub run: ObdRun,
    pub offline: OfflineSolution,
    pub report: MetricsReport,
}

/// Runs the balanced-descent controller causally: at round `t` only
/// `w_1 … w_t` have been revealed.
pub fn run_obd_controller(system: &LqrSystem, config: &ObdConfig) -> Result<ControllerOutcome> {
    let transform = Transform::new(system)?;
    let d = system.dim();
    let mut z = DVector::zeros(d);
    let mut offset = -system.x0.clone();
    let mut steps = Vec::with_capacity(system.horizon());
    let mut costs = Vec::with_capacity(system.horizon());
    for (t, (q, w)) in system.q.iter().zip(&system.w).enumerate() {
        offset -= w;
        let f = transform.round_cost(q, &offset).map_err(|e| e.at_round(t + 1))?;
        let step = obd_step(&f, &z, config).map_err(|e| e.at_round(t + 1))?;
        z.clone_from(&step.x);
        steps.push(step);
        costs.push(f);
    }
    let instance = SocoInstance::new(DVector::zeros(d), costs)?;
    let points: Vec<DVector<f64>> = steps.iter().map(|s| s.x.clone()).collect();
    let trajectory = Trajectory::evaluate(&instance, points)?;
    let run = ObdRun { steps, trajectory };
    let reduction = LqrReduction {
        soco: instance,
        to_z: transform.to_z,
        from_z: transform.from_z,
        r_sqrt: transform.r_sqrt,
        r_inv_sqrt: transform.r_inv_sqrt,
    };
    let offline = solve_offline(&reduction.soco, 1e-9)?;
    let report = MetricsReport::compute(&reduction.soco, &run, &offline, config.beta)?;
    Ok(ControllerOutcome {
        controls: soco_to_controls(&run.trajectory.points, &reduction)?,
        offline_controls: soco_to_controls(&offline.trajectory.points, &reduction)?,
        run,
        offline,
        report,
    })
}
