//! Smoothed online convex optimization with strongly convex hitting costs and
//! squared Euclidean switching costs.
//!
//! Online Balanced Descent picks each point by projecting the previous one
//! onto a sublevel set of the current cost, tuned so that movement balances
//! hitting cost. The offline optimum, the analysis metrics and the reductions
//! from smoothed regression and LQR control live alongside it.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod applications;
pub mod cost;
pub mod error;
pub mod instance;
pub mod linalg;
pub mod obd;
pub mod offline;
pub mod projection;

pub use cost::{make_quadratic, CostFunction, QuadraticCost, SmoothConvex};
pub use error::{Error, Result};
pub use instance::{SocoInstance, Trajectory};
pub use obd::{obd_run, obd_step, BalanceMode, ObdConfig, ObdRun, StepRecord};
pub use offline::{solve_offline, solve_offline_with, OfflineMethod, OfflineOptions, OfflineSolution};
pub use projection::{potential, project_sublevel, PotentialChecker, SublevelProjection};

pub use nalgebra::{DMatrix, DVector};
