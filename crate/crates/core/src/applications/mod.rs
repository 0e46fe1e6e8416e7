//! Reductions of smoothed regression and LQR control to the online problem.

pub mod lqr;
pub mod regression;

pub use lqr::{lqr_cost, lqr_to_soco, run_obd_controller, soco_to_controls, ControllerOutcome, LqrReduction, LqrSystem};
pub use regression::{
    regularized_ratio_bound, make_smoothed_regression_instance, LogisticCost, RegressionRound, RegressionTask,
    SmoothedRegressionConfig,
};
