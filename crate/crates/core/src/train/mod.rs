//! Classifier construction: threshold sweeps for one feature and constrained
//! logistic training for linear classifiers.

mod linear;
mod logloss;
pub mod sqp;
mod sweep;

pub use linear::{
    hard_gaps, train_linear, ConstraintKind, HardGaps, TrainConfig, TrainOutcome, MIN_EFFICIENCY,
};
pub use logloss::{log_loss, log_loss_with_gradient, sigmoid, PROB_CLIP};
pub use sqp::SolverConfig;
pub use sweep::{
    linear_grid, select_optimal, sweep_thresholds, CellMetrics, Feasibility, SweepRecord,
};
