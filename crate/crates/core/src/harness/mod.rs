//! Experiment orchestration: configuration, assumption checks, coupled
//! sweeps, frozen-equation averages, chain aggregation and persistence.

pub mod aggregate;
pub mod check;
pub mod config;
pub mod converge;
pub mod freeze;
pub mod model;
pub mod output;
pub mod simulate;

pub use aggregate::{run_aggregate, AggregateOutcome, ClassOccupation, RateRow};
pub use check::{require_pass, run_check, CheckReport, Condition};
pub use config::{DriftKind, ExperimentConfig, Scenario};
pub use converge::{
    decreasing_with_tolerance, pair_distances, rate_fit, run_converge, separation, theoretical_rate, ConvergeOutcome,
    ErrorRow, RateFit, SupRow,
};
pub use freeze::{run_freeze, start_agreement, FreezeOutcome, FrozenPoint};
pub use model::Model;
pub use simulate::{rod_points, run_simulate, SimulateOutcome};
