//! The competition, voter and Richardson processes.
//!
//! All three share one rule: a directed edge `x -> y` is *active* when `x`
//! is occupied and `y` is empty or holds the other colour, and each active
//! edge fires at rate 1, copying the colour of `x` onto `y`. With no blue
//! sites this is the Richardson model; on a fully coloured graph it is the
//! voter model.
//!
//! Two executors are provided: [`Configuration::step`] (Gillespie, uniform
//! choice among active edges) and [`run_coupled`], which replays one shared
//! [`PercolationStructure`](crate::media::PercolationStructure) through all
//! three processes at once.

mod config;
mod coupled;
mod run;
pub mod snapshot;

pub use config::{CellState, Configuration, StepOutcome, TrajectoryEvent};
pub use coupled::{run_coupled, BoundaryPolicy, CoupledInit, CoupledOutcome, CoupledState};
pub use run::{
    box_for, drive, run_competition, run_configuration, run_richardson, run_voter, ConfigSummary,
    ExtinctionTracker, RunRecord, StopReason, StopRule, BOX_MARGIN, BOX_SPEED,
};
