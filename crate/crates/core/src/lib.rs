//! Thinking versus doing under a deadline.
//!
//! An agent splits effort between a risky "doing" arm, whose success rate is
//! unknown, and a "thinking" arm that produces progress of value `V(tau)`.
//! This crate computes optimal schedules, checks them against a discrete-time
//! dynamic program, and scores schedules by route probabilities.

pub mod dp;
pub mod error;
pub mod model;
pub mod nofeedback;
pub mod numerics;
pub mod outcomes;
pub mod policy;
pub mod solver;

pub use dp::{dp_no_feedback, dp_reduced, dp_two_stage, extract_schedule, Action, DPSolution, Grid, Interval};
pub use error::{Error, Result};
pub use model::{posterior, progress_value, validate_model, ModelParams, ProgressModel, ValidationReport};
pub use nofeedback::NoFeedbackModel;
pub use outcomes::{backload, route_probabilities, simulate, sweep, OutcomeSummary, SimConfig, SweepVariable};
pub use solver::{solve, PolicySchedule, SolverOptions, Structure};
