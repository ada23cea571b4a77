//! Shared fixtures for the benchmarks.

use dblab_core::{ModelParams, ProgressModel};

/// The reference parameter set at horizon `t`.
pub fn reference(t: f64) -> (ModelParams, ProgressModel) {
    (ModelParams::new(0.75, 0.75, 1.0, 0.5, 5.0, t).expect("valid parameters"), ProgressModel::safe(1.0, 5.0, 0.5))
}
