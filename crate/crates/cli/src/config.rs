use std::path::Path;

use dblab_core::dp::Grid;
use dblab_core::model::{ModelParams, ProgressModel};
use dblab_core::nofeedback::NoFeedbackModel;
use dblab_core::outcomes::{linear_grid, SimConfig, SweepVariable};
use dblab_core::solver::SolverOptions;
use serde::{Deserialize, Serialize};

use crate::exit::Failure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub agent: ModelParams,
    pub model: ProgressModel,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub sweep: SweepConfig,
    /// Fixed schedule for `simulate` and `trajectory`; solved when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Periods>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub tau_tol: f64,
    pub root_tol: f64,
    #[serde(default)]
    pub search_ceiling: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = SolverOptions::default();
        SolverConfig { tau_tol: d.tau_tol, root_tol: d.root_tol, search_ceiling: d.search_ceiling }
    }
}

impl SolverConfig {
    pub fn options(&self) -> SolverOptions {
        SolverOptions { tau_tol: self.tau_tol, root_tol: self.root_tol, search_ceiling: self.search_ceiling, ..SolverOptions::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    Reduced,
    TwoStage,
    NoFeedback,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ActionName {
    Do,
    Think,
    Idle,
    Mix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub dt: f64,
    #[serde(default = "default_actions")]
    pub action_set: Vec<ActionName>,
    #[serde(default)]
    pub idle_enabled: bool,
    #[serde(default = "default_kind")]
    pub kind: OracleKind,
    /// Width of the majority window used to summarize chattering paths.
    #[serde(default = "default_window")]
    pub window: f64,
}

fn default_actions() -> Vec<ActionName> {
    vec![ActionName::Do, ActionName::Think]
}

fn default_kind() -> OracleKind {
    OracleKind::Reduced
}

fn default_window() -> f64 {
    0.2
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { dt: 1e-3, action_set: default_actions(), idle_enabled: false, kind: default_kind(), window: default_window() }
    }
}

impl OracleConfig {
    pub fn grid(&self, horizon: f64) -> Result<Grid, Failure> {
        let idle = self.idle_enabled || self.action_set.contains(&ActionName::Idle);
        let mix = self.action_set.contains(&ActionName::Mix);
        Ok(Grid::new(horizon, self.dt)?.with_idle(idle).with_mix(mix))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub reps: u64,
    pub seed: u64,
}

impl Default for SimSection {
    fn default() -> Self {
        SimSection { reps: 100_000, seed: 1 }
    }
}

impl SimSection {
    pub fn config(&self) -> SimConfig {
        SimConfig { reps: self.reps, seed: self.seed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Range(String),
    Points(Vec<f64>),
}

impl GridSpec {
    pub fn points(&self) -> Result<Vec<f64>, Failure> {
        match self {
            GridSpec::Points(v) => Ok(v.clone()),
            GridSpec::Range(s) => parse_range(s),
        }
    }
}

pub fn parse_range(s: &str) -> Result<Vec<f64>, Failure> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Failure::validation(format!("grid must look like a:b:step, got {s:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let v: Vec<f64> = parts.iter().map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad())?;
    Ok(linear_grid(v[0], v[1], v[2])?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub variable: SweepVariable,
    pub grid: GridSpec,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { variable: SweepVariable::Horizon, grid: GridSpec::Range("1:8:0.25".into()) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Periods {
    pub tau1: f64,
    pub tau2: f64,
    pub tau3: f64,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::io(format!("cannot read config {}: {e}", path.display())))?;
        RunConfig::parse(&text).map_err(|f| Failure { message: format!("{}: {}", path.display(), f.message), ..f })
    }

    pub fn parse(text: &str) -> Result<RunConfig, Failure> {
        serde_json::from_str(text).map_err(|e| Failure::validation(format!("invalid config: {e}")))
    }

    /// Canonical JSON form: every section present, defaults filled in.
    pub fn emit(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// No-feedback model built from the agent and a safe-arm conversion rate.
    pub fn no_feedback(&self) -> Result<NoFeedbackModel, Failure> {
        let ProgressModel::SafeArm { nu, .. } = self.model else {
            return Err(Failure::validation("the no-feedback oracle takes its conversion rate from a SafeArm model"));
        };
        let a = &self.agent;
        let nf = NoFeedbackModel { mu: a.mu, nu, b: a.b, c: a.c, p_bar: a.p_bar, lambda: a.lambda, limit_mode: true };
        nf.check()?;
        Ok(nf)
    }
}
