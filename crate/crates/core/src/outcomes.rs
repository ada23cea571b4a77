//! Success probabilities, expected effort, simulation and sweeps for a fixed
//! schedule in the two-stage world: progress from thinking must still be
//! converted by a known-rate arm (`nu`) before the deadline.

use std::fmt;
use std::str::FromStr;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelParams, ProgressModel};
use crate::numerics::{integrate, QUAD_TOL};
use crate::solver::{solve, PolicySchedule, Structure};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeSummary {
    pub p_total: f64,
    pub p_initial_doing: f64,
    pub p_think_route: f64,
    pub p_hail_mary: f64,
    pub expected_work: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub reps: u64,
    pub seed: u64,
}

/// Monte Carlo estimates with standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimEstimate {
    pub success_rate: f64,
    pub success_se: f64,
    pub expected_work: f64,
    pub work_se: f64,
    pub reps: u64,
    pub seed: u64,
}

fn check_fit(schedule: &PolicySchedule, params: &ModelParams, nu: f64) -> Result<()> {
    params.check()?;
    if !(nu > 0.0) {
        return Err(Error::param("nu", format!("must be > 0, got {nu}")));
    }
    let (a, b, c) = (schedule.tau1, schedule.tau2, schedule.tau3);
    if !(a >= 0.0 && b >= 0.0 && c >= 0.0) {
        return Err(Error::ScheduleMismatch(format!("negative period in ({a}, {b}, {c})")));
    }
    let h = schedule.horizon();
    if (h - params.t).abs() > 1e-9 * params.t.max(1.0) {
        return Err(Error::ScheduleMismatch(format!("periods sum to {h}, horizon is {}", params.t)));
    }
    Ok(())
}

/// `(1 - e^{-a t}) / a`, equal to `t` at `a = 0`.
fn decay_integral(a: f64, t: f64) -> f64 {
    if (a * t).abs() < 1e-12 {
        t
    } else {
        -(-a * t).exp_m1() / a
    }
}

/// `P(progress within s of thinking and converted within s + extra)`.
fn think_success(mu: f64, nu: f64, s: f64, extra: f64) -> f64 {
    // int_0^s mu e^{-mu u} (1 - e^{-nu (s + extra - u)}) du
    let progress = -(-mu * s).exp_m1();
    let tail = mu * (-nu * extra - mu * s).exp() * decay_integral(nu - mu, s);
    progress - tail
}

/// `P(progress within s of thinking but not converted by s + extra)`.
fn pending_progress(mu: f64, nu: f64, s: f64, extra: f64) -> f64 {
    mu * (-nu * extra - mu * s).exp() * decay_integral(nu - mu, s)
}

pub fn route_probabilities(schedule: &PolicySchedule, params: &ModelParams, nu: f64) -> Result<OutcomeSummary> {
    check_fit(schedule, params, nu)?;
    let (t1, t2, t3) = (schedule.tau1, schedule.tau2, schedule.tau3);
    let (p, l, mu) = (params.p_bar, params.lambda, params.mu);
    let p_initial_doing = p * -(-l * t1).exp_m1();
    let reach = p * (-l * t1).exp() + 1.0 - p;
    let p_think_route = reach * think_success(mu, nu, t2, t3);
    let p_hail_mary = p * (-l * t1 - mu * t2).exp() * -(-l * t3).exp_m1();
    Ok(OutcomeSummary {
        p_total: p_initial_doing + p_think_route + p_hail_mary,
        p_initial_doing,
        p_think_route,
        p_hail_mary,
        expected_work: expected_work_time(schedule, params, nu)?,
    })
}

/// Probability that no solution has arrived by calendar time `t`.
fn unsolved(schedule: &PolicySchedule, params: &ModelParams, nu: f64, t: f64) -> f64 {
    let (t1, t2) = (schedule.tau1, schedule.tau2);
    let (p, l, mu) = (params.p_bar, params.lambda, params.mu);
    if t <= t1 {
        return 1.0 - p * -(-l * t).exp_m1();
    }
    let reach = p * (-l * t1).exp() + 1.0 - p;
    if t <= t1 + t2 {
        let s = t - t1;
        return reach * ((-mu * s).exp() + pending_progress(mu, nu, s, 0.0));
    }
    let r = t - t1 - t2;
    let no_progress = (-mu * t2).exp() * (p * (-l * (t1 + r)).exp() + 1.0 - p);
    no_progress + reach * pending_progress(mu, nu, t2, r)
}

/// Expected effort time: work stops at a solution or at the deadline, and
/// conversion effort after progress counts.
pub fn expected_work_time(schedule: &PolicySchedule, params: &ModelParams, nu: f64) -> Result<f64> {
    check_fit(schedule, params, nu)?;
    let cuts = [0.0, schedule.tau1, schedule.tau1 + schedule.tau2, params.t];
    let mut total = 0.0;
    for w in cuts.windows(2) {
        if w[1] > w[0] {
            total += integrate(|t| unsolved(schedule, params, nu, t), w[0], w[1], QUAD_TOL)?.value;
        }
    }
    Ok(total)
}

/// Moves all doing after the thinking period, keeping the horizon.
pub fn backload(schedule: &PolicySchedule, params: &ModelParams) -> PolicySchedule {
    PolicySchedule::from_periods(params, 0.0, schedule.tau2, schedule.tau1 + schedule.tau3)
}

/// Probabilities of progress, a doing solution, and neither, by time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub p_progress: f64,
    pub p_solution: f64,
    pub p_neither: f64,
}

pub fn trajectory_probabilities(schedule: &PolicySchedule, params: &ModelParams, t_grid: &[f64]) -> Result<Vec<TrajectoryPoint>> {
    params.check()?;
    let (t1, t2) = (schedule.tau1, schedule.tau2);
    let (p, l, mu) = (params.p_bar, params.lambda, params.mu);
    let horizon = schedule.horizon();
    t_grid
        .iter()
        .map(|&t| {
            if !(t >= 0.0 && t <= horizon * (1.0 + 1e-12)) {
                return Err(Error::ScheduleMismatch(format!("t = {t} outside [0, {horizon}]")));
            }
            let doing1 = t.min(t1);
            let thinking = (t - t1).clamp(0.0, t2);
            let doing3 = (t - t1 - t2).max(0.0);
            let reach = p * (-l * t1).exp() + 1.0 - p;
            let p_progress = if t <= t1 { 0.0 } else { reach * -(-mu * thinking).exp_m1() };
            let p_solution = p * -(-l * doing1).exp_m1() + p * (-l * t1 - mu * t2).exp() * -(-l * doing3).exp_m1();
            let p_neither = (-mu * thinking).exp() * (p * (-l * (doing1 + doing3)).exp() + 1.0 - p);
            Ok(TrajectoryPoint { t, p_progress, p_solution, p_neither })
        })
        .collect()
}

/// One replication: (solved, effort time).
fn replicate(schedule: &PolicySchedule, params: &ModelParams, nu: f64, rng: &mut ChaCha8Rng) -> (bool, f64) {
    let exp = |u: f64, rate: f64| -(-u).ln_1p() / rate;
    let good = rng.random::<f64>() < params.p_bar;
    let x = exp(rng.random(), params.lambda);
    let prog = exp(rng.random(), params.mu);
    let conv = exp(rng.random(), nu);
    let (t1, t2, t3) = (schedule.tau1, schedule.tau2, schedule.tau3);
    let horizon = t1 + t2 + t3;
    if good && x <= t1 {
        return (true, x);
    }
    if prog <= t2 {
        let done = t1 + prog + conv;
        return if done <= horizon { (true, done) } else { (false, horizon) };
    }
    if good && x - t1 <= t3 {
        return (true, t1 + t2 + (x - t1));
    }
    (false, horizon)
}

const CHUNK: u64 = 4096;

/// Monte Carlo of a fixed schedule. Replication `i` draws from stream `i` of
/// a ChaCha8 generator keyed by the seed, so results do not depend on
/// thread scheduling.
pub fn simulate(schedule: &PolicySchedule, params: &ModelParams, nu: f64, sim: &SimConfig) -> Result<SimEstimate> {
    if sim.reps == 0 {
        return Err(Error::ZeroReps);
    }
    check_fit(schedule, params, nu)?;
    let chunks = sim.reps.div_ceil(CHUNK);
    let partial: Vec<[f64; 3]> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = [0.0; 3];
            for i in c * CHUNK..((c + 1) * CHUNK).min(sim.reps) {
                let mut rng = ChaCha8Rng::seed_from_u64(sim.seed);
                rng.set_stream(i);
                let (ok, w) = replicate(schedule, params, nu, &mut rng);
                acc[0] += ok as u8 as f64;
                acc[1] += w;
                acc[2] += w * w;
            }
            acc
        })
        .collect();
    let mut sum = [0.0; 3];
    for a in &partial {
        for k in 0..3 {
            sum[k] += a[k];
        }
    }
    let n = sim.reps as f64;
    let rate = sum[0] / n;
    let work = sum[1] / n;
    let work_var = if sim.reps > 1 { ((sum[2] - n * work * work) / (n - 1.0)).max(0.0) } else { 0.0 };
    Ok(SimEstimate {
        success_rate: rate,
        success_se: (rate * (1.0 - rate) / n).sqrt(),
        expected_work: work,
        work_se: (work_var / n).sqrt(),
        reps: sim.reps,
        seed: sim.seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepVariable {
    #[serde(rename = "T")]
    Horizon,
    #[serde(rename = "p_bar")]
    PBar,
}

impl FromStr for SweepVariable {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "T" => Ok(SweepVariable::Horizon),
            "p_bar" => Ok(SweepVariable::PBar),
            _ => Err(Error::param("variable", format!("expected T or p_bar, got {s:?}"))),
        }
    }
}

impl fmt::Display for SweepVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepVariable::Horizon => "T",
            SweepVariable::PBar => "p_bar",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub schedule: PolicySchedule,
    pub outcome: OutcomeSummary,
    pub p_total_backloaded: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub grid_value: f64,
    pub result: Result<SweepPoint>,
}

impl SweepRow {
    pub fn structure(&self) -> Option<Structure> {
        self.result.as_ref().ok().map(|p| p.schedule.structure)
    }
}

/// Conversion rate implied by the progress model.
pub fn conversion_rate(model: &ProgressModel) -> Result<f64> {
    match *model {
        ProgressModel::SafeArm { nu, .. } => Ok(nu),
        _ => Err(Error::Unsupported(format!("outcome analytics need a safe-arm conversion stage, got {}", model.family()))),
    }
}

fn sweep_point(params: &ModelParams, model: &ProgressModel) -> Result<SweepPoint> {
    let schedule = solve(params, model)?;
    let nu = conversion_rate(model)?;
    let outcome = route_probabilities(&schedule, params, nu)?;
    let back = route_probabilities(&backload(&schedule, params), params, nu)?;
    Ok(SweepPoint { schedule, outcome, p_total_backloaded: back.p_total })
}

/// Solves and scores each grid point; failures stay in their row.
pub fn sweep(params: &ModelParams, model: &ProgressModel, variable: SweepVariable, grid: &[f64]) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(Error::param("grid", "must be nonempty"));
    }
    Ok(grid
        .par_iter()
        .map(|&g| {
            let p = match variable {
                SweepVariable::Horizon => params.with_horizon(g),
                SweepVariable::PBar => params.with_p_bar(g),
            };
            SweepRow { grid_value: g, result: sweep_point(&p, model) }
        })
        .collect())
}

/// Inclusive grid `a, a + step, ...` up to `b`, tolerant of rounding.
pub fn linear_grid(a: f64, b: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(b >= a) || !a.is_finite() || !b.is_finite() {
        return Err(Error::param("grid", format!("need a <= b and step > 0, got {a}:{b}:{step}")));
    }
    let n = ((b - a) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| a + i as f64 * step).collect())
}
