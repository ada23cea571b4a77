//! Discrete-time dynamic-programming oracle.
//!
//! State is `(k, m)`: `k` steps remain and `m` doing steps have been used, so
//! the belief is reconstructed exactly. Per-step arrival probabilities and
//! expected effort are exact exponentials rather than first-order rates.

use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{belief, ModelParams, ProgressModel};
use crate::nofeedback::NoFeedbackModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Do,
    Think,
    Idle,
    /// Half effort on each arm.
    Mix,
}

impl Action {
    fn from_u8(x: u8) -> Action {
        match x {
            0 => Action::Do,
            1 => Action::Think,
            2 => Action::Idle,
            _ => Action::Mix,
        }
    }

    /// Share of effort on the doing arm.
    pub fn doing_share(self) -> f64 {
        match self {
            Action::Do => 1.0,
            Action::Mix => 0.5,
            _ => 0.0,
        }
    }
}

/// Time discretization and action set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dt: f64,
    pub n_steps: usize,
    pub idle: bool,
    pub mix: bool,
    /// Keep the full value table (needed for dumps and table queries).
    pub keep_values: bool,
}

impl Grid {
    pub const DT_CAP: f64 = 0.01;
    pub const MAX_STEPS: usize = 20_000;

    pub fn new(horizon: f64, dt: f64) -> Result<Grid> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::param("dt", format!("must be > 0, got {dt}")));
        }
        if dt > Self::DT_CAP {
            return Err(Error::GridTooCoarse { dt, cap: Self::DT_CAP });
        }
        if !(horizon >= 0.0 && horizon.is_finite()) {
            return Err(Error::param("T", format!("must be >= 0, got {horizon}")));
        }
        let n = (horizon / dt).round();
        if n > Self::MAX_STEPS as f64 {
            let states = (n as u128) * (n as u128 + 1) / 2;
            let limit = (Self::MAX_STEPS as u128) * (Self::MAX_STEPS as u128 + 1) / 2;
            return Err(Error::StateGuard { states, limit });
        }
        Ok(Grid { dt, n_steps: n as usize, idle: false, mix: false, keep_values: false })
    }

    pub fn with_idle(mut self, on: bool) -> Self {
        self.idle = on;
        self
    }

    pub fn with_mix(mut self, on: bool) -> Self {
        self.mix = on;
        self
    }

    pub fn with_values(mut self, on: bool) -> Self {
        self.keep_values = on;
        self
    }

    pub fn horizon(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }

    /// Doing-state units per doing step (two when half steps are possible).
    fn unit(&self) -> usize {
        if self.mix {
            2
        } else {
            1
        }
    }
}

/// A maximal run of one action along the no-arrival path, in calendar time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
    pub action: Action,
    /// Half-width of the uncertainty on each boundary.
    pub uncertainty: f64,
}

/// Tables and the extracted no-arrival path.
#[derive(Debug, Clone, PartialEq)]
pub struct DPSolution {
    pub grid: Grid,
    /// Value at `(N, 0)`: the start of the game.
    pub root_value: f64,
    /// Triangular value table, row `k` holding `m = 0..=unit*(N-k)`.
    pub value: Option<Vec<f64>>,
    pub policy: Vec<u8>,
    offsets: Vec<usize>,
    /// Action per step along the no-arrival path, calendar order.
    pub path: Vec<Action>,
    /// `Q_do - Q_think` per step along the path.
    pub gap: Vec<f64>,
    pub switch_times: Vec<Interval>,
}

impl DPSolution {
    fn row_len(&self, k: usize) -> usize {
        self.grid.unit() * (self.grid.n_steps - k) + 1
    }

    pub fn value_at(&self, k: usize, m: usize) -> Option<f64> {
        let v = self.value.as_ref()?;
        (k <= self.grid.n_steps && m < self.row_len(k)).then(|| v[self.offsets[k] + m])
    }

    pub fn action_at(&self, k: usize, m: usize) -> Option<Action> {
        if k == 0 || k > self.grid.n_steps || m >= self.row_len(k) {
            return None;
        }
        Some(Action::from_u8(self.policy[self.offsets[k] + m]))
    }

    /// Calendar times at which the path action changes.
    pub fn switch_points(&self) -> Vec<f64> {
        self.switch_times.windows(2).map(|w| w[0].end).collect()
    }

    /// Total doing time along the no-arrival path.
    pub fn doing_time(&self) -> f64 {
        self.path.iter().map(|a| a.doing_share()).sum::<f64>() * self.grid.dt
    }

    /// Writes the value table: magic `DBL1`, `dt`, `n_steps`, then the
    /// `(N+1) x (unit*N+1)` table row-major in little-endian `f64`, with NaN
    /// in unreachable cells.
    pub fn write_dump<W: Write>(&self, mut w: W) -> io::Result<()> {
        let v = self
            .value
            .as_ref()
            .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "value table was not kept"))?;
        let n = self.grid.n_steps;
        let width = self.grid.unit() * n + 1;
        w.write_all(b"DBL1")?;
        w.write_all(&self.grid.dt.to_le_bytes())?;
        w.write_all(&(n as u64).to_le_bytes())?;
        for k in 0..=n {
            let len = self.row_len(k);
            for m in 0..width {
                let x = if m < len { v[self.offsets[k] + m] } else { f64::NAN };
                w.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }
}

/// A value table read back from a dump.
#[derive(Debug, Clone, PartialEq)]
pub struct Dump {
    pub dt: f64,
    pub n_steps: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

pub fn read_dump<R: Read>(mut r: R) -> Result<Dump> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| Error::Io(e.to_string()))?;
    if bytes.len() < 20 || &bytes[..4] != b"DBL1" {
        return Err(Error::Io("not a DBL1 dump".into()));
    }
    let f = |b: &[u8]| f64::from_le_bytes(b.try_into().expect("8 bytes"));
    let dt = f(&bytes[4..12]);
    let n = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    let values: Vec<f64> = bytes[20..].chunks_exact(8).map(f).collect();
    let rows = n + 1;
    if values.len() % rows != 0 {
        return Err(Error::Io("truncated dump".into()));
    }
    Ok(Dump { dt, n_steps: n, width: values.len() / rows, values })
}

const NONE: f64 = f64::NEG_INFINITY;

/// One-step action values at a state, given the next row `W(k-1, .)`.
trait Stage {
    /// Fills `q` indexed by action code; disabled actions stay at `NONE`.
    fn q(&self, k: usize, m: usize, next: &[f64], q: &mut [f64; 4]);
}

fn choose(q: &[f64; 4], incumbent: usize) -> usize {
    let mut best = 0;
    for a in 1..4 {
        if q[a] > q[best] {
            best = a;
        }
    }
    if q[incumbent] >= q[best] - 1e-12 {
        incumbent
    } else {
        best
    }
}

fn shift(a: usize, unit: usize) -> usize {
    match a {
        0 => unit,
        3 => 1,
        _ => 0,
    }
}

fn solve_tables<S: Stage>(grid: Grid, stage: &S) -> DPSolution {
    let n = grid.n_steps;
    let unit = grid.unit();
    let row_len = |k: usize| unit * (n - k) + 1;
    let mut offsets = Vec::with_capacity(n + 1);
    let mut total = 0;
    for k in 0..=n {
        offsets.push(total);
        total += row_len(k);
    }
    let mut policy = vec![0u8; total];
    let mut values = grid.keep_values.then(|| vec![0.0; total]);
    let mut prev = vec![0.0; row_len(0)];
    let mut cur = Vec::with_capacity(row_len(0));
    let mut q = [NONE; 4];
    for k in 1..=n {
        cur.clear();
        for m in 0..row_len(k) {
            q.fill(NONE);
            stage.q(k, m, &prev, &mut q);
            let inc = if k >= 2 { policy[offsets[k - 1] + m] as usize } else { 0 };
            let inc = if q[inc] == NONE { 0 } else { inc };
            let a = choose(&q, inc);
            policy[offsets[k] + m] = a as u8;
            cur.push(q[a]);
        }
        if let Some(v) = values.as_mut() {
            v[offsets[k]..offsets[k] + cur.len()].copy_from_slice(&cur);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let root_value = if n == 0 { 0.0 } else { prev[0] };

    // Walk the no-arrival path forward.
    let mut path = Vec::with_capacity(n);
    let mut ms = Vec::with_capacity(n);
    let mut m = 0;
    for k in (1..=n).rev() {
        let a = policy[offsets[k] + m] as usize;
        ms.push(m);
        path.push(Action::from_u8(a as u8));
        m += shift(a, unit);
    }

    // Second sweep recovers the do/think gap along the path.
    let mut gap = vec![0.0; n];
    let mut prev = vec![0.0; row_len(0)];
    for k in 1..=n {
        let mut row = Vec::with_capacity(row_len(k));
        let target = ms[n - k];
        for m in 0..row_len(k) {
            q.fill(NONE);
            stage.q(k, m, &prev, &mut q);
            if m == target {
                gap[n - k] = q[0] - q[1];
            }
            row.push(q[policy[offsets[k] + m] as usize]);
        }
        prev = row;
    }

    let mut sol = DPSolution { grid, root_value, value: values, policy, offsets, path, gap, switch_times: Vec::new() };
    sol.switch_times = extract_schedule(&sol);
    sol
}

/// Merges the no-arrival path into intervals. Do/think boundaries are placed
/// at the interpolated zero of the action gap, whose samples sit at step
/// midpoints.
pub fn extract_schedule(dp: &DPSolution) -> Vec<Interval> {
    let dt = dp.grid.dt;
    let mut out: Vec<Interval> = Vec::new();
    for (j, &a) in dp.path.iter().enumerate() {
        match out.last_mut() {
            Some(last) if last.action == a => last.end = (j + 1) as f64 * dt,
            _ => {
                let mut start = j as f64 * dt;
                if let Some(last) = out.last_mut() {
                    let pair = (last.action, a);
                    if matches!(pair, (Action::Do, Action::Think) | (Action::Think, Action::Do)) {
                        let (g0, g1) = (dp.gap[j - 1], dp.gap[j]);
                        if g0 != g1 && (g0 <= 0.0) != (g1 <= 0.0) {
                            let z = (j as f64 - 0.5) * dt + dt * g0 / (g0 - g1);
                            start = z.clamp((j as f64 - 0.5) * dt, (j as f64 + 0.5) * dt);
                        }
                    }
                    last.end = start;
                }
                out.push(Interval { start, end: (j + 1) as f64 * dt, action: a, uncertainty: dt });
            }
        }
    }
    out
}

/// Intervals after classifying each step by the doing share in a centered
/// window of width `window`; shares of one half or more count as doing.
/// Used where the exact optimum mixes on a singular arc and the raw path
/// chatters between the arms.
pub fn coarse_intervals(dp: &DPSolution, window: f64) -> Vec<Interval> {
    let dt = dp.grid.dt;
    let n = dp.path.len();
    let half = ((window / dt) / 2.0).round().max(0.0) as usize;
    let mut prefix = vec![0.0; n + 1];
    for (j, a) in dp.path.iter().enumerate() {
        prefix[j + 1] = prefix[j] + a.doing_share();
    }
    let mut out: Vec<Interval> = Vec::new();
    for j in 0..n {
        let lo = j.saturating_sub(half);
        let hi = (j + half + 1).min(n);
        let share = (prefix[hi] - prefix[lo]) / (hi - lo) as f64;
        let a = if share >= 0.5 { Action::Do } else { Action::Think };
        match out.last_mut() {
            Some(last) if last.action == a => last.end = (j + 1) as f64 * dt,
            _ => out.push(Interval { start: j as f64 * dt, end: (j + 1) as f64 * dt, action: a, uncertainty: half as f64 * dt + dt }),
        }
    }
    out
}

/// Number of disjoint thinking intervals in a list.
pub fn thinking_runs(intervals: &[Interval]) -> usize {
    intervals.iter().filter(|i| i.action == Action::Think).count()
}

struct Reduced {
    b: f64,
    c: f64,
    lambda: f64,
    mu: f64,
    dt: f64,
    unit: usize,
    idle: bool,
    mix: bool,
    /// Belief indexed by doing units.
    p: Vec<f64>,
    /// Value of progress at the midpoint of the step with `k` remaining.
    v_mid: Vec<f64>,
}

impl Reduced {
    fn do_terms(&self, p: f64) -> (f64, f64, f64) {
        let hit = -(-self.lambda * self.dt).exp_m1();
        let s = p * hit;
        let cost = self.c * (p * hit / self.lambda + (1.0 - p) * self.dt);
        (s, cost, 1.0 - s)
    }
}

impl Stage for Reduced {
    fn q(&self, k: usize, m: usize, next: &[f64], q: &mut [f64; 4]) {
        let p = self.p[m];
        let (s, cost, surv) = self.do_terms(p);
        q[0] = s * self.b - cost + surv * next[m + self.unit];
        let hit = -(-self.mu * self.dt).exp_m1();
        q[1] = hit * self.v_mid[k] - self.c * hit / self.mu + (1.0 - hit) * next[m];
        if self.idle {
            q[2] = next[m];
        }
        if self.mix {
            let (l, u) = (0.5 * self.lambda, 0.5 * self.mu);
            let both = -(-(l + u) * self.dt).exp_m1();
            let think_only = -(-u * self.dt).exp_m1();
            let payoff = p * both * (l * self.b + u * self.v_mid[k]) / (l + u) + (1.0 - p) * think_only * self.v_mid[k];
            let surv = p * (1.0 - both) + (1.0 - p) * (1.0 - think_only);
            let cost = self.c * (p * both / (l + u) + (1.0 - p) * think_only / u);
            q[3] = payoff - cost + surv * next[m + 1];
        }
    }
}

fn belief_table(p_bar: f64, lambda: f64, step: f64, len: usize) -> Vec<f64> {
    (0..len).map(|i| belief(p_bar, lambda, i as f64 * step)).collect()
}

/// Oracle for the reduced model in which progress is worth `V(tau)`.
pub fn dp_reduced(params: &ModelParams, model: &ProgressModel, grid: &Grid) -> Result<DPSolution> {
    params.check()?;
    model.check()?;
    let n = grid.n_steps;
    let unit = grid.unit();
    let dt = grid.dt;
    let stage = Reduced {
        b: params.b,
        c: params.c,
        lambda: params.lambda,
        mu: params.mu,
        dt,
        unit,
        idle: grid.idle,
        mix: grid.mix,
        p: belief_table(params.p_bar, params.lambda, dt / unit as f64, unit * n + 1),
        v_mid: (0..=n).map(|k| if k == 0 { 0.0 } else { model.v((k as f64 - 0.5) * dt) }).collect(),
    };
    Ok(solve_tables(*grid, &stage))
}

struct TwoStage {
    inner: Reduced,
    /// Post-progress value with `j` steps remaining.
    post: Vec<f64>,
}

impl Stage for TwoStage {
    fn q(&self, k: usize, m: usize, next: &[f64], q: &mut [f64; 4]) {
        // Progress lands mid-step, so the second stage starts with k - 1/2 steps.
        let mid = 0.5 * (self.post[k - 1] + self.post[k]);
        let r = &self.inner;
        let (s, cost, surv) = r.do_terms(r.p[m]);
        q[0] = s * r.b - cost + surv * next[m + r.unit];
        let hit = -(-r.mu * r.dt).exp_m1();
        q[1] = hit * mid - r.c * hit / r.mu + (1.0 - hit) * next[m];
        if r.idle {
            q[2] = next[m];
        }
    }
}

/// Value of working a second arm after progress, with the option to stop.
fn second_stage_values(stage2: &ProgressModel, n: usize, dt: f64) -> Result<Vec<f64>> {
    match *stage2 {
        ProgressModel::SafeArm { nu, b_nu, c_nu } => {
            let hit = -(-nu * dt).exp_m1();
            let mut post = vec![0.0; n + 1];
            for j in 1..=n {
                post[j] = (hit * b_nu - c_nu * hit / nu + (1.0 - hit) * post[j - 1]).max(0.0);
            }
            Ok(post)
        }
        ProgressModel::RiskyArm { p_bar_nu, nu, b_nu, c_nu } => {
            // Second-arm state (j remaining, i steps used); only i = 0 is needed
            // on entry, but the recursion runs over the whole triangle.
            let hit = -(-nu * dt).exp_m1();
            let pi = belief_table(p_bar_nu, nu, dt, n + 1);
            let mut post = vec![0.0; n + 1];
            let mut prev = vec![0.0; n + 1];
            for j in 1..=n {
                let width = n - j + 1;
                let mut row = vec![0.0; width];
                for (i, slot) in row.iter_mut().enumerate() {
                    let s = pi[i] * hit;
                    let cost = c_nu * (pi[i] * hit / nu + (1.0 - pi[i]) * dt);
                    *slot = (s * b_nu - cost + (1.0 - s) * prev[i + 1]).max(0.0);
                }
                post[j] = row[0];
                prev = row;
            }
            Ok(post)
        }
        _ => Err(Error::Unsupported(format!("{} cannot be run as an explicit second arm", stage2.family()))),
    }
}

/// Oracle with progress modeled as an explicit second arm.
pub fn dp_two_stage(params: &ModelParams, stage2: &ProgressModel, grid: &Grid) -> Result<DPSolution> {
    params.check()?;
    stage2.check()?;
    if grid.mix {
        return Err(Error::Unsupported("mixed actions in the two-stage oracle".into()));
    }
    let n = grid.n_steps;
    let post = second_stage_values(stage2, n, grid.dt)?;
    let stage = TwoStage {
        inner: Reduced {
            b: params.b,
            c: params.c,
            lambda: params.lambda,
            mu: params.mu,
            dt: grid.dt,
            unit: 1,
            idle: grid.idle,
            mix: false,
            p: belief_table(params.p_bar, params.lambda, grid.dt, n + 1),
            v_mid: Vec::new(),
        },
        post,
    };
    Ok(solve_tables(*grid, &stage))
}

struct NoFeedback {
    inner: Reduced,
    n: usize,
    /// Probability of no solution from thinking, at half-step resolution.
    surv_half: Vec<f64>,
}

impl Stage for NoFeedback {
    fn q(&self, k: usize, m: usize, next: &[f64], q: &mut [f64; 4]) {
        let r = &self.inner;
        let (s, cost, surv) = r.do_terms(r.p[m]);
        q[0] = s * r.b - cost + surv * next[m + 1];
        let thought = self.n - k - m;
        let s0 = self.surv_half[2 * thought];
        let (sh, s1) = (self.surv_half[2 * thought + 1] / s0, self.surv_half[2 * thought + 2] / s0);
        // Expected effort within the step by Simpson's rule on the survival curve.
        let effort = r.dt * (1.0 + 4.0 * sh + s1) / 6.0;
        q[1] = (1.0 - s1) * r.b - r.c * effort + s1 * next[m];
        if r.idle {
            q[2] = next[m];
        }
    }
}

/// Oracle for the variant in which progress is not observed.
pub fn dp_no_feedback(nf: &NoFeedbackModel, horizon: f64, grid: &Grid) -> Result<DPSolution> {
    nf.check()?;
    if grid.mix {
        return Err(Error::Unsupported("mixed actions in the no-feedback oracle".into()));
    }
    if (grid.horizon() - horizon).abs() > grid.dt {
        return Err(Error::param("T", format!("grid covers {} but horizon is {horizon}", grid.horizon())));
    }
    let n = grid.n_steps;
    let stage = NoFeedback {
        inner: Reduced {
            b: nf.b,
            c: nf.c,
            lambda: nf.lambda,
            mu: nf.mu,
            dt: grid.dt,
            unit: 1,
            idle: grid.idle,
            mix: false,
            p: belief_table(nf.p_bar, nf.lambda, grid.dt, n + 1),
            v_mid: Vec::new(),
        },
        n,
        surv_half: (0..=2 * n + 2).map(|i| 1.0 - nf.no_solution_prob(i as f64 * 0.5 * grid.dt)).collect(),
    };
    Ok(solve_tables(*grid, &stage))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_set(t: f64) -> (ModelParams, ProgressModel) {
        (ModelParams::new(0.75, 0.75, 1.0, 0.5, 5.0, t).unwrap(), ProgressModel::safe(1.0, 5.0, 0.5))
    }

    #[test]
    fn coarse_grid_rejected() {
        assert!(matches!(Grid::new(1.0, 0.5), Err(Error::GridTooCoarse { .. })));
        assert!(matches!(Grid::new(1000.0, 1e-3), Err(Error::StateGuard { .. })));
    }

    #[test]
    fn short_horizon_does_throughout() {
        let (p, m) = base_set(0.5);
        let dp = dp_reduced(&p, &m, &Grid::new(0.5, 1e-3).unwrap()).unwrap();
        assert_eq!(dp.switch_times.len(), 1);
        assert_eq!(dp.switch_times[0].action, Action::Do);
    }

    #[test]
    fn think_then_do() {
        let (p, m) = base_set(1.9);
        let dp = dp_reduced(&p, &m, &Grid::new(1.9, 1e-3).unwrap()).unwrap();
        let iv = &dp.switch_times;
        assert_eq!(iv.len(), 2, "{iv:?}");
        assert_eq!((iv[0].action, iv[1].action), (Action::Think, Action::Do));
        assert!((iv[0].end - 0.7).abs() < 5e-3, "{}", iv[0].end);
    }

    #[test]
    fn empty_grid() {
        let (p, m) = base_set(0.0);
        let dp = dp_reduced(&p, &m, &Grid::new(0.0, 1e-3).unwrap()).unwrap();
        assert!(dp.switch_times.is_empty());
        assert_eq!(dp.root_value, 0.0);
    }

    #[test]
    fn terminal_row_is_zero_and_value_decreases_in_doing() {
        let (p, m) = base_set(1.0);
        let dp = dp_reduced(&p, &m, &Grid::new(1.0, 5e-3).unwrap().with_values(true)).unwrap();
        let n = dp.grid.n_steps;
        for mm in 0..=n {
            assert_eq!(dp.value_at(0, mm), Some(0.0));
        }
        for k in 1..=n {
            for mm in 1..=(n - k) {
                assert!(dp.value_at(k, mm).unwrap() <= dp.value_at(k, mm - 1).unwrap() + 1e-15);
            }
        }
    }

    #[test]
    fn dump_round_trip() {
        let (p, m) = base_set(0.05);
        let dp = dp_reduced(&p, &m, &Grid::new(0.05, 1e-2).unwrap().with_values(true)).unwrap();
        let mut buf = Vec::new();
        dp.write_dump(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"DBL1");
        let d = read_dump(&buf[..]).unwrap();
        assert_eq!((d.n_steps, d.width), (5, 6));
        assert_eq!(d.values[5 * 6], dp.root_value);
        assert!(d.values[5 * 6 + 1].is_nan());
    }

    #[test]
    fn extract_merges_runs() {
        let (p, m) = base_set(4.0);
        let dp = dp_reduced(&p, &m, &Grid::new(4.0, 2e-3).unwrap()).unwrap();
        let raw = extract_schedule(&dp);
        assert_eq!(raw, dp.switch_times);
        assert!(raw.windows(2).all(|w| w[0].action != w[1].action && w[0].end == w[1].start));
        assert!((raw.last().unwrap().end - 4.0).abs() < 1e-12);
    }
}
