//! Backward construction of the optimal schedule, the two benchmarks and the
//! belief thresholds.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{belief, validate_model, ModelParams, ProgressModel};
use crate::numerics::{find_root, golden_min, largest_feasible, ROOT_FTOL, ROOT_XTOL};
use crate::policy::{self, default_ceiling, hail_mary_belief, hail_mary_time, initial_doing_span, Span};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Structure {
    #[serde(rename = "DO_ONLY")]
    DoOnly,
    #[serde(rename = "THINK_DO")]
    ThinkDo,
    #[serde(rename = "DO_THINK_DO")]
    DoThinkDo,
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Structure::DoOnly => "DO_ONLY",
            Structure::ThinkDo => "THINK_DO",
            Structure::DoThinkDo => "DO_THINK_DO",
        })
    }
}

/// Which arm is pulled at a given calendar time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Arm {
    Do,
    Think,
}

/// Initial doing for `tau1`, thinking for `tau2`, final doing for `tau3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicySchedule {
    pub tau1: f64,
    pub tau2: f64,
    pub tau3: f64,
    pub structure: Structure,
    /// Belief held when the final doing period starts.
    pub q_at_switch: f64,
    pub terminal_belief: f64,
}

impl PolicySchedule {
    /// Builds a schedule from period lengths, deriving the tag and beliefs.
    pub fn from_periods(params: &ModelParams, tau1: f64, tau2: f64, tau3: f64) -> Self {
        let eps = 1e-12;
        let structure = if tau2 <= eps {
            Structure::DoOnly
        } else if tau1 <= eps {
            Structure::ThinkDo
        } else {
            Structure::DoThinkDo
        };
        // With no thinking the two doing periods are one.
        let (tau1, tau2, tau3) = if structure == Structure::DoOnly { (0.0, 0.0, tau1 + tau2 + tau3) } else { (tau1, tau2, tau3) };
        PolicySchedule {
            tau1,
            tau2,
            tau3,
            structure,
            q_at_switch: belief(params.p_bar, params.lambda, tau1),
            terminal_belief: belief(params.p_bar, params.lambda, tau1 + tau3),
        }
    }

    pub fn horizon(&self) -> f64 {
        self.tau1 + self.tau2 + self.tau3
    }

    /// Arm pulled at calendar time `t` absent any arrival.
    pub fn arm_at(&self, t: f64) -> Arm {
        if t >= self.tau1 && t < self.tau1 + self.tau2 {
            Arm::Think
        } else {
            Arm::Do
        }
    }

    /// Calendar switch times (one or two, none for doing throughout).
    pub fn switch_times(&self) -> Vec<f64> {
        match self.structure {
            Structure::DoOnly => vec![],
            Structure::ThinkDo => vec![self.tau2],
            Structure::DoThinkDo => vec![self.tau1, self.tau1 + self.tau2],
        }
    }

    pub fn no_shirk(&self, params: &ModelParams) -> bool {
        crate::model::no_shirk_check(params, self.terminal_belief)
    }
}

/// Tolerances and search limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tau_tol: f64,
    pub root_tol: f64,
    /// Ceiling for thinking-span searches; defaults to `max(20/mu, 20/lambda, 4T)`.
    pub search_ceiling: Option<f64>,
    /// Points used to certify the "for all t" constraints.
    pub check_points: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tau_tol: ROOT_XTOL, root_tol: ROOT_FTOL, search_ceiling: None, check_points: 2048 }
    }
}

/// Optimal schedule with default options.
pub fn solve(params: &ModelParams, model: &ProgressModel) -> Result<PolicySchedule> {
    solve_with(params, model, &SolverOptions::default())
}

/// Minimum over `t` in `[0, x]` of `slack(t)`, certified on a grid and then
/// refined by golden section around the worst grid point.
fn min_slack<F: Fn(f64) -> f64>(slack: F, x: f64, n: usize) -> f64 {
    if x <= 0.0 {
        return slack(0.0);
    }
    let h = x / n as f64;
    let mut worst = (0usize, f64::INFINITY);
    for i in 0..=n {
        let s = slack(h * i as f64);
        if s < worst.1 {
            worst = (i, s);
        }
    }
    let lo = h * worst.0.saturating_sub(1) as f64;
    let hi = (h * (worst.0 + 1) as f64).min(x);
    let (_, refined) = golden_min(&slack, lo, hi, h * 1e-6);
    worst.1.min(refined)
}

pub fn solve_with(params: &ModelParams, model: &ProgressModel, opts: &SolverOptions) -> Result<PolicySchedule> {
    validate_model(params, model).into_result()?;
    let t_end = params.t;
    if t_end == 0.0 {
        return Ok(PolicySchedule::from_periods(params, 0.0, 0.0, 0.0));
    }
    let (p_bar, lambda) = (params.p_bar, params.lambda);
    let q = |x: f64| hail_mary_belief(params, model, x);
    let n = opts.check_points.max(16);
    let slack_tol = -1e-12;
    let xtol = (opts.tau_tol * 1e-2).max(1e-14);

    // Longest doing-only tail that the prior supports.
    let step2 = |x: f64| min_slack(|t| belief(p_bar, lambda, t) - q(x - t), x, n) >= slack_tol;
    let bar3 = largest_feasible(step2, 0.0, t_end, xtol);
    if bar3 >= t_end {
        return Ok(PolicySchedule::from_periods(params, 0.0, 0.0, t_end));
    }
    let ceiling = opts.search_ceiling.unwrap_or_else(|| default_ceiling(params));
    let span = |x: f64| policy::thinking_span_with(params, model, x, ceiling);

    if (q(bar3) - p_bar).abs() <= 1e-8 {
        let s = span(bar3)?;
        if s.as_f64() >= t_end - bar3 {
            let mut sched = PolicySchedule::from_periods(params, 0.0, t_end - bar3, bar3);
            sched.q_at_switch = q(bar3);
            return Ok(sched);
        }
    }

    // Largest tail consistent with entering it at belief q(x); it never
    // exceeds the doing-only bound because q is capped at one.
    let step5 = |x: f64| {
        let qx = q(x);
        min_slack(|t| belief(qx, lambda, t) - q(x - t), x, n) >= slack_tol
    };
    let top = largest_feasible(step5, 0.0, bar3, xtol);

    let g = |x: f64| -> Result<f64> {
        let t1 = initial_doing_span(params, model, x)?;
        let t2 = match span(x)? {
            Span::Finite(v) => v,
            Span::Infinite => f64::INFINITY,
        };
        Ok(t1 + t2 + x - t_end)
    };
    let g_top = g(top)?;
    if g_top.abs() <= 1e-9 {
        return Ok(finish(params, model, top));
    }
    if g_top > 0.0 {
        return Err(Error::Bracket { lo: 0.0, hi: top, g_lo: f64::INFINITY, g_hi: g_top });
    }
    // Scan downward for the largest sign change of g.
    let m = 256;
    let mut hi = top;
    let mut lo = None;
    for j in 1..m {
        let x = top * (1.0 - j as f64 / m as f64);
        let gx = g(x)?;
        if gx >= 0.0 {
            lo = Some(x);
            break;
        }
        hi = x;
    }
    let mut lo = match lo {
        Some(l) => l,
        None => {
            let x = top / m as f64 * 1e-3;
            if g(x)? < 0.0 {
                return Err(Error::Bracket { lo: x, hi: top, g_lo: g(x)?, g_hi: g_top });
            }
            x
        }
    };
    // Shrink past any unbounded spans so the secant steps see finite values.
    while g(lo)?.is_infinite() && hi - lo > xtol {
        let mid = 0.5 * (lo + hi);
        let gm = g(mid)?;
        if gm >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if g(lo)?.is_infinite() {
        // The span diverges faster than x can resolve; the root is within xtol of hi.
        return Ok(finish(params, model, hi));
    }
    let mut err = None;
    let root = find_root(
        |x| match g(x) {
            Ok(v) => v,
            Err(e) => {
                err = Some(e);
                f64::NAN
            }
        },
        lo,
        hi,
        xtol,
        opts.root_tol,
    );
    if let Some(e) = err {
        return Err(e);
    }
    Ok(finish(params, model, root?))
}

fn finish(params: &ModelParams, model: &ProgressModel, tau3: f64) -> PolicySchedule {
    let tau1 = initial_doing_span(params, model, tau3).unwrap_or(0.0);
    let tau2 = (params.t - tau1 - tau3).max(0.0);
    let mut s = PolicySchedule::from_periods(params, tau1, tau2, tau3);
    if s.structure != Structure::DoOnly {
        s.q_at_switch = hail_mary_belief(params, model, tau3);
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InfiniteStructure {
    DoThenThink,
    ThinkThroughout,
    /// Doing dominates at every belief (no thinking ever).
    DoThroughout,
}

/// Benchmark without a deadline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfiniteHorizon {
    pub p_hat: f64,
    pub switch_time: f64,
    pub structure: InfiniteStructure,
}

/// Belief below which thinking beats doing when time is unlimited.
pub fn threshold_belief(params: &ModelParams, model: &ProgressModel) -> Result<f64> {
    let v_inf = model.limit()?;
    Ok((params.c / params.lambda) / (params.b - v_inf + params.c / params.mu))
}

pub fn solve_infinite_horizon(params: &ModelParams, model: &ProgressModel) -> Result<InfiniteHorizon> {
    params.check()?;
    model.check()?;
    let p_hat = threshold_belief(params, model)?;
    let p_bar = params.p_bar;
    if !(p_hat > 0.0) {
        return Ok(InfiniteHorizon { p_hat, switch_time: f64::INFINITY, structure: InfiniteStructure::DoThroughout });
    }
    if !(p_hat < 1.0) || p_bar < p_hat {
        return Ok(InfiniteHorizon { p_hat, switch_time: 0.0, structure: InfiniteStructure::ThinkThroughout });
    }
    let switch_time = (crate::model::odds_gap(p_bar, p_hat) / params.lambda).max(0.0);
    let structure = if switch_time > 0.0 { InfiniteStructure::DoThenThink } else { InfiniteStructure::ThinkThroughout };
    Ok(InfiniteHorizon { p_hat, switch_time, structure })
}

/// Outcome of the costless benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NoCost {
    /// Think first, then do for the final `tau3`.
    SwitchAt(f64),
    DoThroughout,
}

/// Costless benchmark. The flow cost is forced to zero whatever `params.c`
/// says; `model` should already describe progress under zero cost.
pub fn solve_no_cost(params: &ModelParams, model: &ProgressModel) -> Result<NoCost> {
    params.check()?;
    model.check()?;
    let (p_bar, lambda, mu, b) = (params.p_bar, params.lambda, params.mu, params.b);
    let boundary = |x: f64| mu * model.v(x) / (b * (mu + (lambda - mu) * (-lambda * x).exp())) - p_bar;
    let n = 2048;
    let h = params.t / n as f64;
    for i in 1..=n {
        let x = h * i as f64;
        if boundary(x) >= 0.0 {
            let r = find_root(boundary, h * (i - 1) as f64, x, ROOT_XTOL * 1e-2, ROOT_FTOL)?;
            return Ok(NoCost::SwitchAt(r));
        }
    }
    Ok(NoCost::DoThroughout)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub p_hat: Option<f64>,
    pub p_tilde: Option<f64>,
    pub p_check: Option<f64>,
    #[serde(rename = "T1")]
    pub t1: f64,
}

/// Belief thresholds governing the schedule's shape.
pub fn belief_thresholds(params: &ModelParams, model: &ProgressModel) -> Result<Thresholds> {
    validate_model(params, model).into_result()?;
    let p_hat_raw = threshold_belief(params, model)?;
    let p_hat = (p_hat_raw > 0.0 && p_hat_raw < 1.0).then_some(p_hat_raw);
    let p_check = match p_hat {
        Some(ph) => Some(belief(ph, params.lambda, hail_mary_time(params, model, ph)?)),
        None => None,
    };
    let (lambda, mu, b, c) = (params.lambda, params.mu, params.b, params.c);
    let phi = |p: f64| -> f64 {
        match hail_mary_time(params, model, p) {
            Ok(x) => (model.v1(x) + c) / (lambda * (b + c / mu - model.v(x))) - p,
            Err(_) => f64::NAN,
        }
    };
    let mut p_tilde = None;
    let n = 400;
    let mut prev = (1e-3, phi(1e-3));
    for i in 1..n {
        let p = 1e-3 + (1.0 - 2e-3) * i as f64 / (n - 1) as f64;
        let v = phi(p);
        if prev.1.is_finite() && v.is_finite() && prev.1 > 0.0 && v <= 0.0 {
            p_tilde = find_root(phi, prev.0, p, 1e-12, 0.0).ok();
            break;
        }
        prev = (p, v);
    }
    let t1 = hail_mary_time(params, model, params.p_bar)?;
    Ok(Thresholds { p_hat, p_tilde, p_check, t1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn base_set(t: f64) -> (ModelParams, ProgressModel) {
        (ModelParams::new(0.75, 0.75, 1.0, 0.5, 5.0, t).unwrap(), ProgressModel::safe(1.0, 5.0, 0.5))
    }

    fn assert_sched(s: &PolicySchedule, want: (f64, f64, f64), tol: f64) {
        assert!((s.tau1 - want.0).abs() <= tol, "{s:?}");
        assert!((s.tau2 - want.1).abs() <= tol, "{s:?}");
        assert!((s.tau3 - want.2).abs() <= tol, "{s:?}");
    }

    #[test]
    fn short_horizon_is_do_only() {
        let (p, m) = base_set(0.8);
        let s = solve(&p, &m).unwrap();
        assert_eq!(s.structure, Structure::DoOnly);
        assert_sched(&s, (0.0, 0.0, 0.8), 1e-12);
    }

    #[test]
    fn think_do_examples() {
        for (t, t2) in [(1.9, 0.7), (4.0, 2.8)] {
            let (p, m) = base_set(t);
            let s = solve(&p, &m).unwrap();
            assert_eq!(s.structure, Structure::ThinkDo);
            assert_sched(&s, (0.0, t2, 1.2), 1e-3);
        }
    }

    #[test]
    fn long_horizon_starts_with_doing() {
        let (p, m) = base_set(6.0);
        let s = solve(&p, &m).unwrap();
        assert_eq!(s.structure, Structure::DoThinkDo);
        assert!(s.tau1 > 0.0 && s.tau3 < 1.2);
        assert_abs_diff_eq!(s.horizon(), 6.0, epsilon = 1e-8);
        assert_abs_diff_eq!(s.q_at_switch, hail_mary_belief(&p, &m, s.tau3), epsilon = 1e-8);
        assert_abs_diff_eq!(s.terminal_belief, belief(0.75, 0.75, s.tau1 + s.tau3), epsilon = 1e-10);
    }

    #[test]
    fn zero_horizon() {
        let (p, m) = base_set(0.0);
        let s = solve(&p, &m).unwrap();
        assert_eq!(s.structure, Structure::DoOnly);
        assert_eq!(s.horizon(), 0.0);
    }

    #[test]
    fn invalid_model_is_rejected() {
        let p = ModelParams::new(0.8, 1.0, 0.4, 0.5, 9.0, 6.0).unwrap();
        assert!(matches!(solve(&p, &ProgressModel::safe(0.5, 10.25, 0.0)), Err(Error::Validation(_))));
    }

    #[test]
    fn infinite_horizon_examples() {
        let (p, m) = base_set(1.0);
        let r = solve_infinite_horizon(&p, &m).unwrap();
        assert_abs_diff_eq!(r.p_hat, 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.switch_time, 4.0 / 3.0 * 1.5f64.ln(), epsilon = 1e-12);
        assert_eq!(r.structure, InfiniteStructure::DoThenThink);
        let low = solve_infinite_horizon(&p.with_p_bar(0.5), &m).unwrap();
        assert_eq!((low.switch_time, low.structure), (0.0, InfiniteStructure::ThinkThroughout));
        let edge = solve_infinite_horizon(&p.with_p_bar(2.0 / 3.0), &m).unwrap();
        assert_abs_diff_eq!(edge.switch_time, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn no_cost_examples() {
        let p = ModelParams::new(0.75, 0.75, 1.0, 0.0, 5.0, 4.0).unwrap();
        let m = ProgressModel::safe(1.0, 5.0, 0.0);
        match solve_no_cost(&p, &m).unwrap() {
            NoCost::SwitchAt(x) => assert_abs_diff_eq!(x, 1.103, epsilon = 5e-3),
            other => panic!("{other:?}"),
        }
        assert_eq!(solve_no_cost(&p.with_horizon(0.5), &m).unwrap(), NoCost::DoThroughout);
        assert_eq!(solve_no_cost(&p.with_p_bar(0.999_999), &m).unwrap(), NoCost::DoThroughout);
    }

    #[test]
    fn thresholds_base_set() {
        let (p, m) = base_set(1.9);
        let th = belief_thresholds(&p, &m).unwrap();
        assert_abs_diff_eq!(th.p_hat.unwrap(), 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(th.p_check.unwrap(), 0.5008, epsilon = 2e-3);
        let pt = th.p_tilde.unwrap();
        assert!(pt > 0.88 && pt < 0.90, "{pt}");
        let t1 = belief_thresholds(&p.with_p_bar(0.6), &m).unwrap().t1;
        assert_abs_diff_eq!(t1, 0.753, epsilon = 2e-3);
    }

    #[test]
    fn high_prior_always_starts_doing() {
        for t in [2.0, 3.0, 5.0, 8.0] {
            let (p, m) = base_set(t);
            let s = solve(&p.with_p_bar(0.95), &m).unwrap();
            assert!(s.tau1 > 0.0 || s.structure == Structure::DoOnly, "T={t}: {s:?}");
        }
    }
}
