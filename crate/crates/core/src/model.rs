//! Agent primitives, belief arithmetic and the value-of-progress families.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{self, exp_ratio, QUAD_TOL};
use crate::policy;

/// The agent's primitives.
///
/// `b` is the reward for a solution on the doing arm and `t` the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub p_bar: f64,
    pub lambda: f64,
    pub mu: f64,
    pub c: f64,
    #[serde(rename = "B", alias = "b")]
    pub b: f64,
    #[serde(rename = "T", alias = "t")]
    pub t: f64,
}

impl ModelParams {
    pub fn new(p_bar: f64, lambda: f64, mu: f64, c: f64, b: f64, t: f64) -> Result<Self> {
        let p = ModelParams { p_bar, lambda, mu, c, b, t };
        p.check()?;
        Ok(p)
    }

    /// Checks the range invariants, naming the first one violated.
    pub fn check(&self) -> Result<()> {
        let finite = [self.p_bar, self.lambda, self.mu, self.c, self.b, self.t];
        if finite.iter().any(|x| !x.is_finite()) {
            return Err(Error::param("params", "all primitives must be finite"));
        }
        if !(self.p_bar > 0.0 && self.p_bar < 1.0) {
            return Err(Error::param("p_bar", format!("must lie in (0, 1), got {}", self.p_bar)));
        }
        if self.lambda <= 0.0 {
            return Err(Error::param("lambda", format!("must be > 0, got {}", self.lambda)));
        }
        if self.mu <= 0.0 {
            return Err(Error::param("mu", format!("must be > 0, got {}", self.mu)));
        }
        if self.c < 0.0 {
            return Err(Error::param("c", format!("must be >= 0, got {}", self.c)));
        }
        if self.b <= 0.0 {
            return Err(Error::param("B", format!("must be > 0, got {}", self.b)));
        }
        if self.t < 0.0 {
            return Err(Error::param("T", format!("must be >= 0, got {}", self.t)));
        }
        Ok(())
    }

    pub fn with_horizon(mut self, t: f64) -> Self {
        self.t = t;
        self
    }

    pub fn with_p_bar(mut self, p_bar: f64) -> Self {
        self.p_bar = p_bar;
        self
    }
}

/// Value of progress as a function of the time remaining when it arrives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum ProgressModel {
    /// A second arm with known rate `nu`, payoff `b_nu` and flow cost `c_nu`.
    SafeArm {
        nu: f64,
        #[serde(rename = "B_nu", alias = "b_nu")]
        b_nu: f64,
        c_nu: f64,
    },
    /// A second arm that is itself risky, with prior `p_bar_nu`.
    RiskyArm {
        p_bar_nu: f64,
        nu: f64,
        #[serde(rename = "B_nu", alias = "b_nu")]
        b_nu: f64,
        c_nu: f64,
    },
    /// A second arm with intensity `nu * exp(alpha + beta * t)`.
    TimeVarying {
        nu: f64,
        alpha: f64,
        beta: f64,
        #[serde(rename = "B", alias = "b")]
        b: f64,
        c: f64,
    },
    /// Progress pays a stream that ends at the deadline.
    PayoffStream {
        nu: f64,
        #[serde(rename = "B_nu", alias = "b_nu")]
        b_nu: f64,
    },
    /// Values on a grid starting at zero, interpolated monotonically.
    Tabulated { tau: Vec<f64>, value: Vec<f64> },
}

impl ProgressModel {
    pub fn safe(nu: f64, b_nu: f64, c_nu: f64) -> Self {
        ProgressModel::SafeArm { nu, b_nu, c_nu }
    }

    pub fn family(&self) -> &'static str {
        match self {
            ProgressModel::SafeArm { .. } => "SafeArm",
            ProgressModel::RiskyArm { .. } => "RiskyArm",
            ProgressModel::TimeVarying { .. } => "TimeVarying",
            ProgressModel::PayoffStream { .. } => "PayoffStream",
            ProgressModel::Tabulated { .. } => "Tabulated",
        }
    }

    /// Parameter-level sanity of the family itself.
    pub fn check(&self) -> Result<()> {
        let pos = |name, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(Error::param(name, format!("must be finite and > 0, got {x}")))
            }
        };
        let nonneg = |name, x: f64| {
            if x.is_finite() && x >= 0.0 {
                Ok(())
            } else {
                Err(Error::param(name, format!("must be finite and >= 0, got {x}")))
            }
        };
        match *self {
            ProgressModel::SafeArm { nu, b_nu, c_nu } => {
                pos("nu", nu)?;
                pos("B_nu", b_nu)?;
                nonneg("c_nu", c_nu)?;
                if nu * b_nu <= c_nu {
                    return Err(Error::param("c_nu", "second arm must be worth pulling (nu*B_nu > c_nu)"));
                }
            }
            ProgressModel::RiskyArm { p_bar_nu, nu, b_nu, c_nu } => {
                if !(p_bar_nu > 0.0 && p_bar_nu < 1.0) {
                    return Err(Error::param("p_bar_nu", format!("must lie in (0, 1), got {p_bar_nu}")));
                }
                pos("nu", nu)?;
                pos("B_nu", b_nu)?;
                nonneg("c_nu", c_nu)?;
                self.stopping_time()?;
            }
            ProgressModel::TimeVarying { nu, alpha, beta, b, c } => {
                pos("nu", nu)?;
                pos("B", b)?;
                nonneg("c", c)?;
                if !alpha.is_finite() || !beta.is_finite() {
                    return Err(Error::param("alpha", "alpha and beta must be finite"));
                }
                if nu * alpha.exp() * b <= c {
                    return Err(Error::param("c", "initial conversion must be worth pursuing"));
                }
            }
            ProgressModel::PayoffStream { nu, b_nu } => {
                pos("nu", nu)?;
                pos("B_nu", b_nu)?;
            }
            ProgressModel::Tabulated { ref tau, ref value } => {
                if tau.len() < 2 || tau.len() != value.len() {
                    return Err(Error::param("tau", "need at least two points and matching lengths"));
                }
                if tau[0] != 0.0 {
                    return Err(Error::param("tau", "grid must start at zero"));
                }
                if tau.windows(2).any(|w| !(w[1] > w[0])) || tau.iter().chain(value).any(|x| !x.is_finite()) {
                    return Err(Error::param("tau", "grid must be finite and strictly increasing"));
                }
            }
        }
        Ok(())
    }

    /// Stopping time of the risky second arm: when its posterior reaches the
    /// myopic indifference belief `c_nu / (nu * B_nu)`.
    pub fn stopping_time(&self) -> Result<f64> {
        match *self {
            ProgressModel::RiskyArm { p_bar_nu, nu, b_nu, c_nu } => {
                if c_nu <= 0.0 {
                    // Costless experimentation never stops.
                    return if nu * b_nu > 0.0 { Ok(f64::INFINITY) } else { Err(Error::NoStoppingTime) };
                }
                let arg = p_bar_nu / (1.0 - p_bar_nu) * (nu * b_nu - c_nu) / c_nu;
                if !(arg > 1.0) {
                    return Err(Error::NoStoppingTime);
                }
                Ok(arg.ln() / nu)
            }
            _ => Err(Error::Unsupported(format!("{} has no stopping time", self.family()))),
        }
    }

    /// Cumulative conversion hazard of the time-varying arm.
    fn tv_hazard(nu: f64, alpha: f64, beta: f64, t: f64) -> f64 {
        nu * alpha.exp() * exp_ratio(beta, t)
    }

    /// Evaluates `V`, `V'` or `V''` at `tau`.
    pub fn eval(&self, tau: f64, order: u8) -> Result<f64> {
        if !(tau.is_finite() && tau >= 0.0) {
            return Err(Error::NegativeTau(tau));
        }
        if order > 2 {
            return Err(Error::param("order", "must be 0, 1 or 2"));
        }
        match *self {
            ProgressModel::SafeArm { nu, b_nu, c_nu } => Ok(safe_eval(nu, b_nu - c_nu / nu, tau, order)),
            ProgressModel::PayoffStream { nu, b_nu } => Ok(safe_eval(nu, b_nu, tau, order)),
            ProgressModel::RiskyArm { p_bar_nu, nu, b_nu, c_nu } => {
                let t_hat = self.stopping_time()?;
                let k = b_nu - c_nu / nu;
                let v_at = |t: f64| p_bar_nu * (-(nu * t)).exp_m1().abs() * k - (1.0 - p_bar_nu) * c_nu * t;
                if tau <= t_hat {
                    let e = (-nu * tau).exp();
                    Ok(match order {
                        0 => v_at(tau),
                        1 => p_bar_nu * e * (nu * b_nu - c_nu) - (1.0 - p_bar_nu) * c_nu,
                        _ => -nu * p_bar_nu * e * (nu * b_nu - c_nu),
                    })
                } else {
                    Ok(if order == 0 { v_at(t_hat) } else { 0.0 })
                }
            }
            ProgressModel::TimeVarying { nu, alpha, beta, b, c } => {
                let rate = |t: f64| nu * (alpha + beta * t).exp();
                let surv = |t: f64| (-Self::tv_hazard(nu, alpha, beta, t)).exp();
                match order {
                    0 => {
                        let q = numerics::integrate(|t| surv(t) * (rate(t) * b - c), 0.0, tau, QUAD_TOL)?;
                        Ok(q.value)
                    }
                    1 => Ok(surv(tau) * (rate(tau) * b - c)),
                    _ => {
                        let r = rate(tau);
                        Ok(surv(tau) * (beta * r * b - r * (r * b - c)))
                    }
                }
            }
            ProgressModel::Tabulated { tau: ref grid, ref value } => {
                let hi = *grid.last().expect("checked non-empty");
                if tau > hi {
                    return Err(Error::OutsideGrid { tau, lo: 0.0, hi });
                }
                Ok(pchip_eval(grid, value, tau, order))
            }
        }
    }

    /// Limit of `V` as the remaining time grows without bound.
    pub fn limit(&self) -> Result<f64> {
        match *self {
            ProgressModel::SafeArm { nu, b_nu, c_nu } => Ok(b_nu - c_nu / nu),
            ProgressModel::PayoffStream { b_nu, .. } => Ok(b_nu),
            ProgressModel::RiskyArm { .. } => {
                let t_hat = self.stopping_time()?;
                if t_hat.is_infinite() {
                    if let ProgressModel::RiskyArm { p_bar_nu, b_nu, .. } = *self {
                        return Ok(p_bar_nu * b_nu);
                    }
                }
                self.eval(t_hat, 0)
            }
            ProgressModel::TimeVarying { nu, alpha, beta, b, c } => {
                if beta < 0.0 {
                    if c > 0.0 {
                        // Hazard saturates, so the cost integral diverges.
                        return Ok(f64::NEG_INFINITY);
                    }
                    let total = nu * alpha.exp() / (-beta);
                    return Ok(b * (-(-total).exp_m1()));
                }
                let q = numerics::integrate_to_infinity(
                    |t| {
                        let h = Self::tv_hazard(nu, alpha, beta, t);
                        if h > 745.0 {
                            0.0
                        } else {
                            (-h).exp() * (nu * (alpha + beta * t).exp() * b - c)
                        }
                    },
                    0.0,
                    QUAD_TOL,
                )?;
                Ok(q.value)
            }
            ProgressModel::Tabulated { ref value, .. } => {
                let n = value.len();
                let d = (value[n - 1] - value[n - 2]).abs();
                if d >= 1e-8 {
                    return Err(Error::TailNotFlat(d));
                }
                Ok(value[n - 1])
            }
        }
    }

    /// `V(tau)` for internal use: tabulated models are extended flat beyond
    /// their grid and the risky arm is flat beyond its stopping time.
    pub(crate) fn v(&self, tau: f64) -> f64 {
        self.ext(tau, 0)
    }

    pub(crate) fn v1(&self, tau: f64) -> f64 {
        self.ext(tau, 1)
    }

    pub(crate) fn v2(&self, tau: f64) -> f64 {
        self.ext(tau, 2)
    }

    fn ext(&self, tau: f64, order: u8) -> f64 {
        let tau = tau.max(0.0);
        if let ProgressModel::Tabulated { tau: grid, value } = self {
            let hi = *grid.last().expect("checked non-empty");
            if tau > hi {
                return if order == 0 { *value.last().expect("checked non-empty") } else { 0.0 };
            }
        }
        self.eval(tau, order).unwrap_or(f64::NAN)
    }

    /// Exponential families reduce to `K (1 - e^{-nu tau})`; returns `(nu, K)`.
    pub(crate) fn exponential_form(&self) -> Option<(f64, f64)> {
        match *self {
            ProgressModel::SafeArm { nu, b_nu, c_nu } => Some((nu, b_nu - c_nu / nu)),
            ProgressModel::PayoffStream { nu, b_nu } => Some((nu, b_nu)),
            _ => None,
        }
    }
}

fn safe_eval(nu: f64, k: f64, tau: f64, order: u8) -> f64 {
    match order {
        0 => -k * (-nu * tau).exp_m1(),
        1 => nu * k * (-nu * tau).exp(),
        _ => -nu * nu * k * (-nu * tau).exp(),
    }
}

fn pchip_slopes_at(x: &[f64], y: &[f64], i: usize) -> f64 {
    let n = x.len();
    let delta = |j: usize| (y[j + 1] - y[j]) / (x[j + 1] - x[j]);
    let h = |j: usize| x[j + 1] - x[j];
    if n == 2 {
        return delta(0);
    }
    let edge = |h0: f64, h1: f64, d0: f64, d1: f64| {
        let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if d.signum() != d0.signum() || d0 == 0.0 {
            0.0
        } else if d0.signum() != d1.signum() && d.abs() > 3.0 * d0.abs() {
            3.0 * d0
        } else {
            d
        }
    };
    if i == 0 {
        return edge(h(0), h(1), delta(0), delta(1));
    }
    if i == n - 1 {
        return edge(h(n - 2), h(n - 3), delta(n - 2), delta(n - 3));
    }
    let (d0, d1) = (delta(i - 1), delta(i));
    if d0 * d1 <= 0.0 {
        return 0.0;
    }
    let (h0, h1) = (h(i - 1), h(i));
    let w1 = 2.0 * h1 + h0;
    let w2 = h1 + 2.0 * h0;
    (w1 + w2) / (w1 / d0 + w2 / d1)
}

/// Monotone piecewise-cubic Hermite interpolation (Fritsch-Carlson slopes).
fn pchip_eval(x: &[f64], y: &[f64], t: f64, order: u8) -> f64 {
    let n = x.len();
    let i = match x.partition_point(|&xi| xi <= t) {
        0 => 0,
        k if k >= n => n - 2,
        k => k - 1,
    };
    let h = x[i + 1] - x[i];
    let s = (t - x[i]) / h;
    let (y0, y1) = (y[i], y[i + 1]);
    let (m0, m1) = (pchip_slopes_at(x, y, i) * h, pchip_slopes_at(x, y, i + 1) * h);
    match order {
        0 => {
            let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
            let h10 = s * (1.0 - s) * (1.0 - s);
            let h01 = s * s * (3.0 - 2.0 * s);
            let h11 = s * s * (s - 1.0);
            h00 * y0 + h10 * m0 + h01 * y1 + h11 * m1
        }
        1 => {
            let d00 = 6.0 * s * s - 6.0 * s;
            let d10 = 3.0 * s * s - 4.0 * s + 1.0;
            let d01 = -d00;
            let d11 = 3.0 * s * s - 2.0 * s;
            (d00 * y0 + d10 * m0 + d01 * y1 + d11 * m1) / h
        }
        _ => {
            let e00 = 12.0 * s - 6.0;
            let e10 = 6.0 * s - 4.0;
            let e01 = -e00;
            let e11 = 6.0 * s - 2.0;
            (e00 * y0 + e10 * m0 + e01 * y1 + e11 * m1) / (h * h)
        }
    }
}

/// `V(tau)`, `V'(tau)` or `V''(tau)` for `order` 0, 1 or 2.
pub fn progress_value(model: &ProgressModel, tau: f64, order: u8) -> Result<f64> {
    model.check()?;
    model.eval(tau, order)
}

/// Value of progress without time pressure.
pub fn progress_value_limit(model: &ProgressModel) -> Result<f64> {
    model.check()?;
    model.limit()
}

/// Posterior on the doing arm after `a` units of unsuccessful doing.
pub fn posterior(p_bar: f64, lambda: f64, a: f64) -> Result<f64> {
    if !(p_bar > 0.0 && p_bar < 1.0) {
        return Err(Error::param("p_bar", format!("must lie in (0, 1), got {p_bar}")));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::param("lambda", format!("must be > 0, got {lambda}")));
    }
    if !(a >= 0.0) {
        return Err(Error::param("A", format!("must be >= 0, got {a}")));
    }
    Ok(belief(p_bar, lambda, a))
}

/// Unchecked posterior used on hot paths.
#[inline]
pub(crate) fn belief(p: f64, lambda: f64, a: f64) -> f64 {
    if a == 0.0 {
        return p;
    }
    let w = p * (-lambda * a).exp();
    w / (w + 1.0 - p)
}

/// Doing time that takes the belief from `p_bar` down to `p_target`.
pub fn doing_time_to_reach(p_bar: f64, lambda: f64, p_target: f64) -> Result<f64> {
    posterior(p_bar, lambda, 0.0)?;
    if !(p_target > 0.0 && p_target < 1.0) {
        return Err(Error::param("p_target", format!("must lie in (0, 1), got {p_target}")));
    }
    if p_target > p_bar {
        return Err(Error::BeliefAboveStart { target: p_target, start: p_bar });
    }
    Ok(odds_gap(p_bar, p_target) / lambda)
}

/// `ln(odds(a) / odds(b))`.
pub(crate) fn odds_gap(a: f64, b: f64) -> f64 {
    (a / (1.0 - a) * (1.0 - b) / b).ln()
}

/// Belief at the deadline if the agent does throughout.
pub fn min_terminal_belief(params: &ModelParams) -> f64 {
    belief(params.p_bar, params.lambda, params.t)
}

/// Whether a terminal belief is high enough for the agent to keep working.
pub fn no_shirk_check(params: &ModelParams, terminal_belief: f64) -> bool {
    terminal_belief >= params.c / (params.lambda * params.b)
}

/// A point where a check was evaluated (or failed).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub tau: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Advisory checks are reported but do not affect `overall`.
    pub advisory: bool,
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    pub overall: bool,
}

impl ValidationReport {
    fn push(&mut self, name: &str, passed: bool, witness: Option<Witness>) {
        self.checks.push(Check { name: name.into(), passed, advisory: false, witness });
    }

    fn finish(mut self) -> Self {
        self.overall = self.checks.iter().all(|c| c.passed || c.advisory);
        self
    }

    /// Names of the failed (non-advisory) checks.
    pub fn failures(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|c| !c.passed && !c.advisory)
            .map(|c| c.name.as_str())
            .collect()
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// `Validation` error naming each failed check, or `Ok` when all pass.
    pub fn into_result(self) -> Result<()> {
        if self.overall {
            Ok(())
        } else {
            let parts: Vec<String> = self
                .checks
                .iter()
                .filter(|c| !c.passed && !c.advisory)
                .map(|c| match c.witness {
                    Some(w) => format!("{} (tau = {}, value = {})", c.name, w.tau, w.value),
                    None => c.name.clone(),
                })
                .collect();
            Err(Error::Validation(parts.join("; ")))
        }
    }
}

/// Knobs for [`validate_model_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationOptions {
    pub grid_points: usize,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        ValidationOptions { grid_points: 512 }
    }
}

/// Runs every check with the default grid.
pub fn validate_model(params: &ModelParams, model: &ProgressModel) -> ValidationReport {
    validate_model_with(params, model, &ValidationOptions::default())
}

pub fn validate_model_with(params: &ModelParams, model: &ProgressModel, opts: &ValidationOptions) -> ValidationReport {
    let mut rep = ValidationReport { checks: Vec::new(), overall: false };
    if let Err(e) = params.check() {
        rep.push(&format!("params: {e}"), false, Some(Witness { tau: 0.0, value: f64::NAN }));
        return rep.finish();
    }
    rep.push("params", true, None);
    if let Err(e) = model.check() {
        rep.push(&format!("model: {e}"), false, Some(Witness { tau: 0.0, value: f64::NAN }));
        return rep.finish();
    }
    rep.push("model", true, None);

    let v0 = model.v(0.0);
    rep.push("v_at_zero", v0.abs() <= 1e-12, Some(Witness { tau: 0.0, value: v0 }));

    let mut top = (10.0 / params.lambda).max(10.0 / params.mu).max(2.0 * params.t);
    let mut advisory = false;
    match model {
        ProgressModel::RiskyArm { .. } => {
            let t_hat = model.stopping_time().unwrap_or(0.0);
            rep.push("stopping_time_covers_horizon", t_hat >= params.t, Some(Witness { tau: params.t, value: t_hat }));
            top = top.min(t_hat * (1.0 - 1e-9));
        }
        ProgressModel::Tabulated { tau, .. } => {
            top = top.min(*tau.last().expect("checked non-empty"));
            advisory = true;
        }
        _ => {}
    }
    let n = opts.grid_points.max(2);
    let lo = top * 1e-4;
    let grid: Vec<f64> = (0..n).map(|i| lo * (top / lo).powf(i as f64 / (n - 1) as f64)).collect();

    let limit = model.limit();
    let saturated = |t: f64| match limit {
        Ok(l) if l.is_finite() => (l - model.v(t)).abs() <= 1e-13 * l.abs().max(1.0),
        _ => false,
    };

    let mut inc_fail = None;
    let mut conc_fail = None;
    let floor = params.p_bar * params.lambda;
    for &t in &grid {
        if saturated(t) {
            continue;
        }
        let d1 = model.v1(t);
        let d2 = model.v2(t);
        if inc_fail.is_none() && !(d1 > 0.0) {
            inc_fail = Some(Witness { tau: t, value: d1 });
        }
        if conc_fail.is_none() && d1 > 0.0 && -d2 / d1 < floor * (1.0 - 1e-9) {
            conc_fail = Some(Witness { tau: t, value: -d2 / d1 });
        }
    }
    let mut push_shape = |name: &str, fail: Option<Witness>| {
        rep.checks.push(Check { name: name.into(), passed: fail.is_none(), advisory, witness: fail });
    };
    push_shape("v_increasing", inc_fail);
    push_shape("concavity", conc_fail);

    match limit {
        Ok(l) => {
            let w = Some(Witness { tau: f64::INFINITY, value: l });
            rep.push("limit_exceeds_thinking_cost", l > params.c / params.mu, w);
            rep.push("limit_within_reward", l <= params.b + params.c / params.mu, w);
        }
        Err(e) => {
            rep.push(&format!("limit: {e}"), false, Some(Witness { tau: f64::INFINITY, value: f64::NAN }));
        }
    }

    if params.mu > params.lambda {
        let lb = params.lambda * params.b - params.c;
        if lb.abs() < 1e-300 {
            rep.push("hail_mary_monotone", false, Some(Witness { tau: 0.0, value: lb }));
        } else {
            let h = |t: f64| {
                let u2 = -params.lambda * lb * (-params.lambda * t).exp();
                params.mu * model.v2(t) / ((params.mu - params.lambda) * u2) - policy::q_hat(params, model, t)
            };
            let vals: Vec<(f64, f64)> = grid.iter().map(|&t| (t, h(t))).filter(|(_, v)| v.is_finite()).collect();
            let mut sign = 0.0;
            let mut fail = None;
            for w in vals.windows(2) {
                let d = w[1].1 - w[0].1;
                if d.abs() <= 1e-12 * w[0].1.abs().max(1.0) {
                    continue;
                }
                if sign == 0.0 {
                    sign = d.signum();
                } else if d.signum() != sign {
                    fail = Some(Witness { tau: w[1].0, value: w[1].1 });
                    break;
                }
            }
            rep.push("hail_mary_monotone", fail.is_none(), fail);
        }
    }
    rep.finish()
}
