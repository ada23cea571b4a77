//! Policy calculus: known-arm value, Hail-Mary belief, preference slope and
//! its survival-weighted integral, and the period-length maps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{odds_gap, ModelParams, ProgressModel};
use crate::numerics::{self, find_root, QUAD_TOL, ROOT_FTOL, ROOT_XTOL};
use crate::solver::PolicySchedule;

/// Value of pulling an arm with known rate `lambda` for `tau`.
pub fn known_arm_value(params: &ModelParams, tau: f64) -> f64 {
    -(params.b - params.c / params.lambda) * (-params.lambda * tau).exp_m1()
}

/// Expected value of doing throughout with belief `p` and `tau` remaining.
pub fn do_throughout_value(params: &ModelParams, p: f64, tau: f64) -> f64 {
    p * known_arm_value(params, tau) - (1.0 - p) * params.c * tau
}

/// Value of thinking for `eps`, then doing for the remaining `tau - eps`.
pub fn think_then_do_value(params: &ModelParams, model: &ProgressModel, eps: f64, p: f64, tau: f64) -> Result<f64> {
    let mu = params.mu;
    let head = numerics::integrate(|t| (-mu * t).exp() * (mu * model.v(tau - t) - params.c), 0.0, eps, 1e-14)?;
    Ok(head.value + (-mu * eps).exp() * do_throughout_value(params, p, tau - eps))
}

/// The unclipped indifference belief for entering the final doing period.
pub fn q_hat(params: &ModelParams, model: &ProgressModel, tau: f64) -> f64 {
    let (mu, lambda, b, c) = (params.mu, params.lambda, params.b, params.c);
    let num = mu * (model.v(tau) + c * tau);
    let den = mu * (b + c * tau) + (lambda - mu) * (b - known_arm_value(params, tau));
    num / den
}

/// `q(tau) = min(1, q_hat(tau))`.
pub fn hail_mary_belief(params: &ModelParams, model: &ProgressModel, tau: f64) -> f64 {
    q_hat(params, model, tau).min(1.0)
}

/// Default ceiling for searches over remaining time.
pub fn default_ceiling(params: &ModelParams) -> f64 {
    (20.0 / params.mu).max(20.0 / params.lambda).max(4.0 * params.t)
}

/// Smallest remaining time at which `q` reaches `p`.
pub fn hail_mary_time(params: &ModelParams, model: &ProgressModel, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::param("p", format!("must lie in (0, 1), got {p}")));
    }
    let g = |t: f64| hail_mary_belief(params, model, t) - p;
    let mut lo = 0.0;
    let mut ceiling = default_ceiling(params);
    let cap = ceiling * 4f64.powi(8);
    while ceiling <= cap {
        let n = 256;
        let h = (ceiling - lo) / n as f64;
        let mut prev = lo;
        for i in 1..=n {
            let x = lo + h * i as f64;
            if g(x) >= 0.0 {
                return find_root(g, prev, x, ROOT_XTOL * 1e-2, ROOT_FTOL);
            }
            prev = x;
        }
        lo = ceiling;
        ceiling *= 4.0;
    }
    Err(Error::NoRoot { ceiling: cap })
}

/// Slope of the relative preference for thinking, `s` after entering the
/// final doing period of length `xi` with belief `p`.
pub fn preference_slope(params: &ModelParams, model: &ProgressModel, s: f64, p: f64, xi: f64) -> f64 {
    let (mu, lambda, b, c) = (params.mu, params.lambda, params.b, params.c);
    let x = xi + s;
    mu * model.v1(x) + p * mu * lambda * (model.v(x) - b) + (mu - lambda * p) * c
}

/// Coefficients `(a, b, nu)` with `slope(s) = a e^{-nu s} + b` on exponential families.
fn slope_coefficients(params: &ModelParams, model: &ProgressModel, p: f64, xi: f64) -> Option<(f64, f64, f64)> {
    let (nu, k) = model.exponential_form()?;
    let (mu, lambda) = (params.mu, params.lambda);
    let a = mu * k * (-nu * xi).exp() * (nu - p * lambda);
    let b = p * mu * lambda * (k - params.b) + (mu - lambda * p) * params.c;
    Some((a, b, nu))
}

/// `e^{-mu tau} * yhat(tau)` in closed form.
fn scaled_integral_closed(mu: f64, a: f64, b: f64, nu: f64, tau: f64) -> f64 {
    let r = mu - nu;
    let first = if (r * tau).abs() < 1e-8 {
        tau * (-mu * tau).exp() * (1.0 + 0.5 * r * tau)
    } else {
        ((-nu * tau).exp() - (-mu * tau).exp()) / r
    };
    a * first - b * (-mu * tau).exp_m1() / mu
}

/// Survival-weighted integral of the preference slope by quadrature only.
pub fn preference_integral_quadrature(params: &ModelParams, model: &ProgressModel, tau: f64, p: f64, xi: f64) -> Result<f64> {
    let mu = params.mu;
    // Integrate e^{mu (s - tau)} slope and rescale, so the tolerance is relative
    // to the size of the weight at the upper end.
    let q = numerics::integrate(
        |s| (mu * (s - tau)).exp() * preference_slope(params, model, s, p, xi),
        0.0,
        tau,
        QUAD_TOL,
    )?;
    Ok(q.value * (mu * tau).exp())
}

/// `yhat(tau; p, xi)`; closed form on exponential families.
pub fn preference_integral(params: &ModelParams, model: &ProgressModel, tau: f64, p: f64, xi: f64) -> Result<f64> {
    if !(tau >= 0.0) {
        return Err(Error::NegativeTau(tau));
    }
    match slope_coefficients(params, model, p, xi) {
        Some((a, b, nu)) => Ok(scaled_integral_closed(params.mu, a, b, nu, tau) * (params.mu * tau).exp()),
        None => preference_integral_quadrature(params, model, tau, p, xi),
    }
}

/// A thinking-period length that may be unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Span {
    Finite(f64),
    Infinite,
}

impl Span {
    pub fn as_f64(self) -> f64 {
        match self {
            Span::Finite(x) => x,
            Span::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Span::Infinite)
    }
}

/// Longest thinking period that can precede a final doing period of `tau3`.
pub fn thinking_span(params: &ModelParams, model: &ProgressModel, tau3: f64) -> Result<Span> {
    thinking_span_with(params, model, tau3, default_ceiling(params))
}

pub fn thinking_span_with(params: &ModelParams, model: &ProgressModel, tau3: f64, ceiling: f64) -> Result<Span> {
    if !(tau3 >= 0.0) {
        return Err(Error::NegativeTau(tau3));
    }
    let p = hail_mary_belief(params, model, tau3);
    if p >= 1.0 {
        return Err(Error::param("tau3", format!("q({tau3}) = 1 leaves no thinking period")));
    }
    if preference_slope(params, model, 0.0, p, tau3) <= 0.0 {
        return Ok(Span::Finite(0.0));
    }
    let mu = params.mu;
    let n = 1024;
    let h = ceiling / n as f64;
    match slope_coefficients(params, model, p, tau3) {
        Some((a, b, nu)) => {
            let f = |t: f64| scaled_integral_closed(mu, a, b, nu, t);
            for i in 1..=n {
                let x = h * i as f64;
                if f(x) < 0.0 {
                    let r = find_root(f, h * (i - 1) as f64, x, ROOT_XTOL * 1e-2, 0.0)?;
                    return Ok(Span::Finite(r));
                }
            }
            Ok(Span::Infinite)
        }
        None => {
            // March the scaled integral e^{-mu x} yhat(x) cell by cell.
            let slope = |s: f64| preference_slope(params, model, s, p, tau3);
            let mut acc = 0.0;
            for i in 1..=n {
                let (x0, x1) = (h * (i - 1) as f64, h * i as f64);
                let cell = numerics::integrate(|s| (mu * (s - x1)).exp() * slope(s), x0, x1, QUAD_TOL)?;
                let next = (-mu * h).exp() * acc + cell.value;
                if next < 0.0 {
                    let base = acc;
                    let g = |x: f64| {
                        let part = numerics::integrate(|s| (mu * (s - x)).exp() * slope(s), x0, x, QUAD_TOL)
                            .map(|q| q.value)
                            .unwrap_or(f64::NAN);
                        (-mu * (x - x0)).exp() * base + part
                    };
                    let r = find_root(g, x0, x1, ROOT_XTOL * 1e-2, 0.0)?;
                    return Ok(Span::Finite(r));
                }
                acc = next;
            }
            Ok(Span::Infinite)
        }
    }
}

/// Length of the initial doing period that brings the belief from `p_bar`
/// down to `q(tau3)`.
pub fn initial_doing_span(params: &ModelParams, model: &ProgressModel, tau3: f64) -> Result<f64> {
    let q = hail_mary_belief(params, model, tau3);
    if q > params.p_bar * (1.0 + 1e-9) {
        return Err(Error::BeliefAboveStart { target: q, start: params.p_bar });
    }
    if q <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((odds_gap(params.p_bar, q) / params.lambda).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Favored {
    Think,
    Do,
}

/// A maximal run of remaining time on which one arm is favored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignInterval {
    pub start: f64,
    pub end: f64,
    pub favored: Favored,
}

/// Reconstructed relative preference along a schedule. All positions are in
/// remaining time, so `grid[0] = 0` is the deadline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchingDiagnostics {
    pub grid: Vec<f64>,
    pub y_values: Vec<f64>,
    pub sign_pattern: Vec<SignInterval>,
    /// Interpolated zeros of `y`.
    pub zeros: Vec<f64>,
    /// Sign of the second difference of `y` at thinking points, 0 elsewhere.
    pub concavity_flags: Vec<i8>,
}

/// Integrates the co-state from the deadline backward along `schedule` and
/// reconstructs the relative preference `y`.
pub fn switching_profile(params: &ModelParams, model: &ProgressModel, schedule: &PolicySchedule) -> Result<SwitchingDiagnostics> {
    let total = schedule.tau1 + schedule.tau2 + schedule.tau3;
    if (total - params.t).abs() > 1e-8 {
        return Err(Error::ScheduleMismatch(format!("periods sum to {total}, horizon is {}", params.t)));
    }
    let (t_end, t1, t2, t3) = (params.t, schedule.tau1, schedule.tau2, schedule.tau3);
    let (p_bar, lambda, mu, b, c) = (params.p_bar, params.lambda, params.mu, params.b, params.c);
    // Action and past doing time as functions of remaining time.
    let state = |tau: f64, seg: usize| -> (f64, f64) {
        match seg {
            0 => (1.0, t1 + t3 - tau),
            1 => (0.0, t1),
            _ => (1.0, t_end - tau),
        }
    };
    let seg_of = |tau: f64| if tau < t3 { 0 } else if tau < t3 + t2 { 1 } else { 2 };
    let rhs = |tau: f64, seg: usize| {
        let (a, big_a) = state(tau, seg);
        let w = (-mu * (t_end - tau - big_a)).exp();
        let v = model.v(tau);
        w * (mu * (1.0 - p_bar) * ((1.0 - a) * mu * v - c)
            - (lambda - mu) * (-lambda * big_a).exp() * p_bar * ((1.0 - a) * mu * v + a * lambda * b - c))
    };
    let y_of = |tau: f64, eta: f64| {
        let (_, big_a) = state(tau, seg_of(tau));
        let w = (-mu * (t_end - tau - big_a)).exp();
        let s = 1.0 - p_bar + p_bar * (-lambda * big_a).exp();
        let gamma = w * (s * mu * model.v(tau) - p_bar * (-lambda * big_a).exp() * lambda * b) - eta;
        gamma / (w * s)
    };
    // The right-hand side does not depend on eta, so each step is a
    // Simpson-weighted quadrature; steps are split at the switch points.
    let step = |from: f64, to: f64, seg: usize| {
        let h = to - from;
        h * (rhs(from, seg) + 4.0 * rhs(from + 0.5 * h, seg) + rhs(to, seg)) / 6.0
    };
    let n = 4096;
    let h = t_end / n as f64;
    let cuts = [t3, t3 + t2];
    let mut grid = Vec::with_capacity(n + 1);
    let mut y_values = Vec::with_capacity(n + 1);
    let mut eta = 0.0;
    for i in 0..=n {
        let tau = h * i as f64;
        grid.push(tau);
        y_values.push(y_of(tau, eta));
        if i == n {
            break;
        }
        let next = h * (i + 1) as f64;
        let mut from = tau;
        for &cut in &cuts {
            if cut > from && cut < next {
                eta += step(from, cut, seg_of(0.5 * (from + cut)));
                from = cut;
                // Switch points join the grid so zeros there are not smeared.
                grid.push(cut);
                y_values.push(y_of(cut, eta));
            }
        }
        eta += step(from, next, seg_of(0.5 * (from + next)));
    }
    if t_end == 0.0 {
        grid.truncate(1);
        y_values.truncate(1);
    }

    let mut zeros = Vec::new();
    for i in 1..grid.len() {
        let (y0, y1) = (y_values[i - 1], y_values[i]);
        if (y0 < 0.0) != (y1 < 0.0) {
            zeros.push(grid[i - 1] - y0 * (grid[i] - grid[i - 1]) / (y1 - y0));
        }
    }
    let mut sign_pattern: Vec<SignInterval> = Vec::new();
    let mut start = 0.0;
    let fav = |y: f64| if y > 0.0 { Favored::Think } else { Favored::Do };
    let mut cur = fav(y_values[0]);
    let mut zi = zeros.iter();
    for i in 1..grid.len() {
        let f = fav(y_values[i]);
        if f != cur {
            let z = zi.next().copied().unwrap_or(grid[i]);
            sign_pattern.push(SignInterval { start, end: z, favored: cur });
            start = z;
            cur = f;
        }
    }
    sign_pattern.push(SignInterval { start, end: t_end, favored: cur });

    let mut concavity_flags = vec![0i8; grid.len()];
    for i in 1..grid.len().saturating_sub(1) {
        let (lo, hi) = (grid[i - 1], grid[i + 1]);
        if lo > t3 && hi < t3 + t2 {
            let d2 = (y_values[i + 1] - y_values[i]) / (hi - grid[i]) - (y_values[i] - y_values[i - 1]) / (grid[i] - lo);
            concavity_flags[i] = if d2 < 0.0 { -1 } else if d2 > 0.0 { 1 } else { 0 };
        }
    }
    Ok(SwitchingDiagnostics { grid, y_values, sign_pattern, zeros, concavity_flags })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn base_set() -> (ModelParams, ProgressModel) {
        (ModelParams::new(0.75, 0.75, 1.0, 0.5, 5.0, 1.9).unwrap(), ProgressModel::safe(1.0, 5.0, 0.5))
    }

    #[test]
    fn known_arm_examples() {
        let (p, _) = base_set();
        assert_eq!(known_arm_value(&p, 0.0), 0.0);
        assert_abs_diff_eq!(known_arm_value(&p, 1.0), 2.2864, epsilon = 1e-4);
        assert_abs_diff_eq!(known_arm_value(&p, 200.0), 5.0 - 0.5 / 0.75, epsilon = 1e-12);
    }

    #[test]
    fn known_arm_matches_expected_value_integral() {
        // E[payoff] = int_0^tau e^{-lambda t} (lambda B - c) dt.
        let (p, _) = base_set();
        let q = numerics::integrate(|t| (-p.lambda * t).exp() * (p.lambda * p.b - p.c), 0.0, 1.0, 1e-13).unwrap();
        assert_abs_diff_eq!(known_arm_value(&p, 1.0), q.value, epsilon = 1e-12);
    }

    #[test]
    fn do_throughout_examples() {
        let (p, _) = base_set();
        assert_abs_diff_eq!(do_throughout_value(&p, 1.0, 1.3), known_arm_value(&p, 1.3), epsilon = 0.0);
        assert_abs_diff_eq!(do_throughout_value(&p, 0.75, 1.0), 1.5898, epsilon = 1e-4);
        let free = ModelParams { c: 0.0, ..p };
        assert_eq!(do_throughout_value(&free, 0.0, 2.0), 0.0);
    }

    #[test]
    fn hail_mary_belief_examples() {
        let (p, m) = base_set();
        assert_eq!(hail_mary_belief(&p, &m, 0.0), 0.0);
        assert_abs_diff_eq!(hail_mary_belief(&p, &m, 1.0), 0.6937, epsilon = 1e-3);
        assert_abs_diff_eq!(hail_mary_belief(&p, &m, 1.2), 0.7500, epsilon = 1e-3);
        assert!((q_hat(&p, &m, 1e3) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn hail_mary_time_examples() {
        let (p, m) = base_set();
        assert_abs_diff_eq!(hail_mary_time(&p, &m, 0.75).unwrap(), 1.200, epsilon = 1e-3);
        assert_abs_diff_eq!(hail_mary_time(&p, &m, 2.0 / 3.0).unwrap(), 0.920, epsilon = 2e-3);
        assert!(hail_mary_time(&p, &m, 1e-9).unwrap() < 1e-6);
    }

    #[test]
    fn slope_examples() {
        let (p, m) = base_set();
        assert_abs_diff_eq!(preference_slope(&p, &m, 0.0, 0.75, 1.2), 0.5305, epsilon = 1e-3);
        assert!(preference_slope(&p, &m, 2.5, 0.75, 1.2) < 0.0);
        let free = ModelParams { c: 0.0, ..p };
        let s = preference_slope(&free, &m, 0.4, 0.0, 1.0);
        assert_abs_diff_eq!(s, free.mu * m.v1(1.4), epsilon = 1e-15);
    }

    #[test]
    fn integral_closed_form_matches_quadrature() {
        let (p, m) = base_set();
        for &(tau, q, xi) in &[(0.7, 0.75, 1.2), (3.0, 0.6, 0.5), (5.0, 0.3, 2.0)] {
            let a = preference_integral(&p, &m, tau, q, xi).unwrap();
            let b = preference_integral_quadrature(&p, &m, tau, q, xi).unwrap();
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{a} vs {b}");
        }
        assert_eq!(preference_integral(&p, &m, 0.0, 0.75, 1.2).unwrap(), 0.0);
        assert!(preference_integral(&p, &m, 0.7, 0.75, 1.2).unwrap() > 0.0);
    }

    #[test]
    fn thinking_span_example() {
        let (p, m) = base_set();
        match thinking_span(&p, &m, 1.2).unwrap() {
            Span::Finite(x) => assert_abs_diff_eq!(x, 3.543, epsilon = 2e-3),
            Span::Infinite => panic!("expected a finite span"),
        }
    }

    #[test]
    fn thinking_span_quadrature_path_agrees() {
        // A tabulated copy of the closed form exercises the marching path.
        let (p, m) = base_set();
        let tau: Vec<f64> = (0..=4000).map(|i| i as f64 * 0.01).collect();
        let value: Vec<f64> = tau.iter().map(|&t| m.v(t)).collect();
        let tab = ProgressModel::Tabulated { tau, value };
        let a = thinking_span(&p, &m, 1.2).unwrap().as_f64();
        let b = thinking_span(&p, &tab, 1.2).unwrap().as_f64();
        assert!((a - b).abs() < 1e-3, "{a} vs {b}");
    }

    #[test]
    fn thinking_span_rejects_certain_belief() {
        let (p, _) = base_set();
        // A huge value of progress pushes q to one.
        let m = ProgressModel::PayoffStream { nu: 5.0, b_nu: 50.0 };
        assert!(thinking_span(&p, &m, 3.0).is_err());
    }

    #[test]
    fn initial_doing_examples() {
        let (p, m) = base_set();
        let t3 = hail_mary_time(&p, &m, 0.75).unwrap();
        assert_abs_diff_eq!(initial_doing_span(&p, &m, t3).unwrap(), 0.0, epsilon = 1e-8);
        let t3 = hail_mary_time(&p, &m, 2.0 / 3.0).unwrap();
        let want = crate::model::doing_time_to_reach(0.75, 0.75, 2.0 / 3.0).unwrap();
        assert_abs_diff_eq!(initial_doing_span(&p, &m, t3).unwrap(), want, epsilon = 1e-8);
        assert!(initial_doing_span(&p, &m, 2.0).is_err());
    }
}
