//! Adaptive Gauss-Kronrod quadrature and bracketing root search.
//!
//! Both are small and self-contained so that every numeric tolerance used by
//! the solver is visible in one place.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Default absolute tolerance for quadrature.
pub const QUAD_TOL: f64 = 1e-10;
/// Default tolerance on the abscissa for root searches.
pub const ROOT_XTOL: f64 = 1e-9;
/// Default tolerance on the function value for root searches.
pub const ROOT_FTOL: f64 = 1e-12;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
// Gauss weights at XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_INTERVALS: usize = 4000;

/// Result of a quadrature call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad {
    pub value: f64,
    pub error: f64,
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for i in 0..7 {
        let dx = h * XGK[i];
        let s = f(c - dx) + f(c + dx);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

struct Seg {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Seg {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Seg {}
impl PartialOrd for Seg {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Seg {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Integrates `f` over `[a, b]` to absolute tolerance `tol` by globally
/// adaptive 15-point Gauss-Kronrod bisection.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> Result<Quad> {
    if a == b {
        return Ok(Quad { value: 0.0, error: 0.0 });
    }
    if b < a {
        let q = integrate(f, b, a, tol)?;
        return Ok(Quad { value: -q.value, error: q.error });
    }
    let (v, e) = gk15(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Seg { a, b, value: v, error: e });
    let mut total = v;
    let mut err = e;
    while err > tol {
        if heap.len() >= MAX_INTERVALS {
            return Err(Error::Quadrature { estimate: err, tol });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval cannot be split further in floating point.
            return Err(Error::Quadrature { estimate: err, tol });
        }
        let (v1, e1) = gk15(&mut f, worst.a, mid);
        let (v2, e2) = gk15(&mut f, mid, worst.b);
        total += v1 + v2 - worst.value;
        err += e1 + e2 - worst.error;
        heap.push(Seg { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Seg { a: mid, b: worst.b, value: v2, error: e2 });
        // Re-sum occasionally to keep the running totals honest.
        if heap.len() % 64 == 0 {
            total = heap.iter().map(|s| s.value).sum();
            err = heap.iter().map(|s| s.error).sum();
        }
    }
    Ok(Quad { value: total, error: err })
}

/// Integrates `f` over `[a, inf)` via the map `x = a + t / (1 - t)`.
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(mut f: F, a: f64, tol: f64) -> Result<Quad> {
    integrate(
        |t| {
            let s = 1.0 - t;
            f(a + t / s) / (s * s)
        },
        0.0,
        1.0,
        tol,
    )
}

/// Finds a zero of `f` inside `[lo, hi]`, where the endpoint values have
/// opposite signs (or one of them is zero).
///
/// Regula falsi with the Illinois correction, falling back to plain
/// bisection whenever an iteration fails to halve the bracket.
pub fn find_root<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, xtol: f64, ftol: f64) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !(fa.is_finite() && fb.is_finite()) || fa.signum() == fb.signum() {
        return Err(Error::Bracket { lo, hi, g_lo: fa, g_hi: fb });
    }
    let mut side = 0i8;
    let mut width = (b - a).abs();
    for _ in 0..300 {
        let secant = b - fb * (b - a) / (fb - fa);
        let mid = 0.5 * (a + b);
        let inside = secant.is_finite() && secant > a.min(b) && secant < a.max(b);
        let x = if inside { secant } else { mid };
        let fx = f(x);
        if fx.abs() <= ftol {
            return Ok(x);
        }
        if fx.signum() == fb.signum() {
            b = x;
            fb = fx;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        } else {
            a = x;
            fa = fx;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        }
        let w = (b - a).abs();
        if w <= xtol {
            return Ok(if fa.abs() < fb.abs() { a } else { b });
        }
        if w > 0.5 * width {
            // Poor progress: force a bisection step.
            let m = 0.5 * (a + b);
            let fm = f(m);
            if fm.abs() <= ftol {
                return Ok(m);
            }
            if fm.signum() == fb.signum() {
                b = m;
                fb = fm;
            } else {
                a = m;
                fa = fm;
            }
            side = 0;
        }
        width = (b - a).abs();
        if width <= xtol {
            return Ok(if fa.abs() < fb.abs() { a } else { b });
        }
    }
    Ok(0.5 * (a + b))
}

/// Bisection on a monotone predicate: returns (approximately) the largest
/// `x` in `[lo, hi]` with `ok(x)`, assuming `ok(lo)` holds and the true set is
/// an interval starting at `lo`.
pub fn largest_feasible<F: FnMut(f64) -> bool>(mut ok: F, lo: f64, hi: f64, xtol: f64) -> f64 {
    if ok(hi) {
        return hi;
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > xtol {
        let m = 0.5 * (a + b);
        if ok(m) {
            a = m;
        } else {
            b = m;
        }
    }
    a
}

/// Golden-section minimization on `[a, b]`; returns `(argmin, min)`.
pub fn golden_min<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, xtol: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > xtol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// `(e^{r t} - 1) / r`, continuous through `r = 0`.
pub fn exp_ratio(r: f64, t: f64) -> f64 {
    let x = r * t;
    if x.abs() < 1e-8 {
        t * (1.0 + 0.5 * x)
    } else {
        x.exp_m1() / r
    }
}
