//! Probability objects for the variant in which progress is not observed:
//! thinking yields a solution only after an unseen progress arrival (rate
//! `mu`) followed by an unseen conversion (rate `nu`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoFeedbackModel {
    pub mu: f64,
    pub nu: f64,
    #[serde(rename = "B", alias = "b")]
    pub b: f64,
    pub c: f64,
    pub p_bar: f64,
    pub lambda: f64,
    /// Allow `mu == nu` via the Erlang limit formulas.
    #[serde(default)]
    pub limit_mode: bool,
}

/// Relative gap below which `mu` and `nu` are treated as equal in limit mode.
const LIMIT_GAP: f64 = 1e-9;

impl NoFeedbackModel {
    pub fn check(&self) -> Result<()> {
        for (name, x) in [("mu", self.mu), ("nu", self.nu), ("B", self.b), ("lambda", self.lambda)] {
            if !(x > 0.0 && x.is_finite()) {
                return Err(Error::param(name, format!("must be finite and > 0, got {x}")));
            }
        }
        if !(self.c >= 0.0) {
            return Err(Error::param("c", format!("must be >= 0, got {}", self.c)));
        }
        if !(self.p_bar > 0.0 && self.p_bar < 1.0) {
            return Err(Error::param("p_bar", format!("must lie in (0, 1), got {}", self.p_bar)));
        }
        if self.equal_rates() && !self.limit_mode {
            return Err(Error::param("nu", "mu == nu requires limit_mode"));
        }
        Ok(())
    }

    fn equal_rates(&self) -> bool {
        (self.mu - self.nu).abs() <= LIMIT_GAP * self.mu.max(self.nu)
    }

    fn use_limit(&self) -> bool {
        self.limit_mode && self.equal_rates()
    }

    /// `F(A)`: probability that thinking for `A` has produced a solution.
    pub fn no_solution_prob(&self, a: f64) -> f64 {
        let (mu, nu) = (self.mu, self.nu);
        if self.use_limit() {
            return 1.0 - (1.0 + mu * a) * (-mu * a).exp();
        }
        1.0 - (mu * (-nu * a).exp() - nu * (-mu * a).exp()) / (mu - nu)
    }

    /// `f(A) = dF/dA`, the unconditional density of the solution time.
    pub fn solution_density(&self, a: f64) -> f64 {
        let (mu, nu) = (self.mu, self.nu);
        if self.use_limit() {
            return mu * mu * a * (-mu * a).exp();
        }
        ((-nu * a).exp() - (-mu * a).exp()) * mu * nu / (mu - nu)
    }

    /// Probability of unobserved progress given no solution after `A`.
    pub fn progress_given_no_solution(&self, a: f64) -> f64 {
        let (mu, nu) = (self.mu, self.nu);
        if self.use_limit() {
            return mu * a / (1.0 + mu * a);
        }
        let d = mu - nu;
        if d > 0.0 {
            let e = (-d * a).exp();
            1.0 - d * e / (mu - nu * e)
        } else {
            let e = (d * a).exp();
            mu * -(d * a).exp_m1() / (nu - mu * e)
        }
    }

    /// Unconditional density of a doing success after `A` units of doing.
    pub fn doing_density(&self, a: f64) -> f64 {
        self.lambda * self.p_bar * (-self.lambda * a).exp()
    }
}

pub fn no_solution_prob(nf: &NoFeedbackModel, a: f64) -> Result<f64> {
    nf.check()?;
    nonneg(a)?;
    Ok(nf.no_solution_prob(a))
}

pub fn solution_density(nf: &NoFeedbackModel, a: f64) -> Result<f64> {
    nf.check()?;
    nonneg(a)?;
    Ok(nf.solution_density(a))
}

pub fn progress_given_no_solution(nf: &NoFeedbackModel, a: f64) -> Result<f64> {
    nf.check()?;
    nonneg(a)?;
    Ok(nf.progress_given_no_solution(a))
}

pub fn doing_density(nf: &NoFeedbackModel, a: f64) -> Result<f64> {
    nf.check()?;
    nonneg(a)?;
    Ok(nf.doing_density(a))
}

fn nonneg(a: f64) -> Result<()> {
    if a >= 0.0 && a.is_finite() {
        Ok(())
    } else {
        Err(Error::NegativeTau(a))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn nf(mu: f64, nu: f64) -> NoFeedbackModel {
        NoFeedbackModel { mu, nu, b: 5.0, c: 0.5, p_bar: 0.75, lambda: 0.75, limit_mode: true }
    }

    #[test]
    fn distribution_examples() {
        let m = nf(1.0, 0.5);
        assert_eq!(no_solution_prob(&m, 0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(no_solution_prob(&m, 1.0).unwrap(), 0.1548, epsilon = 1e-4);
        assert_abs_diff_eq!(no_solution_prob(&nf(1.0, 1.0), 1.0).unwrap(), 1.0 - 2.0 / std::f64::consts::E, epsilon = 1e-12);
    }

    #[test]
    fn density_examples() {
        let m = nf(1.0, 0.5);
        assert_eq!(solution_density(&m, 0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(solution_density(&m, 1.0).unwrap(), 0.2387, epsilon = 1e-4);
        let total = crate::numerics::integrate_to_infinity(|a| m.solution_density(a), 0.0, 1e-10).unwrap();
        assert_abs_diff_eq!(total.value, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn progress_examples() {
        let m = nf(1.0, 0.5);
        assert_eq!(progress_given_no_solution(&m, 0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(progress_given_no_solution(&m, 1.0).unwrap(), 0.5647, epsilon = 1e-4);
        for a in [0.5, 1.0, 2.0] {
            let lhs = m.solution_density(a);
            let rhs = m.nu * m.progress_given_no_solution(a) * (1.0 - m.no_solution_prob(a));
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-10);
        }
    }

    #[test]
    fn doing_density_examples() {
        let m = nf(1.0, 0.5);
        assert_abs_diff_eq!(doing_density(&m, 0.0).unwrap(), 0.75 * 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(doing_density(&m, 1.0).unwrap(), 0.2657, epsilon = 1e-4);
        assert!(doing_density(&m, 1e3).unwrap() < 1e-300);
    }

    #[test]
    fn equal_rates_need_limit_mode() {
        let m = NoFeedbackModel { limit_mode: false, ..nf(1.0, 1.0) };
        assert!(m.check().is_err());
    }

    #[test]
    fn limit_is_continuous() {
        let exact = nf(1.0, 1.0);
        let near = nf(1.0, 1.0 + 1e-6);
        for a in [0.1, 1.0, 3.0] {
            assert_abs_diff_eq!(exact.no_solution_prob(a), near.no_solution_prob(a), epsilon = 1e-6);
            assert_abs_diff_eq!(exact.solution_density(a), near.solution_density(a), epsilon = 1e-6);
            assert_abs_diff_eq!(exact.progress_given_no_solution(a), near.progress_given_no_solution(a), epsilon = 1e-6);
        }
    }
}
