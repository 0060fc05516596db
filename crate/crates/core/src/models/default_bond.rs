//! A defaultable bond hedged with a stock that jumps to zero at default.
//!
//! `F(t; q)` solves a backward ODE with `F(T; q) = e^{-a q}`; the solver
//! works with `G = ln F`, which stays finite where `F` under- or
//! overflows for large positions:
//!
//! `G' = lambda_n + mu^2 / (2 sigma^2) - sigma^2 phi^2 / 2 - w e^{-phi}`,
//! `w = lambda_n e^{mu / sigma^2} e^{-G}`,
//!
//! with `phi` the root of `phi e^phi = w` (or `w / sigma^2`, see
//! [`FixedPoint`]).

use serde::{Deserialize, Serialize};

use crate::curve::{Bound, EvalMode, Extent, LimitCurve, MarketSequenceModel, PriceCurve, PriceEval};
use crate::error::{Error, Result};
use crate::numerics::{rk4_integrate, solve_x_exp_x_log};
use crate::schedule::{RateSchedule, RiskAversionSchedule, Schedule, Schedules};

/// Step of the centered difference giving the price at `q = 0`.
const MARGINAL_STEP: f64 = 1e-4;

/// Which equation determines the minimizing `phi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedPoint {
    /// `phi e^phi = lambda_n e^{mu / sigma^2} / F`
    #[default]
    AsPrinted,
    /// `phi e^phi = lambda_n e^{mu / sigma^2} / (sigma^2 F)`, the first-order
    /// condition of the minimization.
    FirstOrder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefaultBondParams {
    pub mu: f64,
    pub sigma: f64,
    /// `-ln lambda_n`, so intensities far below the smallest double stay
    /// representable; this is also the natural rate `r_n`.
    pub neg_log_lambda: Schedule,
    pub maturity: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default)]
    pub fixed_point: FixedPoint,
}

fn default_steps() -> usize {
    1000
}

impl DefaultBondParams {
    pub fn new(mu: f64, sigma: f64, neg_log_lambda: Schedule, maturity: f64) -> Self {
        DefaultBondParams {
            mu,
            sigma,
            neg_log_lambda,
            maturity,
            steps: default_steps(),
            fixed_point: FixedPoint::AsPrinted,
        }
    }

    /// Intensities given directly as `lambda_n`.
    pub fn from_intensities(mu: f64, sigma: f64, lambdas: &[(u64, f64)], maturity: f64) -> Self {
        Self::new(mu, sigma, Schedule::explicit(lambdas.iter().map(|&(n, l)| (n, -l.ln()))), maturity)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(Error::Domain(format!("volatility {} is not positive", self.sigma)));
        }
        if !(self.maturity > 0.0) {
            return Err(Error::Domain(format!("maturity {} is not positive", self.maturity)));
        }
        if !self.mu.is_finite() {
            return Err(Error::Domain("drift is not finite".into()));
        }
        Ok(())
    }

    /// `-ln lambda_n`.
    pub fn neg_log_lambda(&self, n: u64) -> Result<f64> {
        self.neg_log_lambda.eval(n)
    }

    pub fn lambda(&self, n: u64) -> Result<f64> {
        Ok((-self.neg_log_lambda(n)?).exp())
    }
}

/// `ln F^n(0; q)` with `steps` backward RK4 steps from `T`.
pub fn default_bond_log_f(p: &DefaultBondParams, n: u64, a: f64, q: f64, steps: usize) -> Result<f64> {
    p.validate()?;
    if steps < 100 {
        return Err(Error::Domain(format!("step count {steps} below 100")));
    }
    let m = p.neg_log_lambda(n)?;
    let lambda = (-m).exp();
    let s2 = p.sigma * p.sigma;
    let base = lambda + p.mu * p.mu / (2.0 * s2);
    let log_w0 = -m + p.mu / s2;
    let shift = match p.fixed_point {
        FixedPoint::AsPrinted => 0.0,
        FixedPoint::FirstOrder => s2.ln(),
    };
    let rhs = |t: f64, g: f64| -> Result<f64> {
        if !g.is_finite() {
            return Err(Error::PositivityLost { t });
        }
        let log_w = log_w0 - g;
        let phi = solve_x_exp_x_log(log_w - shift)?;
        // w e^{-phi} in logs, finite even when w overflows
        let jump = (log_w - phi).exp();
        Ok(base - 0.5 * s2 * phi * phi - jump)
    };
    let g0 = rk4_integrate(rhs, p.maturity, 0.0, -a * q, steps)?;
    if g0.is_finite() {
        Ok(g0)
    } else {
        Err(Error::PositivityLost { t: 0.0 })
    }
}

/// `F^n(0; q)`; positive by construction, but may underflow or overflow
/// a double for large `|a q|` (use [`default_bond_log_f`] there).
pub fn default_bond_f(p: &DefaultBondParams, n: u64, a: f64, q: f64, steps: usize) -> Result<f64> {
    let f = default_bond_log_f(p, n, a, q, steps)?.exp();
    if f > 0.0 {
        Ok(f)
    } else {
        Err(Error::PositivityLost { t: 0.0 })
    }
}

/// `-(1/(a q)) ln(F(0; q) / F(0; 0))`; at `q = 0` a centered difference
/// of `ln F` in `q`.
pub fn default_bond_price(p: &DefaultBondParams, n: u64, a: f64, q: f64) -> Result<f64> {
    let g_zero = default_bond_log_f(p, n, a, 0.0, p.steps)?;
    price_from(p, n, a, q, g_zero)
}

fn price_from(p: &DefaultBondParams, n: u64, a: f64, q: f64, g_zero: f64) -> Result<f64> {
    if q == 0.0 {
        let h = MARGINAL_STEP;
        let up = default_bond_log_f(p, n, a, h, p.steps)?;
        let down = default_bond_log_f(p, n, a, -h, p.steps)?;
        return Ok(-(up - down) / (2.0 * a * h));
    }
    let g = default_bond_log_f(p, n, a, q, p.steps)?;
    Ok(-(g - g_zero) / (a * q))
}

/// Limit `p_inf = 1` for `ell < 1 / a`.
pub fn default_bond_limit_curve(a: f64) -> LimitCurve {
    LimitCurve::new(1.0, Extent::Infinite, Extent::Finite(1.0 / a), |_| Ok(1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DefaultBondModel {
    pub params: DefaultBondParams,
}

impl DefaultBondModel {
    pub fn new(params: DefaultBondParams) -> Self {
        DefaultBondModel { params }
    }
}

impl MarketSequenceModel for DefaultBondModel {
    fn name(&self) -> &'static str {
        "default_bond"
    }

    fn curve(&self, n: u64, a: f64) -> Result<PriceCurve> {
        let p = self.params.clone();
        if !(a > 0.0) {
            return Err(Error::Domain(format!("risk aversion {a} is not positive")));
        }
        let g_zero = default_bond_log_f(&p, n, a, 0.0, p.steps)?;
        PriceCurve::new(n, a, EvalMode::Ode, Bound::Finite(0.0), Bound::Finite(1.0), move |q| {
            price_from(&p, n, a, q, g_zero).map(PriceEval::exact)
        })
        .map(|c| c.with_tolerance(1e-9))
    }

    /// Unit risk aversion and `r_n = -ln lambda_n`.
    fn default_schedules(&self) -> Schedules {
        Schedules::new(
            RiskAversionSchedule::constant(1.0),
            RateSchedule::new(self.params.neg_log_lambda.clone()),
        )
    }

    fn eval_mode(&self) -> EvalMode {
        EvalMode::Ode
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(lambda: f64) -> DefaultBondParams {
        DefaultBondParams::from_intensities(0.05, 0.2, &[(1, lambda)], 1.0)
    }

    #[test]
    fn terminal_condition() {
        // a zero-length horizon leaves G at its terminal value
        let mut p = params(0.01);
        p.maturity = 1e-300;
        let g = default_bond_log_f(&p, 1, 1.3, 2.0, 100).unwrap();
        assert!((g + 2.6).abs() < 1e-12);
        assert!((default_bond_f(&p, 1, 5.0, 0.0, 100).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn step_refinement() {
        let p = params(0.01);
        let coarse = default_bond_f(&p, 1, 1.0, 1.0, 1000).unwrap();
        let fine = default_bond_f(&p, 1, 1.0, 1.0, 10_000).unwrap();
        assert!((coarse - fine).abs() < 1e-8);
    }

    #[test]
    fn fourth_order_convergence() {
        let p = params(0.5);
        let exact = default_bond_log_f(&p, 1, 1.0, 3.0, 20_000).unwrap();
        let e1 = (default_bond_log_f(&p, 1, 1.0, 3.0, 100).unwrap() - exact).abs();
        let e2 = (default_bond_log_f(&p, 1, 1.0, 3.0, 200).unwrap() - exact).abs();
        let order = (e1 / e2).log2();
        assert!(order > 3.5, "order {order}");
    }

    #[test]
    fn price_inside_unit_interval_and_decreasing() {
        let m = DefaultBondModel::new(params(0.01));
        let c = m.curve(1, 1.0).unwrap();
        let mut prev = f64::INFINITY;
        for q in [-20.0, -2.0, -0.1, 0.0, 0.1, 1.0, 5.0, 50.0] {
            let v = c.price(q).unwrap();
            assert!(v > 0.0 && v < 1.0, "q = {q}: {v}");
            assert!(v <= prev + 1e-10, "q = {q}");
            prev = v;
        }
    }

    #[test]
    fn first_order_variant_differs() {
        let mut p = params(0.01);
        let a = default_bond_price(&p, 1, 1.0, 2.0).unwrap();
        p.fixed_point = FixedPoint::FirstOrder;
        let b = default_bond_price(&p, 1, 1.0, 2.0).unwrap();
        assert!(b > 0.0 && b < 1.0);
        assert!((a - b).abs() > 1e-6);
    }

    #[test]
    fn tiny_intensities_stay_finite() {
        let p = DefaultBondParams::new(0.05, 0.2, Schedule::constant(400.0 * 10f64.ln()), 1.0);
        let r = p.neg_log_lambda(1).unwrap();
        // the exact price is within rounding of 1 here
        let v = default_bond_price(&p, 1, 1.0, 0.5 * r).unwrap();
        assert!(v > 0.0 && v <= 1.0 + 1e-12, "{v}");
        let beyond = default_bond_price(&p, 1, 1.0, 1.5 * r).unwrap();
        assert!(beyond > 0.0 && beyond < 1.0, "{beyond}");
    }
}
