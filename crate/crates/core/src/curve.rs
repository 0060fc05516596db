//! Price curves, limit curves and the market-sequence interface every
//! concrete model implements.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schedule::Schedules;

/// One side of the arbitrage-free interval. An unbounded lower side means
/// `-inf`, an unbounded upper side `+inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    Finite(f64),
    Unbounded,
}

impl Bound {
    pub fn finite(&self) -> Option<f64> {
        match self {
            Bound::Finite(x) => Some(*x),
            Bound::Unbounded => None,
        }
    }
}

/// How a curve produces its values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    ClosedForm,
    Quadrature,
    MonteCarlo,
    Ode,
    PdeLimit,
}

impl EvalMode {
    pub fn is_stochastic(self) -> bool {
        matches!(self, EvalMode::MonteCarlo)
    }
}

/// A single price evaluation, with a standard error for stochastic curves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceEval {
    pub value: f64,
    pub stderr: Option<f64>,
}

impl PriceEval {
    pub fn exact(value: f64) -> Self {
        PriceEval {
            value,
            stderr: None,
        }
    }

    pub fn with_stderr(value: f64, stderr: f64) -> Self {
        PriceEval {
            value,
            stderr: Some(stderr),
        }
    }

    pub fn stderr_or_zero(&self) -> f64 {
        self.stderr.unwrap_or(0.0)
    }
}

type PriceFn = dyn Fn(f64) -> Result<PriceEval> + Send + Sync;

/// Average (bid) indifference price `q -> p^n_a(q)` of market `n` at risk
/// aversion `a`, evaluated lazily.
#[derive(Clone)]
pub struct PriceCurve {
    n: u64,
    a: f64,
    d_n: PriceEval,
    lower: Bound,
    upper: Bound,
    mode: EvalMode,
    tolerance: f64,
    price: Arc<PriceFn>,
}

impl fmt::Debug for PriceCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PriceCurve")
            .field("n", &self.n)
            .field("a", &self.a)
            .field("d_n", &self.d_n)
            .field("lower", &self.lower)
            .field("upper", &self.upper)
            .field("mode", &self.mode)
            .finish()
    }
}

impl PriceCurve {
    /// Builds a curve from its price function. `d_n` is evaluated eagerly.
    pub fn new<F>(n: u64, a: f64, mode: EvalMode, lower: Bound, upper: Bound, price: F) -> Result<Self>
    where
        F: Fn(f64) -> Result<PriceEval> + Send + Sync + 'static,
    {
        if !(a > 0.0) {
            return Err(Error::Domain(format!("risk aversion {a} is not positive")));
        }
        let d_n = price(0.0)?;
        Ok(PriceCurve {
            n,
            a,
            d_n,
            lower,
            upper,
            mode,
            tolerance: 1e-10,
            price: Arc::new(price),
        })
    }

    /// Declared numerical tolerance of the evaluator (deterministic curves).
    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn risk_aversion(&self) -> f64 {
        self.a
    }

    pub fn mode(&self) -> EvalMode {
        self.mode
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn lower_bound(&self) -> Bound {
        self.lower
    }

    pub fn upper_bound(&self) -> Bound {
        self.upper
    }

    /// Price at `q = 0`.
    pub fn d_n(&self) -> f64 {
        self.d_n.value
    }

    pub fn d_n_eval(&self) -> PriceEval {
        self.d_n
    }

    pub fn eval(&self, q: f64) -> Result<PriceEval> {
        if !q.is_finite() {
            return Err(Error::Domain(format!("position {q} is not finite")));
        }
        if q == 0.0 {
            return Ok(self.d_n);
        }
        (self.price)(q)
    }

    pub fn price(&self, q: f64) -> Result<f64> {
        self.eval(q).map(|e| e.value)
    }

    /// Whether `p` lies strictly inside the arbitrage-free interval.
    pub fn contains_price(&self, p: f64) -> bool {
        let above = self.lower.finite().is_none_or(|lo| p > lo);
        let below = self.upper.finite().is_none_or(|hi| p < hi);
        above && below
    }
}

/// Total price `q * p(q)`; zero at `q = 0`.
pub fn total_price(curve: &PriceCurve, q: f64) -> Result<f64> {
    if q == 0.0 {
        return Ok(0.0);
    }
    Ok(q * curve.price(q)?)
}

/// Extent of the convergence range `(delta_-, delta_+)` on one side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extent {
    Finite(f64),
    Infinite,
}

impl Extent {
    pub fn as_f64(&self, sign: f64) -> f64 {
        match self {
            Extent::Finite(x) => *x,
            Extent::Infinite => sign * f64::INFINITY,
        }
    }
}

/// Bid curves are non-increasing in the scaled position; ask curves (a
/// seller's price per unit sold) are non-decreasing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Bid,
    Ask,
}

type LimitFn = dyn Fn(f64) -> Result<f64> + Send + Sync;

/// Limiting scaled price `ell -> p_inf(ell)` on `(delta_-, delta_+)`.
#[derive(Clone)]
pub struct LimitCurve {
    d: f64,
    delta_minus: Extent,
    delta_plus: Extent,
    orientation: Orientation,
    limit_at_infinity: Option<f64>,
    eval: Arc<LimitFn>,
}

impl fmt::Debug for LimitCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LimitCurve")
            .field("d", &self.d)
            .field("delta_minus", &self.delta_minus)
            .field("delta_plus", &self.delta_plus)
            .field("orientation", &self.orientation)
            .finish()
    }
}

impl LimitCurve {
    pub fn new<F>(d: f64, delta_minus: Extent, delta_plus: Extent, eval: F) -> Self
    where
        F: Fn(f64) -> Result<f64> + Send + Sync + 'static,
    {
        LimitCurve {
            d,
            delta_minus,
            delta_plus,
            orientation: Orientation::Bid,
            limit_at_infinity: None,
            eval: Arc::new(eval),
        }
    }

    pub fn with_orientation(mut self, orientation: Orientation) -> Self {
        self.orientation = orientation;
        self
    }

    /// Records the value the curve approaches as `ell -> +inf`.
    pub fn with_limit_at_infinity(mut self, value: f64) -> Self {
        self.limit_at_infinity = Some(value);
        self
    }

    pub fn limit_at_infinity(&self) -> Option<f64> {
        self.limit_at_infinity
    }

    /// `p_inf(0)`.
    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn delta_minus(&self) -> Extent {
        self.delta_minus
    }

    pub fn delta_plus(&self) -> Extent {
        self.delta_plus
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    /// Whether `ell` lies in `(delta_-, delta_+)`.
    pub fn in_domain(&self, ell: f64) -> bool {
        ell > self.delta_minus.as_f64(-1.0) && ell < self.delta_plus.as_f64(1.0)
    }

    pub fn eval(&self, ell: f64) -> Result<f64> {
        if ell == 0.0 {
            return Ok(self.d);
        }
        (self.eval)(ell)
    }
}

/// Declared valid index range of a market sequence (inclusive).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexRange {
    pub lo: u64,
    pub hi: u64,
}

impl IndexRange {
    pub fn all() -> Self {
        IndexRange { lo: 1, hi: u64::MAX }
    }

    pub fn check(&self, n: u64) -> Result<()> {
        if n >= self.lo && n <= self.hi {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                n,
                lo: self.lo,
                hi: self.hi,
            })
        }
    }
}

/// A parameterized sequence of incomplete markets `n -> S^n`.
pub trait MarketSequenceModel: Send + Sync {
    fn name(&self) -> &'static str;

    fn index_range(&self) -> IndexRange {
        IndexRange::all()
    }

    /// Price curve of market `n` at risk aversion `a`.
    fn curve(&self, n: u64, a: f64) -> Result<PriceCurve>;

    fn default_schedules(&self) -> Schedules;

    fn eval_mode(&self) -> EvalMode;
}

/// Difference `p^n_a(q) - p^n_1(a q)` and its combined standard error.
pub fn ra_switch_gap(model: &dyn MarketSequenceModel, n: u64, a: f64, q: f64) -> Result<(f64, f64)> {
    model.index_range().check(n)?;
    let lhs = model.curve(n, a)?.eval(q)?;
    let rhs = model.curve(n, 1.0)?.eval(a * q)?;
    let se = lhs.stderr_or_zero().hypot(rhs.stderr_or_zero());
    Ok((lhs.value - rhs.value, se))
}

/// Checks the risk-aversion switch `p^n_a(q) = p^n_1(a q)` at tolerance
/// `tol`. Monte Carlo models need `tol >= 3 * stderr`.
pub fn verify_ra_switch(model: &dyn MarketSequenceModel, n: u64, a: f64, q: f64, tol: f64) -> Result<bool> {
    if q == 0.0 {
        return Err(Error::Domain("risk-aversion switch needs q != 0".into()));
    }
    let (gap, se) = ra_switch_gap(model, n, a, q)?;
    if model.eval_mode().is_stochastic() && tol < 3.0 * se {
        return Err(Error::Domain(format!(
            "tolerance {tol} below three standard errors ({})",
            3.0 * se
        )));
    }
    Ok(gap.abs() <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_curve() -> PriceCurve {
        PriceCurve::new(1, 1.0, EvalMode::ClosedForm, Bound::Unbounded, Bound::Unbounded, |q| {
            Ok(PriceEval::exact(1.0 - 0.05 * q))
        })
        .unwrap()
    }

    #[test]
    fn total_price_examples() {
        let c = linear_curve();
        assert_eq!(total_price(&c, 0.0).unwrap(), 0.0);
        assert!((total_price(&c, 2.0).unwrap() - 1.8).abs() < 1e-15);
        assert!((total_price(&c, -1.0).unwrap() + 1.05).abs() < 1e-15);
    }

    #[test]
    fn bounds_membership() {
        let c = PriceCurve::new(1, 1.0, EvalMode::Ode, Bound::Finite(0.0), Bound::Finite(1.0), |_| {
            Ok(PriceEval::exact(0.5))
        })
        .unwrap();
        assert!(c.contains_price(0.3));
        assert!(!c.contains_price(1.0));
        assert!(!c.contains_price(-0.1));
        assert!(linear_curve().contains_price(1e9));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(PriceCurve::new(1, 0.0, EvalMode::ClosedForm, Bound::Unbounded, Bound::Unbounded, |_| {
            Ok(PriceEval::exact(0.0))
        })
        .is_err());
        assert!(linear_curve().price(f64::NAN).is_err());
        assert!(IndexRange { lo: 2, hi: 5 }.check(6).is_err());
    }

    #[test]
    fn limit_curve_domain() {
        let lc = LimitCurve::new(1.0, Extent::Infinite, Extent::Finite(1.0), |l| Ok(1.0 - l));
        assert!(lc.in_domain(-1e6));
        assert!(!lc.in_domain(1.0));
        assert_eq!(lc.eval(0.0).unwrap(), 1.0);
    }
}
