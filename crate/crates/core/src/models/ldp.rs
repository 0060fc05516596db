//! Limit prices from a large-deviation rate function of the residual:
//! `p_inf(ell) = d - (1/(a ell)) sup_y (-ell a y - I(y))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::minimize_unimodal;

/// Points of the fallback scan for rate functions not known to be convex.
const SCAN_POINTS: usize = 20_001;

/// A rate function `I >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RateFunction {
    /// `y^2 / (2 variance)`, the Gaussian rate function.
    Quadratic { variance: f64 },
    /// `slope * |y|`; the supremum is infinite once `|a ell| > slope`.
    Absolute { slope: f64 },
    /// Piecewise linear through `(y, I(y))`, `+inf` outside the table.
    Tabulated { points: Vec<(f64, f64)> },
}

impl RateFunction {
    pub fn quadratic(variance: f64) -> Self {
        RateFunction::Quadratic { variance }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            RateFunction::Quadratic { variance } if *variance > 0.0 => Ok(()),
            RateFunction::Quadratic { variance } => {
                Err(Error::Domain(format!("rate function variance {variance} is not positive")))
            }
            RateFunction::Absolute { slope } if *slope > 0.0 => Ok(()),
            RateFunction::Absolute { slope } => Err(Error::Domain(format!("rate function slope {slope} is not positive"))),
            RateFunction::Tabulated { points } => {
                if points.len() < 2 || points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                    return Err(Error::Domain("tabulated rate function needs increasing abscissae".into()));
                }
                if points.iter().any(|&(y, v)| !y.is_finite() || !(v >= 0.0)) {
                    return Err(Error::Domain("rate function values must be finite and >= 0".into()));
                }
                if !points.iter().any(|&(_, v)| v == 0.0) {
                    return Err(Error::Domain("rate function never vanishes".into()));
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, y: f64) -> f64 {
        match self {
            RateFunction::Quadratic { variance } => y * y / (2.0 * variance),
            RateFunction::Absolute { slope } => slope * y.abs(),
            RateFunction::Tabulated { points } => {
                let (first, last) = (points[0], points[points.len() - 1]);
                if y < first.0 || y > last.0 {
                    return f64::INFINITY;
                }
                let i = points.partition_point(|p| p.0 <= y).clamp(1, points.len() - 1);
                let (p0, p1) = (points[i - 1], points[i]);
                p0.1 + (p1.1 - p0.1) * (y - p0.0) / (p1.0 - p0.0)
            }
        }
    }

    /// Interval `[lo, hi]` on which `I` vanishes.
    pub fn zero_set(&self) -> (f64, f64) {
        match self {
            RateFunction::Quadratic { .. } | RateFunction::Absolute { .. } => (0.0, 0.0),
            RateFunction::Tabulated { points } => {
                let zeros: Vec<f64> = points.iter().filter(|p| p.1 == 0.0).map(|p| p.0).collect();
                (zeros[0], zeros[zeros.len() - 1])
            }
        }
    }

    pub fn is_convex(&self) -> bool {
        match self {
            RateFunction::Quadratic { .. } | RateFunction::Absolute { .. } => true,
            RateFunction::Tabulated { points } => points.windows(3).all(|w| {
                let s0 = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
                let s1 = (w[2].1 - w[1].1) / (w[2].0 - w[1].0);
                s1 >= s0
            }),
        }
    }
}

/// `d - (1/(a ell)) sup_y (-ell a y - I(y))`; `d` at `ell = 0`.
pub fn ldp_limit_price(d: f64, a: f64, rate: &RateFunction, ell: f64) -> Result<f64> {
    rate.validate()?;
    if !(a > 0.0) {
        return Err(Error::Domain(format!("risk aversion {a} is not positive")));
    }
    if ell == 0.0 {
        return Ok(d);
    }
    let k = ell * a;
    // inf_y (k y + I(y)) = -sup_y (-k y - I(y))
    let objective = |y: f64| Ok(k * y + rate.eval(y));
    let inf = match rate {
        RateFunction::Tabulated { points } if rate.is_convex() => {
            // convex and piecewise linear: the infimum sits at a node
            points.iter().map(|&(y, v)| k * y + v).fold(f64::INFINITY, f64::min)
        }
        RateFunction::Tabulated { points } => {
            let (lo, hi) = (points[0].0, points[points.len() - 1].0);
            let h = (hi - lo) / (SCAN_POINTS - 1) as f64;
            (0..SCAN_POINTS)
                .map(|i| lo + h * i as f64)
                .map(|y| k * y + rate.eval(y))
                .fold(f64::INFINITY, f64::min)
        }
        _ => {
            let (z0, z1) = rate.zero_set();
            let hint = if z0 == z1 { (z0 - 1.0, z0 + 1.0) } else { (z0, z1) };
            match minimize_unimodal(objective, hint, 1e-12) {
                Ok(m) => m.f,
                Err(Error::UnboundedObjective { .. }) => return Err(Error::OutsideEffectiveDomain { ell }),
                Err(e) => return Err(e),
            }
        }
    };
    if !inf.is_finite() {
        return Err(Error::OutsideEffectiveDomain { ell });
    }
    Ok(d + inf / k)
}
