//! Sequences indexed by the market index `n`: rates, risk aversions,
//! model coefficients and exogenous prices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A real-valued map `n -> value` in one of the closed forms used by the
/// market families, or an explicit table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Schedule {
    /// `value`
    Constant { value: f64 },
    /// `offset + coef * n^exponent`
    Power {
        coef: f64,
        exponent: f64,
        #[serde(default)]
        offset: f64,
    },
    /// `offset + coef * ln(n)`
    Log {
        coef: f64,
        #[serde(default)]
        offset: f64,
    },
    /// `coef * ratio^n`
    Geometric { coef: f64, ratio: f64 },
    /// `sqrt(1 - 1/rate(n))`: the correlation whose incompleteness rate
    /// `(1 - rho^2)^-1` equals `rate(n)`.
    CorrelationFromRate { rate: Box<Schedule> },
    /// `1 / (1 - rho(n)^2)`: the incompleteness rate of a correlation.
    RateFromCorrelation { rho: Box<Schedule> },
    /// `1 / of(n)`
    Reciprocal { of: Box<Schedule> },
    /// Explicit `(n, value)` pairs.
    Explicit { points: Vec<(u64, f64)> },
}

impl Schedule {
    pub fn constant(value: f64) -> Self {
        Schedule::Constant { value }
    }

    /// `coef * n^exponent`
    pub fn power(coef: f64, exponent: f64) -> Self {
        Schedule::Power {
            coef,
            exponent,
            offset: 0.0,
        }
    }

    /// `offset + coef * n^exponent`
    pub fn affine_power(offset: f64, coef: f64, exponent: f64) -> Self {
        Schedule::Power {
            coef,
            exponent,
            offset,
        }
    }

    pub fn reciprocal(of: Schedule) -> Self {
        Schedule::Reciprocal { of: Box::new(of) }
    }

    pub fn explicit(points: impl IntoIterator<Item = (u64, f64)>) -> Self {
        Schedule::Explicit {
            points: points.into_iter().collect(),
        }
    }

    pub fn eval(&self, n: u64) -> Result<f64> {
        if n == 0 {
            return Err(Error::Domain("market index must be positive".into()));
        }
        let x = n as f64;
        let v = match self {
            Schedule::Constant { value } => *value,
            Schedule::Power {
                coef,
                exponent,
                offset,
            } => offset + coef * x.powf(*exponent),
            Schedule::Log { coef, offset } => offset + coef * x.ln(),
            Schedule::Geometric { coef, ratio } => coef * ratio.powf(x),
            Schedule::CorrelationFromRate { rate } => {
                let r = rate.eval(n)?;
                if r < 1.0 {
                    return Err(Error::Domain(format!(
                        "rate {r} < 1 has no matching correlation"
                    )));
                }
                (1.0 - 1.0 / r).sqrt()
            }
            Schedule::RateFromCorrelation { rho } => {
                let r = rho.eval(n)?;
                if !(r.abs() < 1.0) {
                    return Err(Error::Domain(format!("correlation {r} must lie in (-1, 1)")));
                }
                1.0 / (1.0 - r * r)
            }
            Schedule::Reciprocal { of } => {
                let v = of.eval(n)?;
                if v == 0.0 {
                    return Err(Error::Domain(format!("reciprocal of zero at n = {n}")));
                }
                1.0 / v
            }
            Schedule::Explicit { points } => points
                .iter()
                .find(|(m, _)| *m == n)
                .map(|(_, v)| *v)
                .ok_or_else(|| Error::Domain(format!("explicit schedule has no entry for n = {n}")))?,
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Domain(format!("schedule value at n = {n} is not finite")))
        }
    }
}

/// Rate `r_n` at which optimal positions grow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RateSchedule(pub Schedule);

impl RateSchedule {
    pub fn new(schedule: Schedule) -> Self {
        RateSchedule(schedule)
    }

    pub fn eval(&self, n: u64) -> Result<f64> {
        let r = self.0.eval(n)?;
        if r > 0.0 {
            Ok(r)
        } else {
            Err(Error::Domain(format!("rate r_{n} = {r} is not positive")))
        }
    }

    /// Checks positivity and monotonicity over an increasing index list.
    pub fn validate(&self, n_list: &[u64]) -> Result<Vec<f64>> {
        let rates = n_list
            .iter()
            .map(|&n| self.eval(n))
            .collect::<Result<Vec<_>>>()?;
        if rates.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Domain("rate schedule decreases over the index list".into()));
        }
        Ok(rates)
    }
}

/// Risk aversion `a_n > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RiskAversionSchedule(pub Schedule);

impl RiskAversionSchedule {
    pub fn new(schedule: Schedule) -> Self {
        RiskAversionSchedule(schedule)
    }

    pub fn constant(a: f64) -> Self {
        RiskAversionSchedule(Schedule::constant(a))
    }

    pub fn eval(&self, n: u64) -> Result<f64> {
        let a = self.0.eval(n)?;
        if a > 0.0 {
            Ok(a)
        } else {
            Err(Error::Domain(format!("risk aversion a_{n} = {a} is not positive")))
        }
    }
}

/// Both schedules of a market sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedules {
    pub risk_aversion: RiskAversionSchedule,
    pub rate: RateSchedule,
}

impl Schedules {
    pub fn new(risk_aversion: RiskAversionSchedule, rate: RateSchedule) -> Self {
        Schedules {
            risk_aversion,
            rate,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        assert_eq!(Schedule::constant(2.0).eval(7).unwrap(), 2.0);
        assert_eq!(Schedule::affine_power(1.0, 1.0, -1.0).eval(4).unwrap(), 1.25);
        let log = Schedule::Log {
            coef: 1.0,
            offset: 0.0,
        };
        assert!((log.eval(10).unwrap() - 10f64.ln()).abs() < 1e-15);
        let geo = Schedule::Geometric {
            coef: 1.0,
            ratio: 0.1,
        };
        assert!((geo.eval(3).unwrap() - 1e-3).abs() < 1e-18);
        let rho = Schedule::CorrelationFromRate {
            rate: Box::new(Schedule::power(1.0, 1.0)),
        };
        let r = rho.eval(64).unwrap();
        assert!((1.0 / (1.0 - r * r) - 64.0).abs() < 1e-9);
        let back = Schedule::RateFromCorrelation { rho: Box::new(rho) };
        assert!((back.eval(64).unwrap() - 64.0).abs() < 1e-9);
        let inv = Schedule::reciprocal(Schedule::power(1.0, -1.0));
        assert!((inv.eval(8).unwrap() - 8.0).abs() < 1e-12);
        assert!(Schedule::reciprocal(Schedule::constant(0.0)).eval(1).is_err());
    }

    #[test]
    fn explicit_lookup_and_errors() {
        let s = Schedule::explicit([(1, 0.5), (3, 0.25)]);
        assert_eq!(s.eval(3).unwrap(), 0.25);
        assert!(s.eval(2).is_err());
        assert!(s.eval(0).is_err());
    }

    #[test]
    fn rate_validation() {
        let good = RateSchedule::new(Schedule::power(1.0, 0.5));
        assert!(good.validate(&[1, 4, 9]).is_ok());
        let bad = RateSchedule::new(Schedule::power(1.0, -1.0));
        assert!(bad.validate(&[1, 2]).is_err());
        assert!(RateSchedule::new(Schedule::constant(0.0)).eval(1).is_err());
        assert!(RiskAversionSchedule::constant(-1.0).eval(1).is_err());
    }

    #[test]
    fn deserializes_from_toml() {
        let s: Schedule = toml::from_str("kind = \"power\"\ncoef = 1.0\nexponent = -1.0\noffset = 1.0").unwrap();
        assert_eq!(s, Schedule::affine_power(1.0, 1.0, -1.0));
        let bad: std::result::Result<Schedule, _> =
            toml::from_str("kind = \"power\"\ncoef = 1.0\nexponent = 1.0\nextra = 2");
        assert!(bad.is_err());
    }
}
