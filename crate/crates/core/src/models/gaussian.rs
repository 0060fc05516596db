//! Markets whose unhedgeable residual is Gaussian: the price is linear in
//! the position.

use serde::{Deserialize, Serialize};

use crate::curve::{Bound, EvalMode, Extent, LimitCurve, MarketSequenceModel, PriceCurve, PriceEval};
use crate::error::{Error, Result};
use crate::schedule::{RateSchedule, RiskAversionSchedule, Schedule, Schedules};

/// `d_n` and the residual variance `gamma_n^2` as functions of `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianResidualParams {
    pub d_schedule: Schedule,
    pub gamma2_schedule: Schedule,
}

impl GaussianResidualParams {
    pub fn new(d_schedule: Schedule, gamma2_schedule: Schedule) -> Self {
        GaussianResidualParams {
            d_schedule,
            gamma2_schedule,
        }
    }

    /// `(d_n, gamma_n^2)`.
    pub fn at(&self, n: u64) -> Result<(f64, f64)> {
        let d = self.d_schedule.eval(n)?;
        let g2 = self.gamma2_schedule.eval(n)?;
        if !(g2 > 0.0) {
            return Err(Error::Domain(format!("residual variance {g2} at n = {n} is not positive")));
        }
        Ok((d, g2))
    }
}

/// `p^n_a(q) = d_n - a q gamma_n^2 / 2`.
pub fn gaussian_price(p: &GaussianResidualParams, n: u64, a: f64, q: f64) -> Result<f64> {
    let (d, g2) = p.at(n)?;
    Ok(d - 0.5 * a * q * g2)
}

/// Closed-form optimal purchase `-(p_tilde - d_n) / (a gamma_n^2)`.
pub fn gaussian_optimal_position(p: &GaussianResidualParams, n: u64, a: f64, p_tilde: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::Domain(format!("risk aversion {a} is not positive")));
    }
    let (d, g2) = p.at(n)?;
    Ok(-(p_tilde - d) / (a * g2))
}

/// `ell -> d - a ell / 2`, the scaled limit under `r_n = 1 / gamma_n^2`.
pub fn gaussian_limit_curve(d: f64, a: f64) -> LimitCurve {
    LimitCurve::new(d, Extent::Infinite, Extent::Infinite, move |ell| Ok(d - 0.5 * a * ell))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianModel {
    pub params: GaussianResidualParams,
}

impl GaussianModel {
    pub fn new(params: GaussianResidualParams) -> Self {
        GaussianModel { params }
    }
}

impl MarketSequenceModel for GaussianModel {
    fn name(&self) -> &'static str {
        "gaussian"
    }

    fn curve(&self, n: u64, a: f64) -> Result<PriceCurve> {
        let (d, g2) = self.params.at(n)?;
        PriceCurve::new(n, a, EvalMode::ClosedForm, Bound::Unbounded, Bound::Unbounded, move |q| {
            Ok(PriceEval::exact(d - 0.5 * a * q * g2))
        })
        .map(|c| c.with_tolerance(1e-14))
    }

    /// Constant unit risk aversion and `r_n = 1 / gamma_n^2`.
    fn default_schedules(&self) -> Schedules {
        Schedules::new(
            RiskAversionSchedule::constant(1.0),
            RateSchedule::new(Schedule::reciprocal(self.params.gamma2_schedule.clone())),
        )
    }

    fn eval_mode(&self) -> EvalMode {
        EvalMode::ClosedForm
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{total_price, verify_ra_switch};

    fn fixed(d: f64, g2: f64) -> GaussianResidualParams {
        GaussianResidualParams::new(Schedule::constant(d), Schedule::constant(g2))
    }

    #[test]
    fn price_examples() {
        assert_eq!(gaussian_price(&fixed(1.0, 0.5), 1, 2.0, 1.0).unwrap(), 0.5);
        assert_eq!(gaussian_price(&fixed(1.0, 0.5), 1, 2.0, 0.0).unwrap(), 1.0);
        assert!((gaussian_price(&fixed(1.0, 0.1), 1, 1.0, -2.0).unwrap() - 1.1).abs() < 1e-15);
    }

    #[test]
    fn optimal_position_examples() {
        let p = fixed(1.0, 0.1);
        assert!((gaussian_optimal_position(&p, 1, 1.0, 0.8).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(gaussian_optimal_position(&p, 1, 1.0, 1.0).unwrap(), 0.0);
        assert!((gaussian_optimal_position(&p, 1, 1.0, 1.2).unwrap() + 2.0).abs() < 1e-12);
    }

    #[test]
    fn curve_and_switch() {
        let m = GaussianModel::new(fixed(1.0, 0.1));
        let c = m.curve(3, 1.0).unwrap();
        assert_eq!(c.d_n(), 1.0);
        assert!((total_price(&c, 2.0).unwrap() - 1.8).abs() < 1e-15);
        assert!(verify_ra_switch(&m, 3, 2.0, 1.0, 1e-12).unwrap());
        assert!(fixed(1.0, 0.0).at(1).is_err());
    }

    #[test]
    fn scaled_prices_equal_limit_at_every_n() {
        let p = GaussianResidualParams::new(Schedule::constant(1.0), Schedule::power(1.0, -1.0));
        let m = GaussianModel::new(p);
        let s = m.default_schedules();
        let lim = gaussian_limit_curve(1.0, 1.0);
        for n in [1, 10, 1000] {
            let r = s.rate.eval(n).unwrap();
            let v = m.curve(n, 1.0).unwrap().price(0.7 * r).unwrap();
            assert!((v - lim.eval(0.7).unwrap()).abs() < 1e-12);
        }
    }
}
