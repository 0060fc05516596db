//! Partial equilibrium between two exponential investors trading a claim:
//! investor 1 buys `q`, investor 2 sells it, each holding an endowment of
//! `b_i` units of the claim.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::ConvergenceDiagnostic;
use crate::curve::{total_price, MarketSequenceModel, PriceCurve};
use crate::error::{Error, Result};
use crate::numerics::{minimize_unimodal, secant_polish};
use crate::schedule::{Schedule, Schedules};

/// Endowment of an investor, in units of the claim.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Endowment {
    #[default]
    None,
    MultipleOfClaim { b: f64 },
}

impl Endowment {
    pub fn units(&self) -> f64 {
        match self {
            Endowment::None => 0.0,
            Endowment::MultipleOfClaim { b } => *b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvestorSpec {
    pub a: f64,
    #[serde(default)]
    pub endowment: Endowment,
}

impl InvestorSpec {
    pub fn new(a: f64, b: f64) -> Self {
        let endowment = if b == 0.0 {
            Endowment::None
        } else {
            Endowment::MultipleOfClaim { b }
        };
        InvestorSpec { a, endowment }
    }

    fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(Error::Domain(format!("risk aversion {} is not positive", self.a)));
        }
        if !self.endowment.units().is_finite() {
            return Err(Error::Domain("endowment is not finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumResult {
    pub p_star: f64,
    pub q_star: f64,
    /// `|q_hat_1(p*) + q_hat_2(p*)|`: how far the individual demands at
    /// `p*` are from clearing.
    pub residual: f64,
    pub warning: Option<String>,
}

/// `rho((q + b) B) - rho(b B)`: the total price of `q` extra units for a
/// holder of `b` units.
pub fn endowed_total_price(curve: &PriceCurve, q: f64, b: f64) -> Result<f64> {
    if q == 0.0 {
        return Ok(0.0);
    }
    Ok(total_price(curve, q + b)? - total_price(curve, b)?)
}

/// Total price of an investor with risk aversion `a` and endowment `b`,
/// obtained from a base curve through `p_a(q) = p_base(a q / a_base)`.
struct Investor<'a> {
    base: &'a PriceCurve,
    scale: f64,
    b: f64,
}

impl<'a> Investor<'a> {
    fn new(base: &'a PriceCurve, spec: &InvestorSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Investor {
            base,
            scale: spec.a / base.risk_aversion(),
            b: spec.endowment.units(),
        })
    }

    fn total(&self, x: f64) -> Result<f64> {
        if x == 0.0 {
            return Ok(0.0);
        }
        Ok(x * self.base.price(self.scale * x)?)
    }

    fn endowed(&self, q: f64) -> Result<f64> {
        if q == 0.0 {
            return Ok(0.0);
        }
        Ok(self.total(q + self.b)? - self.total(self.b)?)
    }

    /// Marginal endowed price `d/dq` by centered difference.
    fn marginal(&self, q: f64) -> Result<f64> {
        let h = marginal_step(q);
        Ok((self.endowed(q + h)? - self.endowed(q - h)?) / (2.0 * h))
    }

    /// Optimal purchase at price `p`.
    fn response(&self, p: f64, tol: f64) -> Result<f64> {
        let scale = 1.0f64.max(self.b.abs());
        let m = minimize_unimodal(|q| Ok(q * p - self.endowed(q)?), (-scale, scale), tol)
            .map_err(|e| unbounded_to_domain(e, "individual demand is unbounded at the equilibrium price"))?;
        secant_polish(|q| self.marginal(q).map(|m| m - p), m.x, m.bracket)
    }
}

fn marginal_step(q: f64) -> f64 {
    1e-5 * q.abs().max(1.0)
}

fn unbounded_to_domain(e: Error, msg: &str) -> Error {
    match e {
        Error::UnboundedObjective { .. } => Error::Domain(msg.into()),
        e => e,
    }
}

fn check_bounds(curve: &PriceCurve, p: f64) -> Option<String> {
    (!curve.contains_price(p)).then(|| format!("p* = {p} lies outside the price bounds of the claim"))
}

/// Solves `max_q T_1(q | b_1) + T_2(-q | b_2)` and prices the trade at
/// investor 1's marginal endowed price at `q*`.
pub fn pepq_solve(curve_base: &PriceCurve, inv1: &InvestorSpec, inv2: &InvestorSpec, tol: f64) -> Result<EquilibriumResult> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance {tol} must be positive")));
    }
    let buyer = Investor::new(curve_base, inv1)?;
    let seller = Investor::new(curve_base, inv2)?;
    let objective = |q: f64| Ok(-(buyer.endowed(q)? + seller.endowed(-q)?));
    let scale = 1.0f64.max(buyer.b.abs()).max(seller.b.abs());
    let m = minimize_unimodal(objective, (-scale, scale), tol)
        .map_err(|e| unbounded_to_domain(e, "the clearing objective is unbounded"))?;
    let q_star = secant_polish(
        |q| Ok(buyer.marginal(q)? - seller.marginal(-q)?),
        m.x,
        m.bracket,
    )?;
    let p_star = buyer.marginal(q_star)?;

    let mut warnings = Vec::new();
    let s = 1e-3 * q_star.abs().max(1.0);
    let curvature = (objective(q_star + s)? - 2.0 * objective(q_star)? + objective(q_star - s)?) / (s * s);
    if curvature <= 1e-9 * (1.0 + objective(q_star)?.abs()) / (s * s) {
        warnings.push("non-unique equilibrium: the clearing objective is flat at q*".to_string());
    }
    warnings.extend(check_bounds(curve_base, p_star));
    let residual = (buyer.response(p_star, tol)? + seller.response(p_star, tol)?).abs();
    Ok(EquilibriumResult {
        p_star,
        q_star,
        residual,
        warning: (!warnings.is_empty()).then(|| warnings.join("; ")),
    })
}

/// Explicit equilibrium for endowments in units of the claim:
/// `q* = (a_2 b_2 - a_1 b_1) / (a_1 + a_2)` and `p*` the marginal price of
/// the aggregate investor (`1/a = 1/a_1 + 1/a_2`) holding `b_1 + b_2`.
pub fn pepq_closed_form(curve_base: &PriceCurve, a1: f64, a2: f64, b1: f64, b2: f64) -> Result<EquilibriumResult> {
    let (inv1, inv2) = (InvestorSpec::new(a1, b1), InvestorSpec::new(a2, b2));
    inv1.validate()?;
    inv2.validate()?;
    let q_star = (a2 * b2 - a1 * b1) / (a1 + a2);
    let a = 1.0 / (1.0 / a1 + 1.0 / a2);
    let aggregate = Investor::new(curve_base, &InvestorSpec::new(a, 0.0))?;
    let b = b1 + b2;
    let h = marginal_step(b);
    let p_star = (aggregate.total(b + h)? - aggregate.total(b - h)?) / (2.0 * h);
    let tol = 1e-10 * q_star.abs().max(1.0);
    let residual = (Investor::new(curve_base, &inv1)?.response(p_star, tol)?
        + Investor::new(curve_base, &inv2)?.response(p_star, tol)?)
    .abs();
    Ok(EquilibriumResult {
        p_star,
        q_star,
        residual,
        warning: check_bounds(curve_base, p_star),
    })
}

/// Investor parameters as functions of `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvestorSchedule {
    pub a: Schedule,
    /// Endowment in units of the claim; none when absent.
    #[serde(default)]
    pub b: Option<Schedule>,
}

impl InvestorSchedule {
    pub fn at(&self, n: u64) -> Result<InvestorSpec> {
        let b = match &self.b {
            Some(s) => s.eval(n)?,
            None => 0.0,
        };
        Ok(InvestorSpec::new(self.a.eval(n)?, b))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PepqLimitStudy {
    pub results: Vec<EquilibriumResult>,
    /// `d_n` at each index.
    pub d_values: Vec<f64>,
    pub p_star: ConvergenceDiagnostic,
    /// `q*_n / r_n`.
    pub ratio: ConvergenceDiagnostic,
    /// `lim p* - lim d_n`; zero when endowments stay small against `r_n`.
    pub price_shift: f64,
}

/// Equilibria along the index list, with convergence diagnostics of `p*_n`
/// and `q*_n / r_n`.
pub fn pepq_limit_study(
    model: &dyn MarketSequenceModel,
    scheds: &Schedules,
    inv1: &InvestorSchedule,
    inv2: &InvestorSchedule,
    n_list: &[u64],
    tol: f64,
) -> Result<PepqLimitStudy> {
    if n_list.len() < 2 || n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("index list must hold >= 2 strictly increasing entries".into()));
    }
    let rows = n_list
        .par_iter()
        .map(|&n| {
            model.index_range().check(n)?;
            let curve = model.curve(n, scheds.risk_aversion.eval(n)?)?;
            let r = scheds.rate.eval(n)?;
            let res = pepq_solve(&curve, &inv1.at(n)?, &inv2.at(n)?, tol * r.max(1.0))?;
            Ok((res, curve.d_n(), r))
        })
        .collect::<Result<Vec<_>>>()?;
    let zeros = vec![0.0; rows.len()];
    let p_values: Vec<f64> = rows.iter().map(|r| r.0.p_star).collect();
    let ratios: Vec<f64> = rows.iter().map(|r| r.0.q_star / r.2).collect();
    let d_values: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let p_star = ConvergenceDiagnostic::new(n_list.to_vec(), p_values, zeros.clone(), crate::asymptotics::DEFAULT_CAUCHY_TOL)?;
    let ratio = ConvergenceDiagnostic::new(n_list.to_vec(), ratios, zeros.clone(), crate::asymptotics::DEFAULT_CAUCHY_TOL)?;
    let d_limit = ConvergenceDiagnostic::new(n_list.to_vec(), d_values.clone(), zeros, crate::asymptotics::DEFAULT_CAUCHY_TOL)?;
    Ok(PepqLimitStudy {
        price_shift: p_star.limit_estimate - d_limit.limit_estimate,
        results: rows.into_iter().map(|r| r.0).collect(),
        d_values,
        p_star,
        ratio,
    })
}
