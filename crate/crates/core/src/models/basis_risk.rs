//! Claims on a non-traded factor `Y` hedged with a correlated stock.
//!
//! With `w = exp(-rho int lambda dW - 1/2 int lambda^2 dt)` the price of `q`
//! units is `-(1 / k) ln(E[w e^{-k B}] / E[w])` where `k = a q (1 - rho^2)`;
//! the limit `rho -> 1` at fixed `ell = q (1 - rho^2)` is the same formula
//! with `rho = 1` and `k = a ell`.

use std::fmt;
use std::sync::{Arc, OnceLock};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{Bound, EvalMode, Extent, LimitCurve, MarketSequenceModel, PriceCurve, PriceEval};
use crate::error::{Error, Result};
use crate::numerics::NormalRule;
use crate::schedule::{RateSchedule, RiskAversionSchedule, Schedule, Schedules};

/// Pairs of antithetic paths simulated per random stream.
const CHUNK_PAIRS: usize = 1024;

/// A coefficient function of the factor level `y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Coefficient {
    Constant { value: f64 },
    /// `intercept + slope * y`
    Affine { intercept: f64, slope: f64 },
}

impl Coefficient {
    pub fn constant(value: f64) -> Self {
        Coefficient::Constant { value }
    }

    pub fn eval(&self, y: f64) -> f64 {
        match *self {
            Coefficient::Constant { value } => value,
            Coefficient::Affine { intercept, slope } => intercept + slope * y,
        }
    }

    pub fn as_constant(&self) -> Option<f64> {
        match *self {
            Coefficient::Constant { value } => Some(value),
            Coefficient::Affine { intercept, slope: 0.0 } => Some(intercept),
            Coefficient::Affine { .. } => None,
        }
    }
}

/// Bounded payoff `B(y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Payoff {
    Constant { value: f64 },
    /// `tanh(scale * y)`
    Tanh {
        #[serde(default = "one")]
        scale: f64,
    },
    /// `y` clamped to `[lo, hi]`.
    Clamp { lo: f64, hi: f64 },
}

fn one() -> f64 {
    1.0
}

impl Payoff {
    pub fn tanh() -> Self {
        Payoff::Tanh { scale: 1.0 }
    }

    pub fn eval(&self, y: f64) -> f64 {
        match *self {
            Payoff::Constant { value } => value,
            Payoff::Tanh { scale } => (scale * y).tanh(),
            Payoff::Clamp { lo, hi } => y.clamp(lo, hi),
        }
    }

    /// `(inf B, sup B)`.
    pub fn range(&self) -> (f64, f64) {
        match *self {
            Payoff::Constant { value } => (value, value),
            Payoff::Tanh { .. } => (-1.0, 1.0),
            Payoff::Clamp { lo, hi } => (lo, hi),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    #[serde(default = "default_paths")]
    pub paths: usize,
    /// Euler steps; defaults to `ceil(252 T)`. Ignored when every
    /// coefficient is constant and the terminal law is sampled exactly.
    #[serde(default)]
    pub time_steps: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

fn default_paths() -> usize {
    100_000
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            paths: default_paths(),
            time_steps: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisRiskParams {
    /// Stock drift `mu(y)`.
    pub mu: Coefficient,
    /// Stock volatility `sigma(y) > 0`.
    pub sigma: Coefficient,
    /// Factor drift `b(y)`.
    pub b: Coefficient,
    /// Factor volatility `a(y)`.
    pub a_y: Coefficient,
    pub rho_schedule: Schedule,
    pub maturity: f64,
    pub y0: f64,
    pub payoff: Payoff,
    #[serde(default)]
    pub mc: McConfig,
    #[serde(default = "default_order")]
    pub quadrature_order: usize,
}

fn default_order() -> usize {
    80
}

impl BasisRiskParams {
    /// Constant coefficients with zero factor drift.
    pub fn constant(mu: f64, sigma: f64, a_y: f64, y0: f64, maturity: f64, payoff: Payoff, rho: Schedule) -> Self {
        BasisRiskParams {
            mu: Coefficient::constant(mu),
            sigma: Coefficient::constant(sigma),
            b: Coefficient::constant(0.0),
            a_y: Coefficient::constant(a_y),
            rho_schedule: rho,
            maturity,
            y0,
            payoff,
            mc: McConfig::default(),
            quadrature_order: default_order(),
        }
    }

    pub fn with_mc(mut self, mc: McConfig) -> Self {
        self.mc = mc;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.maturity > 0.0) {
            return Err(Error::Domain(format!("maturity {} is not positive", self.maturity)));
        }
        if self.mc.paths < 2 {
            return Err(Error::Domain("Monte Carlo needs at least 2 paths".into()));
        }
        let (lo, hi) = self.payoff.range();
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::Domain("payoff must be bounded".into()));
        }
        Ok(())
    }

    pub fn rho(&self, n: u64) -> Result<f64> {
        let rho = self.rho_schedule.eval(n)?;
        if rho.abs() < 1.0 {
            Ok(rho)
        } else {
            Err(Error::Domain(format!("correlation {rho} at n = {n} must lie in (-1, 1)")))
        }
    }

    /// `(lambda, b, a_y)` when every coefficient is constant.
    fn constants(&self) -> Option<(f64, f64, f64)> {
        let mu = self.mu.as_constant()?;
        let sigma = self.sigma.as_constant()?;
        Some((mu / sigma, self.b.as_constant()?, self.a_y.as_constant()?))
    }

    fn market_price_of_risk(&self, y: f64) -> Result<f64> {
        let sigma = self.sigma.eval(y);
        let lambda = self.mu.eval(y) / sigma;
        if sigma > 0.0 && lambda.is_finite() {
            Ok(lambda)
        } else {
            Err(Error::ModelAssumption(format!("sigma({y}) = {sigma} leaves lambda unbounded")))
        }
    }
}

/// Per-path `(int lambda dW, int lambda^2 dt, B(Y_T))`, antithetic pairs
/// adjacent. Independent of `rho`, so every market index reuses them.
#[derive(Clone, Default)]
pub struct PathSamples {
    int_dw: Vec<f64>,
    int_l2: Vec<f64>,
    payoff: Vec<f64>,
}

impl fmt::Debug for PathSamples {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PathSamples").field("paths", &self.payoff.len()).finish()
    }
}

impl PathSamples {
    pub fn len(&self) -> usize {
        self.payoff.len()
    }

    pub fn is_empty(&self) -> bool {
        self.payoff.is_empty()
    }
}

/// Simulates the factor paths. Chunk `c` draws from ChaCha stream `c` of
/// the configured seed, so results do not depend on the thread count.
pub fn simulate_paths(p: &BasisRiskParams) -> Result<PathSamples> {
    p.validate()?;
    let pairs = p.mc.paths.div_ceil(2);
    let chunks = pairs.div_ceil(CHUNK_PAIRS);
    let parts: Vec<PathSamples> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let count = CHUNK_PAIRS.min(pairs - c * CHUNK_PAIRS);
            simulate_chunk(p, c as u64, count)
        })
        .collect::<Result<_>>()?;
    let mut out = PathSamples::default();
    for part in parts {
        out.int_dw.extend(part.int_dw);
        out.int_l2.extend(part.int_l2);
        out.payoff.extend(part.payoff);
    }
    Ok(out)
}

fn simulate_chunk(p: &BasisRiskParams, stream: u64, pairs: usize) -> Result<PathSamples> {
    let mut rng = ChaCha8Rng::seed_from_u64(p.mc.seed);
    rng.set_stream(stream);
    let mut out = PathSamples {
        int_dw: Vec::with_capacity(2 * pairs),
        int_l2: Vec::with_capacity(2 * pairs),
        payoff: Vec::with_capacity(2 * pairs),
    };
    let t = p.maturity;
    if let Some((lambda, drift, vol)) = p.constants() {
        if !lambda.is_finite() || !(p.sigma.eval(0.0) > 0.0) {
            return Err(Error::ModelAssumption("constant sigma must be positive".into()));
        }
        for _ in 0..pairs {
            let z: f64 = StandardNormal.sample(&mut rng);
            for w in [t.sqrt() * z, -t.sqrt() * z] {
                out.int_dw.push(lambda * w);
                out.int_l2.push(lambda * lambda * t);
                out.payoff.push(p.payoff.eval(p.y0 + drift * t + vol * w));
            }
        }
        return Ok(out);
    }
    let steps = p.mc.time_steps.unwrap_or((252.0 * t).ceil() as usize).max(1);
    let dt = t / steps as f64;
    let sq = dt.sqrt();
    for _ in 0..pairs {
        let mut y = [p.y0; 2];
        let mut i_dw = [0.0; 2];
        let mut i_l2 = [0.0; 2];
        for _ in 0..steps {
            let z: f64 = StandardNormal.sample(&mut rng);
            for (k, sign) in [1.0, -1.0].into_iter().enumerate() {
                let dw = sign * sq * z;
                let lambda = p.market_price_of_risk(y[k])?;
                i_dw[k] += lambda * dw;
                i_l2[k] += lambda * lambda * dt;
                y[k] += p.b.eval(y[k]) * dt + p.a_y.eval(y[k]) * dw;
            }
        }
        for k in 0..2 {
            if !(i_dw[k].is_finite() && y[k].is_finite()) {
                return Err(Error::ModelAssumption("non-finite exponent on a simulated path".into()));
            }
            out.int_dw.push(i_dw[k]);
            out.int_l2.push(i_l2[k]);
            out.payoff.push(p.payoff.eval(y[k]));
        }
    }
    Ok(out)
}

/// Normalized weights `w / max w` at one correlation, with the payoffs.
#[derive(Debug, Clone)]
struct Weighted {
    w: Vec<f64>,
    b: Vec<f64>,
    b_abs_max: f64,
}

impl Weighted {
    fn new(s: &PathSamples, rho: f64) -> Result<Self> {
        let logw: Vec<f64> = s.int_dw.iter().zip(&s.int_l2).map(|(i, l)| -rho * i - 0.5 * l).collect();
        let top = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !top.is_finite() {
            return Err(Error::ModelAssumption("weights are not finite".into()));
        }
        let w = logw.iter().map(|l| (l - top).exp()).collect();
        let b_abs_max = s.payoff.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Ok(Weighted {
            w,
            b: s.payoff.clone(),
            b_abs_max,
        })
    }

    fn pairs(&self) -> usize {
        self.w.len() / 2
    }

    /// `E[w B] / E[w]` with its delta-method standard error.
    fn tilted_mean(&self) -> PriceEval {
        let m = self.pairs();
        let d: Vec<f64> = (0..m).map(|j| 0.5 * (self.w[2 * j] + self.w[2 * j + 1])).collect();
        let nb: Vec<f64> = (0..m)
            .map(|j| 0.5 * (self.w[2 * j] * self.b[2 * j] + self.w[2 * j + 1] * self.b[2 * j + 1]))
            .collect();
        let d_bar = mean(&d);
        let r = mean(&nb) / d_bar;
        let resid: Vec<f64> = (0..m).map(|j| (nb[j] - r * d[j]) / d_bar).collect();
        PriceEval::with_stderr(r, (variance(&resid) / m as f64).sqrt())
    }

    /// `-(1/k) ln(E[w e^{-k B}] / E[w])` with its delta-method standard error.
    fn price(&self, k: f64) -> PriceEval {
        if k == 0.0 {
            return self.tilted_mean();
        }
        let m = self.pairs();
        let d: Vec<f64> = (0..m).map(|j| 0.5 * (self.w[2 * j] + self.w[2 * j + 1])).collect();
        let d_bar = mean(&d);
        let pair = |f: &dyn Fn(f64) -> f64| -> Vec<f64> {
            (0..m)
                .map(|j| 0.5 * (self.w[2 * j] * f(self.b[2 * j]) + self.w[2 * j + 1] * f(self.b[2 * j + 1])))
                .collect()
        };
        let (log_ratio, resid) = if k.abs() * self.b_abs_max <= 1.0 {
            // small exponents: work with e^{-kB} - 1 to avoid cancellation
            let e = pair(&|b| (-k * b).exp_m1());
            let e_bar = mean(&e);
            let n_bar = d_bar + e_bar;
            let resid: Vec<f64> = (0..m).map(|j| e[j] / n_bar - d[j] * e_bar / (n_bar * d_bar)).collect();
            ((e_bar / d_bar).ln_1p(), resid)
        } else {
            let shift = self.b.iter().map(|b| -k * b).fold(f64::NEG_INFINITY, f64::max);
            let nn = pair(&|b| (-k * b - shift).exp());
            let n_bar = mean(&nn);
            let resid: Vec<f64> = (0..m).map(|j| nn[j] / n_bar - d[j] / d_bar).collect();
            ((n_bar / d_bar).ln() + shift, resid)
        };
        let se = (variance(&resid) / m as f64).sqrt() / k.abs();
        PriceEval::with_stderr(-log_ratio / k, se)
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn variance(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let mu = mean(v);
    v.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

/// Monte Carlo price of `q` units in market `n` (common random numbers
/// across `q` and `n` for a fixed seed).
pub fn basis_risk_price_mc(p: &BasisRiskParams, n: u64, a: f64, q: f64) -> Result<PriceEval> {
    let rho = p.rho(n)?;
    let samples = simulate_paths(p)?;
    Ok(Weighted::new(&samples, rho)?.price(a * q * (1.0 - rho * rho)))
}

/// Same price by Gauss-Hermite quadrature; needs constant coefficients,
/// where `W_T` under the tilted measure is `N(-rho lambda T, T)`.
pub fn basis_risk_price_quadrature(p: &BasisRiskParams, n: u64, a: f64, q: f64) -> Result<f64> {
    let rho = p.rho(n)?;
    quadrature_price(p, &NormalRule::new(p.quadrature_order)?, rho, a * q * (1.0 - rho * rho))
}

fn quadrature_price(p: &BasisRiskParams, rule: &NormalRule, rho: f64, k: f64) -> Result<f64> {
    let (lambda, drift, vol) = p.constants().ok_or_else(|| {
        Error::QuadratureUnavailable("coefficients depend on the factor level".into())
    })?;
    if !(p.sigma.eval(0.0) > 0.0) {
        return Err(Error::ModelAssumption("constant sigma must be positive".into()));
    }
    let t = p.maturity;
    let y_of = |w: f64| p.y0 + drift * t + vol * w;
    let mean = -rho * lambda * t;
    if k == 0.0 {
        return rule.expectation(|w| Ok(p.payoff.eval(y_of(w))), mean, t);
    }
    let (lo, hi) = p.payoff.range();
    let log_e = if k.abs() * lo.abs().max(hi.abs()) <= 1.0 {
        rule.expectation(|w| Ok((-k * p.payoff.eval(y_of(w))).exp_m1()), mean, t)?.ln_1p()
    } else {
        let shift = (-k * lo).max(-k * hi);
        rule.expectation(|w| Ok((-k * p.payoff.eval(y_of(w)) - shift).exp()), mean, t)?.ln() + shift
    };
    Ok(-log_e / k)
}

/// High-correlation limit `-(1/(a ell)) ln E^Q[e^{-a ell B}]`, or `E^Q[B]`
/// at `ell = 0`. Quadrature for constant coefficients, otherwise the
/// Monte Carlo estimator at `rho = 1`.
pub fn basis_risk_limit(p: &BasisRiskParams, a: f64, ell: f64) -> Result<f64> {
    if p.constants().is_some() {
        quadrature_price(p, &NormalRule::new(p.quadrature_order)?, 1.0, a * ell)
    } else {
        let samples = simulate_paths(p)?;
        Ok(Weighted::new(&samples, 1.0)?.price(a * ell).value)
    }
}

/// The limit as a curve over `ell`; defined for every `ell`.
pub fn basis_risk_limit_curve(p: &BasisRiskParams, a: f64) -> Result<LimitCurve> {
    if p.constants().is_some() {
        let rule = NormalRule::new(p.quadrature_order)?;
        let params = p.clone();
        let d = quadrature_price(p, &rule, 1.0, 0.0)?;
        return Ok(LimitCurve::new(d, Extent::Infinite, Extent::Infinite, move |ell| {
            quadrature_price(&params, &rule, 1.0, a * ell)
        }));
    }
    let weighted = Arc::new(Weighted::new(&simulate_paths(p)?, 1.0)?);
    let d = weighted.price(0.0).value;
    Ok(LimitCurve::new(d, Extent::Infinite, Extent::Infinite, move |ell| {
        Ok(weighted.price(a * ell).value)
    }))
}

/// How the basis-risk model evaluates its curves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisRiskMethod {
    MonteCarlo,
    Quadrature,
}

/// The basis-risk market sequence. Monte Carlo paths are simulated once
/// and shared by every curve.
pub struct BasisRiskModel {
    pub params: BasisRiskParams,
    pub method: BasisRiskMethod,
    samples: OnceLock<Result<Arc<PathSamples>>>,
}

impl fmt::Debug for BasisRiskModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BasisRiskModel")
            .field("params", &self.params)
            .field("method", &self.method)
            .finish()
    }
}

impl BasisRiskModel {
    pub fn new(params: BasisRiskParams, method: BasisRiskMethod) -> Self {
        BasisRiskModel {
            params,
            method,
            samples: OnceLock::new(),
        }
    }

    fn samples(&self) -> Result<Arc<PathSamples>> {
        self.samples
            .get_or_init(|| simulate_paths(&self.params).map(Arc::new))
            .clone()
    }
}

impl MarketSequenceModel for BasisRiskModel {
    fn name(&self) -> &'static str {
        "basis_risk"
    }

    fn curve(&self, n: u64, a: f64) -> Result<PriceCurve> {
        let rho = self.params.rho(n)?;
        let factor = 1.0 - rho * rho;
        let (lo, hi) = self.params.payoff.range();
        let (lower, upper) = (Bound::Finite(lo), Bound::Finite(hi));
        match self.method {
            BasisRiskMethod::MonteCarlo => {
                let samples = self.samples()?;
                let weighted = Weighted::new(&samples, rho)?;
                PriceCurve::new(n, a, EvalMode::MonteCarlo, lower, upper, move |q| {
                    Ok(weighted.price(a * q * factor))
                })
            }
            BasisRiskMethod::Quadrature => {
                let rule = NormalRule::new(self.params.quadrature_order)?;
                let params = self.params.clone();
                PriceCurve::new(n, a, EvalMode::Quadrature, lower, upper, move |q| {
                    quadrature_price(&params, &rule, rho, a * q * factor).map(PriceEval::exact)
                })
                .map(|c| c.with_tolerance(1e-12))
            }
        }
    }

    /// Unit risk aversion and `r_n = 1 / (1 - rho_n^2)`.
    fn default_schedules(&self) -> Schedules {
        Schedules::new(
            RiskAversionSchedule::constant(1.0),
            RateSchedule::new(Schedule::RateFromCorrelation {
                rho: Box::new(self.params.rho_schedule.clone()),
            }),
        )
    }

    fn eval_mode(&self) -> EvalMode {
        match self.method {
            BasisRiskMethod::MonteCarlo => EvalMode::MonteCarlo,
            BasisRiskMethod::Quadrature => EvalMode::Quadrature,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::gauss_hermite_expectation;

    fn reference(rho: f64, paths: usize) -> BasisRiskParams {
        BasisRiskParams::constant(0.1, 0.2, 0.3, 0.0, 1.0, Payoff::tanh(), Schedule::constant(rho)).with_mc(McConfig {
            paths,
            time_steps: None,
            seed: 7,
        })
    }

    /// `E[g(W)]` for `W ~ N(mean, var)` by a fine trapezoid rule.
    fn trapezoid(g: impl Fn(f64) -> f64, mean: f64, var: f64) -> f64 {
        let sd = var.sqrt();
        let n = 40_000;
        let (lo, hi) = (mean - 12.0 * sd, mean + 12.0 * sd);
        let h = (hi - lo) / n as f64;
        let dens = |x: f64| (-(x - mean).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt();
        (0..=n)
            .map(|i| {
                let x = lo + h * i as f64;
                let wgt = if i == 0 || i == n { 0.5 } else { 1.0 };
                wgt * g(x) * dens(x)
            })
            .sum::<f64>()
            * h
    }

    #[test]
    fn constant_claim_is_exact() {
        let mut p = reference(0.0, 1000);
        p.mu = Coefficient::constant(0.0);
        p.payoff = Payoff::Constant { value: 0.37 };
        for q in [0.0, 0.5, -3.0] {
            let v = basis_risk_price_mc(&p, 1, 1.0, q).unwrap();
            assert!((v.value - 0.37).abs() < 1e-12, "{q}: {}", v.value);
        }
    }

    #[test]
    fn mc_agrees_with_quadrature() {
        let p = reference(0.9, 100_000);
        let mc = basis_risk_price_mc(&p, 1, 1.0, 1.0).unwrap();
        let quad = basis_risk_price_quadrature(&p, 1, 1.0, 1.0).unwrap();
        let se = mc.stderr.unwrap();
        assert!(se > 0.0 && se < 5e-3);
        assert!((mc.value - quad).abs() <= 3.0 * se, "{} vs {quad} (se {se})", mc.value);
    }

    #[test]
    fn mc_curve_monotone_on_common_seed() {
        let m = BasisRiskModel::new(reference(0.9, 20_000), BasisRiskMethod::MonteCarlo);
        let c = m.curve(1, 1.0).unwrap();
        let mut prev = f64::INFINITY;
        for q in [-4.0, -1.0, 0.0, 0.5, 2.0, 8.0] {
            let v = c.eval(q).unwrap();
            assert!(v.value <= prev + 3.0 * v.stderr.unwrap());
            prev = v.value;
        }
    }

    #[test]
    fn quadrature_without_tilt_matches_direct_expectation() {
        let mut p = reference(0.5, 10);
        p.mu = Coefficient::constant(0.0);
        let direct = gauss_hermite_expectation(|w: f64| Ok((-2.0 * (0.3 * w).tanh()).exp()), 0.0, 1.0, 80).unwrap();
        let v = basis_risk_price_quadrature(&p, 1, 1.0, 2.0 / 0.75).unwrap();
        assert!((v + direct.ln() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn marginal_price_matches_weighted_oracle() {
        let rho = 0.6;
        let p = reference(rho, 10);
        let lambda = 0.5;
        let w = |x: f64| (-rho * lambda * x - 0.5 * lambda * lambda).exp();
        let num = trapezoid(|x| w(x) * (0.3 * x).tanh(), 0.0, 1.0);
        let den = trapezoid(w, 0.0, 1.0);
        let d = basis_risk_price_quadrature(&p, 1, 1.0, 0.0).unwrap();
        assert!((d - num / den).abs() < 1e-10, "{d} vs {}", num / den);
    }

    #[test]
    fn limit_matches_shifted_measure_oracle() {
        let p = reference(0.0, 10);
        let e = trapezoid(|x| (-0.5 * (0.3 * x).tanh()).exp(), -0.5, 1.0);
        let oracle = -e.ln() / 0.5;
        let v = basis_risk_limit(&p, 1.0, 0.5).unwrap();
        assert!((v - oracle).abs() < 1e-8, "{v} vs {oracle}");
        let d = basis_risk_limit(&p, 1.0, 0.0).unwrap();
        let small = basis_risk_limit(&p, 1.0, 1e-6).unwrap();
        assert!((small - d).abs() < 1e-6);
    }

    #[test]
    fn high_correlation_approaches_limit() {
        let p = reference(0.999, 10);
        let factor = 1.0 - 0.999f64.powi(2);
        let v = basis_risk_price_quadrature(&p, 1, 1.0, 0.5 / factor).unwrap();
        let lim = basis_risk_limit(&p, 1.0, 0.5).unwrap();
        assert!((v - lim).abs() < 1e-3, "{v} vs {lim}");
    }

    #[test]
    fn constant_claim_limit() {
        let mut p = reference(0.0, 10);
        p.payoff = Payoff::Constant { value: 2.0 };
        for ell in [-1.0, 0.0, 3.0] {
            assert!((basis_risk_limit(&p, 1.0, ell).unwrap() - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn seeding_is_deterministic_and_euler_runs() {
        let mut p = reference(0.5, 3000);
        p.sigma = Coefficient::Affine {
            intercept: 0.2,
            slope: 0.01,
        };
        p.mc.time_steps = Some(20);
        let a = basis_risk_price_mc(&p, 1, 1.0, 1.0).unwrap();
        let b = basis_risk_price_mc(&p, 1, 1.0, 1.0).unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            basis_risk_price_quadrature(&p, 1, 1.0, 1.0),
            Err(Error::QuadratureUnavailable(_))
        ));
        p.sigma = Coefficient::Affine {
            intercept: 0.0,
            slope: 1.0,
        };
        assert!(matches!(basis_risk_price_mc(&p, 1, 1.0, 1.0), Err(Error::ModelAssumption(_))));
    }
}
