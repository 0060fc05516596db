//! Optimal positions against an exogenous price, and checks that a curve
//! behaves like an indifference price (monotone, concave total, bounded).

use rayon::prelude::*;
use serde::Serialize;

use crate::curve::{total_price, LimitCurve, Orientation, PriceCurve};
use crate::error::{Error, Result};
use crate::numerics::{minimize_unimodal, secant_polish, Minimum};

/// Direction of the optimal trade.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Long,
    Short,
    Zero,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Long => "long",
            Side::Short => "short",
            Side::Zero => "zero",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalPositionResult {
    pub q_hat: f64,
    /// `q p_tilde - q p(q)` at `q_hat` (sale problems: `q p(q) - q p_tilde`).
    pub objective: f64,
    pub side: Side,
    pub bracket: (f64, f64),
    pub evaluations: usize,
    pub tol_achieved: f64,
    /// Whether the objective at `q_hat` is no larger than at
    /// `q_hat +- tol max(1, |q_hat|)`.
    pub locally_optimal: bool,
}

/// Worst violation found by one check; positive values exceed the slack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Check {
    pub ok: bool,
    pub worst: f64,
}

impl Check {
    fn from_worst(worst: f64, tol: f64) -> Self {
        Check {
            ok: worst <= tol,
            worst,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveValidationReport {
    /// Largest price increase along the grid, net of noise slack.
    pub monotone: Check,
    /// Largest second difference of the total price, net of noise slack.
    pub concave: Check,
    /// Largest excursion outside the arbitrage-free interval.
    pub bounds: Check,
    pub grid: Vec<f64>,
}

impl CurveValidationReport {
    pub fn all_ok(&self) -> bool {
        self.monotone.ok && self.concave.ok && self.bounds.ok
    }
}

/// Weights of the second divided difference on `x0 < x1 < x2`, scaled by
/// the squared half-width so uniform grids give `f0 - 2 f1 + f2`.
fn second_difference_weights(x0: f64, x1: f64, x2: f64) -> [f64; 3] {
    let (h0, h1) = (x1 - x0, x2 - x1);
    let scale = 0.25 * (x2 - x0).powi(2);
    let w0 = 2.0 / (h0 * (h0 + h1));
    let w2 = 2.0 / (h1 * (h0 + h1));
    [scale * w0, -scale * (w0 + w2), scale * w2]
}

/// Checks a price curve on `q_grid`: price non-increasing, total price
/// concave, values inside the arbitrage-free interval. Stochastic curves
/// get a three-standard-error slack on top of `tol`.
pub fn validate_price_curve(curve: &PriceCurve, q_grid: &[f64], tol: f64) -> Result<CurveValidationReport> {
    if q_grid.len() < 3 {
        return Err(Error::Domain("validation grid needs at least 3 points".into()));
    }
    let mut grid = q_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let evals = grid.par_iter().map(|&q| curve.eval(q)).collect::<Result<Vec<_>>>()?;
    let p: Vec<f64> = evals.iter().map(|e| e.value).collect();
    let se: Vec<f64> = evals.iter().map(|e| e.stderr_or_zero()).collect();

    let monotone = (0..grid.len() - 1)
        .map(|i| p[i + 1] - p[i] - 3.0 * se[i].hypot(se[i + 1]))
        .fold(f64::NEG_INFINITY, f64::max);

    let total: Vec<f64> = grid.iter().zip(&p).map(|(q, v)| q * v).collect();
    let concave = (1..grid.len() - 1)
        .map(|i| {
            let w = second_difference_weights(grid[i - 1], grid[i], grid[i + 1]);
            let d2 = w[0] * total[i - 1] + w[1] * total[i] + w[2] * total[i + 1];
            let noise = (0..3)
                .map(|k| (w[k] * grid[i - 1 + k] * se[i - 1 + k]).powi(2))
                .sum::<f64>()
                .sqrt();
            d2 - 3.0 * noise
        })
        .fold(f64::NEG_INFINITY, f64::max);

    let bounds = p
        .iter()
        .zip(&se)
        .map(|(v, s)| {
            let below = curve.lower_bound().finite().map_or(f64::NEG_INFINITY, |lo| lo - v);
            let above = curve.upper_bound().finite().map_or(f64::NEG_INFINITY, |hi| v - hi);
            below.max(above) - 3.0 * s
        })
        .fold(f64::NEG_INFINITY, f64::max);

    Ok(CurveValidationReport {
        monotone: Check::from_worst(monotone, tol),
        concave: Check::from_worst(concave, tol),
        bounds: Check::from_worst(bounds, tol),
        grid,
    })
}

/// Checks a limit curve on `ell_grid` in its own orientation: bid curves
/// non-increasing with concave `ell p(ell)`, ask curves non-decreasing
/// with convex `ell p(ell)`.
pub fn validate_limit_curve(curve: &LimitCurve, ell_grid: &[f64], tol: f64) -> Result<CurveValidationReport> {
    if ell_grid.len() < 3 {
        return Err(Error::Domain("validation grid needs at least 3 points".into()));
    }
    let mut grid = ell_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let sign = match curve.orientation() {
        Orientation::Bid => 1.0,
        Orientation::Ask => -1.0,
    };
    let p = grid.par_iter().map(|&l| curve.eval(l)).collect::<Result<Vec<_>>>()?;
    let monotone = (0..grid.len() - 1)
        .map(|i| sign * (p[i + 1] - p[i]))
        .fold(f64::NEG_INFINITY, f64::max);
    let concave = (1..grid.len() - 1)
        .map(|i| {
            let w = second_difference_weights(grid[i - 1], grid[i], grid[i + 1]);
            sign * (0..3).map(|k| w[k] * grid[i - 1 + k] * p[i - 1 + k]).sum::<f64>()
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = match curve.orientation() {
        Orientation::Bid => (f64::NEG_INFINITY, f64::INFINITY),
        Orientation::Ask => (curve.d(), curve.limit_at_infinity().unwrap_or(f64::INFINITY)),
    };
    let bounds = p
        .iter()
        .map(|v| (lo - v).max(v - hi))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(CurveValidationReport {
        monotone: Check::from_worst(monotone, tol),
        concave: Check::from_worst(concave, tol),
        bounds: Check::from_worst(bounds, tol),
        grid,
    })
}

/// Price-level tolerance below which `p_tilde` counts as the marginal price.
fn marginal_band(curve: &PriceCurve) -> f64 {
    curve.tolerance() + 3.0 * curve.d_n_eval().stderr_or_zero()
}

fn objective(curve: &PriceCurve, p_tilde: f64, q: f64) -> Result<f64> {
    Ok(q * p_tilde - total_price(curve, q)?)
}

/// Minimizes `q p_tilde - q p(q)` over all `q`.
///
/// The side follows from comparing `p_tilde` with `d_n` (up to the
/// evaluator's own tolerance), and the search starts on that half-line.
pub fn optimal_position(curve: &PriceCurve, p_tilde: f64, tol: f64) -> Result<OptimalPositionResult> {
    if !curve.contains_price(p_tilde) {
        return Err(Error::NotArbitrageFree {
            price: p_tilde,
            lower: curve.lower_bound().finite().unwrap_or(f64::NEG_INFINITY),
            upper: curve.upper_bound().finite().unwrap_or(f64::INFINITY),
        });
    }
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance {tol} must be positive")));
    }
    let d = curve.d_n();
    let side = if p_tilde < d - marginal_band(curve) {
        Side::Long
    } else if p_tilde > d + marginal_band(curve) {
        Side::Short
    } else {
        Side::Zero
    };
    if side == Side::Zero {
        return Ok(OptimalPositionResult {
            q_hat: 0.0,
            objective: 0.0,
            side,
            bracket: (0.0, 0.0),
            evaluations: 0,
            tol_achieved: 0.0,
            locally_optimal: true,
        });
    }
    let hint = if side == Side::Long { (0.0, 1.0) } else { (-1.0, 0.0) };
    let m = match minimize_unimodal(|q| objective(curve, p_tilde, q), hint, tol) {
        Ok(m) => m,
        Err(Error::UnboundedObjective { doublings }) => {
            return Err(Error::NoInteriorOptimum(format!(
                "objective keeps decreasing after {doublings} doublings"
            )))
        }
        Err(e) => return Err(e),
    };
    let (q_hat, f_hat) = polish_position(curve, p_tilde, &m);
    let locally_optimal = certify(|q| objective(curve, p_tilde, q), q_hat, f_hat, tol)?;
    Ok(OptimalPositionResult {
        q_hat,
        objective: f_hat,
        side,
        bracket: m.bracket,
        evaluations: m.evaluations,
        tol_achieved: m.achieved_tol,
        locally_optimal,
    })
}

fn certify(mut f: impl FnMut(f64) -> Result<f64>, x: f64, fx: f64, tol: f64) -> Result<bool> {
    let h = tol * x.abs().max(1.0);
    let slack = 8.0 * f64::EPSILON * (fx.abs() + 1.0);
    Ok(f(x - h)? >= fx - slack && f(x + h)? >= fx - slack)
}

/// Refines a deterministic optimum through the first-order condition
/// `d/dq (q p(q)) = p_tilde`. For large positions the objective is flat to
/// within rounding over a wide interval, while its derivative is not.
fn polish_position(curve: &PriceCurve, p_tilde: f64, m: &Minimum) -> (f64, f64) {
    if curve.mode().is_stochastic() {
        return (m.x, m.f);
    }
    let marginal = |q: f64| {
        let h = 1e-5 * q.abs().max(1.0);
        Ok((total_price(curve, q + h)? - total_price(curve, q - h)?) / (2.0 * h) - p_tilde)
    };
    let polished = secant_polish(marginal, m.x, m.bracket).and_then(|q| Ok((q, objective(curve, p_tilde, q)?)));
    match polished {
        // both objectives carry rounding of the size of q p_tilde
        Ok((q, f)) if f <= m.f + 16.0 * f64::EPSILON * (q * p_tilde).abs().max(m.f.abs()).max(1.0) => (q, f),
        _ => (m.x, m.f),
    }
}

/// A seller's (ask) price per unit as a function of the quantity sold.
pub trait AskCurve: Sync {
    fn ask_price(&self, q: f64) -> Result<f64>;

    /// `(lim_{q -> 0+}, lim_{q -> inf})` of the ask price.
    fn sellable_range(&self) -> (f64, f64);
}

impl AskCurve for LimitCurve {
    fn ask_price(&self, q: f64) -> Result<f64> {
        if self.orientation() != Orientation::Ask {
            return Err(Error::Domain("sale problems need an ask-oriented curve".into()));
        }
        self.eval(q)
    }

    fn sellable_range(&self) -> (f64, f64) {
        (self.d(), self.limit_at_infinity().unwrap_or(f64::INFINITY))
    }
}

impl AskCurve for PriceCurve {
    fn ask_price(&self, q: f64) -> Result<f64> {
        self.price(q)
    }

    fn sellable_range(&self) -> (f64, f64) {
        (self.d_n(), self.upper_bound().finite().unwrap_or(f64::INFINITY))
    }
}

/// `q p(q) - q p_tilde` for `q > 0`, continued linearly (and convexly) to
/// `q <= 0` with the slope at zero.
fn sale_objective<C: AskCurve + ?Sized>(curve: &C, p_tilde: f64, q: f64) -> Result<f64> {
    if q <= 0.0 {
        return Ok(q * (curve.sellable_range().0 - p_tilde));
    }
    Ok(q * (curve.ask_price(q)? - p_tilde))
}

/// Best quantity to sell at `p_tilde`: maximizes `q p_tilde - q p(q)` over
/// `q > 0`, posed as the equivalent minimization.
pub fn optimal_sale_quantity<C: AskCurve + ?Sized>(curve: &C, p_tilde: f64, tol: f64) -> Result<OptimalPositionResult> {
    let (lower, upper) = curve.sellable_range();
    if !(p_tilde > lower && p_tilde < upper) {
        return Err(Error::OutsideSellableRange {
            price: p_tilde,
            lower,
            upper,
        });
    }
    let m = match minimize_unimodal(|q| sale_objective(curve, p_tilde, q), (0.0, 1.0), tol) {
        Ok(m) => m,
        Err(Error::UnboundedObjective { doublings }) => {
            return Err(Error::NoInteriorOptimum(format!(
                "sale objective keeps decreasing after {doublings} doublings"
            )))
        }
        Err(e) => return Err(e),
    };
    if !(m.x > 0.0) {
        return Err(Error::NoInteriorOptimum(format!("sale optimum at q = {}", m.x)));
    }
    let locally_optimal = certify(|q| sale_objective(curve, p_tilde, q), m.x, m.f, tol)?;
    Ok(OptimalPositionResult {
        q_hat: m.x,
        objective: m.f,
        side: Side::Short,
        bracket: m.bracket,
        evaluations: m.evaluations,
        tol_achieved: m.achieved_tol,
        locally_optimal,
    })
}

fn grid_argmin(points: &[f64], values: &[f64]) -> f64 {
    let mut best = 0;
    for i in 1..points.len() {
        let (v, b) = (values[i], values[best]);
        let closer = points[i].abs() < points[best].abs()
            || (points[i].abs() == points[best].abs() && points[i] < points[best]);
        if v < b || (v == b && closer) {
            best = i;
        }
    }
    points[best]
}

/// Grid argmin of `q p_tilde - q p(q)` over `n_grid` uniform points of
/// `[q_lo, q_hi]`; ties go to the smallest `|q|`, then the smallest `q`.
pub fn brute_force_position(curve: &PriceCurve, p_tilde: f64, q_lo: f64, q_hi: f64, n_grid: usize) -> Result<f64> {
    if n_grid < 10 || !(q_hi > q_lo) {
        return Err(Error::Domain("brute force needs >= 10 points on a non-empty interval".into()));
    }
    let h = (q_hi - q_lo) / (n_grid - 1) as f64;
    let points: Vec<f64> = (0..n_grid).map(|i| q_lo + h * i as f64).collect();
    let values = points
        .par_iter()
        .map(|&q| objective(curve, p_tilde, q))
        .collect::<Result<Vec<_>>>()?;
    Ok(grid_argmin(&points, &values))
}

/// Grid argmin of the sale objective over `q_hi * i / n_grid`,
/// `i = 1..=n_grid`.
pub fn brute_force_sale_quantity<C: AskCurve + ?Sized>(curve: &C, p_tilde: f64, q_hi: f64, n_grid: usize) -> Result<f64> {
    if n_grid < 10 || !(q_hi > 0.0) {
        return Err(Error::Domain("brute force needs >= 10 points on a non-empty interval".into()));
    }
    let points: Vec<f64> = (1..=n_grid).map(|i| q_hi * i as f64 / n_grid as f64).collect();
    let values = points
        .par_iter()
        .map(|&q| sale_objective(curve, p_tilde, q))
        .collect::<Result<Vec<_>>>()?;
    Ok(grid_argmin(&points, &values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{Bound, EvalMode, Extent, PriceEval};

    fn gaussian(d: f64, a: f64, g2: f64) -> PriceCurve {
        PriceCurve::new(1, a, EvalMode::ClosedForm, Bound::Unbounded, Bound::Unbounded, move |q| {
            Ok(PriceEval::exact(d - 0.5 * a * q * g2))
        })
        .unwrap()
        .with_tolerance(1e-14)
    }

    #[test]
    fn gaussian_positions() {
        let c = gaussian(1.0, 1.0, 0.1);
        let long = optimal_position(&c, 0.8, 1e-10).unwrap();
        assert!((long.q_hat - 2.0).abs() < 1e-8);
        assert_eq!(long.side, Side::Long);
        assert!(long.locally_optimal);
        let short = optimal_position(&c, 1.2, 1e-10).unwrap();
        assert!((short.q_hat + 2.0).abs() < 1e-8);
        assert_eq!(short.side, Side::Short);
        let zero = optimal_position(&c, 1.0, 1e-10).unwrap();
        assert_eq!((zero.q_hat, zero.side), (0.0, Side::Zero));
    }

    #[test]
    fn first_order_condition_at_optimum() {
        let c = gaussian(1.0, 2.0, 0.3);
        let r = optimal_position(&c, 0.6, 1e-10).unwrap();
        let h = 1e-4;
        let marginal = (total_price(&c, r.q_hat + h).unwrap() - total_price(&c, r.q_hat - h).unwrap()) / (2.0 * h);
        assert!((marginal - 0.6).abs() < 1e-8);
    }

    #[test]
    fn arbitrage_and_unbounded_errors() {
        let bounded = PriceCurve::new(1, 1.0, EvalMode::Ode, Bound::Finite(0.0), Bound::Finite(1.0), |q| {
            Ok(PriceEval::exact(0.5 - 0.1 * (q / 10.0).tanh()))
        })
        .unwrap();
        assert!(matches!(
            optimal_position(&bounded, 1.5, 1e-8),
            Err(Error::NotArbitrageFree { .. })
        ));
        // the price never drops below 0.4, so buying at 0.3 is unboundedly good
        assert!(matches!(
            optimal_position(&bounded, 0.3, 1e-8),
            Err(Error::NoInteriorOptimum(_))
        ));
    }

    #[test]
    fn brute_force_examples() {
        let c = gaussian(1.0, 1.0, 0.1);
        let q = brute_force_position(&c, 0.8, -10.0, 10.0, 100_001).unwrap();
        assert!((q - 2.0).abs() <= 2e-4);
        assert_eq!(brute_force_position(&c, 1.0, -10.0, 10.0, 101).unwrap(), 0.0);
        // symmetric tie between -1 and 1 goes to -1
        assert_eq!(grid_argmin(&[-1.0, 0.5, 1.0], &[0.0, 1.0, 0.0]), -1.0);
    }

    #[test]
    fn monotone_in_price() {
        let c = gaussian(1.0, 1.5, 0.2);
        let mut prev = f64::INFINITY;
        for k in 0..20 {
            let q = optimal_position(&c, 0.5 + 0.05 * k as f64, 1e-9).unwrap().q_hat;
            assert!(q < prev);
            prev = q;
        }
    }

    #[test]
    fn validation_flags_planted_violation() {
        let grid: Vec<f64> = (-10..=10).map(|i| i as f64 * 0.5).collect();
        let good = validate_price_curve(&gaussian(1.0, 1.0, 0.1), &grid, 1e-12).unwrap();
        assert!(good.all_ok(), "{good:?}");
        let tol = 1e-6;
        let bumped = PriceCurve::new(1, 1.0, EvalMode::ClosedForm, Bound::Unbounded, Bound::Unbounded, move |q| {
            let bump = if q == 1.0 { 10.0 * tol } else { 0.0 };
            Ok(PriceEval::exact(1.0 - 1e-8 * q + bump))
        })
        .unwrap();
        let r = validate_price_curve(&bumped, &grid, tol).unwrap();
        assert!(!r.monotone.ok);
        let out = PriceCurve::new(1, 1.0, EvalMode::ClosedForm, Bound::Finite(0.0), Bound::Finite(1.0), |q| {
            Ok(PriceEval::exact(0.5 - 0.2 * q))
        })
        .unwrap();
        assert!(!validate_price_curve(&out, &grid, 1e-9).unwrap().bounds.ok);
    }

    fn ask_curve() -> LimitCurve {
        // rises from 1 toward 3 with convex total q p(q)
        LimitCurve::new(1.0, Extent::Finite(0.0), Extent::Infinite, |l| Ok(3.0 - 2.0 / (1.0 + l)))
            .with_orientation(Orientation::Ask)
            .with_limit_at_infinity(3.0)
    }

    #[test]
    fn sale_quantity_matches_grid() {
        let c = ask_curve();
        let tol = 1e-6;
        let r = optimal_sale_quantity(&c, 2.0, tol).unwrap();
        // objective q - 2q/(1+q) is minimized at q = sqrt(2) - 1
        assert!((r.q_hat - (2f64.sqrt() - 1.0)).abs() < 1e-6);
        let g = brute_force_sale_quantity(&c, 2.0, 10.0, 10_000).unwrap();
        assert!((r.q_hat - g).abs() <= 1e-3 + 2.0 * tol);
        let half = sale_objective(&c, 2.0, r.q_hat / 2.0).unwrap();
        let double = sale_objective(&c, 2.0, 2.0 * r.q_hat).unwrap();
        assert!(r.objective <= half && r.objective <= double);
    }

    #[test]
    fn sale_near_marginal_price_sells_little() {
        let r = optimal_sale_quantity(&ask_curve(), 1.0 + 1e-6, 1e-10).unwrap();
        assert!(r.q_hat < 1e-5);
        assert!(matches!(
            optimal_sale_quantity(&ask_curve(), 3.5, 1e-8),
            Err(Error::OutsideSellableRange { .. })
        ));
        assert!(validate_limit_curve(&ask_curve(), &[0.0, 0.5, 1.0, 4.0], 1e-12).unwrap().all_ok());
    }
}
