//! Finite-`n` diagnostics of the large-position scaling: scaled price
//! sequences, limit-curve estimates, the convergence range, and the growth
//! of optimal positions relative to `r_n`.

use rayon::prelude::*;
use serde::Serialize;

use crate::curve::{Extent, LimitCurve, MarketSequenceModel, Orientation};
use crate::error::{Error, Result};
use crate::numerics::{minimize_unimodal, MonotoneCubic};
use crate::position::optimal_position;
use crate::schedule::{Schedule, Schedules};

/// Default Cauchy tolerance for deterministic models.
pub const DEFAULT_CAUCHY_TOL: f64 = 1e-4;

/// Convergence summary of a sequence `v_1, ..., v_k` indexed by `n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceDiagnostic {
    pub indices: Vec<u64>,
    pub values: Vec<f64>,
    /// Standard errors of the values (zero for deterministic models).
    pub stderrs: Vec<f64>,
    /// `|v_{i+1} - v_i|`.
    pub gaps: Vec<f64>,
    /// Aitken extrapolation of the last three values, when the gaps shrink
    /// monotonically.
    pub aitken: Option<f64>,
    /// Aitken value when available, otherwise the last value.
    pub limit_estimate: f64,
    /// Last gap, used as the error bar of `limit_estimate`.
    pub error_bar: f64,
    pub tolerance: f64,
    /// All of the last `ceil(k / 3)` gaps are below `tolerance`.
    pub cauchy_ok: bool,
}

impl ConvergenceDiagnostic {
    pub fn new(indices: Vec<u64>, values: Vec<f64>, stderrs: Vec<f64>, tolerance: f64) -> Result<Self> {
        let k = values.len();
        if k < 2 || indices.len() != k || stderrs.len() != k {
            return Err(Error::Domain("a convergence diagnostic needs >= 2 matching values".into()));
        }
        let gaps: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        let tail = k.div_ceil(3).min(gaps.len());
        let cauchy_ok = gaps[gaps.len() - tail..].iter().all(|g| *g < tolerance);
        let shrinking = gaps.windows(2).all(|w| w[1] <= w[0]);
        let aitken = if k >= 3 && shrinking {
            let (x0, x1, x2) = (values[k - 3], values[k - 2], values[k - 1]);
            let denom = x2 - 2.0 * x1 + x0;
            if denom.abs() > f64::EPSILON * (x0.abs() + x1.abs() + x2.abs()) {
                Some(x2 - (x2 - x1).powi(2) / denom)
            } else {
                Some(x2)
            }
        } else {
            None
        };
        let limit_estimate = aitken.unwrap_or(values[k - 1]);
        Ok(ConvergenceDiagnostic {
            indices,
            values,
            stderrs,
            error_bar: gaps[gaps.len() - 1],
            gaps,
            aitken,
            limit_estimate,
            tolerance,
            cauchy_ok,
        })
    }
}

fn check_indices(n_list: &[u64]) -> Result<()> {
    if n_list.len() < 2 || n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("index list must hold >= 2 strictly increasing entries".into()));
    }
    Ok(())
}

/// Evaluates `p^n_{a_n}(ell r_n)` for each `n`. The tolerance is raised to
/// three standard errors for Monte Carlo models.
pub fn scaled_price_sequence(
    model: &dyn MarketSequenceModel,
    scheds: &Schedules,
    ell: f64,
    n_list: &[u64],
    tol: f64,
) -> Result<ConvergenceDiagnostic> {
    check_indices(n_list)?;
    let evals = n_list
        .par_iter()
        .map(|&n| {
            model.index_range().check(n)?;
            let a = scheds.risk_aversion.eval(n)?;
            let r = scheds.rate.eval(n)?;
            model.curve(n, a)?.eval(ell * r)
        })
        .collect::<Result<Vec<_>>>()?;
    let values = evals.iter().map(|e| e.value).collect();
    let stderrs: Vec<f64> = evals.iter().map(|e| e.stderr_or_zero()).collect();
    let noise = 3.0 * stderrs.iter().cloned().fold(0.0, f64::max);
    ConvergenceDiagnostic::new(n_list.to_vec(), values, stderrs, tol.max(noise))
}

/// Limit estimates on an `ell` grid.
#[derive(Debug, Clone)]
pub struct LimitCurveEstimate {
    pub ells: Vec<f64>,
    pub diagnostics: Vec<ConvergenceDiagnostic>,
    /// Grid points whose sequence failed the Cauchy test.
    pub excluded: Vec<f64>,
    /// `max |p_inf(+-ell_min) - p_inf(0)|` over the smallest nonzero
    /// converged grid points on each side.
    pub continuity_gap: f64,
    /// Interpolated curve through the converged points around zero.
    pub curve: LimitCurve,
}

/// Estimates `p_inf` on `ell_grid` (which must straddle zero) from the
/// scaled price sequences.
pub fn estimate_limit_curve(
    model: &dyn MarketSequenceModel,
    scheds: &Schedules,
    ell_grid: &[f64],
    n_list: &[u64],
    tol: f64,
) -> Result<LimitCurveEstimate> {
    let mut ells = ell_grid.to_vec();
    ells.sort_by(f64::total_cmp);
    ells.dedup();
    if !(ells[0] < 0.0 && ells[ells.len() - 1] > 0.0) {
        return Err(Error::Domain("ell grid must contain points on both sides of zero".into()));
    }
    if !ells.contains(&0.0) {
        let at = ells.partition_point(|l| *l < 0.0);
        ells.insert(at, 0.0);
    }
    let diagnostics = ells
        .iter()
        .map(|&l| scaled_price_sequence(model, scheds, l, n_list, tol))
        .collect::<Result<Vec<_>>>()?;
    let zero = ells.iter().position(|l| *l == 0.0).unwrap_or(0);
    let excluded: Vec<f64> = ells
        .iter()
        .zip(&diagnostics)
        .filter(|(_, d)| !d.cauchy_ok)
        .map(|(l, _)| *l)
        .collect();
    let (lo, hi) = contiguous_run(&diagnostics, zero);
    let xs: Vec<f64> = ells[lo..=hi].to_vec();
    let ys: Vec<f64> = diagnostics[lo..=hi].iter().map(|d| d.limit_estimate).collect();
    let d = diagnostics[zero].limit_estimate;
    let continuity_gap = [zero.checked_sub(1).filter(|i| *i >= lo), Some(zero + 1).filter(|i| *i <= hi)]
        .into_iter()
        .flatten()
        .map(|i| (diagnostics[i].limit_estimate - d).abs())
        .fold(0.0, f64::max);
    let delta_minus = if lo == 0 { Extent::Infinite } else { Extent::Finite(ells[lo]) };
    let delta_plus = if hi == ells.len() - 1 { Extent::Infinite } else { Extent::Finite(ells[hi]) };
    let curve = if xs.len() >= 2 {
        let interp = MonotoneCubic::new(xs.clone(), ys)?;
        let (x_lo, x_hi) = (xs[0], xs[xs.len() - 1]);
        LimitCurve::new(d, delta_minus, delta_plus, move |l| {
            if l < x_lo || l > x_hi {
                return Err(Error::Domain(format!("ell = {l} outside the estimated range [{x_lo}, {x_hi}]")));
            }
            Ok(interp.eval(l))
        })
    } else {
        LimitCurve::new(d, Extent::Finite(0.0), Extent::Finite(0.0), move |l| {
            Err(Error::Domain(format!("no converged grid point besides zero (ell = {l})")))
        })
    };
    Ok(LimitCurveEstimate {
        ells,
        diagnostics,
        excluded,
        continuity_gap,
        curve,
    })
}

/// Largest index window `[lo, hi]` around `zero` whose diagnostics all pass.
fn contiguous_run(diags: &[ConvergenceDiagnostic], zero: usize) -> (usize, usize) {
    let mut lo = zero;
    while lo > 0 && diags[lo - 1].cauchy_ok {
        lo -= 1;
    }
    let mut hi = zero;
    while hi + 1 < diags.len() && diags[hi + 1].cauchy_ok {
        hi += 1;
    }
    (lo, hi)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaProbe {
    pub delta_minus_est: f64,
    pub delta_plus_est: f64,
    /// Grid points checked, with their Cauchy verdicts.
    pub verdicts: Vec<(f64, bool)>,
    pub warning: Option<String>,
}

/// Largest contiguous `ell` interval around zero on which the scaled
/// prices pass the Cauchy test. A failing side reports the midpoint
/// between its last passing and first failing grid points; a side that
/// passes throughout reports the grid end.
pub fn probe_delta(
    model: &dyn MarketSequenceModel,
    scheds: &Schedules,
    ell_grid: &[f64],
    n_list: &[u64],
    tol: f64,
) -> Result<DeltaProbe> {
    let mut ells = ell_grid.to_vec();
    ells.sort_by(f64::total_cmp);
    ells.dedup();
    if !(ells[0] < 0.0 && ells[ells.len() - 1] > 0.0) {
        return Err(Error::Domain("ell grid must contain points on both sides of zero".into()));
    }
    if !ells.contains(&0.0) {
        let at = ells.partition_point(|l| *l < 0.0);
        ells.insert(at, 0.0);
    }
    let diags = ells
        .iter()
        .map(|&l| scaled_price_sequence(model, scheds, l, n_list, tol))
        .collect::<Result<Vec<_>>>()?;
    let verdicts: Vec<(f64, bool)> = ells.iter().zip(&diags).map(|(l, d)| (*l, d.cauchy_ok)).collect();
    let zero = ells.iter().position(|l| *l == 0.0).unwrap_or(0);
    if !diags[zero].cauchy_ok {
        return Ok(DeltaProbe {
            delta_minus_est: 0.0,
            delta_plus_est: 0.0,
            verdicts,
            warning: Some("scaled prices do not converge even at ell = 0".into()),
        });
    }
    let (lo, hi) = contiguous_run(&diags, zero);
    let delta_minus_est = if lo == 0 { ells[0] } else { 0.5 * (ells[lo] + ells[lo - 1]) };
    let delta_plus_est = if hi == ells.len() - 1 {
        ells[hi]
    } else {
        0.5 * (ells[hi] + ells[hi + 1])
    };
    let warning = (lo == zero && hi == zero).then(|| "no converged grid point besides zero".to_string());
    Ok(DeltaProbe {
        delta_minus_est,
        delta_plus_est,
        verdicts,
        warning,
    })
}

/// Qualitative reading of the tail of `q_hat_n / r_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    ConsistentLong,
    ConsistentShort,
    Degenerate,
    Inconsistent,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::ConsistentLong => "consistent_long",
            Verdict::ConsistentShort => "consistent_short",
            Verdict::Degenerate => "degenerate",
            Verdict::Inconsistent => "inconsistent",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateVerdict {
    pub indices: Vec<u64>,
    pub rates: Vec<f64>,
    pub q_hats: Vec<f64>,
    pub ratios: Vec<f64>,
    /// Minimum of the ratios over the last third of the index list.
    pub liminf_proxy: f64,
    /// Maximum of the ratios over the last third of the index list.
    pub limsup_proxy: f64,
    pub verdict: Verdict,
    /// Minimizer of `ell p_tilde - ell p_inf(ell)` when a limit curve is given.
    pub ell_star: Option<f64>,
}

/// Solves the optimal position for each `n` and divides by `r_n`.
///
/// The tail (last third) is stable when its spread is at most
/// `tol + 10%` of its largest magnitude; a stable tail above `tol` reads
/// as long, below `-tol` as short, and within `tol` of zero as degenerate.
pub fn rate_ratio_sequence(
    model: &dyn MarketSequenceModel,
    scheds: &Schedules,
    p_tilde: &Schedule,
    n_list: &[u64],
    limit: Option<&LimitCurve>,
    tol: f64,
) -> Result<RateVerdict> {
    check_indices(n_list)?;
    let rows = n_list
        .par_iter()
        .map(|&n| {
            model.index_range().check(n)?;
            let a = scheds.risk_aversion.eval(n)?;
            let r = scheds.rate.eval(n)?;
            let curve = model.curve(n, a)?;
            let pt = p_tilde.eval(n)?;
            // relative tolerance in q keeps the ratio accurate at every scale
            let q = optimal_position(&curve, pt, tol * r.max(1.0) * 1e-3)?.q_hat;
            Ok((r, q))
        })
        .collect::<Result<Vec<_>>>()?;
    let rates: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let q_hats: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let ratios: Vec<f64> = q_hats.iter().zip(&rates).map(|(q, r)| q / r).collect();
    let k = ratios.len();
    let tail = &ratios[k - k.div_ceil(3)..];
    let liminf_proxy = tail.iter().cloned().fold(f64::INFINITY, f64::min);
    let limsup_proxy = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let scale = liminf_proxy.abs().max(limsup_proxy.abs());
    let stable = limsup_proxy - liminf_proxy <= tol + 0.1 * scale;
    let verdict = if scale <= tol {
        Verdict::Degenerate
    } else if stable && liminf_proxy > tol {
        Verdict::ConsistentLong
    } else if stable && limsup_proxy < -tol {
        Verdict::ConsistentShort
    } else {
        Verdict::Inconsistent
    };
    let ell_star = match limit {
        Some(curve) => {
            let last = *n_list.last().expect("checked non-empty");
            Some(corollary_limit(curve, p_tilde.eval(last)?)?)
        }
        None => None,
    };
    Ok(RateVerdict {
        indices: n_list.to_vec(),
        rates,
        q_hats,
        ratios,
        liminf_proxy,
        limsup_proxy,
        verdict,
        ell_star,
    })
}

/// Grid on which concavity of a limit curve is checked: 41 points inside
/// `(delta_-, delta_+)`, truncated to `[-10, 10]`.
fn concavity_grid(curve: &LimitCurve) -> Vec<f64> {
    let span = 10.0;
    let lo = curve.delta_minus().as_f64(-1.0).max(-span);
    let hi = curve.delta_plus().as_f64(1.0).min(span);
    let pad = 1e-3 * (hi - lo);
    let (lo, hi) = (lo + pad, hi - pad);
    (0..41).map(|i| lo + (hi - lo) * i as f64 / 40.0).collect()
}

/// Unique limit of `q_hat_n / r_n`: the minimizer of
/// `ell p_tilde - ell p_inf(ell)`. Needs a strictly concave total limit.
pub fn corollary_limit(curve: &LimitCurve, p_tilde: f64) -> Result<f64> {
    if curve.orientation() != Orientation::Bid {
        return Err(Error::Domain("the position limit is defined for bid curves".into()));
    }
    if !check_strict_concavity(curve, &concavity_grid(curve), 1e-12)? {
        return Err(Error::NonUniqueLimit(
            "ell p_inf(ell) is not strictly concave on the convergence range".into(),
        ));
    }
    let (lo, hi) = (curve.delta_minus().as_f64(-1.0), curve.delta_plus().as_f64(1.0));
    let objective = |l: f64| {
        if l <= lo || l >= hi {
            return Ok(f64::INFINITY);
        }
        Ok(l * p_tilde - l * curve.eval(l)?)
    };
    let hint = (-(1.0f64.min(-lo / 2.0)), 1.0f64.min(hi / 2.0));
    match minimize_unimodal(objective, hint, 1e-12) {
        Ok(m) => Ok(m.x),
        Err(Error::UnboundedObjective { .. }) => Err(Error::NonUniqueLimit("objective is unbounded below".into())),
        Err(e) => Err(e),
    }
}

/// Whether every second difference of `ell p_inf(ell)` on the grid is
/// below `-tol` (for ask curves: above `tol`, i.e. strictly convex).
pub fn check_strict_concavity(curve: &LimitCurve, ell_grid: &[f64], tol: f64) -> Result<bool> {
    if ell_grid.len() < 5 {
        return Err(Error::Domain("strict concavity check needs >= 5 grid points".into()));
    }
    let mut grid = ell_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let sign = match curve.orientation() {
        Orientation::Bid => 1.0,
        Orientation::Ask => -1.0,
    };
    let total = grid.iter().map(|&l| Ok(l * curve.eval(l)?)).collect::<Result<Vec<_>>>()?;
    Ok(total.windows(3).all(|t| sign * (t[0] - 2.0 * t[1] + t[2]) < -tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::gaussian::{gaussian_limit_curve, GaussianModel, GaussianResidualParams};
    use crate::models::default_bond::default_bond_limit_curve;
    use crate::schedule::{RateSchedule, RiskAversionSchedule};

    fn reference() -> (GaussianModel, Schedules) {
        let p = GaussianResidualParams::new(Schedule::affine_power(1.0, 1.0, -1.0), Schedule::power(1.0, -1.0));
        let m = GaussianModel::new(p);
        let s = m.default_schedules();
        (m, s)
    }

    const N_LIST: [u64; 6] = [10, 100, 1_000, 10_000, 100_000, 1_000_000];

    #[test]
    fn diagnostic_rules() {
        let d = ConvergenceDiagnostic::new(vec![1, 2, 3, 4], vec![1.0, 0.5, 0.25, 0.125], vec![0.0; 4], 0.3).unwrap();
        assert_eq!(d.gaps, vec![0.5, 0.25, 0.125]);
        assert!(d.cauchy_ok);
        // geometric sequences extrapolate exactly
        assert!(d.aitken.unwrap().abs() < 1e-12);
        let bumpy = ConvergenceDiagnostic::new(vec![1, 2, 3], vec![0.0, 1.0, -1.0], vec![0.0; 3], 0.5).unwrap();
        assert!(bumpy.aitken.is_none());
        assert!(!bumpy.cauchy_ok);
        assert_eq!(bumpy.limit_estimate, -1.0);
    }

    #[test]
    fn gaussian_scaled_prices() {
        let (m, s) = reference();
        let d = scaled_price_sequence(&m, &s, 0.4, &N_LIST, DEFAULT_CAUCHY_TOL).unwrap();
        for (n, v) in d.indices.iter().zip(&d.values) {
            assert!((v - (1.0 + 1.0 / *n as f64 - 0.2)).abs() < 1e-12);
        }
        assert!(d.cauchy_ok);
        assert!((d.limit_estimate - 0.8).abs() < 1e-6);
        let zero = scaled_price_sequence(&m, &s, 0.0, &N_LIST, DEFAULT_CAUCHY_TOL).unwrap();
        assert!((zero.values[5] - 1.000001).abs() < 1e-12);
    }

    #[test]
    fn wrong_scaling_is_flagged() {
        let (m, _) = reference();
        let s = Schedules::new(RiskAversionSchedule::constant(1.0), RateSchedule::new(Schedule::power(1.0, 0.5)));
        assert!(!scaled_price_sequence(&m, &s, 0.5, &N_LIST, DEFAULT_CAUCHY_TOL).unwrap().cauchy_ok);
        assert!(scaled_price_sequence(&m, &s, 0.0, &N_LIST, DEFAULT_CAUCHY_TOL).unwrap().cauchy_ok);
    }

    #[test]
    fn limit_curve_and_delta() {
        let (m, s) = reference();
        let grid: Vec<f64> = (-4..=4).map(|i| i as f64 * 0.5).collect();
        let est = estimate_limit_curve(&m, &s, &grid, &N_LIST, DEFAULT_CAUCHY_TOL).unwrap();
        assert!(est.excluded.is_empty());
        for &l in &grid {
            assert!((est.curve.eval(l).unwrap() - (1.0 - l / 2.0)).abs() < 1e-9, "{l}");
        }
        assert!((est.continuity_gap - 0.25).abs() < 1e-9);
        let probe = probe_delta(&m, &s, &grid, &N_LIST, DEFAULT_CAUCHY_TOL).unwrap();
        assert_eq!((probe.delta_minus_est, probe.delta_plus_est), (-2.0, 2.0));
        assert!(probe.warning.is_none());
    }

    #[test]
    fn rate_ratios_and_corollary() {
        let (m, s) = reference();
        let lim = gaussian_limit_curve(1.0, 1.0);
        let v = rate_ratio_sequence(&m, &s, &Schedule::constant(0.7), &N_LIST, Some(&lim), 1e-6).unwrap();
        for (n, r) in v.indices.iter().zip(&v.ratios) {
            assert!((r - (0.3 + 1.0 / *n as f64)).abs() < 1e-9, "{n}: {r}");
        }
        assert_eq!(v.verdict, Verdict::ConsistentLong);
        assert!((v.ell_star.unwrap() - 0.3).abs() < 1e-8);
        let short = rate_ratio_sequence(&m, &s, &Schedule::constant(1.3), &N_LIST, Some(&lim), 1e-6).unwrap();
        assert_eq!(short.verdict, Verdict::ConsistentShort);
        assert!((short.ell_star.unwrap() + 0.3).abs() < 1e-8);
        let marginal = Schedule::affine_power(1.0, 1.0, -1.0);
        let zero = rate_ratio_sequence(&m, &s, &marginal, &N_LIST, None, 1e-6).unwrap();
        assert_eq!(zero.verdict, Verdict::Degenerate);
    }

    #[test]
    fn strict_concavity_cases() {
        let grid: Vec<f64> = (0..9).map(|i| -1.0 + 0.25 * i as f64).collect();
        assert!(check_strict_concavity(&gaussian_limit_curve(1.0, 1.0), &grid, 1e-9).unwrap());
        let bond = default_bond_limit_curve(1.0);
        let inside: Vec<f64> = (0..9).map(|i| 0.1 * i as f64).collect();
        assert!(!check_strict_concavity(&bond, &inside, 1e-9).unwrap());
        assert!(matches!(corollary_limit(&bond, 0.5), Err(Error::NonUniqueLimit(_))));
        assert!(corollary_limit(&gaussian_limit_curve(1.0, 1.0), 1.0).unwrap().abs() < 1e-9);
    }
}
