//! Large-position limit under proportional transaction costs: the value
//! `Psi(s, t; b)` of the nonlinear Black-Scholes equation
//! `Psi_t + 1/2 sigma^2 s^2 Psi_ss (1 + S(b^2 s^2 Psi_ss)) = 0`,
//! `Psi(s, T) = (s - K)^+`, and the ask curve `ell -> Psi(s, t; sqrt(a ell))`.
//!
//! The solver works in `x = ln s` and time to maturity `tau = T - t`, where
//! `s^2 Psi_ss = Psi_xx - Psi_x`. Steps are implicit Euler with a Newton
//! iteration; the linearized operator is tridiagonal and, since
//! `d/dG [G (1 + S(b^2 G))] = 1 + S + A S'(A) > 0`, an M-matrix.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{Extent, LimitCurve, Orientation};
use crate::error::{Error, Result};
use crate::models::black_scholes::black_scholes_price;
use crate::numerics::interp::MonotoneCubic;
use crate::numerics::sfunc::{build_s_table, SFunctionTable};
use crate::numerics::solve_tridiagonal;
use crate::schedule::Schedule;

const MAX_NEWTON: usize = 40;
const MAX_HALVINGS: u32 = 12;

/// Discretization settings of the nonlinear PDE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdeConfig {
    /// Log-spot grid size (odd, so the strike is a node).
    pub space_points: usize,
    /// Time steps from maturity to the valuation time.
    pub time_steps: usize,
    /// Upper grid end as a multiple of the strike; the lower end is its
    /// reciprocal. Chosen from `b` when absent.
    pub s_max_mult: Option<f64>,
    /// Range the argument of `S` is clamped to before evaluation.
    pub s_arg_clamp: (f64, f64),
    /// Range and node count of the tabulated `S`.
    pub s_table: (f64, f64, usize),
    /// Newton stopping threshold on the update, relative to the strike.
    pub newton_tol: f64,
}

impl Default for PdeConfig {
    fn default() -> Self {
        PdeConfig {
            space_points: 1201,
            time_steps: 1000,
            s_max_mult: None,
            s_arg_clamp: (-1e12, 1e12),
            s_table: (-50.0, 50.0, 4001),
            newton_tol: 1e-11,
        }
    }
}

/// Call-option setting of the transaction-cost family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransCostParams {
    pub sigma: f64,
    pub strike: f64,
    pub maturity: f64,
    pub spot: f64,
    /// Valuation time in `[0, maturity]`.
    #[serde(default)]
    pub t: f64,
    /// Proportional cost `lambda_n` in `(0, 1)`; the rate is `lambda_n^-2`.
    pub lambda_schedule: Schedule,
    #[serde(default)]
    pub pde: PdeConfig,
}

impl TransCostParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.strike > 0.0 && self.maturity > 0.0 && self.spot > 0.0) {
            return Err(Error::Domain("sigma, strike, maturity and spot must be positive".into()));
        }
        if !(self.t >= 0.0 && self.t <= self.maturity) {
            return Err(Error::Domain(format!("valuation time {} outside [0, T]", self.t)));
        }
        let pde = &self.pde;
        if pde.space_points < 11 || pde.time_steps < 10 {
            return Err(Error::Domain("PDE grid needs >= 11 space points and >= 10 time steps".into()));
        }
        if let Some(m) = pde.s_max_mult {
            if !(m > 1.0) {
                return Err(Error::Domain(format!("s_max_mult {m} must exceed 1")));
            }
        }
        Ok(())
    }

    /// `lambda_n`, checked to lie in `(0, 1)`.
    pub fn lambda(&self, n: u64) -> Result<f64> {
        let l = self.lambda_schedule.eval(n)?;
        if l > 0.0 && l < 1.0 {
            Ok(l)
        } else {
            Err(Error::Domain(format!("transaction cost {l} at n = {n} outside (0, 1)")))
        }
    }

    /// `r_n = lambda_n^-2`.
    pub fn rate(&self, n: u64) -> Result<f64> {
        Ok(self.lambda(n)?.powi(-2))
    }

    pub fn black_scholes(&self) -> Result<f64> {
        black_scholes_price(self.spot, self.t, self.sigma, self.strike, self.maturity)
    }

    fn s_table(&self) -> Result<SFunctionTable> {
        let (lo, hi, n) = self.pde.s_table;
        build_s_table(lo, hi, n)
    }

    /// Half-width of the log-spot domain: six standard deviations at zero
    /// cost, widened with `b` (the effective variance grows with
    /// `b^2 s^2 Psi_ss`) up to 15, beyond which the value at the strike no
    /// longer moves.
    fn half_width(&self, b: f64) -> f64 {
        if let Some(m) = self.pde.s_max_mult {
            return m.ln();
        }
        let base = 6.0 * self.sigma * self.maturity.sqrt();
        (base * (1.0 + b * self.strike.sqrt())).min(base.max(15.0))
    }
}

/// Log-spot snapshots of `Psi(., t; b)` at requested valuation times.
#[derive(Debug, Clone)]
pub struct PsiSurface {
    pub b: f64,
    /// Log-spot nodes.
    pub x: Vec<f64>,
    /// `(t, values at x)`, ordered by decreasing `t`.
    pub snapshots: Vec<(f64, Vec<f64>)>,
}

impl PsiSurface {
    pub fn spots(&self) -> Vec<f64> {
        self.x.iter().map(|x| x.exp()).collect()
    }

    pub fn snapshot(&self, t: f64) -> Result<&[f64]> {
        self.snapshots
            .iter()
            .find(|(ts, _)| (ts - t).abs() <= 1e-12 * (1.0 + t.abs()))
            .map(|(_, v)| v.as_slice())
            .ok_or_else(|| Error::Domain(format!("no snapshot stored at t = {t}")))
    }

    /// Cubic Lagrange interpolation in log-spot on the stored snapshot at `t`.
    pub fn value(&self, s: f64, t: f64) -> Result<f64> {
        let v = self.snapshot(t)?;
        let x = s.ln();
        let n = self.x.len();
        let h = self.x[1] - self.x[0];
        let pos = (x - self.x[0]) / h;
        if !(pos >= 0.0 && pos <= (n - 1) as f64) {
            return Err(Error::Domain(format!("spot {s} outside the PDE grid")));
        }
        let i0 = (pos.floor() as usize).saturating_sub(1).min(n - 4);
        let mut acc = 0.0;
        for j in 0..4 {
            let mut w = 1.0;
            for m in 0..4 {
                if m != j {
                    w *= (x - self.x[i0 + m]) / (self.x[i0 + j] - self.x[i0 + m]);
                }
            }
            acc += w * v[i0 + j];
        }
        Ok(acc)
    }
}

/// Solves for `Psi(., t; b)` and keeps snapshots at each of `times`
/// (valuation times in `[0, T]`; `T` itself is always stored).
pub fn transaction_psi(p: &TransCostParams, b: f64, times: &[f64]) -> Result<PsiSurface> {
    p.validate()?;
    let table = p.s_table()?;
    solve_surface(p, &table, b, times)
}

fn solve_surface(p: &TransCostParams, table: &SFunctionTable, b: f64, times: &[f64]) -> Result<PsiSurface> {
    if !(b >= 0.0) || !b.is_finite() {
        return Err(Error::Domain(format!("cost scale b = {b} must be finite and >= 0")));
    }
    if times.iter().any(|t| !(*t >= 0.0 && *t <= p.maturity)) {
        return Err(Error::Domain("snapshot times must lie in [0, T]".into()));
    }
    let n = p.pde.space_points | 1;
    let half = p.half_width(b);
    let center = p.strike.ln();
    let h = 2.0 * half / (n - 1) as f64;
    let x: Vec<f64> = (0..n).map(|i| center - half + h * i as f64).collect();
    let payoff: Vec<f64> = x.iter().map(|x| (x.exp() - p.strike).max(0.0)).collect();

    // graded grid in tau, finer near the payoff kink, plus the snapshot times
    let m = p.pde.time_steps;
    let mut taus: Vec<f64> = (0..=m)
        .map(|k| p.maturity * (k as f64 / m as f64).powi(2))
        .collect();
    let snap_taus: Vec<f64> = times.iter().map(|t| p.maturity - t).collect();
    taus.extend(snap_taus.iter().copied());
    taus.sort_by(|a, b| a.partial_cmp(b).unwrap());
    taus.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * p.maturity);

    // The unknown is the time value w = s - Psi, which stays in [0, K]
    // while s itself spans many orders of magnitude.
    let spots: Vec<f64> = x.iter().map(|x| x.exp()).collect();
    let to_psi = |w: &[f64]| -> Vec<f64> { spots.iter().zip(w).map(|(s, w)| s - w).collect() };
    let mut stepper = Stepper::new(p, table, b, h, n, (spots[0], p.strike));
    let mut w: Vec<f64> = spots.iter().map(|s| s.min(p.strike)).collect();
    let mut snapshots = vec![(p.maturity, payoff)];
    let mut tau_prev = 0.0;
    for &tau in &taus[1..] {
        stepper.advance(&mut w, tau - tau_prev)?;
        tau_prev = tau;
        if snap_taus.iter().any(|s| (s - tau).abs() <= 1e-14 * p.maturity) {
            snapshots.push((p.maturity - tau, to_psi(&w)));
        }
    }
    Ok(PsiSurface { b, x, snapshots })
}

struct Stepper<'a> {
    table: &'a SFunctionTable,
    half_sig2: f64,
    b2: f64,
    clamp: (f64, f64),
    alpha: f64,
    beta: f64,
    gamma: f64,
    tol: f64,
    n: usize,
    ends: (f64, f64),
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    rhs: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(p: &TransCostParams, table: &'a SFunctionTable, b: f64, h: f64, n: usize, ends: (f64, f64)) -> Self {
        Stepper {
            table,
            half_sig2: 0.5 * p.sigma * p.sigma,
            b2: b * b,
            clamp: p.pde.s_arg_clamp,
            alpha: 1.0 / (h * h) + 0.5 / h,
            beta: -2.0 / (h * h),
            gamma: 1.0 / (h * h) - 0.5 / h,
            tol: p.pde.newton_tol * p.strike,
            n,
            ends,
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            upper: vec![0.0; n],
            rhs: vec![0.0; n],
        }
    }

    /// `f(G) = G (1 + S(b^2 G))` and its derivative.
    fn flux(&self, g: f64) -> (f64, f64) {
        if self.b2 == 0.0 {
            return (g, 1.0);
        }
        let a = self.b2 * g;
        let ac = a.clamp(self.clamp.0, self.clamp.1);
        let (s, elast) = self.table.eval_with_elasticity(ac);
        let slope = if ac == a { 1.0 + s + elast } else { 1.0 + s };
        (g * (1.0 + s), slope)
    }

    fn advance(&mut self, w: &mut Vec<f64>, dt: f64) -> Result<()> {
        let start = w.clone();
        self.advance_split(&start, w, dt, 0)
    }

    fn advance_split(&mut self, start: &[f64], out: &mut Vec<f64>, dt: f64, depth: u32) -> Result<()> {
        out.copy_from_slice(start);
        if self.newton(start, out, dt) {
            return Ok(());
        }
        if depth == MAX_HALVINGS {
            return Err(Error::PdeStepFailure(format!(
                "Newton iteration did not converge after {MAX_HALVINGS} step halvings"
            )));
        }
        let mut mid = start.to_vec();
        self.advance_split(start, &mut mid, 0.5 * dt, depth + 1)?;
        self.advance_split(&mid, out, 0.5 * dt, depth + 1)
    }

    /// Residual `w - start + dt sigma^2/2 f(-G(w))` of the implicit step
    /// (Dirichlet rows included); fills the Jacobian when `jacobian`.
    fn residual(&mut self, start: &[f64], w: &[f64], c: f64, jacobian: bool) -> Option<f64> {
        let n = self.n;
        let mut worst = 0.0f64;
        for i in 1..n - 1 {
            let g = self.alpha * w[i - 1] + self.beta * w[i] + self.gamma * w[i + 1];
            let (f, df) = self.flux(-g);
            if !(f.is_finite() && df.is_finite()) {
                return None;
            }
            let r = w[i] - start[i] + c * f;
            worst = worst.max(r.abs());
            if jacobian {
                let df = df.max(0.0);
                self.rhs[i] = -r;
                self.lower[i] = -c * df * self.alpha;
                self.diag[i] = 1.0 - c * df * self.beta;
                self.upper[i] = -c * df * self.gamma;
            }
        }
        let r_lo = w[0] - self.ends.0;
        let r_hi = w[n - 1] - self.ends.1;
        worst = worst.max(r_lo.abs()).max(r_hi.abs());
        if jacobian {
            for (i, r) in [(0, r_lo), (n - 1, r_hi)] {
                self.lower[i] = 0.0;
                self.diag[i] = 1.0;
                self.upper[i] = 0.0;
                self.rhs[i] = -r;
            }
        }
        Some(worst)
    }

    /// Damped Newton iteration for one implicit step; `false` when it
    /// stalls. The flux has a cusp at `G = 0`, where plain Newton can cycle,
    /// so each update is backtracked until the residual decreases.
    fn newton(&mut self, start: &[f64], w: &mut [f64], dt: f64) -> bool {
        let c = dt * self.half_sig2;
        let mut trial = w.to_vec();
        let Some(mut res) = self.residual(start, w, c, true) else {
            return false;
        };
        for _ in 0..MAX_NEWTON {
            if res <= self.tol {
                return true;
            }
            if solve_tridiagonal(&self.lower, &self.diag, &self.upper, &mut self.rhs).is_err() {
                return false;
            }
            let step = self.rhs.iter().fold(0.0f64, |m, d| m.max(d.abs()));
            if !step.is_finite() {
                return false;
            }
            let delta = self.rhs.clone();
            let mut lambda = 1.0;
            loop {
                for ((t, v), d) in trial.iter_mut().zip(w.iter()).zip(&delta) {
                    *t = v + lambda * d;
                }
                match self.residual(start, &trial, c, false) {
                    Some(r) if r < res || lambda < 1.0 / 64.0 => break,
                    None if lambda < 1.0 / 64.0 => return false,
                    _ => lambda *= 0.5,
                }
            }
            w.copy_from_slice(&trial);
            if lambda * step <= self.tol {
                return true;
            }
            match self.residual(start, w, c, true) {
                Some(r) => res = r,
                None => return false,
            }
        }
        false
    }
}

/// Default `b`-nodes of the cached limit curve: uniform in `b^{2/3}` up
/// to `b_max`, the variable in which `Psi` is close to linear near zero.
pub fn default_b_nodes(b_max: f64, count: usize) -> Vec<f64> {
    let v_max = b_max.powf(2.0 / 3.0);
    (0..count)
        .map(|i| (v_max * i as f64 / (count - 1) as f64).powf(1.5))
        .collect()
}

/// `Psi(s, t; b)` on a set of `b` values, solved concurrently.
pub fn psi_at_spot(p: &TransCostParams, bs: &[f64]) -> Result<Vec<f64>> {
    p.validate()?;
    let table = p.s_table()?;
    bs.par_iter()
        .map(|&b| solve_surface(p, &table, b, &[p.t])?.value(p.spot, p.t))
        .collect()
}

/// Cached ask curve `ell -> Psi(s, t; sqrt(a ell))` for `ell >= 0`.
///
/// `Psi` is solved on `b_nodes` and interpolated monotonically in
/// `v = b^{2/3}`; beyond the last node the curve continues as
/// `Psi(b_max) + (s - Psi(b_max)) (1 - b_max / b)`, which tends to `s`.
pub fn transaction_limit_curve(p: &TransCostParams, a: f64, b_nodes: &[f64]) -> Result<LimitCurve> {
    if !(a > 0.0) {
        return Err(Error::Domain(format!("risk aversion {a} is not positive")));
    }
    if b_nodes.len() < 3 || b_nodes[0] != 0.0 || b_nodes.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("b nodes must start at 0, increase strictly and number >= 3".into()));
    }
    let psi = psi_at_spot(p, b_nodes)?;
    let cached = CachedPsi::new(b_nodes, psi, p.spot)?;
    let d = cached.psi(0.0);
    let curve = Arc::new(cached);
    Ok(LimitCurve::new(d, Extent::Finite(0.0), Extent::Infinite, move |ell| {
        if ell < 0.0 {
            return Err(Error::Domain(format!("ask curve defined for ell >= 0, got {ell}")));
        }
        Ok(curve.psi((a * ell).sqrt()))
    })
    .with_orientation(Orientation::Ask)
    .with_limit_at_infinity(p.spot))
}

/// Interpolated `b -> Psi(s, t; b)`.
#[derive(Debug, Clone)]
pub struct CachedPsi {
    interp: MonotoneCubic,
    b_max: f64,
    psi_max: f64,
    spot: f64,
}

impl CachedPsi {
    pub fn new(b_nodes: &[f64], psi: Vec<f64>, spot: f64) -> Result<Self> {
        let v: Vec<f64> = b_nodes.iter().map(|b| b.powf(2.0 / 3.0)).collect();
        let b_max = b_nodes[b_nodes.len() - 1];
        let psi_max = psi[psi.len() - 1];
        Ok(CachedPsi {
            interp: MonotoneCubic::new(v, psi)?,
            b_max,
            psi_max,
            spot,
        })
    }

    pub fn psi(&self, b: f64) -> f64 {
        if b <= self.b_max {
            self.interp.eval(b.powf(2.0 / 3.0))
        } else {
            self.psi_max + (self.spot - self.psi_max) * (1.0 - self.b_max / b)
        }
    }
}
