//! The transaction-cost nonlinearity `S`, the solution of
//! `S'(A) = (1 + S) / (2 sqrt(A S) - A)` with `S(0) = 0`.
//!
//! The equation is singular at the origin, where `S ~ k A^{1/3}` with
//! `k = (3/2)^{2/3}`. In the variable `u = A^{1/3}` it becomes regular:
//! `dS/du = 3 (1 + S) / (2 sqrt(S / u) - u)`, with `S/u -> k` at `u = 0`.
//! The table is therefore built and interpolated on a grid uniform in `u`.

use crate::error::{Error, Result};
use crate::numerics::interp::MonotoneCubic;

/// Seed offset in `A` for the outward integrations.
pub const SEED_EPS: f64 = 1e-8;

const MAX_REFINE: u32 = 12;

/// Leading coefficient of `S(A) ~ k A^{1/3}`.
pub fn seed_coefficient() -> f64 {
    1.5f64.powf(2.0 / 3.0)
}

/// Three-term expansion `S ~ k u (1 + c u + e u^2)` in `u = A^{1/3}`.
pub fn seed_value(u: f64) -> f64 {
    let k = seed_coefficient();
    let c = 8.0 * k / 15.0;
    let e = 32.0 * k * k / 175.0;
    k * u * (1.0 + c * u + e * u * u)
}

/// `dS/du` of the regularized equation.
fn rhs_u(u: f64, s: f64) -> Option<f64> {
    if u == 0.0 {
        return (s == 0.0).then(seed_coefficient);
    }
    let ratio = s / u;
    if !(ratio > 0.0) {
        return None;
    }
    let den = 2.0 * ratio.sqrt() - u;
    if !(den > 0.0) {
        return None;
    }
    Some(3.0 * (1.0 + s) / den)
}

/// Right side `(1 + S) / (2 sqrt(A S) - A)` of the original equation.
pub fn s_ode_rhs(a: f64, s: f64) -> f64 {
    (1.0 + s) / (2.0 * (a * s).sqrt() - a)
}

/// Interpolated `S` on `[A_min, A_max]` with analytic tails outside.
///
/// Above `A_max`: `S = A + ln(A / A_max) + S(A_max) - A_max`, which keeps
/// `S(A)/A -> 1`. Below `A_min`: `1 + S` proportional to
/// `(sqrt(-A) + 2)^-2`, which sends `S -> -1`. Both solve the equation's
/// dominant balance, and the lower one keeps `A (1 + S)` strictly increasing.
#[derive(Debug, Clone)]
pub struct SFunctionTable {
    a_min: f64,
    a_max: f64,
    s_min: f64,
    s_max: f64,
    curve: MonotoneCubic,
}

impl SFunctionTable {
    /// Table over `[-50, 50]` with 4001 nodes.
    pub fn standard() -> Result<Self> {
        build_s_table(-50.0, 50.0, 4001)
    }

    pub fn range(&self) -> (f64, f64) {
        (self.a_min, self.a_max)
    }

    /// Node pairs `(A, S)`, sorted by `A`.
    pub fn grid(&self) -> Vec<(f64, f64)> {
        self.curve
            .nodes()
            .iter()
            .zip(self.curve.values())
            .map(|(u, s)| (u * u * u, *s))
            .collect()
    }

    pub fn eval(&self, a: f64) -> f64 {
        self.eval_with_elasticity(a).0
    }

    /// `S(A)` together with `A S'(A)`, which stays finite at the origin.
    pub fn eval_with_elasticity(&self, a: f64) -> (f64, f64) {
        if a > self.a_max {
            let s = a + (a / self.a_max).ln() + self.s_max - self.a_max;
            return (s, a + 1.0);
        }
        if a < self.a_min {
            let (r, r_min) = ((-a).sqrt(), (-self.a_min).sqrt());
            let v = (1.0 + self.s_min) * ((r_min + 2.0) / (r + 2.0)).powi(2);
            return (v - 1.0, -v * r / (r + 2.0));
        }
        let u = a.cbrt();
        let (s, ds_du) = self.curve.eval_with_derivative(u);
        (s, u * ds_du / 3.0)
    }

    /// `S'(A)`; infinite at `A = 0`.
    pub fn derivative(&self, a: f64) -> f64 {
        if a == 0.0 {
            return f64::INFINITY;
        }
        let (_, e) = self.eval_with_elasticity(a);
        e / a
    }

    /// Largest relative residual `|S' - rhs| / max(1, |rhs|)` over the
    /// interior nodes (the origin excluded), with `S'` taken by centered
    /// differences of the interpolant.
    pub fn max_residual(&self) -> f64 {
        let grid = self.grid();
        grid[1..grid.len() - 1]
            .iter()
            .filter(|(a, _)| *a != 0.0)
            .map(|&(a, s)| {
                let h = 1e-4 * a.abs();
                let fd = (self.eval(a + h) - self.eval(a - h)) / (2.0 * h);
                let rhs = s_ode_rhs(a, s);
                (fd - rhs).abs() / rhs.abs().max(1.0)
            })
            .fold(0.0, f64::max)
    }
}

/// Builds the `S` table on `[a_min, a_max]` with `n_points` nodes uniform in
/// `A^{1/3}`, the origin always being a node.
pub fn build_s_table(a_min: f64, a_max: f64, n_points: usize) -> Result<SFunctionTable> {
    if !(a_min < 0.0 && a_max > 0.0) || !a_min.is_finite() || !a_max.is_finite() {
        return Err(Error::Domain(format!("S table needs A_min < 0 < A_max, got [{a_min}, {a_max}]")));
    }
    if n_points < 5 {
        return Err(Error::Domain("S table needs at least 5 nodes".into()));
    }
    let (u_lo, u_hi) = (a_min.cbrt(), a_max.cbrt());
    let intervals = n_points - 1;
    let n_neg = ((intervals as f64 * -u_lo / (u_hi - u_lo)).round() as usize).clamp(1, intervals - 1);
    let n_pos = intervals - n_neg;

    let pos = integrate_side(u_hi, n_pos)?;
    let neg = integrate_side(u_lo, n_neg)?;

    let mut u = Vec::with_capacity(n_points);
    let mut s = Vec::with_capacity(n_points);
    let mut d = Vec::with_capacity(n_points);
    for &(ui, si, di) in neg.iter().rev() {
        u.push(ui);
        s.push(si);
        d.push(di);
    }
    for &(ui, si, di) in &pos[1..] {
        u.push(ui);
        s.push(si);
        d.push(di);
    }
    if s.windows(2).any(|w| !(w[1] > w[0])) || s.iter().any(|v| !(*v > -1.0)) {
        return Err(Error::STableFailed("integrated S is not increasing in (-1, inf)".into()));
    }
    let s_min = s[0];
    let s_max = s[s.len() - 1];
    let curve = MonotoneCubic::with_derivatives(u, s, d)?;
    Ok(SFunctionTable {
        a_min,
        a_max,
        s_min,
        s_max,
        curve,
    })
}

/// Integrates from the origin out to `u_end` over `steps` equal node
/// intervals; returns `(u, S, dS/du)` starting at the origin.
fn integrate_side(u_end: f64, steps: usize) -> Result<Vec<(f64, f64, f64)>> {
    let h = u_end / steps as f64;
    let u_eps = SEED_EPS.cbrt().copysign(u_end);
    let mut out = Vec::with_capacity(steps + 1);
    out.push((0.0, 0.0, seed_coefficient()));

    let mut u = u_eps;
    let mut s = seed_value(u_eps);
    for j in 1..=steps {
        let target = h * j as f64;
        if (target - u) * u_end.signum() > 0.0 {
            s = advance(u, s, target)?;
        } else {
            // the seed lies beyond this node; the expansion is exact enough there
            s = seed_value(target);
        }
        u = target;
        let ds = rhs_u(u, s).ok_or_else(|| Error::STableFailed(format!("degenerate slope at u = {u}")))?;
        out.push((u, s, ds));
    }
    Ok(out)
}

/// RK4 from `u0` to `u1`, halving the substep whenever a stage leaves the
/// region where the right side is defined.
fn advance(u0: f64, s0: f64, u1: f64) -> Result<f64> {
    let mut sub = 4usize;
    for _ in 0..MAX_REFINE {
        if let Some(s) = rk4_checked(u0, s0, u1, sub) {
            return Ok(s);
        }
        sub *= 2;
    }
    Err(Error::STableFailed(format!(
        "denominator 2 sqrt(AS) - A reached zero between u = {u0} and u = {u1}"
    )))
}

fn rk4_checked(u0: f64, s0: f64, u1: f64, sub: usize) -> Option<f64> {
    let h = (u1 - u0) / sub as f64;
    let mut s = s0;
    for i in 0..sub {
        let u = u0 + h * i as f64;
        let k1 = rhs_u(u, s)?;
        let k2 = rhs_u(u + 0.5 * h, s + 0.5 * h * k1)?;
        let k3 = rhs_u(u + 0.5 * h, s + 0.5 * h * k2)?;
        let k4 = rhs_u(u + h, s + h * k3)?;
        s += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !s.is_finite() {
            return None;
        }
    }
    Some(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_balances_the_equation() {
        for a in [SEED_EPS, -SEED_EPS] {
            let u = a.cbrt();
            let s = seed_value(u);
            let k = seed_coefficient();
            let (c, e) = (8.0 * k / 15.0, 32.0 * k * k / 175.0);
            let dsdu = k * (1.0 + 2.0 * c * u + 3.0 * e * u * u);
            let lhs = dsdu / (3.0 * u * u);
            let rhs = s_ode_rhs(a, s);
            assert!((lhs - rhs).abs() / rhs.abs() < 1e-6, "A = {a}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn standard_table_invariants() {
        let t = SFunctionTable::standard().unwrap();
        assert_eq!(t.eval(0.0), 0.0);
        let g = t.grid();
        assert_eq!(g.len(), 4001);
        assert!(g.windows(2).all(|w| w[1].0 > w[0].0 && w[1].1 > w[0].1));
        assert!(g.iter().all(|(_, s)| *s > -1.0));
        let r = t.max_residual();
        assert!(r <= 1e-6, "residual {r}");
    }

    #[test]
    fn tails() {
        let t = SFunctionTable::standard().unwrap();
        let big = t.eval(500.0);
        assert!((big / 500.0 - 1.0).abs() < 0.02);
        assert!((t.eval(1e8) / 1e8 - 1.0).abs() < 1e-6);
        let low = t.eval(-500.0);
        assert!(low > -1.0 && low < -0.9);
        assert!(t.eval(-1e12) + 1.0 < 1e-9);
        // continuity at the table ends
        assert!((t.eval(50.0 * (1.0 + 1e-12)) - t.eval(50.0)).abs() < 1e-9);
        assert!((t.eval(-50.0 * (1.0 + 1e-12)) - t.eval(-50.0)).abs() < 1e-9);
    }

    #[test]
    fn flux_is_strictly_increasing() {
        // d/dA [A (1 + S(A))] = 1 + S + A S' > 0 everywhere, tails included
        let t = SFunctionTable::standard().unwrap();
        let mut a = -1e8f64;
        while a < 1e8 {
            let (s, e) = t.eval_with_elasticity(a);
            assert!(1.0 + s + e > 0.0, "A = {a}");
            a += if a.abs() < 1.0 { 1e-3 } else { a.abs() * 1e-2 };
        }
    }

    #[test]
    fn elasticity_matches_difference_quotient() {
        let t = SFunctionTable::standard().unwrap();
        for a in [-120.0, -7.0, -0.3, 1e-5, 0.4, 9.0, 300.0] {
            let (_, e) = t.eval_with_elasticity(a);
            let h = 1e-6 * a.abs();
            let fd = (t.eval(a + h) - t.eval(a - h)) / (2.0 * h);
            assert!((e - a * fd).abs() < 1e-5 * (1.0 + e.abs()), "A = {a}");
        }
        assert_eq!(t.eval_with_elasticity(0.0).1, 0.0);
    }

    #[test]
    fn asymmetric_range_and_errors() {
        let t = build_s_table(-5.0, 400.0, 801).unwrap();
        assert_eq!(t.eval(0.0), 0.0);
        let s = SFunctionTable::standard().unwrap();
        assert!((t.eval(3.0) - s.eval(3.0)).abs() < 1e-6);
        assert!(build_s_table(1.0, 2.0, 100).is_err());
        assert!(build_s_table(-1.0, 1.0, 3).is_err());
    }
}
