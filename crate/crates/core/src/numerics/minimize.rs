//! Derivative-free 1-D minimization of unimodal functions.

use crate::error::{Error, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_9;
const MAX_DOUBLINGS: u32 = 64;
const MAX_GOLDEN_ITERS: usize = 400;

/// Result of [`minimize_unimodal`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub f: f64,
    /// Final bracket around `x`.
    pub bracket: (f64, f64),
    pub evaluations: usize,
    /// Width of the final golden-section bracket.
    pub achieved_tol: f64,
}

struct Counted<F> {
    f: F,
    calls: usize,
}

impl<F: FnMut(f64) -> Result<f64>> Counted<F> {
    fn call(&mut self, x: f64) -> Result<f64> {
        self.calls += 1;
        let v = (self.f)(x)?;
        if v.is_nan() {
            return Err(Error::Domain(format!("objective is NaN at {x}")));
        }
        Ok(v)
    }
}

/// Minimizes a unimodal `f` starting from the hint `(lo, hi)`.
///
/// The bracket grows geometrically (factor 2) until its midpoint beats both
/// ends, then golden-section search shrinks it below `tol`; a final
/// three-point parabolic step sharpens smooth minima.
pub fn minimize_unimodal<F>(f: F, bracket_hint: (f64, f64), tol: f64) -> Result<Minimum>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance {tol} must be positive")));
    }
    let (mut lo, mut hi) = bracket_hint;
    if !(lo.is_finite() && hi.is_finite()) || lo == hi {
        return Err(Error::Domain("bracket hint must be two distinct finite points".into()));
    }
    if lo > hi {
        std::mem::swap(&mut lo, &mut hi);
    }
    let mut f = Counted { f, calls: 0 };

    // Walk downhill with doubling steps until the middle of three points
    // lies below both ends.
    let (mut x0, mut x1) = (lo, hi);
    let f0 = f.call(x0)?;
    let mut f1 = f.call(x1)?;
    if f1 > f0 {
        std::mem::swap(&mut x0, &mut x1);
        f1 = f0;
    }
    let mut x2 = x1 + 2.0 * (x1 - x0);
    let mut f2 = f.call(x2)?;
    let mut doublings = 0;
    while f2 < f1 {
        if doublings == MAX_DOUBLINGS {
            return Err(Error::UnboundedObjective { doublings });
        }
        doublings += 1;
        x0 = x1;
        (x1, f1) = (x2, f2);
        x2 = x1 + 2.0 * (x1 - x0);
        f2 = f.call(x2)?;
    }
    let (mid, fmid) = (x1, f1);
    let (lo, hi) = if x0 < x2 { (x0, x2) } else { (x2, x0) };

    let mut a = lo;
    let mut b = hi;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f.call(x1)?;
    let mut f2 = f.call(x2)?;
    let mut iters = 0;
    while b - a > tol && iters < MAX_GOLDEN_ITERS {
        iters += 1;
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f.call(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f.call(x2)?;
        }
        if b - a <= 4.0 * f64::EPSILON * a.abs().max(b.abs()) {
            break;
        }
    }
    let (mut x, mut fx) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    for (xe, fe) in [(a, f.call(a)?), (b, f.call(b)?), (mid, fmid)] {
        if fe < fx && xe >= a && xe <= b {
            x = xe;
            fx = fe;
        }
    }

    // Parabolic polish over a stencil wide enough that the curvature is
    // resolved well above rounding noise in f.
    let h = (4.0 * (b - a)).max(1e-4 * x.abs().max(tol));
    let fp = f.call(x + h)?;
    let fm = f.call(x - h)?;
    let curv = fp - 2.0 * fx + fm;
    if curv > 0.0 {
        let xp = x - 0.5 * h * (fp - fm) / curv;
        if (xp - x).abs() <= h {
            let fxp = f.call(xp)?;
            if fxp <= fx + 4.0 * f64::EPSILON * (fx.abs() + 1.0) {
                x = xp;
                fx = fxp;
            }
        }
    }

    Ok(Minimum {
        x,
        f: fx,
        bracket: (a, b),
        evaluations: f.calls,
        achieved_tol: b - a,
    })
}

/// Secant refinement of a root of `g` near the estimate `x`, typically a
/// minimizer whose derivative `g` is known more precisely than the flat
/// objective itself. Returns `x` unchanged if the iteration strays more
/// than a few bracket widths away.
pub fn secant_polish<G: FnMut(f64) -> Result<f64>>(mut g: G, x: f64, bracket: (f64, f64)) -> Result<f64> {
    let (lo, hi) = (bracket.0.min(bracket.1), bracket.0.max(bracket.1));
    // the first secant step must be long enough for g to change by more
    // than its own rounding noise
    let width = (hi - lo).max(1e-6 * x.abs().max(1.0));
    let (mut x0, mut x1) = (x, x + 0.5 * width);
    let (mut g0, mut g1) = (g(x0)?, g(x1)?);
    for _ in 0..30 {
        if g1 == g0 {
            break;
        }
        let x2 = x1 - g1 * (x1 - x0) / (g1 - g0);
        if !x2.is_finite() || (x2 - x).abs() > 4.0 * width {
            return Ok(x);
        }
        let done = (x2 - x1).abs() <= 1e-15 * x2.abs().max(1.0);
        (x0, g0) = (x1, g1);
        x1 = x2;
        g1 = g(x1)?;
        if done {
            break;
        }
    }
    Ok(if g1.abs() <= g0.abs() { x1 } else { x0 })
}
