use crate::error::{Error, Result};

const MAX_ITERS: usize = 200;

/// Unique `x >= 0` with `x e^x = c` (principal Lambert W on `[0, inf)`).
///
/// Newton from `ln(1 + c)`, falling back to bisection on
/// `[0, max(1, ln(1 + c) + 1)]` whenever a step leaves the bracket.
pub fn solve_x_exp_x(c: f64, tol: f64) -> Result<f64> {
    if !(c >= 0.0) || !c.is_finite() {
        return Err(Error::Domain(format!("x e^x = c needs finite c >= 0, got {c}")));
    }
    if c == 0.0 {
        return Ok(0.0);
    }
    let g = |x: f64| x * x.exp() - c;
    let mut lo = 0.0;
    let mut hi = 1f64.max(c.ln_1p() + 1.0);
    let mut x = c.ln_1p();
    for _ in 0..MAX_ITERS {
        let gx = g(x);
        if gx.abs() <= tol * (1.0 + c) {
            return Ok(x);
        }
        if gx > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let step = gx / ((1.0 + x) * x.exp());
        let next = x - step;
        x = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    Ok(x)
}

/// Solves `x e^x = exp(log_c)` for `x >= 0` given `ln c`, which stays finite
/// where `c` itself would overflow or underflow.
pub fn solve_x_exp_x_log(log_c: f64) -> Result<f64> {
    if log_c.is_nan() {
        return Err(Error::Domain("log of right-hand side is NaN".into()));
    }
    if log_c == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    if log_c < 1.0 {
        return solve_x_exp_x(log_c.exp(), 1e-15);
    }
    // x + ln x = L with x in [1, L] when L >= 1
    let mut lo = 1.0f64.min(log_c);
    let mut hi = log_c.max(1.0);
    let mut x = (log_c - log_c.ln()).clamp(lo, hi);
    for _ in 0..MAX_ITERS {
        let g = x + x.ln() - log_c;
        if g.abs() <= 4.0 * f64::EPSILON * log_c {
            break;
        }
        if g > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let next = x - g / (1.0 + 1.0 / x);
        x = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    Ok(x)
}
