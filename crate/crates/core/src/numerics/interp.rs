//! Monotone piecewise-cubic Hermite interpolation.

use crate::error::{Error, Result};

/// Piecewise-cubic Hermite interpolant with Fritsch-Carlson limited slopes,
/// so monotone data stay monotone between nodes.
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl MonotoneCubic {
    /// Slopes estimated from the data (Fritsch-Butland harmonic means).
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        check_nodes(&x, &y)?;
        let n = x.len();
        let secants: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i])).collect();
        let mut d = vec![0.0; n];
        for i in 1..n - 1 {
            let (s0, s1) = (secants[i - 1], secants[i]);
            if s0 * s1 > 0.0 {
                let (h0, h1) = (x[i] - x[i - 1], x[i + 1] - x[i]);
                let w0 = 2.0 * h1 + h0;
                let w1 = h1 + 2.0 * h0;
                d[i] = (w0 + w1) / (w0 / s0 + w1 / s1);
            }
        }
        d[0] = end_slope(x[1] - x[0], x[2.min(n - 1)] - x[1], secants[0], *secants.get(1).unwrap_or(&secants[0]));
        d[n - 1] = end_slope(
            x[n - 1] - x[n - 2],
            x[n - 2] - x[n.saturating_sub(3)],
            secants[n - 2],
            *secants.get(n.wrapping_sub(3)).unwrap_or(&secants[n - 2]),
        );
        Ok(MonotoneCubic { x, y, d })
    }

    /// Uses the supplied node derivatives, limited where they would break
    /// monotonicity.
    pub fn with_derivatives(x: Vec<f64>, y: Vec<f64>, mut d: Vec<f64>) -> Result<Self> {
        check_nodes(&x, &y)?;
        if d.len() != x.len() {
            return Err(Error::Domain("derivative count does not match nodes".into()));
        }
        for i in 0..x.len() - 1 {
            let s = (y[i + 1] - y[i]) / (x[i + 1] - x[i]);
            if s == 0.0 {
                d[i] = 0.0;
                d[i + 1] = 0.0;
                continue;
            }
            let alpha = d[i] / s;
            let beta = d[i + 1] / s;
            if alpha < 0.0 {
                d[i] = 0.0;
            }
            if beta < 0.0 {
                d[i + 1] = 0.0;
            }
            let r = alpha * alpha + beta * beta;
            if r > 9.0 {
                let tau = 3.0 / r.sqrt();
                d[i] = tau * alpha * s;
                d[i + 1] = tau * beta * s;
            }
        }
        Ok(MonotoneCubic { x, y, d })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.x
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    /// Value and derivative at `t`; clamps to the end nodes outside the domain.
    pub fn eval_with_derivative(&self, t: f64) -> (f64, f64) {
        let n = self.x.len();
        if t <= self.x[0] {
            return (self.y[0], self.d[0]);
        }
        if t >= self.x[n - 1] {
            return (self.y[n - 1], self.d[n - 1]);
        }
        let i = match self.x.binary_search_by(|v| v.partial_cmp(&t).unwrap()) {
            Ok(i) => return (self.y[i], self.d[i]),
            Err(i) => i - 1,
        };
        self.segment(i, t)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.eval_with_derivative(t).0
    }

    /// Evaluation on segment `i` (`x[i] <= t <= x[i+1]`).
    pub(crate) fn segment(&self, i: usize, t: f64) -> (f64, f64) {
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let v = h00 * self.y[i] + h10 * h * self.d[i] + h01 * self.y[i + 1] + h11 * h * self.d[i + 1];
        let dh00 = 6.0 * s2 - 6.0 * s;
        let dh10 = 3.0 * s2 - 4.0 * s + 1.0;
        let dh01 = -6.0 * s2 + 6.0 * s;
        let dh11 = 3.0 * s2 - 2.0 * s;
        let dv = (dh00 * self.y[i] + dh01 * self.y[i + 1]) / h + dh10 * self.d[i] + dh11 * self.d[i + 1];
        (v, dv)
    }
}

fn check_nodes(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() < 2 || x.len() != y.len() {
        return Err(Error::Domain("interpolation needs >= 2 matching nodes".into()));
    }
    if x.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("interpolation nodes must be strictly increasing".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("interpolation values must be finite".into()));
    }
    Ok(())
}

fn end_slope(h0: f64, h1: f64, s0: f64, s1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * s0 - h0 * s1) / (h0 + h1);
    if d * s0 <= 0.0 {
        0.0
    } else if s0 * s1 <= 0.0 && d.abs() > 3.0 * s0.abs() {
        3.0 * s0
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_nodes_and_is_monotone() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 * 0.3).collect();
        let y: Vec<f64> = x.iter().map(|v| (v * 2.0).tanh() + if *v > 3.0 { 1.0 } else { 0.0 }).collect();
        let m = MonotoneCubic::new(x.clone(), y.clone()).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            assert!((m.eval(*xi) - yi).abs() < 1e-14);
        }
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=5000 {
            let v = m.eval(k as f64 * 5.7 / 5000.0);
            assert!(v >= prev - 1e-15);
            prev = v;
        }
    }

    #[test]
    fn cubic_accuracy_with_exact_slopes() {
        let x: Vec<f64> = (0..=40).map(|i| i as f64 * 0.05).collect();
        let y: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        let m = MonotoneCubic::with_derivatives(x, y.clone(), y).unwrap();
        assert!((m.eval(1.013) - 1.013f64.exp()).abs() < 5e-7);
        let (_, d) = m.eval_with_derivative(0.77);
        assert!((d - 0.77f64.exp()).abs() < 5e-5);
    }

    #[test]
    fn rejects_bad_nodes() {
        assert!(MonotoneCubic::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(MonotoneCubic::new(vec![0.0], vec![1.0]).is_err());
    }
}
