//! Zero-rate Black-Scholes call value, the reference for the
//! transaction-cost limit as the cost parameter vanishes.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Call value at spot `s` and time `t` for strike `k`, maturity `maturity`
/// and volatility `sigma`, with zero interest rate.
pub fn black_scholes_price(s: f64, t: f64, sigma: f64, k: f64, maturity: f64) -> Result<f64> {
    if !(s > 0.0 && sigma > 0.0 && k > 0.0) || t > maturity {
        return Err(Error::Domain(format!(
            "Black-Scholes needs s, sigma, K > 0 and t <= T (s={s}, sigma={sigma}, K={k}, t={t}, T={maturity})"
        )));
    }
    let tau = maturity - t;
    if tau == 0.0 {
        return Ok((s - k).max(0.0));
    }
    let vol = sigma * tau.sqrt();
    let d1 = (s / k).ln() / vol + 0.5 * vol;
    let d2 = d1 - vol;
    let n = Normal::standard();
    Ok(s * n.cdf(d1) - k * n.cdf(d2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn terminal_payoff() {
        assert_eq!(black_scholes_price(120.0, 1.0, 0.2, 100.0, 1.0).unwrap(), 20.0);
        assert_eq!(black_scholes_price(80.0, 1.0, 0.2, 100.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn deep_in_the_money() {
        let v = black_scholes_price(1000.0, 0.0, 0.2, 100.0, 1.0).unwrap();
        assert!((v - 900.0).abs() < 1e-9);
    }

    #[test]
    fn at_the_money_against_numeric_integration() {
        // E[(s e^{vol Z - vol^2/2} - K)^+] by a fine trapezoid rule over z
        let (s, k, vol) = (100.0f64, 100.0, 0.2);
        let n = 200_000;
        let (lo, hi) = (-12.0, 12.0);
        let h = (hi - lo) / n as f64;
        let mut acc = 0.0;
        for i in 0..=n {
            let z: f64 = lo + h * i as f64;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            let pay = (s * (vol * z - 0.5 * vol * vol).exp() - k).max(0.0);
            acc += w * pay * (-0.5 * z * z).exp();
        }
        let oracle = acc * h / (2.0 * std::f64::consts::PI).sqrt();
        let v = black_scholes_price(s, 0.0, 0.2, k, 1.0).unwrap();
        assert!((v - oracle).abs() < 1e-6, "{v} vs {oracle}");
        assert!((v - 7.9656).abs() < 1e-4);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(black_scholes_price(-1.0, 0.0, 0.2, 100.0, 1.0).is_err());
        assert!(black_scholes_price(100.0, 2.0, 0.2, 100.0, 1.0).is_err());
    }
}
