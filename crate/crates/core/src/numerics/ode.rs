use crate::error::{Error, Result};

/// Classical fixed-step RK4 for a scalar ODE `y' = f(t, y)` from `t0` to
/// `t1` (either direction). The right-hand side may fail; failures and
/// non-finite stages abort the integration.
pub fn rk4_integrate<F>(mut f: F, t0: f64, t1: f64, y0: f64, steps: usize) -> Result<f64>
where
    F: FnMut(f64, f64) -> Result<f64>,
{
    if steps == 0 {
        return Err(Error::Domain("rk4 needs at least one step".into()));
    }
    let h = (t1 - t0) / steps as f64;
    let mut y = y0;
    for i in 0..steps {
        let t = t0 + h * i as f64;
        y = rk4_step(&mut f, t, y, h)?;
    }
    Ok(y)
}

/// One RK4 step of size `h` from `(t, y)`.
pub fn rk4_step<F>(f: &mut F, t: f64, y: f64, h: f64) -> Result<f64>
where
    F: FnMut(f64, f64) -> Result<f64>,
{
    let k1 = f(t, y)?;
    let k2 = f(t + 0.5 * h, y + 0.5 * h * k1)?;
    let k3 = f(t + 0.5 * h, y + 0.5 * h * k2)?;
    let k4 = f(t + h, y + h * k3)?;
    let next = y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if next.is_finite() {
        Ok(next)
    } else {
        Err(Error::OdeBlowUp { t })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let y = rk4_integrate(|_, y| Ok(-y), 0.0, 1.0, 1.0, 100).unwrap();
        assert!((y - (-1.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn constant_and_polynomial() {
        assert_eq!(rk4_integrate(|_, _| Ok(0.0), 0.0, 3.0, 2.5, 7).unwrap(), 2.5);
        let y = rk4_integrate(|t, _| Ok(2.0 * t), 0.0, 2.0, 0.0, 3).unwrap();
        assert!((y - 4.0).abs() < 1e-12);
    }

    #[test]
    fn backward_direction() {
        let y = rk4_integrate(|_, y| Ok(y), 1.0, 0.0, 1.0, 200).unwrap();
        assert!((y - (-1.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn convergence_order() {
        let exact = (-1.0f64).exp();
        let err = |n| (rk4_integrate(|_, y| Ok(-y), 0.0, 1.0, 1.0, n).unwrap() - exact).abs();
        let order = (err(10) / err(20)).log2();
        assert!(order >= 3.8, "order {order}");
    }

    #[test]
    fn blow_up_detected() {
        let e = rk4_integrate(|_, y| Ok(y * y), 0.0, 2.0, 1.0, 10).unwrap_err();
        assert!(matches!(e, Error::OdeBlowUp { .. }));
        assert!(rk4_integrate(|_, y| Ok(y), 0.0, 1.0, 1.0, 0).is_err());
    }
}
