use std::num::NonZeroUsize;

use gauss_quad::hermite::GaussHermite;

use crate::error::{Error, Result};

/// Probabilists' Gauss-Hermite rule: nodes `z_i` and weights `w_i` with
/// `sum w_i g(z_i) ~ E[g(Z)]`, `Z ~ N(0, 1)`.
#[derive(Debug, Clone)]
pub struct NormalRule {
    nodes: Vec<(f64, f64)>,
}

impl NormalRule {
    pub fn new(order: usize) -> Result<Self> {
        let deg = NonZeroUsize::new(order)
            .filter(|d| d.get() >= 2)
            .ok_or_else(|| Error::Domain(format!("quadrature order {order} must be >= 2")))?;
        let rule = GaussHermite::new(deg);
        let norm = std::f64::consts::PI.sqrt();
        let nodes = rule
            .iter()
            .map(|(x, w)| (std::f64::consts::SQRT_2 * x, w / norm))
            .collect();
        Ok(NormalRule { nodes })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// `E[g(mean + sqrt(var) Z)]`.
    pub fn expectation<G>(&self, mut g: G, mean: f64, var: f64) -> Result<f64>
    where
        G: FnMut(f64) -> Result<f64>,
    {
        if !(var > 0.0) {
            return Err(Error::Domain(format!("variance {var} must be positive")));
        }
        let sd = var.sqrt();
        let mut acc = 0.0;
        for &(z, w) in &self.nodes {
            let x = mean + sd * z;
            let v = g(x)?;
            if !v.is_finite() {
                return Err(Error::Domain(format!("integrand not finite at node {x}")));
            }
            acc += w * v;
        }
        Ok(acc)
    }
}

/// `E[g(Z)]` for `Z ~ Normal(mean, var)` with an `order`-point rule; exact
/// for polynomials of degree below `2 * order`.
pub fn gauss_hermite_expectation<G>(g: G, mean: f64, var: f64, order: usize) -> Result<f64>
where
    G: FnMut(f64) -> Result<f64>,
{
    NormalRule::new(order)?.expectation(g, mean, var)
}
