use crate::error::{Error, Result};

/// Thomas algorithm for `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]`.
/// `lower[0]` and `upper[n-1]` are ignored. Overwrites `rhs` with the solution.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) -> Result<()> {
    let n = diag.len();
    if lower.len() != n || upper.len() != n || rhs.len() != n || n == 0 {
        return Err(Error::Domain("tridiagonal system has mismatched lengths".into()));
    }
    let mut c = vec![0.0; n];
    let mut beta = diag[0];
    if beta == 0.0 {
        return Err(Error::Domain("singular tridiagonal system".into()));
    }
    rhs[0] /= beta;
    for i in 1..n {
        c[i - 1] = upper[i - 1] / beta;
        beta = diag[i] - lower[i] * c[i - 1];
        if beta == 0.0 || !beta.is_finite() {
            return Err(Error::Domain("singular tridiagonal system".into()));
        }
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_known_system() {
        // [2 1 0; 1 3 1; 0 1 2] x = [3 5 3] -> x = [1 1 1]
        let mut r = vec![3.0, 5.0, 3.0];
        solve_tridiagonal(&[0.0, 1.0, 1.0], &[2.0, 3.0, 2.0], &[1.0, 1.0, 0.0], &mut r).unwrap();
        for v in r {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_mismatch() {
        let mut r = vec![1.0];
        assert!(solve_tridiagonal(&[0.0], &[1.0, 1.0], &[0.0], &mut r).is_err());
    }
}
