//! Thomas algorithm for tridiagonal systems.

use crate::error::{Error, Result};

/// Solve `a_i x_{i−1} + b_i x_i + c_i x_{i+1} = d_i` in place of `d`.
///
/// `a[0]` and `c[n−1]` are ignored. `scratch` must have length `n`.
pub fn solve_tridiagonal(
    a: &[f64],
    b: &[f64],
    c: &[f64],
    d: &mut [f64],
    scratch: &mut [f64],
) -> Result<()> {
    let n = d.len();
    debug_assert!(a.len() == n && b.len() == n && c.len() == n && scratch.len() == n);
    if n == 0 {
        return Ok(());
    }
    let pivot = |p: f64, row: usize| -> Result<f64> {
        if p.abs() < f64::MIN_POSITIVE || !p.is_finite() {
            Err(Error::Numeric(format!(
                "singular tridiagonal system at row {row}"
            )))
        } else {
            Ok(p)
        }
    };
    let mut beta = pivot(b[0], 0)?;
    d[0] /= beta;
    for i in 1..n {
        scratch[i] = c[i - 1] / beta;
        beta = pivot(b[i] - a[i] * scratch[i], i)?;
        d[i] = (d[i] - a[i] * d[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        d[i] -= scratch[i + 1] * d[i + 1];
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_a_diagonally_dominant_system() {
        let n = 6;
        let a = vec![-1.0; n];
        let b = vec![4.0; n];
        let c = vec![-1.0; n];
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin() + 1.0).collect();
        let mut d: Vec<f64> = (0..n)
            .map(|i| {
                let left = if i > 0 { a[i] * x[i - 1] } else { 0.0 };
                let right = if i + 1 < n { c[i] * x[i + 1] } else { 0.0 };
                left + b[i] * x[i] + right
            })
            .collect();
        let mut scratch = vec![0.0; n];
        solve_tridiagonal(&a, &b, &c, &mut d, &mut scratch).unwrap();
        for (got, want) in d.iter().zip(&x) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_pivot_is_reported() {
        let mut d = vec![1.0, 1.0];
        let mut s = vec![0.0; 2];
        let err = solve_tridiagonal(&[0.0, 1.0], &[0.0, 1.0], &[1.0, 0.0], &mut d, &mut s);
        assert!(matches!(err, Err(Error::Numeric(_))));
    }
}
