//! Closed-form power series for `f ≡ 0`, `c1(x) = r x²`.
//!
//! In the chart the reaction is `μ̃(ξ,η) = λ0 − r ξ η`, and the fixed point is
//!
//! ```text
//! G = λ0/4 (ξ+η) + λ0/4 Σ_{n≥1} 4^{−n} Σ_{i=0}^{n} λ0^i A[n][i] T_{2n−i}
//! T_m = (ξη)^m (ξ+η)
//! ```
//!
//! with `A[0][0] = 1` and `A[n][i] = (A[n−1][i−1] − r A[n−1][i]) C_{2n−i}`,
//! `C_m = 1/(m(m+1))`, out-of-range entries read as zero.

/// The coefficient table `A[n][i]`, `0 ≤ i ≤ n ≤ n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesCoefficients {
    pub r: f64,
    pub n_max: usize,
    table: Vec<Vec<f64>>,
}

impl SeriesCoefficients {
    pub fn get(&self, n: usize, i: usize) -> f64 {
        self.table[n][i]
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.table[n]
    }
}

fn c(m: usize) -> f64 {
    let m = m as f64;
    1.0 / (m * (m + 1.0))
}

pub fn series_coefficients(n_max: usize, r: f64) -> SeriesCoefficients {
    let mut table = vec![vec![1.0]];
    for n in 1..=n_max {
        let prev = &table[n - 1];
        let row = (0..=n)
            .map(|i| {
                let shifted = if i > 0 { prev[i - 1] } else { 0.0 };
                let same = prev.get(i).copied().unwrap_or(0.0);
                (shifted - r * same) * c(2 * n - i)
            })
            .collect();
        table.push(row);
    }
    SeriesCoefficients { r, n_max, table }
}

/// Partial sum of the series through `n = n_trunc`.
///
/// Only meaningful for `f ≡ 0` and `c1(x) = r x²`; checking that is the
/// caller's job.
pub fn series_oracle(lambda0: f64, r: f64, xi: f64, eta: f64, n_trunc: usize) -> f64 {
    let coeffs = series_coefficients(n_trunc, r);
    let p = xi * eta;
    let mut total = 0.0;
    for n in 1..=n_trunc {
        let mut inner = 0.0;
        let mut lam_pow = 1.0;
        for i in 0..=n {
            inner += lam_pow * coeffs.get(n, i) * p.powi((2 * n - i) as i32);
            lam_pow *= lambda0;
        }
        total += 0.25f64.powi(n as i32) * inner;
    }
    0.25 * lambda0 * (xi + eta) * (1.0 + total)
}

/// Bound on the series remainder after `n_trunc` terms:
/// `Σ_{n>n_trunc} M1^{n+1}/(n+1)! (ξ^{n+1}η^n + ξ^nη^{n+1})`, `M1 = r + |λ0|`.
pub fn series_tail_bound(lambda0: f64, r: f64, xi: f64, eta: f64, n_trunc: usize) -> f64 {
    let m1 = r + lambda0.abs();
    let mut total = 0.0;
    // term(n) = M1^{n+1}/(n+1)! (ξη)^n (ξ+η), built up multiplicatively
    let mut term = m1 * (xi + eta);
    for n in 1..=n_trunc + 200 {
        term *= m1 * xi * eta / (n + 1) as f64;
        if n > n_trunc {
            total += term;
            if term <= total * 1e-17 {
                break;
            }
        }
    }
    total
}
