//! Univariate and bivariate polynomials in the monomial basis.

use serde::{Deserialize, Serialize};

/// `p(x) = Σ_i coeffs[i] x^i`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Poly {
    coeffs: Vec<f64>,
}

impl Poly {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(a: f64) -> Self {
        Self { coeffs: vec![a] }
    }

    /// `a x^n`.
    pub fn monomial(a: f64, n: usize) -> Self {
        let mut coeffs = vec![0.0; n + 1];
        coeffs[n] = a;
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Poly {
        Poly {
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, &c)| i as f64 * c)
                .collect(),
        }
    }

    /// Minimum and maximum over `[0, 1]`, taken over the endpoints and the
    /// stationary points of the polynomial.
    pub fn range_on_unit(&self) -> (f64, f64) {
        let mut lo = self.eval(0.0).min(self.eval(1.0));
        let mut hi = self.eval(0.0).max(self.eval(1.0));
        for x in self.derivative().roots_on_unit() {
            let v = self.eval(x);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    /// Real roots in `[0, 1]`, located by sign changes on a fine sample and
    /// refined by bisection.
    fn roots_on_unit(&self) -> Vec<f64> {
        const SAMPLES: usize = 4000;
        if self.is_zero() {
            return Vec::new();
        }
        let mut roots = Vec::new();
        let mut x_prev = 0.0;
        let mut v_prev = self.eval(0.0);
        for i in 1..=SAMPLES {
            let x = i as f64 / SAMPLES as f64;
            let v = self.eval(x);
            if v_prev == 0.0 {
                roots.push(x_prev);
            } else if v_prev * v < 0.0 {
                let (mut a, mut b, mut fa) = (x_prev, x, v_prev);
                for _ in 0..80 {
                    let m = 0.5 * (a + b);
                    let fm = self.eval(m);
                    if fa * fm <= 0.0 {
                        b = m;
                    } else {
                        a = m;
                        fa = fm;
                    }
                }
                roots.push(0.5 * (a + b));
            }
            x_prev = x;
            v_prev = v;
        }
        if v_prev == 0.0 {
            roots.push(1.0);
        }
        roots
    }
}

/// `f(x, y) = Σ_{i,j} coeffs[i][j] x^i y^j`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Poly2 {
    coeffs: Vec<Vec<f64>>,
}

impl Poly2 {
    pub fn new(coeffs: Vec<Vec<f64>>) -> Self {
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(a: f64) -> Self {
        Self {
            coeffs: vec![vec![a]],
        }
    }

    pub fn coeffs(&self) -> &[Vec<f64>] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().flatten().all(|&c| c == 0.0)
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, row| {
            acc * x + row.iter().rev().fold(0.0, |a, &c| a * y + c)
        })
    }

    /// Sampled maximum of `|f|` over `[0,1]²` on an `n × n` grid.
    pub fn max_abs_sampled(&self, n: usize) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let n = n.max(2);
        let mut m: f64 = 0.0;
        for i in 0..n {
            let x = i as f64 / (n - 1) as f64;
            for j in 0..n {
                let y = j as f64 / (n - 1) as f64;
                m = m.max(self.eval(x, y).abs());
            }
        }
        m
    }

    pub(crate) fn all_finite(&self) -> bool {
        self.coeffs.iter().flatten().all(|c| c.is_finite())
    }
}

impl Poly {
    pub(crate) fn all_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }
}
