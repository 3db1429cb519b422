//! Storage for kernel values on the characteristic chart and on the triangle.
//!
//! The chart uses `ξ = x + y`, `η = x − y`, so the triangle
//! `D = {0 ≤ y ≤ x ≤ 1}` becomes `{0 ≤ η ≤ 1, η ≤ ξ ≤ 2 − η}`. Both axes are
//! sampled with the same step `h = 2/N`, which makes every integration limit
//! in the kernel equation land on a lattice node. Row `j` (`η = jh`) holds
//! the nodes `i = j ..= N − j`.

/// Row-aligned lattice over the `(ξ, η)` parameter region.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartLattice {
    n: usize,
    h: f64,
    offsets: Vec<usize>,
}

impl ChartLattice {
    /// Lattice with `n_xi` nodes on the `η = 0` row; `n_xi` must be odd.
    pub fn new(n_xi: usize) -> Self {
        assert!(n_xi >= 3 && n_xi % 2 == 1, "n_xi must be odd and >= 3");
        let n = n_xi - 1;
        let rows = n / 2 + 1;
        let mut offsets = Vec::with_capacity(rows + 1);
        let mut acc = 0;
        for j in 0..rows {
            offsets.push(acc);
            acc += n - 2 * j + 1;
        }
        offsets.push(acc);
        Self {
            n,
            h: 2.0 / n as f64,
            offsets,
        }
    }

    /// Number of intervals along `ξ` on the bottom row.
    pub fn intervals(&self) -> usize {
        self.n
    }

    pub fn n_xi(&self) -> usize {
        self.n + 1
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn rows(&self) -> usize {
        self.n / 2 + 1
    }

    pub fn len(&self) -> usize {
        self.offsets[self.rows()]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Largest `j` such that `(i, j)` is a lattice node.
    #[inline]
    pub fn column_top(&self, i: usize) -> usize {
        i.min(self.n - i)
    }

    #[inline]
    pub fn contains(&self, i: usize, j: usize) -> bool {
        j <= i && i + j <= self.n
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(self.contains(i, j), "({i}, {j}) outside the chart");
        self.offsets[j] + i - j
    }

    /// Range of flat indices for row `j`.
    pub fn row(&self, j: usize) -> std::ops::Range<usize> {
        self.offsets[j]..self.offsets[j + 1]
    }

    pub fn coord(&self, i: usize) -> f64 {
        i as f64 * self.h
    }

    /// Iterate over all nodes as `(i, j)` in storage order.
    pub fn nodes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.rows()).flat_map(move |j| (j..=self.n - j).map(move |i| (i, j)))
    }
}

/// Values on the uniform `(x, y)` grid of the triangle `D`.
///
/// Node `(p, q)` with `q ≤ p ≤ m` sits at `(p/m, q/m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleField {
    m: usize,
    data: Vec<f64>,
}

impl TriangleField {
    pub fn zeros(m: usize) -> Self {
        Self {
            m,
            data: vec![0.0; (m + 1) * (m + 2) / 2],
        }
    }

    pub fn from_fn(m: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut out = Self::zeros(m);
        for p in 0..=m {
            for q in 0..=p {
                let k = out.idx(p, q);
                out.data[k] = f(p, q);
            }
        }
        out
    }

    /// Number of intervals along each axis.
    pub fn intervals(&self) -> usize {
        self.m
    }

    pub fn step(&self) -> f64 {
        1.0 / self.m as f64
    }

    #[inline]
    fn idx(&self, p: usize, q: usize) -> usize {
        debug_assert!(q <= p && p <= self.m);
        p * (p + 1) / 2 + q
    }

    #[inline]
    pub fn get(&self, p: usize, q: usize) -> f64 {
        self.data[self.idx(p, q)]
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Interpolate at `(x, y)` with `0 ≤ y ≤ x ≤ 1`.
    ///
    /// Bilinear on square cells; on the half cells cut by the diagonal the
    /// three corners inside `D` define a linear interpolant.
    pub fn interpolate(&self, x: f64, y: f64) -> f64 {
        let m = self.m as f64;
        let xs = (x * m).clamp(0.0, m);
        let ys = (y * m).clamp(0.0, xs);
        let p = (xs.floor() as usize).min(self.m.saturating_sub(1));
        let q = (ys.floor() as usize).min(p);
        let a = xs - p as f64;
        let b = ys - q as f64;
        if q < p {
            let v00 = self.get(p, q);
            let v10 = self.get(p + 1, q);
            let v01 = self.get(p, q + 1);
            let v11 = self.get(p + 1, q + 1);
            (1.0 - a) * (1.0 - b) * v00 + a * (1.0 - b) * v10 + (1.0 - a) * b * v01 + a * b * v11
        } else {
            // diagonal cell, b <= a
            let v00 = self.get(p, p);
            let v10 = self.get(p + 1, p);
            let v11 = self.get(p + 1, p + 1);
            v00 + a * (v10 - v00) + b * (v11 - v10)
        }
    }
}
