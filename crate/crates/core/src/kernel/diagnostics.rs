//! Derivatives, constants and PDE residuals of a computed kernel.

use super::{GoursatProblem, KernelGrid, TriangleField};
use crate::error::{Error, Result};

/// Interior residual probes sit on multiples of this many grid cells, so the
/// same points are used for every stencil stride dividing it.
pub const PROBE_CELLS: usize = 8;

/// First derivative weights at `z` for the nodes `x` (Fornberg's recursion).
fn fd_weights(z: f64, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut c = vec![[0.0f64; 2]; n];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(1);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|w| w[1]).collect()
}

/// Derivative of uniformly sampled `v` at every node with a `width`-point
/// stencil, centred where possible and shifted inward near the ends.
fn high_order_derivative(v: &[f64], h: f64, width: usize) -> Vec<f64> {
    let n = v.len();
    let width = width.min(n);
    let half = width / 2;
    (0..n)
        .map(|p| {
            let start = p.saturating_sub(half).min(n - width);
            let nodes: Vec<f64> = (start..start + width).map(|k| k as f64).collect();
            let w = fd_weights(p as f64, &nodes);
            w.iter()
                .zip(&v[start..start + width])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / h
        })
        .collect()
}

impl KernelGrid {
    /// `k_y` at node `(p, q)` by second-order differences inside `D`.
    pub fn dy_at(&self, p: usize, q: usize) -> f64 {
        let k = self.values_xy();
        let h = k.step();
        if q >= 1 && q < p {
            (k.get(p, q + 1) - k.get(p, q - 1)) / (2.0 * h)
        } else if p >= 2 && q == 0 {
            (-3.0 * k.get(p, 0) + 4.0 * k.get(p, 1) - k.get(p, 2)) / (2.0 * h)
        } else if p >= 2 {
            (3.0 * k.get(p, p) - 4.0 * k.get(p, p - 1) + k.get(p, p - 2)) / (2.0 * h)
        } else {
            (k.get(1, 1) - k.get(1, 0)) / h
        }
    }

    /// `k_x` at node `(p, q)`.
    ///
    /// Centred differences where both neighbours lie in `D`; one-sided at
    /// `x = 1` and along the diagonal. The last diagonal nodes use
    /// `d/dx k(x,x) = λ0/2`, and the corner below `(1,1)` falls back to a
    /// one-sided `G_ξ` along its chart row.
    pub fn dx_at(&self, p: usize, q: usize) -> f64 {
        let k = self.values_xy();
        let m = k.intervals();
        let h = k.step();
        if q < p && p < m {
            (k.get(p + 1, q) - k.get(p - 1, q)) / (2.0 * h)
        } else if p == m && q + 2 <= m {
            (3.0 * k.get(m, q) - 4.0 * k.get(m - 1, q) + k.get(m - 2, q)) / (2.0 * h)
        } else if q == p && p + 2 <= m {
            (-3.0 * k.get(p, p) + 4.0 * k.get(p + 1, p) - k.get(p + 2, p)) / (2.0 * h)
        } else if q == p {
            0.5 * self.lambda0() - self.dy_at(p, p)
        } else {
            let g = self.values_xieta();
            let (i, j) = (p + q, p - q);
            let g_xi = (3.0 * g.get(i, j) - 4.0 * g.get(i - 1, j) + g.get(i - 2, j)) / (2.0 * h);
            2.0 * g_xi - self.dy_at(p, q)
        }
    }

    /// `k_x` on every node of the `(x, y)` grid.
    pub fn derivative_x_field(&self) -> TriangleField {
        TriangleField::from_fn(self.grid_intervals(), |p, q| self.dx_at(p, q))
    }
}

/// `k_x(1, y)` on the `y` grid.
pub fn kernel_derivative_x(k: &KernelGrid) -> Result<Vec<f64>> {
    if k.n_xi() < 33 {
        return Err(Error::GridTooCoarse(format!(
            "k_x needs n_xi >= 33, got {}",
            k.n_xi()
        )));
    }
    let m = k.grid_intervals();
    Ok((0..=m).map(|q| k.dx_at(m, q)).collect())
}

/// Grid maxima feeding the stability constants.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize)]
pub struct KernelConstants {
    /// `max |k|` on `D`.
    pub alpha1: f64,
    /// `max |k(x,x)|`.
    pub alpha2: f64,
    /// `max |k_x|` on `D`.
    pub alpha3: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
}

fn maxima(k: &KernelGrid) -> (f64, f64, f64) {
    let a1 = k.values_xy().max_abs();
    let a2 = k.trace_diag().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let a3 = k.derivative_x_field().max_abs();
    (a1, a2, a3)
}

pub fn kernel_constants(k: &KernelGrid, l: &KernelGrid) -> KernelConstants {
    let (alpha1, alpha2, alpha3) = maxima(k);
    let (beta1, beta2, beta3) = maxima(l);
    KernelConstants {
        alpha1,
        alpha2,
        alpha3,
        beta1,
        beta2,
        beta3,
    }
}

/// Residuals of the kernel problem on a computed grid.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ResidualReport {
    /// Stencil spacing in `x` and `y`.
    pub spacing: f64,
    /// `sup |k_xx − k_yy − μk − f ∓ ∫ k f|` over the interior probes.
    pub interior: f64,
    /// `sup |2 d/dx k(x,x) − λ0|`.
    pub diagonal: f64,
    /// `sup |k_y(x,0)|` using `k_y = 2 G_ξ − d/dx k(x,0)` on the edge.
    pub edge: f64,
    /// `sup |k_y(x,0)|` from one-sided second-order differences.
    pub edge_fd: f64,
    /// `|k(0,0)|`.
    pub corner: f64,
}

/// Residual report with interior stencils of `stride` grid cells.
///
/// `stride` must divide [`PROBE_CELLS`]; the probes are the interior nodes on
/// multiples of `PROBE_CELLS` that keep every stencil inside `D`.
pub fn residual(k: &KernelGrid, problem: &GoursatProblem, stride: usize) -> Result<ResidualReport> {
    if stride == 0 || !PROBE_CELLS.is_multiple_of(stride) {
        return Err(Error::Validation(format!(
            "stride must divide {PROBE_CELLS}, got {stride}"
        )));
    }
    let field = k.values_xy();
    let m = field.intervals();
    if m < 3 * PROBE_CELLS {
        return Err(Error::GridTooCoarse(format!(
            "residual probes need at least {} grid intervals, got {m}",
            3 * PROBE_CELLS
        )));
    }
    let h = field.step();
    let d = stride as f64 * h;
    let sign = problem.orientation.convolution_sign();
    let mut interior: f64 = 0.0;
    for p in (2 * PROBE_CELLS..=m - PROBE_CELLS).step_by(PROBE_CELLS) {
        for q in (PROBE_CELLS..=p - PROBE_CELLS).step_by(PROBE_CELLS) {
            let (x, y) = (p as f64 * h, q as f64 * h);
            let c = field.get(p, q);
            let kxx = (field.get(p + stride, q) - 2.0 * c + field.get(p - stride, q)) / (d * d);
            let kyy = (field.get(p, q + stride) - 2.0 * c + field.get(p, q - stride)) / (d * d);
            let mut conv = 0.0;
            if !problem.f.is_zero() {
                let panels = (p - q) / stride;
                for r in 0..=panels {
                    let z = q + r * stride;
                    let w = if r == 0 || r == panels { 0.5 } else { 1.0 };
                    conv += w * field.get(p, z) * problem.f.eval(z as f64 * h, y);
                }
                conv *= d;
            }
            let res = kxx - kyy - problem.reaction(x, y) * c - problem.f.eval(x, y) - sign * conv;
            interior = interior.max(res.abs());
        }
    }

    let diag = k.trace_diag();
    let diagonal = high_order_derivative(diag, h, 3)
        .iter()
        .fold(0.0f64, |acc, v| acc.max((2.0 * v - problem.lambda0).abs()));

    let bottom: Vec<f64> = (0..=m).map(|p| field.get(p, 0)).collect();
    let along = high_order_derivative(&bottom, h, 7);
    let g_xi = k.xi_derivative();
    let edge = (0..=m).fold(0.0f64, |acc, p| {
        acc.max((2.0 * g_xi.get(p, p) - along[p]).abs())
    });
    let edge_fd = (2..=m).fold(0.0f64, |acc, p| acc.max(k.dy_at(p, 0).abs()));

    Ok(ResidualReport {
        spacing: d,
        interior,
        diagonal,
        edge,
        edge_fd,
        corner: field.get(0, 0).abs(),
    })
}
