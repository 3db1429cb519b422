//! Backstepping kernels on the triangle `D = {0 ≤ y ≤ x ≤ 1}`.
//!
//! The direct kernel `k` solves
//!
//! ```text
//! k_xx − k_yy = μ k + f + ∫_y^x k(x,z) f(z,y) dz,   2 d/dx k(x,x) = λ0,
//! k_y(x,0) = 0,   k(0,0) = 0,
//! ```
//!
//! with `μ(x,y) = λ0 − c1(x) + c1(y)`. The inverse kernel `l` solves the same
//! problem with `φ = −λ0 − c1(x) + c1(y)` and the convolution entering with a
//! minus sign. Both are computed in the characteristic chart `ξ = x + y`,
//! `η = x − y` by successive approximation of the integral equation
//! `G = G0 + Φ(G)`.

mod diagnostics;
mod lattice;
mod picard;
mod series;

pub use diagnostics::{
    kernel_constants, kernel_derivative_x, residual, KernelConstants, ResidualReport, PROBE_CELLS,
};
pub use lattice::{ChartLattice, TriangleField};
pub use picard::{
    g_initial, phi_operator, picard_solve, solve_direct_kernel, solve_inverse_kernel,
    uniqueness_gap, PicardOptions, StopReason,
};
pub use series::{series_coefficients, series_oracle, series_tail_bound, SeriesCoefficients};

use crate::coefficients::ProblemSpec;
use crate::poly::{Poly, Poly2};

/// Samples per axis used to estimate `max |f|` over the unit square.
pub const F_SUP_SAMPLES: usize = 401;

/// Which of the two kernel problems is being solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// `k`: reaction `μ`, convolution `+∫ k f`.
    Direct,
    /// `l`: reaction `φ`, convolution `−∫ l f`.
    Inverse,
}

impl Orientation {
    pub(crate) fn convolution_sign(self) -> f64 {
        match self {
            Orientation::Direct => 1.0,
            Orientation::Inverse => -1.0,
        }
    }
}

/// A kernel problem of Goursat type on `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct GoursatProblem {
    pub orientation: Orientation,
    pub c1: Poly,
    pub f: Poly2,
    pub lambda0: f64,
}

impl GoursatProblem {
    pub fn new(orientation: Orientation, c1: Poly, f: Poly2, lambda0: f64) -> Self {
        Self {
            orientation,
            c1,
            f,
            lambda0,
        }
    }

    pub fn direct(spec: &ProblemSpec) -> Self {
        Self::new(
            Orientation::Direct,
            spec.c1().clone(),
            spec.f().clone(),
            spec.lambda0,
        )
    }

    pub fn inverse(spec: &ProblemSpec) -> Self {
        Self::new(
            Orientation::Inverse,
            spec.c1().clone(),
            spec.f().clone(),
            spec.lambda0,
        )
    }

    /// `μ(x,y)` for the direct problem, `φ(x,y)` for the inverse one.
    pub fn reaction(&self, x: f64, y: f64) -> f64 {
        let shift = match self.orientation {
            Orientation::Direct => self.lambda0,
            Orientation::Inverse => -self.lambda0,
        };
        shift - self.c1.eval(x) + self.c1.eval(y)
    }

    /// `M = (λ1 + f̄)/2` for this problem's coefficients.
    pub fn bound_constant(&self) -> f64 {
        bound_constant_from(&self.c1, &self.f, self.lambda0)
    }
}

fn bound_constant_from(c1: &Poly, f: &Poly2, lambda0: f64) -> f64 {
    // −c1(x) + c1(y) ranges over [lo − hi, hi − lo] on the unit square, so
    // the largest |±λ0 − c1(x) + c1(y)| is |λ0| + (hi − lo).
    let (lo, hi) = c1.range_on_unit();
    let lambda1 = lambda0.abs() + (hi - lo);
    let f_bar = f.max_abs_sampled(F_SUP_SAMPLES);
    0.5 * (lambda1 + f_bar)
}

/// `M = (λ1 + f̄)/2` with `λ1 = max(|λ0|, max |λ0 − c1(x) + c1(y)|)` and
/// `f̄ = max |f|`. The same constant serves the inverse problem.
pub fn bound_constant_m(spec: &ProblemSpec) -> f64 {
    bound_constant_from(spec.c1(), spec.f(), spec.lambda0)
}

/// Bound on the `n`-th Picard increment at `(ξ, η)`:
/// `M^{n+2} (ξ+η)^{n+1} / (n+1)!`.
pub fn tail_bound(n: usize, m: f64, xi: f64, eta: f64) -> f64 {
    let s = xi + eta;
    if m == 0.0 {
        return 0.0;
    }
    if s == 0.0 {
        return 0.0;
    }
    // log space keeps large n from overflowing
    let log_fact: f64 = (2..=n + 1).map(|k| (k as f64).ln()).sum();
    ((n as f64 + 2.0) * m.ln() + (n as f64 + 1.0) * s.ln() - log_fact).exp()
}

/// A scalar field on the chart lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartField {
    lattice: ChartLattice,
    values: Vec<f64>,
}

impl ChartField {
    pub fn zeros(n_xi: usize) -> Self {
        let lattice = ChartLattice::new(n_xi);
        let values = vec![0.0; lattice.len()];
        Self { lattice, values }
    }

    /// Sample `g(ξ, η)` on every node.
    pub fn from_fn(n_xi: usize, mut g: impl FnMut(f64, f64) -> f64) -> Self {
        let lattice = ChartLattice::new(n_xi);
        let values = lattice
            .nodes()
            .map(|(i, j)| g(lattice.coord(i), lattice.coord(j)))
            .collect();
        Self { lattice, values }
    }

    pub(crate) fn from_parts(lattice: ChartLattice, values: Vec<f64>) -> Self {
        debug_assert_eq!(lattice.len(), values.len());
        Self { lattice, values }
    }

    pub fn lattice(&self) -> &ChartLattice {
        &self.lattice
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at node `(i, j)`, i.e. `ξ = i h`, `η = j h`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.lattice.idx(i, j)]
    }

    /// Value at a chart point that falls on a node.
    pub fn at(&self, xi: f64, eta: f64) -> Option<f64> {
        let h = self.lattice.step();
        let i = (xi / h).round();
        let j = (eta / h).round();
        if (i * h - xi).abs() > 1e-9 * h.max(1.0) || (j * h - eta).abs() > 1e-9 * h.max(1.0) {
            return None;
        }
        if i < 0.0 || j < 0.0 {
            return None;
        }
        let (i, j) = (i as usize, j as usize);
        self.lattice.contains(i, j).then(|| self.get(i, j))
    }

    pub fn max_abs_diff(&self, other: &ChartField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// A converged kernel with its traces.
#[derive(Debug, Clone)]
pub struct KernelGrid {
    orientation: Orientation,
    lambda0: f64,
    values_xieta: ChartField,
    xi_derivative: ChartField,
    values_xy: TriangleField,
    trace_diag: Vec<f64>,
    trace_kx1: Option<Vec<f64>>,
    iterations_used: usize,
    final_increment: f64,
    increments: Vec<f64>,
    stop_reason: StopReason,
    richardson_levels: usize,
}

impl KernelGrid {
    pub(crate) fn assemble(
        orientation: Orientation,
        lambda0: f64,
        values_xieta: ChartField,
        xi_derivative: ChartField,
        increments: Vec<f64>,
        stop_reason: StopReason,
        richardson_levels: usize,
    ) -> Self {
        let lat = values_xieta.lattice().clone();
        let m = lat.intervals() / 2;
        let values_xy = TriangleField::from_fn(m, |p, q| values_xieta.get(p + q, p - q));
        let trace_diag = (0..=m).map(|p| values_xy.get(p, p)).collect();
        let final_increment = increments.last().copied().unwrap_or(0.0);
        Self {
            orientation,
            lambda0,
            values_xieta,
            xi_derivative,
            values_xy,
            trace_diag,
            trace_kx1: None,
            iterations_used: increments.len(),
            final_increment,
            increments,
            stop_reason,
            richardson_levels,
        }
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    /// Nodes per row at `η = 0`.
    pub fn n_xi(&self) -> usize {
        self.values_xieta.lattice().n_xi()
    }

    /// Intervals of the `(x, y)` grid; its spacing is `1 / grid_intervals()`.
    pub fn grid_intervals(&self) -> usize {
        self.values_xy.intervals()
    }

    pub fn values_xieta(&self) -> &ChartField {
        &self.values_xieta
    }

    /// `G_ξ` from the integral representation of the fixed point.
    pub fn xi_derivative(&self) -> &ChartField {
        &self.xi_derivative
    }

    pub fn values_xy(&self) -> &TriangleField {
        &self.values_xy
    }

    /// `k(x, x)` at `x = p / grid_intervals()`.
    pub fn trace_diag(&self) -> &[f64] {
        &self.trace_diag
    }

    /// `k_x(1, y)` at `y = q / grid_intervals()`.
    pub fn trace_kx1(&self) -> Option<&[f64]> {
        self.trace_kx1.as_deref()
    }

    pub(crate) fn set_trace_kx1(&mut self, trace: Vec<f64>) {
        self.trace_kx1 = Some(trace);
    }

    pub fn iterations_used(&self) -> usize {
        self.iterations_used
    }

    pub fn final_increment(&self) -> f64 {
        self.final_increment
    }

    /// Sup-norm Picard increments of the base-resolution solve, in order.
    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn stop_reason(&self) -> StopReason {
        self.stop_reason
    }

    pub fn richardson_levels(&self) -> usize {
        self.richardson_levels
    }

    /// `k(x, y)` on `D` by interpolation of the `(x, y)` grid.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.values_xy.interpolate(x, y)
    }

    /// `k_x(1, y)` by linear interpolation of the stored trace.
    pub fn eval_kx1(&self, y: f64) -> Option<f64> {
        let trace = self.trace_kx1.as_ref()?;
        let m = trace.len() - 1;
        let s = (y.clamp(0.0, 1.0) * m as f64).min(m as f64);
        let q = (s.floor() as usize).min(m.saturating_sub(1));
        let a = s - q as f64;
        Some((1.0 - a) * trace[q] + a * trace[(q + 1).min(m)])
    }

    /// Write `(x, y, value)` rows, row-major in `x` then `y`.
    pub fn rows(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let m = self.grid_intervals();
        let h = 1.0 / m as f64;
        (0..=m).flat_map(move |p| {
            (0..=p).map(move |q| (p as f64 * h, q as f64 * h, self.values_xy.get(p, q)))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{CoefficientFamily, TimeProfile};

    #[test]
    fn tail_bound_examples() {
        assert!((tail_bound(0, 5.0, 2.0, 0.0) - 50.0).abs() < 1e-12);
        assert!((tail_bound(0, 5.0, 1.0, 1.0) - 50.0).abs() < 1e-12);
        for n in 0..40 {
            assert_eq!(tail_bound(n, 0.0, 1.0, 0.5), 0.0);
        }
    }

    #[test]
    fn tail_bound_matches_direct_formula() {
        let (m, s) = (3.0_f64, 1.7_f64);
        let mut fact = 1.0;
        for n in 0..20 {
            fact *= (n + 1) as f64;
            let direct = m.powi(n as i32 + 2) * s.powi(n as i32 + 1) / fact;
            let got = tail_bound(n, m, s, 0.0);
            assert!((got - direct).abs() <= 1e-12 * direct, "n = {n}");
        }
    }

    #[test]
    fn tail_bound_is_summable() {
        for &(m, s) in &[(6.0, 2.0), (1.0, 0.5), (12.0, 2.0)] {
            let total: f64 = (0..400).map(|n| tail_bound(n, m, s, 0.0)).sum();
            assert!(total <= m * (m * s).exp() * (1.0 + 1e-12));
        }
    }

    fn spec(c1: Poly, f: Poly2, lambda0: f64) -> ProblemSpec {
        ProblemSpec::new(
            CoefficientFamily {
                c1,
                c2: TimeProfile::Constant { a: 0.0 },
                f,
            },
            lambda0,
            1.0,
        )
    }

    #[test]
    fn bound_constant_examples() {
        assert_eq!(
            bound_constant_m(&spec(Poly::zero(), Poly2::zero(), 10.0)),
            5.0
        );
        assert_eq!(
            bound_constant_m(&spec(Poly::zero(), Poly2::constant(2.0), 0.0)),
            1.0
        );
        assert_eq!(
            bound_constant_m(&spec(Poly::zero(), Poly2::zero(), 0.0)),
            0.0
        );
        // c1 = 2x² spreads μ over [8, 12]
        let s = spec(Poly::monomial(2.0, 2), Poly2::zero(), 10.0);
        assert!((bound_constant_m(&s) - 6.0).abs() < 1e-12);
        assert_eq!(
            GoursatProblem::inverse(&s).bound_constant(),
            GoursatProblem::direct(&s).bound_constant()
        );
    }

    #[test]
    fn reaction_follows_orientation() {
        let s = spec(Poly::monomial(1.0, 1), Poly2::zero(), 3.0);
        let inv = GoursatProblem::inverse(&s);
        assert!((inv.reaction(1.0, 0.5) + 3.5).abs() < 1e-15);
        let dir = GoursatProblem::direct(&s);
        assert!((dir.reaction(1.0, 0.5) - s.eval_mu(1.0, 0.5).unwrap()).abs() < 1e-15);
    }
}
