//! Successive approximation of `G = G0 + Φ(G)` on the chart lattice.
//!
//! With `P_X(ξ,η) = ∫_0^η X(ξ,s) ds`, every term of the integral equation has
//! the shape
//!
//! ```text
//! A[X](ξ,η) = ¼ ∫_η^ξ X(τ,η) dτ + ½ ∫_0^η X(m,m) dm
//! ```
//!
//! applied to a column integral. For the reaction part `X = P_{μ̃G}`; for the
//! convolution part `X = S_G` with
//! `S_G(z,η) = ∫_0^η ∫_z^{z+η−s} f((τ−s)/2, z−(τ+s)/2) G(τ,s) dτ ds`.
//! All nested integrals use the composite trapezoid rule on lattice nodes.

use super::lattice::ChartLattice;
use super::{tail_bound, ChartField, GoursatProblem, KernelGrid};
use crate::coefficients::ProblemSpec;
use crate::error::{Error, Result};

/// Why the iteration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// The sup-norm increment fell below the tolerance.
    Increment,
    /// The analytic increment bound at `ξ + η = 2` fell below the tolerance.
    TailBound,
}

/// Resolution and stopping parameters for [`picard_solve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardOptions {
    /// Nodes on the `η = 0` row; odd and at least 33.
    pub n_xi: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// Number of successive lattice doublings combined by Richardson
    /// extrapolation. Zero gives the plain second-order trapezoid solution.
    pub richardson_levels: usize,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self {
            n_xi: 201,
            tol: 1e-10,
            max_iter: 200,
            richardson_levels: 2,
        }
    }
}

impl PicardOptions {
    pub fn new(n_xi: usize, tol: f64, max_iter: usize) -> Self {
        Self {
            n_xi,
            tol,
            max_iter,
            ..Self::default()
        }
    }

    pub fn with_richardson(mut self, levels: usize) -> Self {
        self.richardson_levels = levels;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_xi < 33 || self.n_xi.is_multiple_of(2) {
            return Err(Error::GridTooCoarse(format!(
                "n_xi must be odd and at least 33, got {}",
                self.n_xi
            )));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::Validation(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::Validation("max_iter must be at least 1".into()));
        }
        if self.richardson_levels > 4 {
            return Err(Error::Validation(format!(
                "at most 4 Richardson levels are supported, got {}",
                self.richardson_levels
            )));
        }
        Ok(())
    }
}

/// Precomputed coefficient tables for one lattice.
struct Sweep<'a> {
    lat: &'a ChartLattice,
    lambda0: f64,
    sign: f64,
    reaction: Vec<f64>,
    /// `f(a h/2, b h/2)` at `a * (n+1) + b`; absent when `f ≡ 0`.
    f_table: Option<Vec<f64>>,
    weighted: Vec<f64>,
    columns: Vec<f64>,
    conv: Vec<f64>,
    scratch: Vec<f64>,
}

impl<'a> Sweep<'a> {
    fn new(problem: &GoursatProblem, lat: &'a ChartLattice) -> Self {
        let half = 0.5 * lat.step();
        let reaction = lat
            .nodes()
            .map(|(i, j)| problem.reaction((i + j) as f64 * half, (i - j) as f64 * half))
            .collect();
        let n = lat.intervals();
        let f_table = (!problem.f.is_zero()).then(|| {
            let mut t = Vec::with_capacity((n + 1) * (n + 1));
            for a in 0..=n {
                for b in 0..=n {
                    t.push(problem.f.eval(a as f64 * half, b as f64 * half));
                }
            }
            t
        });
        let top = n / 2 + 1;
        Self {
            lat,
            lambda0: problem.lambda0,
            sign: problem.orientation.convolution_sign(),
            reaction,
            f_table,
            weighted: vec![0.0; lat.len()],
            columns: vec![0.0; lat.len()],
            conv: vec![0.0; lat.len()],
            scratch: vec![0.0; top * top],
        }
    }

    /// `f̃(ξ,η) = f((ξ+η)/2, (ξ−η)/2)` on the lattice.
    fn f_tilde(&self) -> Vec<f64> {
        let w = self.lat.intervals() + 1;
        match &self.f_table {
            Some(t) => self
                .lat
                .nodes()
                .map(|(i, j)| t[(i + j) * w + (i - j)])
                .collect(),
            None => vec![0.0; self.lat.len()],
        }
    }

    /// `G0 = λ0/4 (ξ+η) + A[P_{f̃}]`.
    fn initial(&mut self) -> Vec<f64> {
        let lat = self.lat;
        let mut g0 = vec![0.0; lat.len()];
        if self.f_table.is_some() {
            let ft = self.f_tilde();
            column_integral(lat, &ft, &mut self.columns);
            outer_integral(lat, &self.columns, &mut g0);
        }
        for (k, (i, j)) in lat.nodes().enumerate() {
            g0[k] += 0.25 * self.lambda0 * (lat.coord(i) + lat.coord(j));
        }
        g0
    }

    /// Column source `P_{μ̃G} ± S_G` left in `self.columns`.
    fn columns_of(&mut self, g: &[f64]) {
        for ((w, r), v) in self.weighted.iter_mut().zip(&self.reaction).zip(g) {
            *w = r * v;
        }
        column_integral(self.lat, &self.weighted, &mut self.columns);
        if self.f_table.is_some() {
            self.convolution(g);
            for (c, s) in self.columns.iter_mut().zip(&self.conv) {
                *c += self.sign * s;
            }
        }
    }

    /// `out = Φ(g)`.
    fn apply(&mut self, g: &[f64], out: &mut [f64]) {
        self.columns_of(g);
        outer_integral(self.lat, &self.columns, out);
    }

    /// `S_G` on the lattice, into `self.conv`.
    ///
    /// For each `z` the inner `τ`-integrals are accumulated once per `s` and
    /// reused for every `η`, which keeps a sweep at `O(N³)`.
    fn convolution(&mut self, g: &[f64]) {
        let lat = self.lat;
        let n = lat.intervals();
        let h = lat.step();
        let w = n + 1;
        let ft = self.f_table.as_ref().expect("convolution needs f");
        let r = &mut self.scratch;
        for z in 0..=n {
            let top = lat.column_top(z);
            let stride = top + 1;
            for s in 0..=top {
                let base = s * stride;
                let integrand =
                    |tau: usize| ft[(tau - s) * w + (2 * z - tau - s)] * g[lat.idx(tau, s)];
                r[base] = 0.0;
                let mut prev = integrand(z);
                for m in 1..=top - s {
                    let cur = integrand(z + m);
                    r[base + m] = r[base + m - 1] + 0.5 * h * (prev + cur);
                    prev = cur;
                }
            }
            for j in 0..=top {
                let mut acc = if j > 0 { 0.5 * r[j] } else { 0.0 };
                for s in 1..j {
                    acc += r[s * stride + j - s];
                }
                self.conv[lat.idx(z, j)] = h * acc;
            }
        }
    }
}

/// `out(i,j) = ∫_0^{η_j} field(ξ_i, s) ds`.
fn column_integral(lat: &ChartLattice, field: &[f64], out: &mut [f64]) {
    let h = lat.step();
    let n = lat.intervals();
    for k in lat.row(0) {
        out[k] = 0.0;
    }
    for j in 1..lat.rows() {
        for i in j..=n - j {
            let below = lat.idx(i, j - 1);
            let here = lat.idx(i, j);
            out[here] = out[below] + 0.5 * h * (field[below] + field[here]);
        }
    }
}

/// `out(ξ,η) = ¼ ∫_η^ξ X(τ,η) dτ + ½ ∫_0^η X(m,m) dm`.
fn outer_integral(lat: &ChartLattice, x: &[f64], out: &mut [f64]) {
    let h = lat.step();
    let n = lat.intervals();
    let mut diag = 0.0;
    let mut diag_prev = x[lat.idx(0, 0)];
    for j in 0..lat.rows() {
        let start = lat.idx(j, j);
        if j > 0 {
            diag += 0.5 * h * (diag_prev + x[start]);
            diag_prev = x[start];
        }
        let mut acc = 0.0;
        out[start] = 0.5 * diag;
        for k in start + 1..start + (n - 2 * j + 1) {
            acc += 0.5 * h * (x[k - 1] + x[k]);
            out[k] = 0.25 * acc + 0.5 * diag;
        }
    }
}

fn check_region(xi: f64, eta: f64) -> Result<()> {
    const EPS: f64 = 1e-12;
    if !(-EPS..=1.0 + EPS).contains(&eta) {
        return Err(Error::Domain {
            what: "eta",
            value: eta,
            domain: "0 <= eta <= 1",
        });
    }
    if !(xi >= eta - EPS && xi <= 2.0 - eta + EPS) {
        return Err(Error::Domain {
            what: "xi",
            value: xi,
            domain: "eta <= xi <= 2 - eta",
        });
    }
    Ok(())
}

/// `G0(ξ, η)` at a single point, by nested composite trapezoid rules with
/// 200 panels per integral.
pub fn g_initial(problem: &GoursatProblem, xi: f64, eta: f64) -> Result<f64> {
    const PANELS: usize = 200;
    check_region(xi, eta)?;
    let f_tilde = |tau: f64, s: f64| problem.f.eval(0.5 * (tau + s), 0.5 * (tau - s));
    let trap = |a: f64, b: f64, g: &dyn Fn(f64) -> f64| -> f64 {
        if b <= a {
            return 0.0;
        }
        let h = (b - a) / PANELS as f64;
        let inner: f64 = (1..PANELS).map(|k| g(a + k as f64 * h)).sum();
        h * (0.5 * (g(a) + g(b)) + inner)
    };
    let mut value = 0.25 * problem.lambda0 * (xi + eta);
    if !problem.f.is_zero() {
        let rect = trap(eta, xi, &|tau| trap(0.0, eta, &|s| f_tilde(tau, s)));
        let tri = trap(0.0, eta, &|tau| trap(0.0, tau, &|s| f_tilde(tau, s)));
        value += 0.25 * rect + 0.5 * tri;
    }
    Ok(value)
}

/// `Φ(G)` on the lattice of `g`.
pub fn phi_operator(problem: &GoursatProblem, g: &ChartField) -> ChartField {
    let lat = g.lattice().clone();
    let mut out = vec![0.0; lat.len()];
    let mut sweep = Sweep::new(problem, &lat);
    sweep.apply(g.values(), &mut out);
    ChartField::from_parts(lat, out)
}

struct LevelSolution {
    g: Vec<f64>,
    g_xi: Vec<f64>,
    increments: Vec<f64>,
    stop: StopReason,
}

/// Smooth bump with unit sup norm, used to perturb the starting guess.
fn bump(lat: &ChartLattice) -> Vec<f64> {
    use std::f64::consts::PI;
    lat.nodes()
        .map(|(i, j)| {
            let (xi, eta) = (lat.coord(i), lat.coord(j));
            (0.5 * PI * xi).sin().powi(2) * (PI * eta).sin().powi(2)
        })
        .collect()
}

fn solve_level(
    problem: &GoursatProblem,
    n_xi: usize,
    tol: f64,
    max_iter: usize,
    perturb: bool,
) -> Result<LevelSolution> {
    let lat = ChartLattice::new(n_xi);
    let mut sweep = Sweep::new(problem, &lat);
    let g0 = sweep.initial();
    let mut g = g0.clone();
    if perturb {
        for (v, d) in g.iter_mut().zip(bump(&lat)) {
            *v += d;
        }
    }
    let m_const = problem.bound_constant();
    let mut next = vec![0.0; lat.len()];
    let mut increments = Vec::new();
    let mut stop = None;
    for n in 0..max_iter {
        sweep.apply(&g, &mut next);
        let mut inc: f64 = 0.0;
        for ((nv, g0v), gv) in next.iter_mut().zip(&g0).zip(&g) {
            *nv += g0v;
            inc = inc.max((*nv - gv).abs());
        }
        if !inc.is_finite() {
            return Err(Error::Numeric(format!(
                "kernel iteration produced a non-finite increment at sweep {n}"
            )));
        }
        increments.push(inc);
        std::mem::swap(&mut g, &mut next);
        if inc < tol {
            stop = Some(StopReason::Increment);
            break;
        }
        // the certified cap only applies to iterates started from G0
        if !perturb && tail_bound(n + 1, m_const, 2.0, 0.0) < tol {
            stop = Some(StopReason::TailBound);
            break;
        }
    }
    let Some(stop) = stop else {
        return Err(Error::NonConvergence {
            iterations: max_iter,
            increment: increments.last().copied().unwrap_or(f64::NAN),
            tol,
        });
    };

    // G_ξ = λ0/4 + ¼ (P_{f̃} + P_{μ̃G} ± S_G)
    sweep.columns_of(&g);
    let mut g_xi = sweep.columns.clone();
    if sweep.f_table.is_some() {
        let ft = sweep.f_tilde();
        let mut pf = vec![0.0; lat.len()];
        column_integral(&lat, &ft, &mut pf);
        for (a, b) in g_xi.iter_mut().zip(&pf) {
            *a += b;
        }
    }
    for v in &mut g_xi {
        *v = 0.25 * problem.lambda0 + 0.25 * *v;
    }
    Ok(LevelSolution {
        g,
        g_xi,
        increments,
        stop,
    })
}

/// Romberg combination of fields restricted to the base lattice.
fn extrapolate(base: &ChartLattice, levels: &[(ChartLattice, Vec<f64>)]) -> Vec<f64> {
    let mut table: Vec<Vec<f64>> = levels
        .iter()
        .enumerate()
        .map(|(l, (lat, v))| {
            let scale = 1usize << l;
            base.nodes()
                .map(|(i, j)| v[lat.idx(i * scale, j * scale)])
                .collect()
        })
        .collect();
    for k in 1..table.len() {
        let factor = 4f64.powi(k as i32) - 1.0;
        for l in (k..table.len()).rev() {
            let (lo, hi) = table.split_at_mut(l);
            let coarse = &lo[l - 1];
            for (fv, cv) in hi[0].iter_mut().zip(coarse) {
                *fv += (*fv - cv) / factor;
            }
        }
    }
    table.pop().unwrap_or_default()
}

/// Solve the kernel problem and fill the derived traces.
///
/// The base lattice has `opts.n_xi` nodes per bottom row; with Richardson
/// levels the problem is also solved on lattices refined by `2, 4, …` and the
/// results are combined on the base nodes.
pub fn picard_solve(problem: &GoursatProblem, opts: &PicardOptions) -> Result<KernelGrid> {
    opts.validate()?;
    if !problem.lambda0.is_finite() {
        return Err(Error::Validation("lambda0 must be finite".into()));
    }
    let base = ChartLattice::new(opts.n_xi);
    let mut g_levels = Vec::new();
    let mut xi_levels = Vec::new();
    let mut increments = Vec::new();
    let mut stop = StopReason::Increment;
    for l in 0..=opts.richardson_levels {
        let n_xi = (opts.n_xi - 1) * (1 << l) + 1;
        let sol = solve_level(problem, n_xi, opts.tol, opts.max_iter, false)?;
        if l == 0 {
            increments = sol.increments;
            stop = sol.stop;
        }
        let lat = ChartLattice::new(n_xi);
        g_levels.push((lat.clone(), sol.g));
        xi_levels.push((lat, sol.g_xi));
    }
    let g = extrapolate(&base, &g_levels);
    let g_xi = extrapolate(&base, &xi_levels);
    let mut grid = KernelGrid::assemble(
        problem.orientation,
        problem.lambda0,
        ChartField::from_parts(base.clone(), g),
        ChartField::from_parts(base, g_xi),
        increments,
        stop,
        opts.richardson_levels,
    );
    let trace = super::kernel_derivative_x(&grid)?;
    grid.set_trace_kx1(trace);
    Ok(grid)
}

pub fn solve_direct_kernel(spec: &ProblemSpec, opts: &PicardOptions) -> Result<KernelGrid> {
    picard_solve(&GoursatProblem::direct(spec), opts)
}

/// The inverse kernel `l`: reaction `φ`, convolution with a minus sign.
pub fn solve_inverse_kernel(spec: &ProblemSpec, opts: &PicardOptions) -> Result<KernelGrid> {
    picard_solve(&GoursatProblem::inverse(spec), opts)
}

/// Sup-norm distance between the fixed points reached from `G0` and from
/// `G0 + δ` with a smooth unit bump `δ`, on the base lattice.
pub fn uniqueness_gap(problem: &GoursatProblem, opts: &PicardOptions) -> Result<f64> {
    opts.validate()?;
    let plain = solve_level(problem, opts.n_xi, opts.tol, opts.max_iter, false)?;
    let bumped = solve_level(problem, opts.n_xi, opts.tol, opts.max_iter, true)?;
    Ok(plain
        .g
        .iter()
        .zip(&bumped.g)
        .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
}
