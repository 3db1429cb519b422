//! Crank–Nicolson integration of the plant under feedback and of the target
//! system.
//!
//! Diffusion and reaction are implicit, with the reaction coefficient taken at
//! the half step. The Volterra source and the boundary flux are explicit, then
//! corrected once with the average of their values at both time levels.
//! Neumann conditions use ghost nodes, so a flux `g` at `x = 1` enters the last
//! row as `2g/h`.

use serde::{Deserialize, Serialize};

use crate::coefficients::ProblemSpec;
use crate::error::{Error, Result};
use crate::kernel::KernelGrid;
use crate::poly::Poly2;
use crate::profile::Profile;
use crate::transforms::FeedbackLaw;
use crate::tridiag::solve_tridiagonal;

/// A run is declared divergent once `‖w‖∞` exceeds this multiple of `‖w0‖∞`.
pub const BLOWUP_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    CrankNicolson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default = "default_grid_m")]
    pub grid_m: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_record_stride")]
    pub record_stride: usize,
    #[serde(default)]
    pub scheme: Scheme,
}

fn default_grid_m() -> usize {
    201
}
fn default_dt() -> f64 {
    2.5e-5
}
fn default_t_end() -> f64 {
    2.0
}
fn default_record_stride() -> usize {
    400
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            grid_m: default_grid_m(),
            dt: default_dt(),
            t_end: default_t_end(),
            record_stride: default_record_stride(),
            scheme: Scheme::CrankNicolson,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_m < 3 {
            return Err(Error::Validation(format!(
                "grid_m must be >= 3, got {}",
                self.grid_m
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Validation(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::Validation(format!(
                "t_end must be positive, got {}",
                self.t_end
            )));
        }
        if self.record_stride == 0 {
            return Err(Error::Validation("record_stride must be >= 1".into()));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        1.0 / (self.grid_m - 1) as f64
    }

    /// `dt` above `h/2` is accepted but reported; the scheme stays stable.
    pub fn dt_exceeds_accuracy_cap(&self) -> bool {
        self.dt > 0.5 * self.step()
    }

    /// Number of steps; `dt` is shrunk slightly so they land on `t_end`.
    fn steps(&self) -> (usize, f64) {
        let n = ((self.t_end / self.dt) - 1e-9).ceil().max(1.0) as usize;
        (n, self.t_end / n as f64)
    }
}

/// Recorded states of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub fields: Vec<Profile>,
    /// `U(t)` at the recorded times; empty for target runs.
    pub controls: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Pointwise `a·self + b·other` of two runs on the same times and grid.
    pub fn combine(&self, a: f64, other: &Trajectory, b: f64) -> Result<Trajectory> {
        if self.times != other.times {
            return Err(Error::GridMismatch(
                "trajectories have different time grids".into(),
            ));
        }
        let fields = self
            .fields
            .iter()
            .zip(&other.fields)
            .map(|(u, v)| u.combine(a, v, b))
            .collect::<Result<Vec<_>>>()?;
        let controls = if self.controls.len() == other.controls.len() {
            self.controls
                .iter()
                .zip(&other.controls)
                .map(|(u, v)| a * u + b * v)
                .collect()
        } else {
            Vec::new()
        };
        Ok(Trajectory {
            times: self.times.clone(),
            fields,
            controls,
        })
    }
}

/// Boundary derivative residuals of initial data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompatibilityResiduals {
    /// `|w0_x(0)|`.
    pub left: f64,
    /// `|w0_x(1) − U(w0)|`.
    pub right: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Compatibility {
    Ok(CompatibilityResiduals),
    Warning(CompatibilityResiduals),
}

impl Compatibility {
    pub fn residuals(&self) -> CompatibilityResiduals {
        match *self {
            Compatibility::Ok(r) | Compatibility::Warning(r) => r,
        }
    }

    pub fn is_ok(&self) -> bool {
        matches!(self, Compatibility::Ok(_))
    }
}

/// One-sided second-order `w_x(0)` and `w_x(1)`.
pub(crate) fn boundary_slopes(w: &[f64], h: f64) -> (f64, f64) {
    let n = w.len() - 1;
    let left = (-3.0 * w[0] + 4.0 * w[1] - w[2]) / (2.0 * h);
    let right = (3.0 * w[n] - 4.0 * w[n - 1] + w[n - 2]) / (2.0 * h);
    (left, right)
}

/// Compare the slopes of `w0` with the boundary conditions of the closed loop.
pub fn check_compatibility(w0: &Profile, k: &KernelGrid, tol: f64) -> Result<Compatibility> {
    let law = FeedbackLaw::new(k, w0.grid_m())?;
    let (left, right) = boundary_slopes(w0.values(), w0.step());
    let res = CompatibilityResiduals {
        left: left.abs(),
        right: (right - law.eval(w0.values())).abs(),
    };
    Ok(if res.left < tol && res.right < tol {
        Compatibility::Ok(res)
    } else {
        Compatibility::Warning(res)
    })
}

/// Lower-triangular trapezoid weights for `∫_0^x w(y) f(x,y) dy`.
#[derive(Debug, Clone)]
pub struct VolterraSource {
    rows: Vec<Vec<f64>>,
}

impl VolterraSource {
    pub fn new(f: &Poly2, grid_m: usize) -> Self {
        let h = 1.0 / (grid_m - 1) as f64;
        let rows = (0..grid_m)
            .map(|i| {
                let x = i as f64 * h;
                (0..=i)
                    .map(|j| {
                        let w = if j == 0 || j == i { 0.5 } else { 1.0 };
                        if i == 0 {
                            0.0
                        } else {
                            w * h * f.eval(x, j as f64 * h)
                        }
                    })
                    .collect()
            })
            .collect();
        Self { rows }
    }

    pub fn apply_into(&self, w: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(&self.rows) {
            *o = row.iter().zip(w).map(|(a, b)| a * b).sum();
        }
    }
}

/// `∫_0^x w(y) f(x,y) dy` at every node.
pub fn volterra_source(w: &Profile, f: &Poly2) -> Profile {
    let mut out = vec![0.0; w.grid_m()];
    if !f.is_zero() {
        VolterraSource::new(f, w.grid_m()).apply_into(w.values(), &mut out);
    }
    Profile::new(out).expect("same length as a valid profile")
}

/// Explicit terms of the plant: the Volterra source and the boundary flux.
struct Explicit<'a> {
    source: Option<VolterraSource>,
    law: Option<&'a FeedbackLaw>,
    h: f64,
}

impl Explicit<'_> {
    /// Fill `out` with the explicit right-hand side and return the flux.
    fn eval(&self, w: &[f64], out: &mut [f64]) -> f64 {
        match &self.source {
            Some(s) => s.apply_into(w, out),
            None => out.iter_mut().for_each(|v| *v = 0.0),
        }
        let flux = self.law.map_or(0.0, |law| law.eval(w));
        let last = out.len() - 1;
        out[last] += 2.0 * flux / self.h;
        flux
    }
}

/// Shared time stepper. `reaction(i, t)` is the coefficient `r` in
/// `v_t = v_xx + r v`.
fn integrate(
    v0: &Profile,
    cfg: &SimConfig,
    reaction: impl Fn(usize, f64) -> f64,
    explicit: Option<Explicit<'_>>,
) -> Result<Trajectory> {
    cfg.validate()?;
    if v0.grid_m() != cfg.grid_m {
        return Err(Error::GridMismatch(format!(
            "initial profile has {} nodes, configuration expects {}",
            v0.grid_m(),
            cfg.grid_m
        )));
    }
    let m = cfg.grid_m;
    let h = cfg.step();
    let (n_steps, dt) = cfg.steps();
    let inv_h2 = 1.0 / (h * h);
    let threshold = BLOWUP_FACTOR * v0.sup_norm();

    let mut v = v0.values().to_vec();
    let mut a = vec![0.0; m];
    let mut b = vec![0.0; m];
    let mut c = vec![0.0; m];
    let mut rhs = vec![0.0; m];
    let mut base = vec![0.0; m];
    let mut scratch = vec![0.0; m];
    let mut s_old = vec![0.0; m];
    let mut s_new = vec![0.0; m];
    let mut r = vec![0.0; m];

    let mut times = vec![0.0];
    let mut fields = vec![v0.clone()];
    let mut controls = Vec::new();
    let mut flux = explicit.as_ref().map_or(0.0, |e| e.eval(&v, &mut s_old));
    if explicit.is_some() {
        controls.push(flux);
    }

    for step in 1..=n_steps {
        let t = (step - 1) as f64 * dt;
        let t_mid = t + 0.5 * dt;
        for (i, ri) in r.iter_mut().enumerate() {
            *ri = reaction(i, t_mid);
        }
        // (I − dt/2 A) v⁺ = (I + dt/2 A) v + dt s
        for i in 0..m {
            let (left, right) = match i {
                0 => (0.0, 2.0 * inv_h2),
                _ if i == m - 1 => (2.0 * inv_h2, 0.0),
                _ => (inv_h2, inv_h2),
            };
            let centre = -2.0 * inv_h2 + r[i];
            a[i] = -0.5 * dt * left;
            b[i] = 1.0 - 0.5 * dt * centre;
            c[i] = -0.5 * dt * right;
            let mut av = centre * v[i];
            if i > 0 {
                av += left * v[i - 1];
            }
            if i + 1 < m {
                av += right * v[i + 1];
            }
            base[i] = v[i] + 0.5 * dt * av;
        }
        match &explicit {
            None => {
                rhs.copy_from_slice(&base);
                solve_tridiagonal(&a, &b, &c, &mut rhs, &mut scratch)?;
            }
            Some(e) => {
                for i in 0..m {
                    rhs[i] = base[i] + dt * s_old[i];
                }
                solve_tridiagonal(&a, &b, &c, &mut rhs, &mut scratch)?;
                e.eval(&rhs, &mut s_new);
                for i in 0..m {
                    rhs[i] = base[i] + 0.5 * dt * (s_old[i] + s_new[i]);
                }
                solve_tridiagonal(&a, &b, &c, &mut rhs, &mut scratch)?;
            }
        }
        std::mem::swap(&mut v, &mut rhs);
        if let Some(e) = &explicit {
            flux = e.eval(&v, &mut s_old);
        }

        let norm = v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        let t_now = step as f64 * dt;
        if !norm.is_finite() || norm > threshold {
            return Err(Error::Divergence {
                time: t_now,
                norm,
                threshold,
            });
        }
        if step % cfg.record_stride == 0 || step == n_steps {
            times.push(t_now);
            fields.push(Profile::new(v.clone())?);
            if explicit.is_some() {
                controls.push(flux);
            }
        }
    }
    Ok(Trajectory {
        times,
        fields,
        controls,
    })
}

/// `u_t = u_xx − λ(x,t) u` with homogeneous Neumann conditions.
pub fn simulate_target(spec: &ProblemSpec, u0: &Profile, cfg: &SimConfig) -> Result<Trajectory> {
    let h = 1.0 / (cfg.grid_m.max(2) - 1) as f64;
    integrate(
        u0,
        cfg,
        |i, t| -spec.lambda_unchecked(i as f64 * h, t),
        None,
    )
}

fn simulate_plant(
    spec: &ProblemSpec,
    law: Option<&FeedbackLaw>,
    w0: &Profile,
    cfg: &SimConfig,
) -> Result<Trajectory> {
    let h = 1.0 / (cfg.grid_m.max(2) - 1) as f64;
    let source = (!spec.f().is_zero()).then(|| VolterraSource::new(spec.f(), cfg.grid_m.max(3)));
    let explicit = Explicit { source, law, h };
    integrate(
        w0,
        cfg,
        |i, t| spec.c_unchecked(i as f64 * h, t),
        Some(explicit),
    )
}

/// Plant under the feedback law built from `k`.
pub fn simulate_closed_loop(
    spec: &ProblemSpec,
    k: &KernelGrid,
    w0: &Profile,
    cfg: &SimConfig,
) -> Result<Trajectory> {
    let law = FeedbackLaw::new(k, cfg.grid_m)?;
    simulate_plant(spec, Some(&law), w0, cfg)
}

/// Plant with `U ≡ 0`.
pub fn simulate_open_loop(spec: &ProblemSpec, w0: &Profile, cfg: &SimConfig) -> Result<Trajectory> {
    simulate_plant(spec, None, w0, cfg)
}
