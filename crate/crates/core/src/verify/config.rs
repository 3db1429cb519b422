//! Scenario files.
//!
//! A scenario is a TOML document with one table per stage:
//!
//! ```toml
//! [problem]
//! lambda0 = 3.0
//! horizon = 2.0
//! c1 = [0.0, 0.0, 1.0]          # coefficients of 1, x, x², ...
//! f = [[1.0, 0.0], [0.0, 1.0]]  # f[i][j] multiplies x^i y^j
//! [problem.c2]
//! kind = "exp_decay"            # constant {a} | exp_decay {a, b} | damped_osc {a, b}
//! a = 1.0
//! b = 1.0
//!
//! [kernel]                      # all optional
//! n_xi = 401
//! tol = 1e-10
//! max_iter = 200
//! richardson_levels = 2
//!
//! [simulation]                  # all optional
//! grid_m = 201
//! dt = 2.5e-5
//! t_end = 2.0
//! record_stride = 400
//!
//! [initial_data]
//! kind = "bump"                 # constant {a} | cosine {amplitude, modes}
//! center = 0.5                  # | polynomial {coeffs} | bump {center, width, height}
//! width = 0.3
//! height = 1.0
//! enforce_compatibility = true
//!
//! [verify]                      # all optional
//! p_list = [1, 2, "inf"]
//! tau_list = [1e-1, 1e-2, 1e-3]
//! skip_fraction = 0.1
//! slack = 1.05
//! compatibility_tol = 1e-3
//!
//! [output]
//! dir = "out"
//! ```

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coefficients::ProblemSpec;
use crate::error::{Error, Result};
use crate::kernel::{KernelGrid, PicardOptions};
use crate::norms::Exponent;
use crate::poly::Poly;
use crate::profile::Profile;
use crate::simulator::{boundary_slopes, SimConfig};
use crate::transforms::FeedbackLaw;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSettings {
    #[serde(default = "default_n_xi")]
    pub n_xi: usize,
    #[serde(default = "default_kernel_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_richardson")]
    pub richardson_levels: usize,
}

fn default_n_xi() -> usize {
    401
}
fn default_kernel_tol() -> f64 {
    1e-10
}
fn default_max_iter() -> usize {
    200
}
fn default_richardson() -> usize {
    2
}

impl Default for KernelSettings {
    fn default() -> Self {
        Self {
            n_xi: default_n_xi(),
            tol: default_kernel_tol(),
            max_iter: default_max_iter(),
            richardson_levels: default_richardson(),
        }
    }
}

impl KernelSettings {
    pub fn options(&self) -> PicardOptions {
        PicardOptions::new(self.n_xi, self.tol, self.max_iter)
            .with_richardson(self.richardson_levels)
    }
}

/// Shape of the initial plant state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialShape {
    Constant {
        a: f64,
    },
    /// `amplitude · Σ_m cos(mπx)`.
    Cosine {
        amplitude: f64,
        modes: Vec<u32>,
    },
    Polynomial {
        coeffs: Vec<f64>,
    },
    /// `height · cos²(π(x − center)/(2 width))` on `|x − center| < width`.
    Bump {
        center: f64,
        width: f64,
        height: f64,
    },
}

impl InitialShape {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            InitialShape::Constant { a } => *a,
            InitialShape::Cosine { amplitude, modes } => {
                amplitude
                    * modes
                        .iter()
                        .map(|&m| (m as f64 * PI * x).cos())
                        .sum::<f64>()
            }
            InitialShape::Polynomial { coeffs } => Poly::new(coeffs.clone()).eval(x),
            InitialShape::Bump {
                center,
                width,
                height,
            } => {
                let d = x - center;
                if d.abs() < *width {
                    height * (PI * d / (2.0 * width)).cos().powi(2)
                } else {
                    0.0
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            InitialShape::Constant { a } => a.is_finite(),
            InitialShape::Cosine { amplitude, modes } => amplitude.is_finite() && !modes.is_empty(),
            InitialShape::Polynomial { coeffs } => {
                !coeffs.is_empty() && coeffs.iter().all(|c| c.is_finite())
            }
            InitialShape::Bump {
                center,
                width,
                height,
            } => center.is_finite() && *width > 0.0 && width.is_finite() && height.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid initial data {self:?}")))
        }
    }
}

/// Initial data, optionally corrected near `x = 1` to satisfy the feedback
/// boundary condition on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialData {
    #[serde(flatten)]
    pub shape: InitialShape,
    #[serde(default)]
    pub enforce_compatibility: bool,
}

/// Start of the correction ramp `ψ(x) = (x − x1)²/(2(1 − x1))`.
const RAMP_START: f64 = 0.75;

fn ramp(x: f64) -> f64 {
    if x > RAMP_START {
        (x - RAMP_START).powi(2) / (2.0 * (1.0 - RAMP_START))
    } else {
        0.0
    }
}

impl InitialData {
    /// Sample on `grid_m` nodes; with `enforce_compatibility`, add `a·ψ` so
    /// that the one-sided slope at `x = 1` equals the feedback value.
    pub fn profile(&self, grid_m: usize, k: Option<&KernelGrid>) -> Result<Profile> {
        let base = Profile::from_fn(grid_m, |x| self.shape.eval(x))?;
        if !self.enforce_compatibility {
            return Ok(base);
        }
        let k = k.ok_or_else(|| {
            Error::Config("enforce_compatibility needs the feedback kernel".into())
        })?;
        let law = FeedbackLaw::new(k, grid_m)?;
        let psi = Profile::from_fn(grid_m, ramp)?;
        let residual = |v: &Profile| boundary_slopes(v.values(), v.step()).1 - law.eval(v.values());
        let r_psi = residual(&psi);
        if r_psi.abs() < 1e-12 {
            return Err(Error::Numeric(
                "compatibility correction is degenerate for this kernel".into(),
            ));
        }
        base.combine(1.0, &psi, -residual(&base) / r_psi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySettings {
    #[serde(default = "default_p_list")]
    pub p_list: Vec<Exponent>,
    #[serde(default = "default_tau_list")]
    pub tau_list: Vec<f64>,
    #[serde(default = "default_skip")]
    pub skip_fraction: f64,
    #[serde(default = "default_slack")]
    pub slack: f64,
    #[serde(default = "default_compat_tol")]
    pub compatibility_tol: f64,
}

fn default_p_list() -> Vec<Exponent> {
    vec![Exponent::ONE, Exponent::TWO, Exponent::INF]
}
fn default_tau_list() -> Vec<f64> {
    vec![1e-1, 1e-2, 1e-3]
}
fn default_skip() -> f64 {
    0.1
}
fn default_slack() -> f64 {
    1.05
}
fn default_compat_tol() -> f64 {
    1e-3
}

impl Default for VerifySettings {
    fn default() -> Self {
        Self {
            p_list: default_p_list(),
            tau_list: default_tau_list(),
            skip_fraction: default_skip(),
            slack: default_slack(),
            compatibility_tol: default_compat_tol(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSettings {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputSettings {
    fn default() -> Self {
        Self {
            dir: default_out_dir(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub problem: ProblemSpec,
    #[serde(default)]
    pub kernel: KernelSettings,
    #[serde(default)]
    pub simulation: SimConfig,
    pub initial_data: InitialData,
    #[serde(default)]
    pub verify: VerifySettings,
    #[serde(default)]
    pub output: OutputSettings,
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check_settings()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Structural checks that do not involve the plant coefficients.
    fn check_settings(&self) -> Result<()> {
        let v = &self.verify;
        if v.p_list.is_empty() {
            return Err(Error::Config("verify.p_list must not be empty".into()));
        }
        if v.tau_list.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(Error::Config(
                "verify.tau_list entries must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&v.skip_fraction) {
            return Err(Error::Config(format!(
                "verify.skip_fraction must lie in [0, 1), got {}",
                v.skip_fraction
            )));
        }
        if v.slack.is_nan() || v.slack < 1.0 {
            return Err(Error::Config(format!(
                "verify.slack must be >= 1, got {}",
                v.slack
            )));
        }
        if v.compatibility_tol.is_nan() || v.compatibility_tol <= 0.0 {
            return Err(Error::Config(
                "verify.compatibility_tol must be positive".into(),
            ));
        }
        self.initial_data.shape.validate()
    }

    /// Full validation: settings, plant, kernel options and time stepping.
    pub fn validate(&self) -> Result<()> {
        self.check_settings()?;
        self.problem.validate()?;
        self.kernel.options().validate()?;
        self.simulation.validate()
    }

    /// Refine every grid by `factor`: interval counts multiply, `dt` divides,
    /// the record stride multiplies so recorded times are unchanged.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::Config("refinement factor must be >= 1".into()));
        }
        let mut out = self.clone();
        out.kernel.n_xi = (self.kernel.n_xi - 1) * factor + 1;
        out.simulation.grid_m = (self.simulation.grid_m - 1) * factor + 1;
        out.simulation.dt = self.simulation.dt / factor as f64;
        out.simulation.record_stride = self.simulation.record_stride * factor;
        Ok(out)
    }

    /// With `p_list` replaced.
    pub fn with_p_list(mut self, p_list: Vec<Exponent>) -> Result<Self> {
        self.verify.p_list = p_list;
        self.check_settings()?;
        Ok(self)
    }
}
