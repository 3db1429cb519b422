//! Plant coefficients `c(x,t) = c1(x) + c2(t)` and `f(x,y)`, the spectral
//! shift `λ0`, and the decay-rate floor `λ̲ = λ0 − sup c`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{Poly, Poly2};

/// Tolerance used when checking that a point lies in `[0,1]` or in `D`.
const DOMAIN_EPS: f64 = 1e-12;

/// Number of samples per axis for the dense-grid confirmation of `sup c`.
pub const SUP_GRID_SAMPLES: usize = 2001;

/// The time-dependent part `c2(t)` of the reaction coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeProfile {
    /// `c2(t) = a`
    Constant { a: f64 },
    /// `c2(t) = a e^{-bt}`, `b > 0`
    ExpDecay { a: f64, b: f64 },
    /// `c2(t) = a sin(bt) e^{-t}`
    DampedOsc { a: f64, b: f64 },
}

impl Default for TimeProfile {
    fn default() -> Self {
        TimeProfile::Constant { a: 0.0 }
    }
}

impl TimeProfile {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            TimeProfile::Constant { a } => a,
            TimeProfile::ExpDecay { a, b } => a * (-b * t).exp(),
            TimeProfile::DampedOsc { a, b } => a * (b * t).sin() * (-t).exp(),
        }
    }

    /// Closed-form `sup_{t > 0} c2(t)`.
    pub fn sup(&self) -> f64 {
        match *self {
            TimeProfile::Constant { a } => a,
            // a > 0: approached as t → 0+; a ≤ 0: approached as t → ∞
            TimeProfile::ExpDecay { a, .. } => a.max(0.0),
            TimeProfile::DampedOsc { a, b } => {
                if a == 0.0 || b == 0.0 {
                    return 0.0;
                }
                // a sin(bt) = (a sgn b) sin(|b| t)
                let amp = a * b.signum();
                let b = b.abs();
                // stationary points solve tan(bt) = b; consecutive extrema
                // alternate in sign and shrink by e^{-π/b}
                let t0 = b.atan() / b;
                let t_peak = if amp > 0.0 {
                    t0
                } else {
                    t0 + std::f64::consts::PI / b
                };
                amp.abs() * b / (1.0 + b * b).sqrt() * (-t_peak).exp()
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = match *self {
            TimeProfile::Constant { a } => a.is_finite(),
            TimeProfile::ExpDecay { a, b } | TimeProfile::DampedOsc { a, b } => {
                a.is_finite() && b.is_finite()
            }
        };
        if !finite {
            return Err(Error::Validation("c2 parameters must be finite".into()));
        }
        if let TimeProfile::ExpDecay { b, .. } = *self {
            if b <= 0.0 {
                return Err(Error::Validation(format!(
                    "exp_decay rate b must be positive, got {b}"
                )));
            }
        }
        Ok(())
    }
}

/// The coefficient triple `(c1, c2, f)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CoefficientFamily {
    #[serde(default)]
    pub c1: Poly,
    #[serde(default)]
    pub c2: TimeProfile,
    #[serde(default)]
    pub f: Poly2,
}

/// Everything defining the controlled plant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    #[serde(flatten)]
    pub family: CoefficientFamily,
    pub lambda0: f64,
    pub horizon: f64,
    #[serde(default = "default_sup_tolerance")]
    pub sup_tolerance: f64,
}

fn default_sup_tolerance() -> f64 {
    1e-9
}

fn check_unit(what: &'static str, v: f64) -> Result<()> {
    if (-DOMAIN_EPS..=1.0 + DOMAIN_EPS).contains(&v) {
        Ok(())
    } else {
        Err(Error::Domain {
            what,
            value: v,
            domain: "[0, 1]",
        })
    }
}

fn check_triangle(x: f64, y: f64) -> Result<()> {
    check_unit("x", x)?;
    check_unit("y", y)?;
    if y > x + DOMAIN_EPS {
        return Err(Error::Domain {
            what: "y - x",
            value: y - x,
            domain: "D = {0 <= y <= x <= 1}",
        });
    }
    Ok(())
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "t",
            value: t,
            domain: "[0, inf)",
        })
    }
}

impl ProblemSpec {
    pub fn new(family: CoefficientFamily, lambda0: f64, horizon: f64) -> Self {
        Self {
            family,
            lambda0,
            horizon,
            sup_tolerance: default_sup_tolerance(),
        }
    }

    pub fn c1(&self) -> &Poly {
        &self.family.c1
    }

    pub fn f(&self) -> &Poly2 {
        &self.family.f
    }

    /// `c(x,t) = c1(x) + c2(t)`.
    pub fn eval_c(&self, x: f64, t: f64) -> Result<f64> {
        check_unit("x", x)?;
        check_time(t)?;
        Ok(self.c_unchecked(x, t))
    }

    pub(crate) fn c_unchecked(&self, x: f64, t: f64) -> f64 {
        self.family.c1.eval(x) + self.family.c2.eval(t)
    }

    /// `μ(x,y) = λ0 − c1(x) + c1(y)` on `D`.
    pub fn eval_mu(&self, x: f64, y: f64) -> Result<f64> {
        check_triangle(x, y)?;
        Ok(self.lambda0 - self.family.c1.eval(x) + self.family.c1.eval(y))
    }

    /// `φ(x,y) = −λ0 − c1(x) + c1(y)` on `D`.
    pub fn eval_phi(&self, x: f64, y: f64) -> Result<f64> {
        check_triangle(x, y)?;
        Ok(-self.lambda0 - self.family.c1.eval(x) + self.family.c1.eval(y))
    }

    /// `λ(x,t) = λ0 − c(x,t)`, the reaction rate of the target system.
    pub fn eval_lambda(&self, x: f64, t: f64) -> Result<f64> {
        Ok(self.lambda0 - self.eval_c(x, t)?)
    }

    pub(crate) fn lambda_unchecked(&self, x: f64, t: f64) -> f64 {
        self.lambda0 - self.c_unchecked(x, t)
    }

    /// Upper estimate of `sup c` over `(0,1) × (0,∞)`.
    ///
    /// The separable structure gives `sup c = sup c1 + sup c2`; both pieces
    /// are exact (stationary points of the polynomial, closed-form time
    /// suprema). A dense sample of `[0,1] × [0,horizon]` is taken as a
    /// cross-check and wins if it ever exceeds the analytic value.
    pub fn sup_c(&self) -> f64 {
        let (_, c1_max) = self.family.c1.range_on_unit();
        let analytic = c1_max + self.family.c2.sup();
        let sampled = self.sampled_sup_c(SUP_GRID_SAMPLES);
        if sampled > analytic + self.sup_tolerance {
            sampled
        } else {
            analytic
        }
    }

    /// `max c` over an `n × n` grid of `[0,1] × [0, horizon]`.
    pub fn sampled_sup_c(&self, n: usize) -> f64 {
        let n = n.max(2);
        let step = |i: usize, len: f64| len * i as f64 / (n - 1) as f64;
        let c1 = (0..n)
            .map(|i| self.family.c1.eval(step(i, 1.0)))
            .fold(f64::NEG_INFINITY, f64::max);
        let c2 = (0..n)
            .map(|i| self.family.c2.eval(step(i, self.horizon)))
            .fold(f64::NEG_INFINITY, f64::max);
        c1 + c2
    }

    /// `λ̲ = λ0 − sup c`; an error unless strictly positive.
    pub fn lambda_lower(&self) -> Result<f64> {
        let sup = self.sup_c();
        let lower = self.lambda0 - sup;
        if lower > 0.0 {
            Ok(lower)
        } else {
            Err(Error::Validation(format!(
                "spectral shift condition lambda0 > sup c violated: lambda0 = {}, sup c = {sup}",
                self.lambda0
            )))
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.family.c1.all_finite() || !self.family.f.all_finite() {
            return Err(Error::Validation(
                "polynomial coefficients must be finite".into(),
            ));
        }
        self.family.c2.validate()?;
        if !self.lambda0.is_finite() {
            return Err(Error::Validation("lambda0 must be finite".into()));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Validation(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if self.sup_tolerance.is_nan() || self.sup_tolerance <= 0.0 {
            return Err(Error::Validation(format!(
                "sup_tolerance must be positive, got {}",
                self.sup_tolerance
            )));
        }
        self.lambda_lower().map(|_| ())
    }
}
