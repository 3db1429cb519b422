//! `L^p` and `W^{1,p}` norms, the `ρ_τ` smoothing of `|s|`, smoothed
//! Lyapunov functionals and a Gronwall bound evaluator.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::Profile;
use crate::simulator::Trajectory;

/// A norm exponent `p ∈ [1, ∞]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Exponent(f64);

impl Exponent {
    pub const ONE: Exponent = Exponent(1.0);
    pub const TWO: Exponent = Exponent(2.0);
    pub const INF: Exponent = Exponent(f64::INFINITY);

    pub fn new(p: f64) -> Result<Self> {
        if p >= 1.0 {
            Ok(Self(p))
        } else {
            Err(Error::Domain {
                what: "p",
                value: p,
                domain: "1 <= p <= inf",
            })
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }

    /// The finite value, or an error for `p = ∞`.
    pub fn finite(self) -> Result<f64> {
        if self.is_infinite() {
            Err(Error::Domain {
                what: "p",
                value: self.0,
                domain: "finite p",
            })
        } else {
            Ok(self.0)
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl std::str::FromStr for Exponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" => Ok(Exponent::INF),
            other => {
                let p: f64 = other
                    .parse()
                    .map_err(|_| Error::Config(format!("cannot parse exponent '{s}'")))?;
                Exponent::new(p)
            }
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        let parsed = match Raw::deserialize(d)? {
            Raw::Number(p) => Exponent::new(p),
            Raw::Text(s) => s.parse(),
        };
        parsed.map_err(serde::de::Error::custom)
    }
}

fn trapezoid(values: impl Iterator<Item = f64>, n: usize, h: f64) -> f64 {
    let mut acc = 0.0;
    for (i, v) in values.enumerate() {
        acc += if i == 0 || i + 1 == n { 0.5 * v } else { v };
    }
    h * acc
}

fn lp_of(values: &[f64], h: f64, p: Exponent) -> f64 {
    if p.is_infinite() {
        return values.iter().fold(0.0, |m, v| m.max(v.abs()));
    }
    let p = p.0;
    let integral = trapezoid(values.iter().map(|v| v.abs().powf(p)), values.len(), h);
    integral.powf(1.0 / p)
}

/// `(∫ |v|^p)^{1/p}` by the trapezoid rule, or `max |v_i|` for `p = ∞`.
pub fn lp_norm(v: &Profile, p: Exponent) -> f64 {
    lp_of(v.values(), v.step(), p)
}

/// Nodal derivative: centred inside, one-sided second order at the ends.
pub fn derivative(v: &Profile) -> Vec<f64> {
    let w = v.values();
    let n = w.len();
    let h = v.step();
    (0..n)
        .map(|i| match i {
            0 => (-3.0 * w[0] + 4.0 * w[1] - w[2]) / (2.0 * h),
            _ if i == n - 1 => (3.0 * w[i] - 4.0 * w[i - 1] + w[i - 2]) / (2.0 * h),
            _ => (w[i + 1] - w[i - 1]) / (2.0 * h),
        })
        .collect()
}

/// `(‖v‖_p^p + ‖v'‖_p^p)^{1/p}`, or `max(‖v‖_∞, ‖v'‖_∞)` for `p = ∞`.
pub fn w1p_norm(v: &Profile, p: Exponent) -> f64 {
    let dv = derivative(v);
    let a = lp_norm(v, p);
    let b = lp_of(&dv, v.step(), p);
    if p.is_infinite() {
        a.max(b)
    } else {
        (a.powf(p.0) + b.powf(p.0)).powf(1.0 / p.0)
    }
}

/// `ρ_τ`, a C² convex smoothing of `|s|` that agrees with it for `|s| ≥ τ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Smoothing {
    tau: f64,
}

impl Smoothing {
    pub fn new(tau: f64) -> Result<Self> {
        if tau > 0.0 && tau.is_finite() {
            Ok(Self { tau })
        } else {
            Err(Error::Domain {
                what: "tau",
                value: tau,
                domain: "tau > 0",
            })
        }
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn value(&self, s: f64) -> f64 {
        let t = self.tau;
        if s.abs() >= t {
            s.abs()
        } else {
            let s2 = s * s;
            -s2 * s2 / (8.0 * t * t * t) + 3.0 * s2 / (4.0 * t) + 3.0 * t / 8.0
        }
    }

    pub fn prime(&self, s: f64) -> f64 {
        let t = self.tau;
        if s.abs() >= t {
            s.signum()
        } else {
            -s * s * s / (2.0 * t * t * t) + 3.0 * s / (2.0 * t)
        }
    }

    pub fn second(&self, s: f64) -> f64 {
        let t = self.tau;
        if s.abs() >= t {
            0.0
        } else {
            1.5 / t * (1.0 - s * s / (t * t))
        }
    }
}

pub fn rho(s: f64, tau: f64) -> Result<f64> {
    Ok(Smoothing::new(tau)?.value(s))
}

pub fn rho_prime(s: f64, tau: f64) -> Result<f64> {
    Ok(Smoothing::new(tau)?.prime(s))
}

pub fn rho_second(s: f64, tau: f64) -> Result<f64> {
    Ok(Smoothing::new(tau)?.second(s))
}

/// `∫_0^1 ρ_τ(v)^p dx` by the trapezoid rule.
pub fn alf(v: &Profile, p: Exponent, tau: f64) -> Result<f64> {
    let p = p.finite()?;
    let rho = Smoothing::new(tau)?;
    let vals = v.values();
    Ok(trapezoid(
        vals.iter().map(|&s| rho.value(s).powf(p)),
        vals.len(),
        v.step(),
    ))
}

/// `e^{∫_0^t q} z0 + ∫_0^t e^{∫_s^t q} h(s) ds` at every sample time.
///
/// Integrals of `q` use the trapezoid rule per interval; the outer integral
/// is accumulated interval by interval so the exponentials never overflow
/// for decaying `q`.
pub fn gronwall_bound(z0: f64, q: &[f64], h: &[f64], times: &[f64]) -> Result<Vec<f64>> {
    if q.len() != times.len() || h.len() != times.len() {
        return Err(Error::Validation(format!(
            "gronwall samples must match the {} times (q: {}, h: {})",
            times.len(),
            q.len(),
            h.len()
        )));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Validation(
            "times must be strictly increasing".into(),
        ));
    }
    if z0.is_nan() || z0 < 0.0 {
        return Err(Error::Domain {
            what: "z0",
            value: z0,
            domain: "z0 >= 0",
        });
    }
    let mut out = Vec::with_capacity(times.len());
    let mut z = z0;
    for k in 0..times.len() {
        if k > 0 {
            let dt = times[k] - times[k - 1];
            let growth = (0.5 * dt * (q[k - 1] + q[k])).exp();
            z = growth * z + 0.5 * dt * (growth * h[k - 1] + h[k]);
        }
        out.push(z);
    }
    Ok(out)
}

/// Gronwall envelope for `alf(u[t], p, τ)` along a target run.
///
/// `z' ≤ −λ̲p z + (3/8)τp ∫λ ρ_τ^{p−1}(u) dx`, integrated with
/// [`gronwall_bound`] from `z0 = alf(u[0])`. `lambda(x, t)` is the reaction
/// coefficient of the run.
pub fn alf_envelope(
    traj: &Trajectory,
    lambda: impl Fn(f64, f64) -> f64,
    lambda_lower: f64,
    p: Exponent,
    tau: f64,
) -> Result<Vec<f64>> {
    let pf = p.finite()?;
    let rho = Smoothing::new(tau)?;
    let first = traj
        .fields
        .first()
        .ok_or_else(|| Error::Validation("empty trajectory".into()))?;
    let z0 = alf(first, p, tau)?;
    let source = traj
        .times
        .iter()
        .zip(&traj.fields)
        .map(|(&t, u)| {
            let vals = u.values();
            let integral = trapezoid(
                vals.iter()
                    .enumerate()
                    .map(|(i, &s)| lambda(u.x(i), t) * rho.value(s).powf(pf - 1.0)),
                vals.len(),
                u.step(),
            );
            0.375 * tau * pf * integral
        })
        .collect::<Vec<_>>();
    let q = vec![-lambda_lower * pf; traj.times.len()];
    gronwall_bound(z0, &q, &source, &traj.times)
}

/// What a [`NormTrace`] measures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NormKind {
    Lp,
    W1p,
    Alf { tau: f64 },
}

impl NormKind {
    pub fn label(&self) -> String {
        match self {
            NormKind::Lp => "lp".into(),
            NormKind::W1p => "w1p".into(),
            NormKind::Alf { tau } => format!("alf_tau{tau:e}"),
        }
    }
}

/// A norm or functional evaluated along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct NormTrace {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub p: Exponent,
    pub kind: NormKind,
}

impl NormTrace {
    pub fn new(times: Vec<f64>, values: Vec<f64>, p: Exponent, kind: NormKind) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Validation(format!(
                "trace has {} times and {} values",
                times.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| v.is_nan() || *v < 0.0) {
            return Err(Error::Validation("trace values must be nonnegative".into()));
        }
        Ok(Self {
            times,
            values,
            p,
            kind,
        })
    }

    pub fn from_trajectory(traj: &Trajectory, kind: NormKind, p: Exponent) -> Result<Self> {
        let values = traj
            .fields
            .iter()
            .map(|u| match kind {
                NormKind::Lp => Ok(lp_norm(u, p)),
                NormKind::W1p => Ok(w1p_norm(u, p)),
                NormKind::Alf { tau } => alf(u, p, tau),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(traj.times.clone(), values, p, kind)
    }

    /// File stem encoding kind, exponent and smoothing width.
    pub fn file_stem(&self) -> String {
        format!("{}_p{}", self.kind.label(), self.p)
    }
}
