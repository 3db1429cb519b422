//! Stability constants, decay-rate fits, envelope checks and the scenario
//! driver.

mod config;
mod scenario;

pub use config::{
    InitialData, InitialShape, KernelSettings, OutputSettings, ScenarioConfig, VerifySettings,
};
pub use scenario::{
    run_scenario, scenario_initial_data, solve_kernels, write_controls_csv, write_kernel_csv,
    write_trace_csv, write_trajectory_csv, BoundRecord, DecayReport, ExponentConstants, FitRecord,
    KernelSummary, ScenarioError, StabilityConstants, Stage,
};

use serde::Serialize;

use crate::coefficients::ProblemSpec;
use crate::error::{Error, Result};
use crate::kernel::KernelGrid;
use crate::norms::{lp_norm, w1p_norm, Exponent, NormKind, NormTrace};
use crate::profile::Profile;
use crate::simulator::{simulate_closed_loop, SimConfig};

/// `C1 = (4^{p−1}(1+α1^p)(1+β1^p))^{1/p}`.
pub fn stability_constant_c1(p: f64, alpha1: f64, beta1: f64) -> f64 {
    (4f64.powf(p - 1.0) * (1.0 + alpha1.powf(p)) * (1.0 + beta1.powf(p))).powf(1.0 / p)
}

/// `C2` with its intermediates `γ1`, `γ2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SobolevConstant {
    pub c2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

/// `C2 = max{9^{(p−1)/p} γ1^{1/p}, γ2^{1/p}}` with `γ1 = max{1, β2^p + β3^p}`
/// and `γ2 = C1^p + 9^{p−1} γ1 (1 + α1^p + α2^p + α3^p)`.
pub fn stability_constant_c2(
    p: f64,
    alphas: (f64, f64, f64),
    betas: (f64, f64),
    c1: f64,
) -> SobolevConstant {
    let (a1, a2, a3) = alphas;
    let (b2, b3) = betas;
    let gamma1 = (b2.powf(p) + b3.powf(p)).max(1.0);
    let gamma2 =
        c1.powf(p) + 9f64.powf(p - 1.0) * gamma1 * (1.0 + a1.powf(p) + a2.powf(p) + a3.powf(p));
    let c2 = (9f64.powf((p - 1.0) / p) * gamma1.powf(1.0 / p)).max(gamma2.powf(1.0 / p));
    SobolevConstant { c2, gamma1, gamma2 }
}

/// The `p = ∞` constants with their intermediates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MaxNormConstants {
    pub c3: f64,
    pub c4: f64,
    pub gamma3: f64,
    pub gamma4: f64,
}

/// `C3 = 4γ3` and `C4 = max{9γ4, C + 9γ4(1+α1+α2+α3)}` with `γ4 =
/// max{1, β2+β3}`.
///
/// `γ3` is `1`, `β1`, `α1` or `α1β1` according to whether `α1` and `β1`
/// exceed one; the value one itself takes the `≤ 1` branch. The constant `C`
/// in `C4` is the `p → ∞` limit of `C1`, which equals `C3`.
pub fn stability_constants_inf(
    alphas: (f64, f64, f64),
    betas: (f64, f64, f64),
) -> MaxNormConstants {
    let (a1, a2, a3) = alphas;
    let (b1, b2, b3) = betas;
    let gamma3 = match (a1 > 1.0, b1 > 1.0) {
        (false, false) => 1.0,
        (false, true) => b1,
        (true, false) => a1,
        (true, true) => a1 * b1,
    };
    let c3 = 4.0 * gamma3;
    let gamma4 = (b2 + b3).max(1.0);
    let c4 = (9.0 * gamma4).max(c3 + 9.0 * gamma4 * (1.0 + a1 + a2 + a3));
    MaxNormConstants {
        c3,
        c4,
        gamma3,
        gamma4,
    }
}

/// Least-squares fit of `log(value) = log C − σ t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub c: f64,
    pub sigma: f64,
    /// RMS residual of the log-linear fit.
    pub residual: f64,
    pub window_start: f64,
    pub points: usize,
}

/// Fit on `t ∈ [skip_fraction·T, T]`, `T` the last recorded time.
pub fn fit_decay_rate(trace: &NormTrace, skip_fraction: f64) -> Result<DecayFit> {
    if !(0.0..1.0).contains(&skip_fraction) {
        return Err(Error::Domain {
            what: "skip_fraction",
            value: skip_fraction,
            domain: "0 <= skip_fraction < 1",
        });
    }
    let t_end = *trace
        .times
        .last()
        .ok_or_else(|| Error::Fit("empty trace".into()))?;
    let start = skip_fraction * t_end;
    let window: Vec<(f64, f64)> = trace
        .times
        .iter()
        .zip(&trace.values)
        .filter(|(t, _)| **t >= start - 1e-12 * t_end.abs())
        .map(|(&t, &v)| (t, v))
        .collect();
    if window.len() < 2 {
        return Err(Error::Fit(format!(
            "need at least 2 samples in the fit window, got {}",
            window.len()
        )));
    }
    if let Some((t, v)) = window.iter().find(|(_, v)| v.is_nan() || *v <= 0.0) {
        return Err(Error::Fit(format!(
            "nonpositive value {v:e} at t = {t}; shrink the fit window"
        )));
    }
    let n = window.len() as f64;
    let (st, sy) = window
        .iter()
        .fold((0.0, 0.0), |(a, b), (t, v)| (a + t, b + v.ln()));
    let (mt, my) = (st / n, sy / n);
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (t, v) in &window {
        sxx += (t - mt) * (t - mt);
        sxy += (t - mt) * (v.ln() - my);
    }
    if sxx == 0.0 {
        return Err(Error::Fit("fit window has zero time extent".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mt;
    let rss: f64 = window
        .iter()
        .map(|(t, v)| (v.ln() - intercept - slope * t).powi(2))
        .sum();
    Ok(DecayFit {
        c: intercept.exp(),
        sigma: -slope,
        residual: (rss / n).sqrt(),
        window_start: start,
        points: window.len(),
    })
}

/// Outcome of an envelope check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum BoundCheck {
    /// `margin` is the smallest `log(envelope / value)` over nonzero samples.
    Pass { margin: f64 },
    /// `ratio` is `value / envelope` at the worst time.
    Fail { worst_t: f64, ratio: f64 },
}

impl BoundCheck {
    pub fn passed(&self) -> bool {
        matches!(self, BoundCheck::Pass { .. })
    }

    /// `log(envelope/value)` at the tightest sample; negative on failure.
    pub fn margin(&self) -> f64 {
        match *self {
            BoundCheck::Pass { margin } => margin,
            BoundCheck::Fail { ratio, .. } => -ratio.ln(),
        }
    }
}

/// Check `value(t) ≤ slack · C · e^{−λ̲t} · initial_norm` at every sample.
pub fn verify_theorem_bound(
    trace: &NormTrace,
    c_bound: f64,
    lambda_lower: f64,
    initial_norm: f64,
    slack: f64,
) -> BoundCheck {
    let envelope: Vec<f64> = trace
        .times
        .iter()
        .map(|t| c_bound * (-lambda_lower * t).exp() * initial_norm)
        .collect();
    verify_envelope(trace, &envelope, slack)
}

/// Check `value(t_i) ≤ slack · envelope[i]` at every sample.
pub fn verify_envelope(trace: &NormTrace, envelope: &[f64], slack: f64) -> BoundCheck {
    let mut worst: Option<(f64, f64)> = None;
    let mut margin = f64::INFINITY;
    for ((&t, &v), &e) in trace.times.iter().zip(&trace.values).zip(envelope) {
        if v == 0.0 {
            continue;
        }
        let ratio = v / (slack * e);
        // equality up to rounding counts as inside the envelope
        if ratio > 1.0 + 4.0 * f64::EPSILON {
            if worst.is_none_or(|(_, r)| ratio > r) {
                worst = Some((t, ratio));
            }
        } else {
            margin = margin.min(-ratio.ln());
        }
    }
    match worst {
        Some((worst_t, ratio)) => BoundCheck::Fail { worst_t, ratio },
        None => BoundCheck::Pass { margin },
    }
}

/// Result of comparing two closed-loop runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuousDependenceReport {
    pub p: Exponent,
    /// `max_t ‖w1[t] − w2[t]‖_p`.
    pub max_difference: f64,
    /// `C1 ‖w01 − w02‖_p` (`C3` for `p = ∞`).
    pub bound: f64,
    pub passed: bool,
    /// `max_t ‖w1[t] − w2[t]‖_{1,p}` against `C2 ‖w01 − w02‖_{1,p}`.
    pub max_difference_w1p: f64,
    pub bound_w1p: f64,
    pub passed_w1p: bool,
    /// `max_t sup_x |(w1 − w2) − w_d|` with `w_d` simulated from `w01 − w02`.
    pub linearity_gap: f64,
}

/// Run the closed loop from `w01`, `w02` and `w01 − w02`, and compare the
/// difference of solutions with the Lipschitz bounds.
pub fn continuous_dependence_experiment(
    spec: &ProblemSpec,
    k: &KernelGrid,
    sim: &SimConfig,
    constants: &StabilityConstants,
    p: Exponent,
    w01: &Profile,
    w02: &Profile,
) -> Result<ContinuousDependenceReport> {
    w01.check_same_grid(w02)?;
    let diff0 = w01.combine(1.0, w02, -1.0)?;
    let run1 = simulate_closed_loop(spec, k, w01, sim)?;
    let run2 = simulate_closed_loop(spec, k, w02, sim)?;
    let run_d = simulate_closed_loop(spec, k, &diff0, sim)?;
    let diff = run1.combine(1.0, &run2, -1.0)?;

    let lp = NormTrace::from_trajectory(&diff, NormKind::Lp, p)?;
    let w1p = NormTrace::from_trajectory(&diff, NormKind::W1p, p)?;
    let (c_lp, c_w1p) = constants.for_exponent(p);
    let max_difference = lp.values.iter().fold(0.0f64, |m, v| m.max(*v));
    let max_difference_w1p = w1p.values.iter().fold(0.0f64, |m, v| m.max(*v));
    let bound = c_lp * lp_norm(&diff0, p);
    let bound_w1p = c_w1p * w1p_norm(&diff0, p);
    let linearity_gap = diff
        .fields
        .iter()
        .zip(&run_d.fields)
        .map(|(a, b)| a.max_abs_diff(b))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0f64, f64::max);
    Ok(ContinuousDependenceReport {
        p,
        max_difference,
        bound,
        passed: max_difference <= bound,
        max_difference_w1p,
        bound_w1p,
        passed_w1p: max_difference_w1p <= bound_w1p,
        linearity_gap,
    })
}
