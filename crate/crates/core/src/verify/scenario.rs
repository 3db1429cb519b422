//! End-to-end scenario runs and their artifacts.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::ScenarioConfig;
use super::{
    fit_decay_rate, stability_constant_c1, stability_constant_c2, stability_constants_inf,
    verify_envelope, verify_theorem_bound, BoundCheck, DecayFit, MaxNormConstants, SobolevConstant,
};
use crate::error::{Error, Result};
use crate::kernel::{
    kernel_constants, solve_direct_kernel, solve_inverse_kernel, KernelConstants, KernelGrid,
    StopReason,
};
use crate::norms::{alf_envelope, lp_norm, w1p_norm, Exponent, NormKind, NormTrace};
use crate::profile::Profile;
use crate::simulator::{
    check_compatibility, simulate_closed_loop, simulate_target, CompatibilityResiduals, Trajectory,
};
use crate::transforms::initial_target_data;

/// Pipeline stages, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Validate,
    Kernels,
    InitialData,
    ClosedLoop,
    Target,
    Norms,
    Fits,
    Write,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Validate => "validate",
            Stage::Kernels => "kernels",
            Stage::InitialData => "initial_data",
            Stage::ClosedLoop => "closed_loop",
            Stage::Target => "target",
            Stage::Norms => "norms",
            Stage::Fits => "fits",
            Stage::Write => "write",
        };
        f.write_str(name)
    }
}

/// A stage failure with the parameters that were in effect.
#[derive(Debug, thiserror::Error)]
#[error("stage `{stage}` failed ({params}): {source}")]
pub struct ScenarioError {
    pub stage: Stage,
    pub params: String,
    #[source]
    pub source: Error,
}

/// `C1`/`C2` for one finite exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentConstants {
    pub p: Exponent,
    pub c1: f64,
    #[serde(flatten)]
    pub sobolev: SobolevConstant,
}

/// Kernel maxima and the stability constants derived from them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityConstants {
    pub kernel: KernelConstants,
    pub finite: Vec<ExponentConstants>,
    pub max_norm: MaxNormConstants,
}

impl StabilityConstants {
    pub fn new(kernel: KernelConstants, p_list: &[Exponent]) -> Self {
        let k = kernel;
        let finite = p_list
            .iter()
            .filter(|p| !p.is_infinite())
            .map(|&p| {
                let pv = p.value();
                let c1 = stability_constant_c1(pv, k.alpha1, k.beta1);
                ExponentConstants {
                    p,
                    c1,
                    sobolev: stability_constant_c2(
                        pv,
                        (k.alpha1, k.alpha2, k.alpha3),
                        (k.beta2, k.beta3),
                        c1,
                    ),
                }
            })
            .collect();
        let max_norm =
            stability_constants_inf((k.alpha1, k.alpha2, k.alpha3), (k.beta1, k.beta2, k.beta3));
        Self {
            kernel,
            finite,
            max_norm,
        }
    }

    /// The `L^p` and `W^{1,p}` constants: `(C1, C2)`, or `(C3, C4)` at `p = ∞`.
    pub fn for_exponent(&self, p: Exponent) -> (f64, f64) {
        if p.is_infinite() {
            return (self.max_norm.c3, self.max_norm.c4);
        }
        match self.finite.iter().find(|e| e.p == p) {
            Some(e) => (e.c1, e.sobolev.c2),
            None => {
                let k = &self.kernel;
                let c1 = stability_constant_c1(p.value(), k.alpha1, k.beta1);
                let c2 = stability_constant_c2(
                    p.value(),
                    (k.alpha1, k.alpha2, k.alpha3),
                    (k.beta2, k.beta3),
                    c1,
                );
                (c1, c2.c2)
            }
        }
    }
}

/// A fitted trace; `fit` is `None` for identically zero traces.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitRecord {
    pub system: &'static str,
    pub trace: String,
    pub fit: Option<DecayFit>,
}

/// One envelope check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundRecord {
    pub system: &'static str,
    pub trace: String,
    pub constant: f64,
    pub initial_norm: f64,
    pub check: BoundCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelSummary {
    pub n_xi: usize,
    pub iterations_direct: usize,
    pub iterations_inverse: usize,
    pub final_increment_direct: f64,
    pub final_increment_inverse: f64,
    pub stop_direct: StopReason,
    pub stop_inverse: StopReason,
}

/// Fitted decay rates, constants and pass flags of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport {
    /// From the closed-loop `L^p` trace of the first exponent in the list.
    pub fitted_c: Option<f64>,
    pub fitted_sigma: Option<f64>,
    pub fit_residual: Option<f64>,
    pub lambda_lower: f64,
    /// Smallest `log(envelope/value)` over every bound check; negative iff
    /// some check failed.
    pub bound_margin: f64,
    pub constants: StabilityConstants,
    pub kernel: KernelSummary,
    pub compatibility: CompatibilityResiduals,
    /// Envelopes are only checked at these many recorded times.
    pub recorded_times: usize,
    pub fits: Vec<FitRecord>,
    pub bounds: Vec<BoundRecord>,
    pub pass_flags: BTreeMap<String, bool>,
}

impl DecayReport {
    pub fn passed(&self) -> bool {
        self.pass_flags.values().all(|v| *v)
    }
}

fn fmt_num(v: f64) -> String {
    format!("{v}")
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))
}

fn write_rows<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = f64>,
{
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(|e| Error::csv(path, e))?;
    for row in rows {
        w.write_record(row.into_iter().map(fmt_num))
            .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `x, y, k, l` on the kernel grid (`l` may be omitted).
pub fn write_kernel_csv(path: &Path, k: &KernelGrid, l: Option<&KernelGrid>) -> Result<()> {
    match l {
        Some(l) => {
            if l.grid_intervals() != k.grid_intervals() {
                return Err(Error::GridMismatch("k and l grids differ".into()));
            }
            write_rows(
                path,
                &["x", "y", "k", "l"],
                k.rows()
                    .zip(l.rows())
                    .map(|((x, y, kv), (_, _, lv))| [x, y, kv, lv]),
            )
        }
        None => write_rows(path, &["x", "y", "k"], k.rows().map(|(x, y, v)| [x, y, v])),
    }
}

/// `t, x, value` for every recorded state.
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    write_rows(
        path,
        &["t", "x", "value"],
        traj.times.iter().zip(&traj.fields).flat_map(|(&t, u)| {
            u.values()
                .iter()
                .enumerate()
                .map(move |(i, &v)| [t, u.x(i), v])
        }),
    )
}

/// `t, U` for a plant run.
pub fn write_controls_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    write_rows(
        path,
        &["t", "U"],
        traj.times.iter().zip(&traj.controls).map(|(&t, &u)| [t, u]),
    )
}

/// `t, value`.
pub fn write_trace_csv(path: &Path, trace: &NormTrace) -> Result<()> {
    write_rows(
        path,
        &["t", "value"],
        trace.times.iter().zip(&trace.values).map(|(&t, &v)| [t, v]),
    )
}

/// Solve the direct and inverse kernels concurrently.
pub fn solve_kernels(cfg: &ScenarioConfig) -> Result<(KernelGrid, KernelGrid)> {
    let opts = cfg.kernel.options();
    let spec = &cfg.problem;
    let (k, l) = std::thread::scope(|s| {
        let l = s.spawn(|| solve_inverse_kernel(spec, &opts));
        let k = solve_direct_kernel(spec, &opts);
        (k, l.join().expect("inverse kernel solver panicked"))
    });
    Ok((k?, l?))
}

/// Output directory bookkeeping; writes the MANIFEST.
struct Artifacts {
    dir: PathBuf,
    files: Vec<String>,
}

impl Artifacts {
    fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir.join("norms")).map_err(|e| Error::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, f: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
        let path = self.dir.join(name);
        f(&path)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn manifest(&self, failure: Option<&ScenarioError>) -> Result<()> {
        let mut text = String::new();
        match failure {
            None => text.push_str("status: complete\n"),
            Some(e) => {
                text.push_str("status: incomplete\n");
                text.push_str(&format!("stage: {}\n", e.stage));
                text.push_str(&format!("params: {}\n", e.params));
                text.push_str(&format!("error: {}\n", e.source));
            }
        }
        text.push_str("files:\n");
        for f in &self.files {
            text.push_str(&format!("  {f}\n"));
        }
        let path = self.dir.join("MANIFEST");
        fs::write(&path, text).map_err(|e| Error::io(path, e))
    }
}

fn stage<T>(
    stage: Stage,
    params: impl FnOnce() -> String,
    r: Result<T>,
) -> std::result::Result<T, ScenarioError> {
    r.map_err(|source| ScenarioError {
        stage,
        params: params(),
        source,
    })
}

fn fit_record(system: &'static str, trace: &NormTrace, skip: f64) -> Result<FitRecord> {
    let fit = if trace.values.iter().all(|v| *v == 0.0) {
        None
    } else {
        Some(fit_decay_rate(trace, skip)?)
    };
    Ok(FitRecord {
        system,
        trace: trace.file_stem(),
        fit,
    })
}

/// Run the full pipeline and write artifacts under `cfg.output.dir`.
///
/// On a stage failure the artifacts written so far are kept and the MANIFEST
/// records the failing stage.
pub fn run_scenario(cfg: &ScenarioConfig) -> std::result::Result<DecayReport, ScenarioError> {
    let dir = cfg.output.dir.clone();
    let mut art = stage(
        Stage::Write,
        || format!("dir = {}", dir.display()),
        Artifacts::create(&dir),
    )?;
    let out = pipeline(cfg, &mut art);
    let manifest = art.manifest(out.as_ref().err());
    match out {
        Ok(report) => {
            stage(
                Stage::Write,
                || format!("dir = {}", dir.display()),
                manifest,
            )?;
            Ok(report)
        }
        Err(e) => Err(e),
    }
}

fn pipeline(
    cfg: &ScenarioConfig,
    art: &mut Artifacts,
) -> std::result::Result<DecayReport, ScenarioError> {
    let spec = &cfg.problem;
    let sim = &cfg.simulation;
    let ver = &cfg.verify;
    let lambda_lower = stage(
        Stage::Validate,
        || format!("lambda0 = {}, c2 = {:?}", spec.lambda0, spec.family.c2),
        cfg.validate().and_then(|_| spec.lambda_lower()),
    )?;
    let kparams = || {
        format!(
            "n_xi = {}, tol = {:e}, max_iter = {}",
            cfg.kernel.n_xi, cfg.kernel.tol, cfg.kernel.max_iter
        )
    };
    let (k, l) = stage(Stage::Kernels, kparams, solve_kernels(cfg))?;
    stage(
        Stage::Write,
        || "kernel.csv".into(),
        art.write("kernel.csv", |p| write_kernel_csv(p, &k, Some(&l))),
    )?;
    let constants = StabilityConstants::new(kernel_constants(&k, &l), &ver.p_list);

    let iparams = || format!("{:?}, grid_m = {}", cfg.initial_data, sim.grid_m);
    let w0 = stage(
        Stage::InitialData,
        iparams,
        cfg.initial_data.profile(sim.grid_m, Some(&k)),
    )?;
    let compat = stage(
        Stage::InitialData,
        iparams,
        check_compatibility(&w0, &k, ver.compatibility_tol),
    )?;

    let sparams = || {
        format!(
            "grid_m = {}, dt = {:e}, t_end = {}",
            sim.grid_m, sim.dt, sim.t_end
        )
    };
    let closed = stage(
        Stage::ClosedLoop,
        sparams,
        simulate_closed_loop(spec, &k, &w0, sim),
    )?;
    stage(
        Stage::Write,
        || "closed-loop trajectory".into(),
        art.write("trajectory_closed_loop.csv", |p| {
            write_trajectory_csv(p, &closed)
        })
        .and_then(|_| art.write("controls.csv", |p| write_controls_csv(p, &closed))),
    )?;
    let u0 = stage(Stage::Target, sparams, initial_target_data(&w0, &k))?;
    let target = stage(Stage::Target, sparams, simulate_target(spec, &u0, sim))?;
    stage(
        Stage::Write,
        || "target trajectory".into(),
        art.write("trajectory_target.csv", |p| {
            write_trajectory_csv(p, &target)
        }),
    )?;

    let mut fits = Vec::new();
    let mut bounds = Vec::new();
    let mut traces: Vec<(&'static str, NormTrace)> = Vec::new();
    for &p in &ver.p_list {
        let nparams = || format!("p = {p}");
        let lp = stage(
            Stage::Norms,
            nparams,
            NormTrace::from_trajectory(&closed, NormKind::Lp, p),
        )?;
        let w1p = stage(
            Stage::Norms,
            nparams,
            NormTrace::from_trajectory(&closed, NormKind::W1p, p),
        )?;
        let tlp = stage(
            Stage::Norms,
            nparams,
            NormTrace::from_trajectory(&target, NormKind::Lp, p),
        )?;
        let (c_lp, c_w1p) = constants.for_exponent(p);
        for (trace, c, n0) in [
            (&lp, c_lp, lp_norm(&w0, p)),
            (&w1p, c_w1p, w1p_norm(&w0, p)),
        ] {
            bounds.push(BoundRecord {
                system: "closed_loop",
                trace: trace.file_stem(),
                constant: c,
                initial_norm: n0,
                check: verify_theorem_bound(trace, c, lambda_lower, n0, ver.slack),
            });
        }
        let u0n = lp_norm(&u0, p);
        bounds.push(BoundRecord {
            system: "target",
            trace: tlp.file_stem(),
            constant: 1.0,
            initial_norm: u0n,
            check: verify_theorem_bound(&tlp, 1.0, lambda_lower, u0n, ver.slack),
        });
        traces.push(("closed_loop", lp));
        traces.push(("closed_loop", w1p));
        traces.push(("target", tlp));
        if p.is_infinite() {
            continue;
        }
        for &tau in &ver.tau_list {
            let aparams = || format!("p = {p}, tau = {tau:e}");
            let kind = NormKind::Alf { tau };
            let trace = stage(
                Stage::Norms,
                aparams,
                NormTrace::from_trajectory(&target, kind, p),
            )?;
            let env = stage(
                Stage::Norms,
                aparams,
                alf_envelope(
                    &target,
                    |x, t| spec.lambda_unchecked(x, t),
                    lambda_lower,
                    p,
                    tau,
                ),
            )?;
            bounds.push(BoundRecord {
                system: "target",
                trace: trace.file_stem(),
                constant: 1.0,
                initial_norm: trace.values[0],
                check: verify_envelope(&trace, &env, ver.slack),
            });
            traces.push(("target", trace));
        }
    }
    for (system, trace) in &traces {
        let name = format!("norms/{system}_{}.csv", trace.file_stem());
        stage(
            Stage::Write,
            || name.clone(),
            art.write(&name, |p| write_trace_csv(p, trace)),
        )?;
        if !matches!(trace.kind, NormKind::Alf { .. }) {
            fits.push(stage(
                Stage::Fits,
                || {
                    format!(
                        "{system} {}, skip_fraction = {}",
                        trace.file_stem(),
                        ver.skip_fraction
                    )
                },
                fit_record(system, trace, ver.skip_fraction),
            )?);
        }
    }

    let flag = |pred: &dyn Fn(&BoundRecord) -> bool| {
        bounds.iter().filter(|b| pred(b)).all(|b| b.check.passed())
    };
    let mut pass_flags = BTreeMap::new();
    pass_flags.insert("compatibility".to_string(), compat.is_ok());
    pass_flags.insert(
        "closed_loop_lp".to_string(),
        flag(&|b| b.system == "closed_loop" && b.trace.starts_with("lp_")),
    );
    pass_flags.insert(
        "closed_loop_w1p".to_string(),
        flag(&|b| b.system == "closed_loop" && b.trace.starts_with("w1p_")),
    );
    pass_flags.insert(
        "target_decay_floor".to_string(),
        flag(&|b| b.system == "target" && b.trace.starts_with("lp_")),
    );
    pass_flags.insert(
        "alf_envelope".to_string(),
        flag(&|b| b.system == "target" && b.trace.starts_with("alf_")),
    );

    let primary = fits
        .iter()
        .find(|f| f.system == "closed_loop")
        .and_then(|f| f.fit);
    let bound_margin = bounds
        .iter()
        .map(|b| b.check.margin())
        .fold(f64::INFINITY, f64::min);
    let report = DecayReport {
        fitted_c: primary.map(|f| f.c),
        fitted_sigma: primary.map(|f| f.sigma),
        fit_residual: primary.map(|f| f.residual),
        lambda_lower,
        bound_margin,
        constants,
        kernel: KernelSummary {
            n_xi: k.n_xi(),
            iterations_direct: k.iterations_used(),
            iterations_inverse: l.iterations_used(),
            final_increment_direct: k.final_increment(),
            final_increment_inverse: l.final_increment(),
            stop_direct: k.stop_reason(),
            stop_inverse: l.stop_reason(),
        },
        compatibility: compat.residuals(),
        recorded_times: closed.len(),
        fits,
        bounds,
        pass_flags,
    };
    stage(
        Stage::Write,
        || "summary.json".into(),
        art.write("summary.json", |p| {
            let json = serde_json::to_string_pretty(&report)
                .map_err(|e| Error::Numeric(format!("summary serialization: {e}")))?;
            fs::write(p, json).map_err(|e| Error::io(p, e))
        }),
    )?;
    Ok(report)
}

/// Initial plant data of a scenario on its simulation grid.
pub fn scenario_initial_data(cfg: &ScenarioConfig, k: &KernelGrid) -> Result<Profile> {
    cfg.initial_data.profile(cfg.simulation.grid_m, Some(k))
}
