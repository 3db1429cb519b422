mod common;

use std::f64::consts::PI;
use std::fs;

use backstep::kernel::kernel_constants;
use backstep::norms::{lp_norm, Exponent, NormKind, NormTrace};
use backstep::simulator::{simulate_closed_loop, simulate_target, SimConfig};
use backstep::verify::{
    continuous_dependence_experiment, fit_decay_rate, run_scenario, solve_kernels,
    stability_constant_c1, stability_constant_c2, stability_constants_inf, verify_theorem_bound,
    ScenarioConfig, StabilityConstants, Stage,
};
use backstep::{Error, Profile};
use common::*;
use proptest::prelude::*;

fn small_scenario(problem: &str, initial: &str, dir: &std::path::Path) -> ScenarioConfig {
    let text = format!(
        r#"
[problem]
{problem}

[kernel]
n_xi = 101

[simulation]
grid_m = 51
dt = 1e-3
t_end = 1.0
record_stride = 50

[initial_data]
{initial}

[output]
dir = "{}"
"#,
        dir.display()
    );
    ScenarioConfig::from_toml_str(&text).unwrap()
}

const DECAYING: &str = r#"lambda0 = 3.0
horizon = 2.0
c1 = [0.0, 0.0, 1.0]
c2 = { kind = "exp_decay", a = 1.0, b = 1.0 }"#;

#[test]
fn null_scenario_passes_with_zero_traces() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_scenario(
        "lambda0 = 1.0\nhorizon = 1.0",
        "kind = \"constant\"\na = 0.0",
        dir.path(),
    );
    let report = run_scenario(&cfg).unwrap();
    assert!(report.passed(), "{:?}", report.pass_flags);
    assert!(report.fitted_sigma.is_none());
    assert!(report.fits.iter().all(|f| f.fit.is_none()));
    let manifest = fs::read_to_string(dir.path().join("MANIFEST")).unwrap();
    assert!(manifest.starts_with("status: complete"));
    let lp = fs::read_to_string(dir.path().join("norms/closed_loop_lp_p2.csv")).unwrap();
    let mut lines = lp.lines();
    assert_eq!(lines.next(), Some("t,value"));
    assert!(lines.all(|l| l.ends_with(",0")));
}

#[test]
fn decaying_scenario_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let initial =
        "kind = \"bump\"\ncenter = 0.5\nwidth = 0.3\nheight = 1.0\nenforce_compatibility = true";
    let cfg = small_scenario(DECAYING, initial, dir.path());
    let report = run_scenario(&cfg).unwrap();
    assert!(report.passed(), "{:?}", report.pass_flags);
    assert_eq!(report.lambda_lower, 1.0);
    assert!(report.bound_margin > 0.0);
    assert!(report.fitted_sigma.unwrap() > 1.0);
    assert!(report.compatibility.right < 1e-9);
    for name in [
        "kernel.csv",
        "trajectory_closed_loop.csv",
        "trajectory_target.csv",
        "controls.csv",
        "summary.json",
        "MANIFEST",
        "norms/closed_loop_w1p_pinf.csv",
        "norms/target_alf_tau1e-3_p1.csv",
    ] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let kernel = fs::read_to_string(dir.path().join("kernel.csv")).unwrap();
    assert_eq!(kernel.lines().next(), Some("x,y,k,l"));
    assert_eq!(kernel.lines().count(), 1 + 51 * 52 / 2);
    let controls = fs::read_to_string(dir.path().join("controls.csv")).unwrap();
    assert_eq!(controls.lines().next(), Some("t,U"));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["pass_flags"]["closed_loop_lp"], true);
    assert!(summary["constants"]["max_norm"]["c3"].as_f64().unwrap() >= 4.0);
}

#[test]
fn spectral_shift_violation_stops_at_validation() {
    let dir = tempfile::tempdir().unwrap();
    let problem = DECAYING.replace("lambda0 = 3.0", "lambda0 = 2.0");
    let cfg = small_scenario(&problem, "kind = \"constant\"\na = 1.0", dir.path());
    let err = run_scenario(&cfg).unwrap_err();
    assert_eq!(err.stage, Stage::Validate);
    assert!(matches!(err.source, Error::Validation(_)));
    assert!(err.to_string().contains("lambda0 > sup c"));
    let manifest = fs::read_to_string(dir.path().join("MANIFEST")).unwrap();
    assert!(manifest.starts_with("status: incomplete"));
    assert!(manifest.contains("stage: validate"));
}

#[test]
fn kernel_failure_is_reported_with_its_stage() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_scenario(DECAYING, "kind = \"constant\"\na = 1.0", dir.path());
    cfg.kernel.max_iter = 1;
    let err = run_scenario(&cfg).unwrap_err();
    assert_eq!(err.stage, Stage::Kernels);
    assert!(matches!(
        err.source,
        Error::NonConvergence { iterations: 1, .. }
    ));
    assert!(err.params.contains("max_iter = 1"));
    let manifest = fs::read_to_string(dir.path().join("MANIFEST")).unwrap();
    assert!(manifest.contains("stage: kernels"));
    assert!(!manifest.contains("kernel.csv"));
}

#[test]
fn target_fit_recovers_the_reaction_rate() {
    let s = quadratic(0.0, 3.0);
    let traj = simulate_target(
        &s,
        &Profile::from_fn(201, |_| 1.0).unwrap(),
        &SimConfig::default(),
    )
    .unwrap();
    let trace = NormTrace::from_trajectory(&traj, NormKind::Lp, Exponent::TWO).unwrap();
    let fit = fit_decay_rate(&trace, 0.1).unwrap();
    assert!((fit.sigma - 3.0).abs() < 0.06);
    assert!(fit.sigma >= s.lambda_lower().unwrap() - 1e-6);
}

#[test]
fn theorem_bound_with_zero_data_reduces_to_single_run() {
    let s = with_convolution();
    let cfg = SimConfig {
        grid_m: 51,
        dt: 1e-3,
        t_end: 0.5,
        record_stride: 50,
        ..SimConfig::default()
    };
    let (k, l) = (direct(&s, 101), inverse(&s, 101));
    let constants = StabilityConstants::new(kernel_constants(&k, &l), &[Exponent::TWO]);
    let w01 = Profile::from_fn(51, |x| (PI * x).cos()).unwrap();
    let zero = Profile::zeros(51).unwrap();
    let same =
        continuous_dependence_experiment(&s, &k, &cfg, &constants, Exponent::TWO, &w01, &w01)
            .unwrap();
    assert_eq!(same.max_difference, 0.0);
    assert!(same.passed);
    let vs_zero =
        continuous_dependence_experiment(&s, &k, &cfg, &constants, Exponent::TWO, &w01, &zero)
            .unwrap();
    let single = simulate_closed_loop(&s, &k, &w01, &cfg).unwrap();
    let trace = NormTrace::from_trajectory(&single, NormKind::Lp, Exponent::TWO).unwrap();
    let max = trace.values.iter().fold(0.0f64, |m, v| m.max(*v));
    assert_eq!(vs_zero.max_difference, max);
    assert_eq!(vs_zero.linearity_gap, 0.0);
    let (c1, _) = constants.for_exponent(Exponent::TWO);
    let direct_check = verify_theorem_bound(&trace, c1, 0.0, lp_norm(&w01, Exponent::TWO), 1.0);
    assert_eq!(direct_check.passed(), vs_zero.passed);
}

#[test]
fn scaling_the_data_scales_every_trace() {
    let s = with_convolution();
    let cfg = SimConfig {
        grid_m: 51,
        dt: 1e-3,
        t_end: 1.0,
        record_stride: 50,
        ..SimConfig::default()
    };
    let k = direct(&s, 101);
    let w0 = Profile::from_fn(51, |x| 1.0 + (PI * x).cos()).unwrap();
    let one = simulate_closed_loop(&s, &k, &w0, &cfg).unwrap();
    let two = simulate_closed_loop(&s, &k, &w0.scale(2.0), &cfg).unwrap();
    for p in [Exponent::ONE, Exponent::TWO, Exponent::INF] {
        let a = NormTrace::from_trajectory(&one, NormKind::Lp, p).unwrap();
        let b = NormTrace::from_trajectory(&two, NormKind::Lp, p).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((2.0 * x - y).abs() <= 1e-12 * y.abs());
        }
        let (fa, fb) = (
            fit_decay_rate(&a, 0.1).unwrap(),
            fit_decay_rate(&b, 0.1).unwrap(),
        );
        assert!((fa.sigma - fb.sigma).abs() < 1e-10);
        assert!((fb.c / fa.c - 2.0).abs() < 1e-10);
    }
}

#[test]
fn kernels_are_solved_concurrently_and_consistently() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_scenario(DECAYING, "kind = \"constant\"\na = 1.0", dir.path());
    let (k, l) = solve_kernels(&cfg).unwrap();
    let k2 = direct(&cfg.problem, 101);
    assert_eq!(k.values_xy(), k2.values_xy());
    assert_eq!(l.trace_diag().last(), Some(&1.5));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn constants_are_monotone_and_at_least_one(
        p in 1.0f64..6.0,
        a in prop::array::uniform3(0.0f64..4.0),
        b in prop::array::uniform3(0.0f64..4.0),
        bump in 0.0f64..1.0,
        which in 0usize..6,
    ) {
        let c1 = stability_constant_c1(p, a[0], b[0]);
        prop_assert!(c1 >= 1.0);
        let c2 = stability_constant_c2(p, (a[0], a[1], a[2]), (b[1], b[2]), c1).c2;
        prop_assert!(c2 >= 1.0);
        let inf = stability_constants_inf((a[0], a[1], a[2]), (b[0], b[1], b[2]));
        prop_assert!(inf.c3 >= 4.0 && inf.c4 >= inf.c3);

        let (mut a2, mut b2) = (a, b);
        if which < 3 { a2[which] += bump } else { b2[which - 3] += bump }
        let c1b = stability_constant_c1(p, a2[0], b2[0]);
        prop_assert!(c1b >= c1);
        let c2b = stability_constant_c2(p, (a2[0], a2[1], a2[2]), (b2[1], b2[2]), c1b).c2;
        prop_assert!(c2b >= c2 * (1.0 - 1e-14));
        let infb = stability_constants_inf((a2[0], a2[1], a2[2]), (b2[0], b2[1], b2[2]));
        prop_assert!(infb.c4 >= inf.c4 * (1.0 - 1e-14));
    }
}
