//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Each criterion is a list of clauses. A clause that is known to be out of
//! reach with the chosen discretization is listed in [`EXPECTED_FAILURES`]
//! with the reason; the suite fails if the set of failing clauses differs
//! from that list in either direction.

mod common;

use std::f64::consts::PI;
use std::path::PathBuf;
use std::time::Instant;

use backstep::coefficients::TimeProfile;
use backstep::kernel::kernel_constants;
use backstep::kernel::{
    bound_constant_m, residual, series_oracle, solve_direct_kernel, solve_inverse_kernel,
    tail_bound, GoursatProblem, KernelGrid, PicardOptions,
};
use backstep::norms::{
    alf, alf_envelope, gronwall_bound, lp_norm, rho, rho_prime, rho_second, Exponent, NormKind,
    NormTrace,
};
use backstep::poly::Poly2;
use backstep::simulator::{simulate_target, SimConfig};
use backstep::transforms::{forward_transform, inverse_transform};
use backstep::verify::{
    continuous_dependence_experiment, fit_decay_rate, run_scenario, ScenarioConfig,
    StabilityConstants,
};
use backstep::Profile;
use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Clauses that fail by design, with the reason.
const EXPECTED_FAILURES: &[(&str, &str)] = &[(
    "4a",
    "the trapezoid transforms are second order with a round-trip constant near 2.4, \
     so 1e-6 at 401 nodes would need a higher-order rule, which breaks the ratio-4 clause 4b",
)];

struct Clause {
    id: &'static str,
    passed: bool,
    detail: String,
}

type Criterion = fn() -> Vec<Clause>;

fn clause(id: &'static str, passed: bool, detail: String) -> Clause {
    Clause { id, passed, detail }
}

fn sup_over_region(k: &KernelGrid, lambda0: f64, r: f64) -> f64 {
    let field = k.values_xieta();
    let lat = field.lattice();
    lat.nodes()
        .map(|(i, j)| {
            let s = series_oracle(lambda0, r, lat.coord(i), lat.coord(j), 25);
            (field.get(i, j) - s).abs()
        })
        .fold(0.0, f64::max)
}

fn criterion_1() -> Vec<Clause> {
    let s = quadratic(2.0, 10.0);
    let start = Instant::now();
    let k = solve_direct_kernel(&s, &PicardOptions::new(201, 1e-10, 200)).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let err = sup_over_region(&k, 10.0, 2.0);
    vec![
        clause(
            "1a",
            err <= 1e-6,
            format!("sup |G − series| = {err:.2e} (≤ 1e-6)"),
        ),
        clause(
            "1b",
            elapsed <= 60.0,
            format!("solve time {elapsed:.2} s (≤ 60 s)"),
        ),
    ]
}

fn criterion_2() -> Vec<Clause> {
    let mut out = Vec::new();
    let cases = [
        ("f = 0", quadratic(2.0, 10.0), "2a", "2b"),
        ("f = 1+xy", with_convolution(), "2c", "2d"),
    ];
    for (name, s, id_ratio, id_bc) in cases {
        let problem = GoursatProblem::direct(&s);
        let k = direct(&s, 201);
        let r: Vec<_> = [8, 4, 2]
            .iter()
            .map(|&st| residual(&k, &problem, st).unwrap())
            .collect();
        let ratios = [r[0].interior / r[1].interior, r[1].interior / r[2].interior];
        out.push(clause(
            id_ratio,
            ratios.iter().all(|q| (3.0..=5.0).contains(q)),
            format!(
                "{name}: interior residual {:.2e} → {:.2e} → {:.2e}, ratios {:.3}, {:.3} (in [3, 5])",
                r[0].interior, r[1].interior, r[2].interior, ratios[0], ratios[1]
            ),
        ));
        let bc = r[0].diagonal.max(r[0].edge).max(r[0].corner);
        out.push(clause(
            id_bc,
            bc <= 1e-8,
            format!(
                "{name}: diagonal {:.1e}, edge {:.1e}, corner {:.1e} (≤ 1e-8); edge by one-sided differences {:.1e}",
                r[0].diagonal, r[0].edge, r[0].corner, r[0].edge_fd
            ),
        ));
    }
    out
}

fn criterion_3() -> Vec<Clause> {
    let mut out = Vec::new();
    for (id, s) in [("3a", quadratic(2.0, 10.0)), ("3b", with_convolution())] {
        let k = direct(&s, 201);
        let m = bound_constant_m(&s);
        let worst = k
            .increments()
            .iter()
            .enumerate()
            .map(|(n, inc)| inc / tail_bound(n, m, 2.0, 0.0))
            .fold(0.0, f64::max);
        out.push(clause(
            id,
            worst <= 1.1,
            format!(
                "M = {m}, {} sweeps, max increment / tail bound = {worst:.3e} (≤ 1.1)",
                k.increments().len()
            ),
        ));
    }
    out
}

fn round_trip(grid_m: usize) -> f64 {
    let s = quadratic(2.0, 10.0);
    let opts = PicardOptions::new(2 * (grid_m - 1) + 1, 1e-10, 200);
    let k = solve_direct_kernel(&s, &opts).unwrap();
    let l = solve_inverse_kernel(&s, &opts).unwrap();
    let w = Profile::from_fn(grid_m, |x| (PI * x).cos() + 0.3 * x * x).unwrap();
    let back = inverse_transform(&forward_transform(&w, &k).unwrap(), &l).unwrap();
    back.max_abs_diff(&w).unwrap()
}

fn criterion_4() -> Vec<Clause> {
    let (e201, e401) = (round_trip(201), round_trip(401));
    let ratio = e201 / e401;
    vec![
        clause(
            "4a",
            e401 <= 1e-6,
            format!("round trip at 401 nodes {e401:.2e} (≤ 1e-6)"),
        ),
        clause(
            "4b",
            (3.5..=4.5).contains(&ratio),
            format!("201 → 401 nodes: {e201:.2e} → {e401:.2e}, ratio {ratio:.3} (≈ 4)"),
        ),
    ]
}

fn criterion_5() -> Vec<Clause> {
    let s = quadratic(0.0, 3.0);
    let cfg = SimConfig::default();
    let flat = simulate_target(&s, &Profile::from_fn(cfg.grid_m, |_| 1.0).unwrap(), &cfg).unwrap();
    let err = flat
        .times
        .iter()
        .zip(&flat.fields)
        .map(|(t, u)| {
            u.values()
                .iter()
                .fold(0.0f64, |m, v| m.max((v - (-3.0 * t).exp()).abs()))
        })
        .fold(0.0, f64::max);
    let cosine = simulate_target(
        &s,
        &Profile::from_fn(cfg.grid_m, |x| (PI * x).cos()).unwrap(),
        &cfg,
    )
    .unwrap();
    let trace = NormTrace::from_trajectory(&cosine, NormKind::Lp, Exponent::TWO).unwrap();
    let sigma = fit_decay_rate(&trace, 0.1).unwrap().sigma;
    let expected = PI * PI + 3.0;
    let rel = (sigma - expected).abs() / expected;
    vec![
        clause(
            "5a",
            err <= 1e-6,
            format!("u0 = 1: max error vs e^(-3t) = {err:.2e} (≤ 1e-6)"),
        ),
        clause(
            "5b",
            rel <= 0.02,
            format!("u0 = cos(πx): σ = {sigma:.5} vs π²+3 = {expected:.5}, rel {rel:.1e} (≤ 2%)"),
        ),
    ]
}

fn decaying_spec() -> backstep::coefficients::ProblemSpec {
    spec(
        &[0.0, 0.0, 1.0],
        TimeProfile::ExpDecay { a: 1.0, b: 1.0 },
        Poly2::zero(),
        3.0,
    )
}

fn criterion_6() -> Vec<Clause> {
    let s = decaying_spec();
    let lower = s.lambda_lower().unwrap();
    let cfg = SimConfig {
        t_end: 2.0,
        ..SimConfig::default()
    };
    let u0 = Profile::from_fn(cfg.grid_m, |_| 1.0).unwrap();
    let traj = simulate_target(&s, &u0, &cfg).unwrap();
    let mut worst: f64 = 0.0;
    for p in [Exponent::ONE, Exponent::TWO, Exponent::INF] {
        let n0 = lp_norm(&u0, p);
        for (t, u) in traj.times.iter().zip(&traj.fields) {
            worst = worst.max(lp_norm(u, p) / ((-t).exp() * n0));
        }
    }
    vec![
        clause("6a", lower == 1.0, format!("λ̲ = {lower}")),
        clause(
            "6b",
            worst <= 1.02,
            format!("max ‖u[t]‖_p / (e^(-t)‖u0‖_p) over p ∈ {{1, 2, ∞}} = {worst:.5} (≤ 1.02)"),
        ),
    ]
}

fn default_scenario() -> ScenarioConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/default.toml");
    ScenarioConfig::load(path).unwrap()
}

fn criterion_7() -> Vec<Clause> {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = default_scenario();
    cfg.output.dir = dir.path().to_path_buf();
    cfg.verify.slack = 1.05;
    cfg.verify.p_list = vec![Exponent::ONE, Exponent::TWO, Exponent::INF];
    let start = Instant::now();
    let report = run_scenario(&cfg).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let closed: Vec<_> = report
        .bounds
        .iter()
        .filter(|b| b.system == "closed_loop")
        .collect();
    let describe = |prefix: &str| {
        closed
            .iter()
            .filter(|b| b.trace.starts_with(prefix))
            .map(|b| {
                format!(
                    "{} C = {:.3} margin {:.3}",
                    b.trace,
                    b.constant,
                    b.check.margin()
                )
            })
            .collect::<Vec<_>>()
            .join("; ")
    };
    let all = |prefix: &str| {
        closed
            .iter()
            .filter(|b| b.trace.starts_with(prefix))
            .all(|b| b.check.passed())
    };
    let residual = report.compatibility.left.max(report.compatibility.right);
    vec![
        clause(
            "7a",
            residual < 1e-3,
            format!("compatibility residual {residual:.1e} (< 1e-3)"),
        ),
        clause("7b", all("lp_"), describe("lp_")),
        clause("7c", all("w1p_"), describe("w1p_")),
        clause(
            "7d",
            elapsed <= 300.0,
            format!("scenario time {elapsed:.1} s (≤ 300 s)"),
        ),
    ]
}

fn criterion_8() -> Vec<Clause> {
    let cfg = default_scenario();
    let s = &cfg.problem;
    let opts = cfg.kernel.options();
    let k = solve_direct_kernel(s, &opts).unwrap();
    let l = solve_inverse_kernel(s, &opts).unwrap();
    let ps = [Exponent::ONE, Exponent::TWO, Exponent::INF];
    let constants = StabilityConstants::new(kernel_constants(&k, &l), &ps);
    let m = cfg.simulation.grid_m;
    let w01 = Profile::from_fn(m, |x| (PI * x).cos()).unwrap();
    let w02 = w01.scale(0.9);
    let mut bound_ok = true;
    let mut gap: f64 = 0.0;
    let mut detail = Vec::new();
    for p in ps {
        let r = continuous_dependence_experiment(s, &k, &cfg.simulation, &constants, p, &w01, &w02)
            .unwrap();
        bound_ok &= r.passed;
        gap = gap.max(r.linearity_gap);
        detail.push(format!(
            "p = {p}: {:.3e} ≤ {:.3e}",
            r.max_difference, r.bound
        ));
    }
    vec![
        clause("8a", bound_ok, detail.join("; ")),
        clause(
            "8b",
            gap <= 1e-8,
            format!("sup |(w1 − w2) − w_d| = {gap:.2e} (≤ 1e-8)"),
        ),
    ]
}

fn criterion_9() -> Vec<Clause> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut violations = 0usize;
    let samples = 100_000;
    for i in 0..samples {
        let tau = 10f64.powf(rng.gen_range(-4.0..0.0));
        let s = if i % 2 == 0 {
            tau * rng.gen_range(-3.0..3.0)
        } else {
            rng.gen_range(-3.0..3.0)
        };
        let (r, rp, rpp) = (
            rho(s, tau).unwrap(),
            rho_prime(s, tau).unwrap(),
            rho_second(s, tau).unwrap(),
        );
        let eps = 1e-13 * (1.0 + s.abs());
        let ok = s.abs() <= r + eps
            && rp.abs() <= 1.0 + eps
            && rpp >= -eps / tau
            && r - 3.0 * tau / 8.0 >= -eps
            && r - 3.0 * tau / 8.0 <= rp * s + eps
            && rp * s <= r + eps
            && r <= s.abs() + 3.0 * tau / 8.0 + eps;
        if !ok {
            violations += 1;
        }
    }
    let zero_slope = [1e-4, 1e-2, 1.0]
        .iter()
        .all(|&t| rho_prime(0.0, t).unwrap() == 0.0);

    let c: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let v = Profile::from_fn(401, |x| {
        c[0] + c[1] * (PI * x).cos() + c[2] * x * x + c[3] * (7.0 * x).sin()
    })
    .unwrap();
    let vmax = v.sup_norm();
    let taus = [1e-1, 1e-2, 1e-3];
    let mut linear = true;
    let mut detail = Vec::new();
    for p in [1.0, 1.5, 2.0, 3.0] {
        let e = Exponent::new(p).unwrap();
        let exact = lp_norm(&v, e).powf(p);
        let gaps: Vec<f64> = taus
            .iter()
            .map(|&t| (alf(&v, e, t).unwrap() - exact).abs())
            .collect();
        for (t, g) in taus.iter().zip(&gaps) {
            linear &= *g <= p * (vmax + 3.0 * t / 8.0).powf(p - 1.0) * 3.0 * t / 8.0 + 1e-13;
        }
        linear &= gaps[1] <= gaps[0] / 10.0 * 1.001 && gaps[2] <= gaps[1] / 10.0 * 1.001;
        detail.push(format!(
            "p = {p}: {:.1e} {:.1e} {:.1e}",
            gaps[0], gaps[1], gaps[2]
        ));
    }
    vec![
        clause(
            "9a",
            violations == 0 && zero_slope,
            format!("{violations} violations in {samples} random (s, τ) pairs"),
        ),
        clause(
            "9b",
            linear,
            format!(
                "|alf − ‖v‖_p^p| at τ = 1e-1, 1e-2, 1e-3: {}",
                detail.join("; ")
            ),
        ),
    ]
}

fn criterion_10() -> Vec<Clause> {
    let times: Vec<f64> = (0..=400).map(|i| i as f64 * 0.005).collect();
    let n = times.len();
    let decay = gronwall_bound(5.0, &vec![-2.0; n], &vec![0.0; n], &times).unwrap();
    let ramp = gronwall_bound(0.0, &vec![0.0; n], &vec![1.0; n], &times).unwrap();
    let closed_err = times
        .iter()
        .enumerate()
        .map(|(i, t)| {
            (decay[i] - 5.0 * (-2.0 * t).exp())
                .abs()
                .max((ramp[i] - t).abs())
        })
        .fold(0.0, f64::max);

    let s = decaying_spec();
    let lower = s.lambda_lower().unwrap();
    let u0 = Profile::from_fn(201, |x| 0.2 + (PI * x).cos()).unwrap();
    let traj = simulate_target(&s, &u0, &SimConfig::default()).unwrap();
    let mut worst: f64 = 0.0;
    for p in [1.0, 1.5, 2.0, 3.0] {
        let e = Exponent::new(p).unwrap();
        for tau in [1e-1, 1e-2, 1e-3] {
            let trace = NormTrace::from_trajectory(&traj, NormKind::Alf { tau }, e).unwrap();
            let env =
                alf_envelope(&traj, |x, t| s.eval_lambda(x, t).unwrap(), lower, e, tau).unwrap();
            for (v, b) in trace.values.iter().zip(&env) {
                worst = worst.max(v / b);
            }
        }
    }
    vec![
        clause(
            "10a",
            closed_err <= 1e-10,
            format!("closed-form error {closed_err:.1e} (≤ 1e-10)"),
        ),
        clause(
            "10b",
            worst <= 1.05,
            format!("max alf / envelope = {worst:.5} (≤ 1.05)"),
        ),
    ]
}

#[test]
fn acceptance_criteria() {
    let criteria: Vec<(usize, Criterion)> = vec![
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
    ];
    let mut failing = Vec::new();
    for (number, run) in criteria {
        let start = Instant::now();
        let clauses = run();
        let ok = clauses.iter().all(|c| c.passed);
        println!(
            "criterion {number:>2}: {} ({:.1} s)",
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
        for c in &clauses {
            let expected = EXPECTED_FAILURES.iter().find(|(id, _)| *id == c.id);
            let tag = match (c.passed, expected) {
                (true, _) => "ok",
                (false, Some(_)) => "FAIL (expected)",
                (false, None) => "FAIL",
            };
            println!("    [{:>3}] {tag}: {}", c.id, c.detail);
            if let (false, Some((_, why))) = (c.passed, expected) {
                println!("          reason: {why}");
            }
            if !c.passed {
                failing.push(c.id);
            }
        }
    }
    let expected: Vec<&str> = EXPECTED_FAILURES.iter().map(|(id, _)| *id).collect();
    let unexpected: Vec<_> = failing.iter().filter(|id| !expected.contains(id)).collect();
    let now_passing: Vec<_> = expected.iter().filter(|id| !failing.contains(id)).collect();
    assert!(unexpected.is_empty(), "unexpected failures: {unexpected:?}");
    assert!(
        now_passing.is_empty(),
        "clauses listed as expected failures now pass, update the list: {now_passing:?}"
    );
}
