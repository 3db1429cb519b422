//! `backstep` command-line driver.
//!
//! Exit codes: 0 pass, 1 bound violation, 2 configuration error, 3 numerical
//! failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use backstep::kernel::{residual, series_oracle, series_tail_bound, GoursatProblem, KernelGrid};
use backstep::norms::Exponent;
use backstep::simulator::{simulate_closed_loop, simulate_target};
use backstep::transforms::initial_target_data;
use backstep::verify::{
    run_scenario, scenario_initial_data, solve_kernels, write_controls_csv, write_kernel_csv,
    write_trajectory_csv, ScenarioConfig,
};
use backstep::Error;
use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "backstep",
    version,
    about = "Backstepping kernels, closed-loop simulation and decay verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Scenario file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides `[output] dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Exponents to check, e.g. `1,2,inf`; overrides `[verify] p_list`.
    #[arg(long, global = true, value_delimiter = ',')]
    p: Option<Vec<Exponent>>,

    /// Multiply every grid resolution by this factor.
    #[arg(long, global = true, default_value_t = 1)]
    refine: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the direct and inverse kernels, write kernel.csv and print the
    /// residual report.
    Kernel,
    /// Simulate the closed loop (or the target system) and write the
    /// trajectory.
    Simulate {
        /// Simulate the target system instead of the plant.
        #[arg(long)]
        target: bool,
    },
    /// Run the full verification pipeline and write summary.json.
    Verify,
    /// Compare the computed kernel with its series solution.
    Oracle {
        /// Terms kept in the series.
        #[arg(long, default_value_t = 25)]
        terms: usize,
        /// Largest admissible sup-error.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
}

/// What went wrong, mapped to an exit code.
enum Failure {
    Bound(String),
    Config(String),
    Numeric(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Bound(_) => 1,
            Failure::Config(_) => 2,
            Failure::Numeric(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Bound(m) | Failure::Config(m) | Failure::Numeric(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Config(_)
            | Error::Validation(_)
            | Error::Domain { .. }
            | Error::GridTooCoarse(_)
            | Error::GridMismatch(_)
            | Error::Io { .. } => Failure::Config(msg),
            Error::NonConvergence { .. }
            | Error::Numeric(_)
            | Error::Divergence { .. }
            | Error::Fit(_)
            | Error::MissingTrace
            | Error::Csv { .. } => Failure::Numeric(msg),
        }
    }
}

fn load(cli: &Cli) -> Result<ScenarioConfig, Failure> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Failure::Config("--config <path> is required".into()))?;
    let mut cfg = ScenarioConfig::load(path)?;
    if cli.refine != 1 {
        cfg = cfg.refined(cli.refine)?;
    }
    if let Some(p) = &cli.p {
        cfg = cfg.with_p_list(p.clone())?;
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = out.clone();
    }
    Ok(cfg)
}

fn out_dir(cfg: &ScenarioConfig) -> Result<&Path, Failure> {
    let dir = cfg.output.dir.as_path();
    std::fs::create_dir_all(dir).map_err(|e| Failure::Config(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

fn cmd_kernel(cfg: &ScenarioConfig) -> Result<(), Failure> {
    cfg.validate()?;
    let (k, l) = solve_kernels(cfg)?;
    let dir = out_dir(cfg)?;
    write_kernel_csv(&dir.join("kernel.csv"), &k, Some(&l))?;
    for (name, grid, problem) in [
        ("k", &k, GoursatProblem::direct(&cfg.problem)),
        ("l", &l, GoursatProblem::inverse(&cfg.problem)),
    ] {
        println!(
            "{name}: {} sweeps, last increment {:.3e}, stop {:?}",
            grid.iterations_used(),
            grid.final_increment(),
            grid.stop_reason()
        );
        for stride in [8, 4, 2] {
            let r = residual(grid, &problem, stride)?;
            println!(
                "  spacing {:.4e}: interior {:.3e} diagonal {:.3e} edge {:.3e} corner {:.3e}",
                r.spacing, r.interior, r.diagonal, r.edge, r.corner
            );
        }
    }
    println!("wrote {}", dir.join("kernel.csv").display());
    Ok(())
}

fn cmd_simulate(cfg: &ScenarioConfig, target: bool) -> Result<(), Failure> {
    cfg.validate()?;
    let (k, _) = solve_kernels(cfg)?;
    let w0 = scenario_initial_data(cfg, &k)?;
    let dir = out_dir(cfg)?;
    let traj = if target {
        let u0 = initial_target_data(&w0, &k)?;
        simulate_target(&cfg.problem, &u0, &cfg.simulation)?
    } else {
        let traj = simulate_closed_loop(&cfg.problem, &k, &w0, &cfg.simulation)?;
        write_controls_csv(&dir.join("controls.csv"), &traj)?;
        traj
    };
    write_trajectory_csv(&dir.join("trajectory.csv"), &traj)?;
    println!(
        "{} run: {} recorded states up to t = {}",
        if target { "target" } else { "closed-loop" },
        traj.len(),
        traj.times.last().copied().unwrap_or(0.0)
    );
    Ok(())
}

fn cmd_verify(cfg: &ScenarioConfig) -> Result<(), Failure> {
    let report = run_scenario(cfg).map_err(|e| {
        let msg = e.to_string();
        match Failure::from(e.source) {
            Failure::Config(_) => Failure::Config(msg),
            _ => Failure::Numeric(msg),
        }
    })?;
    println!("lambda_lower  {}", report.lambda_lower);
    if let (Some(c), Some(s), Some(r)) = (report.fitted_c, report.fitted_sigma, report.fit_residual)
    {
        println!("fitted C      {c:.6}");
        println!("fitted sigma  {s:.6} (rms log residual {r:.2e})");
    }
    println!("bound margin  {:.6}", report.bound_margin);
    for (name, ok) in &report.pass_flags {
        println!("{:<20}{}", name, if *ok { "PASS" } else { "FAIL" });
    }
    println!("wrote {}", cfg.output.dir.join("summary.json").display());
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Bound(
            "at least one verification check failed".into(),
        ))
    }
}

/// `r` when `c1(x) = r x²`.
fn quadratic_rate(cfg: &ScenarioConfig) -> Option<f64> {
    let c = cfg.problem.c1().coeffs();
    let r = c.get(2).copied().unwrap_or(0.0);
    let others_zero = c.iter().enumerate().all(|(i, v)| i == 2 || *v == 0.0);
    (others_zero && cfg.problem.f().is_zero()).then_some(r)
}

fn cmd_oracle(cfg: &ScenarioConfig, terms: usize, tol: f64) -> Result<(), Failure> {
    cfg.validate()?;
    let r = quadratic_rate(cfg)
        .ok_or_else(|| Failure::Config("oracle needs f = 0 and c1(x) = r x^2".into()))?;
    let (k, _) = solve_kernels(cfg)?;
    let dir = out_dir(cfg)?;
    let (sup_err, rows) = compare_with_series(&k, cfg.problem.lambda0, r, terms);
    let path = dir.join("oracle.csv");
    let mut text = String::from("xi,eta,picard,series,abs_error,series_tail\n");
    for row in &rows {
        text.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row[0], row[1], row[2], row[3], row[4], row[5]
        ));
    }
    std::fs::write(&path, text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    println!(
        "{:>6} {:>6} {:>22} {:>22} {:>10}",
        "xi", "eta", "picard", "series", "error"
    );
    for row in rows
        .iter()
        .filter(|r| is_table_point(r[0]) && is_table_point(r[1]))
    {
        println!(
            "{:>6.3} {:>6.3} {:>22.15e} {:>22.15e} {:>10.2e}",
            row[0], row[1], row[2], row[3], row[4]
        );
    }
    println!(
        "sup error over all {} lattice nodes: {sup_err:.3e}",
        rows.len()
    );
    if sup_err <= tol {
        Ok(())
    } else {
        Err(Failure::Bound(format!(
            "sup error {sup_err:e} exceeds {tol:e}"
        )))
    }
}

fn is_table_point(v: f64) -> bool {
    ((v * 4.0).round() - v * 4.0).abs() < 1e-9
}

fn compare_with_series(k: &KernelGrid, lambda0: f64, r: f64, terms: usize) -> (f64, Vec<[f64; 6]>) {
    let field = k.values_xieta();
    let lattice = field.lattice();
    let mut sup: f64 = 0.0;
    let rows = lattice
        .nodes()
        .map(|(i, j)| {
            let (xi, eta) = (lattice.coord(i), lattice.coord(j));
            let g = field.get(i, j);
            let s = series_oracle(lambda0, r, xi, eta, terms);
            sup = sup.max((g - s).abs());
            [
                xi,
                eta,
                g,
                s,
                (g - s).abs(),
                series_tail_bound(lambda0, r, xi, eta, terms),
            ]
        })
        .collect();
    (sup, rows)
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let cfg = load(cli)?;
    match &cli.command {
        Command::Kernel => cmd_kernel(&cfg),
        Command::Simulate { target } => cmd_simulate(&cfg, *target),
        Command::Verify => cmd_verify(&cfg),
        Command::Oracle { terms, tol } => cmd_oracle(&cfg, *terms, *tol),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
