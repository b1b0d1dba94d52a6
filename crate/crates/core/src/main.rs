use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use hardy_lab::bvp::{
    apriori_check, check_invariants, ratio_trace, search_amplitude, solve_weak, strong_limit, BarrierSpec,
    StrongLimitOptions, BARRIER_SAMPLES, MAX_BARRIER_RADIUS,
};
use hardy_lab::capacity::classify_removability;
use hardy_lab::fieldops::{martin_field, rayleigh_lambda, sci, weak_tail};
use hardy_lab::hemisphere::{boundary_exponent_fit, solve_omega};
use hardy_lab::params::phi_mu;
use hardy_lab::suite::{
    capacity_table, kernel_grid, martin_residuals, omega_table, run_suite, RunConfig, Table, OUTPUT_ENV,
};
use hardy_lab::{angular::AngularMesh, exponent_pack, Error, HardyParams, Result};

const DEFAULT_OUT: &str = "hardy-lab-out";

#[derive(Parser)]
#[command(name = "hardy-lab", version, about = "Boundary singularities of −Δu − μ/δ² u + |∇u|^q = 0")]
struct Cli {
    /// Machine-readable JSON summaries.
    #[arg(long, global = true)]
    json: bool,

    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory for CSV and JSON artifacts.
    #[arg(long, global = true, env = OUTPUT_ENV)]
    out: Option<PathBuf>,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct Overrides {
    #[arg(long, global = true)]
    n: Option<usize>,
    #[arg(long, global = true)]
    mu: Option<f64>,
    #[arg(long, global = true)]
    q: Option<f64>,
    /// Hemisphere mesh size.
    #[arg(long, global = true)]
    mesh: Option<usize>,
    /// Radial nodes of the half-ball grid.
    #[arg(long, global = true)]
    radial: Option<usize>,
    /// Angular nodes of the half-ball grid.
    #[arg(long, global = true)]
    angular: Option<usize>,
    #[arg(long, global = true)]
    r_min: Option<f64>,
    /// Seed of the random angle sampling.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form exponents and bracket constants.
    Constants,
    /// Hemisphere profile ω.
    #[command(subcommand)]
    Omega(OmegaCmd),
    /// Martin kernel checks and eigenvalue estimates.
    #[command(subcommand)]
    Kernel(KernelCmd),
    /// Half-ball boundary value problems.
    #[command(subcommand)]
    Bvp(BvpCmd),
    /// Removability of boundary points.
    #[command(subcommand)]
    Capacity(CapacityCmd),
    /// Every acceptance check; exits nonzero if any fails.
    Suite {
        /// Runs the closed-form stages alongside the solves.
        #[arg(long)]
        parallel: bool,
    },
}

#[derive(Subcommand)]
enum OmegaCmd {
    /// Separable profile on the hemisphere.
    Solve,
}

#[derive(Subcommand)]
enum KernelCmd {
    /// Discrete residual of the Martin kernel under mesh doublings.
    Check {
        #[arg(long, default_value_t = 2)]
        doublings: usize,
    },
    /// Weak-L^p tail exponent of K or |∇K| against δ^γ.
    Tails {
        #[arg(long, default_value_t = 0.0)]
        gamma: f64,
        /// Use |∇K| instead of K.
        #[arg(long)]
        gradient: bool,
    },
    /// Rayleigh estimate of the first eigenvalue of −L_μ.
    Eig {
        /// Hardy coefficients to test; defaults to the configured μ.
        #[arg(long, value_delimiter = ',')]
        mus: Vec<f64>,
        #[arg(long, default_value_t = 4)]
        trials: usize,
    },
}

#[derive(Subcommand)]
enum BvpCmd {
    /// Weak singularity with trace kδ₀.
    Solve {
        #[arg(long)]
        k: Option<f64>,
    },
    /// Large-k ladder compared with the separable profile.
    StrongLimit {
        #[arg(long, value_delimiter = ',')]
        ladder: Vec<f64>,
    },
    /// Amplitude search for the boundary barrier.
    Barrier {
        /// Power-barrier exponent; omit for the logarithmic barrier at μ = 1/4.
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        b: f64,
        #[arg(long, default_value_t = MAX_BARRIER_RADIUS)]
        radius: f64,
        #[arg(long, default_value_t = BARRIER_SAMPLES)]
        samples: usize,
    },
}

#[derive(Subcommand)]
enum CapacityCmd {
    /// Removability verdict for one q.
    Classify,
    /// Verdicts over a q grid as CSV.
    Sweep,
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    let o = &cli.overrides;
    if let Some(v) = o.n {
        cfg.n = v;
    }
    if let Some(v) = o.mu {
        cfg.mu = v;
    }
    if let Some(v) = o.q {
        cfg.q = v;
    }
    if let Some(v) = o.mesh {
        cfg.angular_nodes = v;
    }
    if let Some(v) = o.radial {
        cfg.radial_nodes = v;
    }
    if let Some(v) = o.angular {
        cfg.bvp_angular_nodes = v;
    }
    if let Some(v) = o.r_min {
        cfg.r_min = v;
    }
    if let Some(v) = o.seed {
        cfg.seed = v;
    }
    if let Some(dir) = &cli.out {
        cfg.output_dir = Some(dir.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_table(t: &Table, dir: &Path, name: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    t.write(&path)?;
    Ok(path)
}

macro_rules! out {
    ($($t:tt)*) => {
        writeln!(std::io::stdout().lock(), $($t)*)?
    };
}

fn flat(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn emit(json: bool, value: &impl Serialize) -> Result<()> {
    let v = serde_json::to_value(value)?;
    if json {
        out!("{}", serde_json::to_string_pretty(&v)?);
        return Ok(());
    }
    match &v {
        Value::Object(map) => {
            for (k, x) in map {
                out!("{k:>20}  {}", flat(x));
            }
        }
        other => out!("{}", flat(other)),
    }
    Ok(())
}

fn hardy(cfg: &RunConfig) -> Result<HardyParams> {
    HardyParams::new(cfg.n, cfg.mu)
}

fn echo(cfg: &RunConfig) -> Value {
    json!({ "n": cfg.n, "mu": cfg.mu, "q": cfg.q })
}

fn run(cli: &Cli) -> Result<ExitCode> {
    let cfg = load_config(cli)?;
    let json = cli.json;
    match &cli.command {
        Command::Constants => {
            emit(json, &exponent_pack(&hardy(&cfg)?, cfg.q)?)?;
        }
        Command::Omega(OmegaCmd::Solve) => {
            let hp = hardy(&cfg)?;
            let mesh = AngularMesh::chebyshev(cfg.angular_nodes)?;
            let sol = solve_omega(&hp, cfg.q, &mesh).map_err(|e| e.at_stage("hemisphere"))?;
            let (g1, g2, a0) = sol.exponents.bracket()?;
            let upper = sol
                .phi()
                .iter()
                .zip(&sol.omega)
                .all(|(p, w)| *w <= g1 * phi_mu(*p, hp.alpha()) + 1e-9);
            let lower = sol
                .phi()
                .iter()
                .zip(&sol.omega)
                .all(|(p, w)| *w >= g2 * phi_mu(*p, a0) - 1e-9);
            let path = write_table(&omega_table(&sol)?, &out_dir(&cfg)?, "omega.csv")?;
            emit(
                json,
                &json!({
                    "params": echo(&cfg),
                    "mesh": cfg.angular_nodes,
                    "residual_sup": sol.residual_sup,
                    "boundary_exponent": boundary_exponent_fit(&sol)?,
                    "omega_pole": sol.omega[0],
                    "upper_bound_holds": upper,
                    "lower_bound_holds": lower,
                    "newton_iterations": sol.stats.newton_iterations,
                    "csv": path,
                }),
            )?;
        }
        Command::Kernel(KernelCmd::Check { doublings }) => {
            let hp = hardy(&cfg)?;
            let g = kernel_grid()?;
            let (errors, orders) = martin_residuals(&hp, &g, *doublings)?;
            martin_field(&g, &hp).write_csv(&out_dir(&cfg)?.join("kernel_field.csv"))?;
            emit(
                json,
                &json!({
                    "params": echo(&cfg),
                    "grid": g.descriptor(),
                    "errors": errors,
                    "orders": orders,
                }),
            )?;
        }
        Command::Kernel(KernelCmd::Tails { gamma, gradient }) => {
            let hp = hardy(&cfg)?;
            let mut field = martin_field(&cfg.tail_grid()?, &hp);
            if *gradient {
                field = field.with_gradient().gradient_magnitude();
            }
            let rep = weak_tail(&field, hp.n(), *gamma)?;
            let mut t = Table::new(&["lambda", "m"]);
            for (l, m) in &rep.distribution {
                t.push(vec![sci(*l), sci(*m)]);
            }
            write_table(&t, &out_dir(&cfg)?, "tail_distribution.csv")?;
            if json {
                emit(true, &rep)?;
            } else {
                emit(
                    false,
                    &json!({
                        "gamma": rep.gamma,
                        "p_hat": rep.p_hat,
                        "lambda_lo": rep.lambda_lo,
                        "lambda_hi": rep.lambda_hi,
                        "norm": rep.norm,
                        "fit_points": rep.fit_points,
                    }),
                )?;
            }
        }
        Command::Kernel(KernelCmd::Eig { mus, trials }) => {
            let g = cfg.eig_grid()?;
            let mus = if mus.is_empty() { vec![cfg.mu] } else { mus.clone() };
            let reports = mus
                .iter()
                .map(|mu| Ok(rayleigh_lambda(&g, &HardyParams::new(cfg.n, *mu)?, *trials)))
                .collect::<Result<Vec<_>>>()?;
            if json {
                emit(true, &reports)?;
            } else {
                for r in &reports {
                    out!("mu = {:<8} lambda = {:.6e}  (trial {})", r.mu, r.lambda, r.best_trial);
                }
            }
        }
        Command::Bvp(BvpCmd::Solve { k }) => {
            let hp = hardy(&cfg)?;
            let k = k.unwrap_or(cfg.k);
            let grid = cfg.bvp_grid()?;
            let run = solve_weak(k, &hp, cfg.q, &grid).map_err(|e| e.at_stage("weak solve"))?;
            let dir = out_dir(&cfg)?;
            run.field.write_csv(&dir.join("field.csv"))?;
            let trace = ratio_trace(&run);
            let mut t = Table::new(&["r", "ratio"]);
            for (r, v) in &trace.samples {
                t.push(vec![sci(*r), sci(*v)]);
            }
            write_table(&t, &dir, "ratio_trace.csv")?;
            let (positive, dominated) = check_invariants(&run);
            emit(
                json,
                &json!({
                    "params": echo(&cfg),
                    "k": k,
                    "grid": grid.descriptor(),
                    "closure": run.closure,
                    "residual_sup": run.residual_sup,
                    "newton_iterations": run.stats.newton_iterations,
                    "ratio_limit": trace.limit,
                    "ratio_exponent": trace.exponent,
                    "ratio_pair": trace.r_pair,
                    "positive": positive,
                    "dominated": dominated,
                    "apriori": apriori_check(&run.field, &run.exponents),
                }),
            )?;
        }
        Command::Bvp(BvpCmd::StrongLimit { ladder }) => {
            let hp = hardy(&cfg)?;
            let ladder = if ladder.is_empty() { cfg.strong_ladder.clone() } else { ladder.clone() };
            let sl = strong_limit(&hp, cfg.q, &cfg.strong_grid()?, &ladder, &StrongLimitOptions::default())?;
            let mut t = Table::new(&["r", "max_relative_error", "axis_ratio"]);
            for p in &sl.report.samples {
                t.push(vec![sci(p.r), sci(p.max_relative_error), sci(p.axis_ratio)]);
            }
            write_table(&t, &out_dir(&cfg)?, "strong_profile.csv")?;
            if json {
                emit(true, &sl.report)?;
            } else {
                let r = &sl.report;
                emit(
                    false,
                    &json!({
                        "params": echo(&cfg),
                        "ladder": r.ladder,
                        "grid": r.grid,
                        "max_relative_error": r.max_relative_error,
                        "two_sided": r.two_sided,
                        "monotone": r.monotone,
                        "newton_iterations": r.newton_iterations,
                    }),
                )?;
            }
        }
        Command::Bvp(BvpCmd::Barrier {
            gamma,
            b,
            radius,
            samples,
        }) => {
            let hp = hardy(&cfg)?;
            let spec = BarrierSpec::new(&hp, *gamma, *b, *radius)?;
            let rep = search_amplitude(&spec, &hp, cfg.q, *samples)?;
            emit(json, &json!({ "params": echo(&cfg), "report": rep }))?;
        }
        Command::Capacity(CapacityCmd::Classify) => {
            emit(json, &classify_removability(&hardy(&cfg)?, cfg.q)?)?;
        }
        Command::Capacity(CapacityCmd::Sweep) => {
            capacity_table(&hardy(&cfg)?).write_to(std::io::stdout().lock())?;
        }
        Command::Suite { parallel } => {
            let mut cfg = cfg;
            cfg.parallel |= *parallel;
            cfg.output_dir = Some(out_dir(&cfg)?);
            let report = run_suite(&cfg)?;
            if json {
                emit(true, &report)?;
            } else {
                for c in &report.checks {
                    out!(
                        "[{:>2}] {} {:<58} {:>12.4e} {:<7} {:.4e}",
                        c.criterion,
                        if c.passed { "PASS" } else { "FAIL" },
                        c.name,
                        c.measured,
                        c.relation.as_str(),
                        c.tolerance
                    );
                }
                out!("total {:.1} s, {}", report.seconds, if report.passed { "all checks passed" } else { "FAILED" });
            }
            if !report.passed {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) if broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn broken_pipe(e: &Error) -> bool {
    let io = match e {
        Error::Io(io) => Some(io),
        Error::Csv(c) => match c.kind() {
            csv::ErrorKind::Io(io) => Some(io),
            _ => None,
        },
        _ => None,
    };
    io.is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
}
