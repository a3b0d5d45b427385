//! `semilinear` command line: solve, rollout, check, compare.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;

use crate::algorithms::{solve, write_trace_csv, AsyncSchedule, ScheduleKind, SolverConfig, DEFAULT_LOOKAHEAD};
use crate::error::{Error, Result};
use crate::io::{self, ConfigFile, LoadedProblem, Problem, ResultFile, RolloutSection, SolverSection};
use crate::markovjump::{jump_rollout, jump_rollout_horizon, solve_jump};
use crate::oracle::{check_assumption_d, finite_horizon_value, FiniteHorizonSpec, OracleTarget};
use crate::stochastic::{
    certainty_equivalent, expected_policy, monte_carlo_rollout, rollout_horizon, solve_stochastic, RolloutStats,
};
use crate::types::{Engine, PolicyControl, SolveReport};

/// Environment variable holding the default config file path.
pub const CONFIG_ENV: &str = "SEMILINEAR_CONFIG";

const DEFAULT_PATHS: usize = 10_000;
const DEFAULT_STALENESS: usize = 1;

#[derive(Parser, Debug)]
#[command(name = "semilinear", version, about = "Positive semilinear dynamic programming solver")]
struct Cli {
    /// Config file with default [solver] and [rollout] settings.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve a problem file and write a result file.
    Solve {
        problem: PathBuf,
        #[command(flatten)]
        solver: SolverFlags,
        /// Result file; defaults to `<problem>.result.toml`.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Write the iterate trace as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Seed of the asynchronous engine's schedule.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Simulate the policy stored in a result file.
    Rollout {
        result: PathBuf,
        #[arg(long)]
        paths: Option<usize>,
        /// Stages per path; chosen from the tail bound when absent.
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Statistics CSV; stdout when absent.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Brute-force finite-horizon values and the positivity assumption.
    Check {
        problem: PathBuf,
        /// Number of stages; the state dimension when absent.
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Run every engine and report pairwise deviations of c*.
    Compare {
        problem: PathBuf,
        #[command(flatten)]
        solver: SolverFlags,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Args, Debug, Clone, Default)]
struct SolverFlags {
    #[arg(long, value_parser = ["vi", "async-vi", "pi", "opi", "lp"])]
    engine: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long = "max-iters")]
    max_iters: Option<usize>,
}

impl SolverFlags {
    fn section(&self) -> SolverSection {
        SolverSection {
            engine: self.engine.clone(),
            tolerance: self.tol,
            max_iterations: self.max_iters,
            ..Default::default()
        }
    }
}

/// Runs the CLI on the process arguments and returns the exit code.
pub fn main() -> i32 {
    run(std::env::args_os())
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    let config = match &cli.config {
        Some(p) => io::load_config(p)?,
        None => ConfigFile::default(),
    };
    match cli.command {
        Command::Solve { problem, solver, output, trace, seed } => {
            let lp = io::load_problem(&problem)?;
            let section = solver.section().over(&lp.solver.over(&config.solver));
            let engine = engine_of(&section)?;
            let report = run_engine(&lp.problem, engine, &solver_config(&section, seed)?)?;
            let out = output.unwrap_or_else(|| default_result_path(&problem));
            ResultFile::new(&report, &lp)?.save(&out)?;
            if let Some(t) = trace {
                let f = create(&t)?;
                write_trace_csv(&report, BufWriter::new(f)).map_err(|source| io_err(&t, source))?;
            }
            print_report(&report);
            println!("result: {}", out.display());
            Ok(report_code(&report))
        }
        Command::Rollout { result, paths, horizon, seed, output } => {
            let res = ResultFile::load(&result)?;
            let lp = res.problem()?;
            let flags = RolloutSection { paths, horizon, seed, ..Default::default() };
            let settings = flags.over(&lp.rollout.over(&config.rollout));
            let (stats, predicted) = rollout(&res, &lp, &settings)?;
            match output {
                Some(p) => {
                    let f = create(&p)?;
                    io::write_stats_csv(&stats, predicted, BufWriter::new(f)).map_err(|source| io_err(&p, source))?;
                }
                None => io::write_stats_csv(&stats, predicted, std::io::stdout().lock())
                    .map_err(|source| io_err(Path::new("<stdout>"), source))?,
            }
            Ok(0)
        }
        Command::Check { problem, horizon } => {
            let lp = io::load_problem(&problem)?;
            check(&lp, horizon)
        }
        Command::Compare { problem, solver, seed } => {
            let lp = io::load_problem(&problem)?;
            let section = solver.section().over(&lp.solver.over(&config.solver));
            compare(&lp, &solver_config(&section, seed)?)
        }
    }
}

fn default_result_path(problem: &Path) -> PathBuf {
    let stem = problem.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "problem".into());
    problem.with_file_name(format!("{stem}.result.toml"))
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|source| io_err(path, source))
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), source }
}

fn engine_of(section: &SolverSection) -> Result<Engine> {
    match &section.engine {
        None => Ok(Engine::PolicyIteration),
        Some(s) => Engine::parse(s).ok_or_else(|| Error::Config(format!("unknown engine `{s}`"))),
    }
}

fn solver_config(section: &SolverSection, seed: Option<u64>) -> Result<SolverConfig> {
    let mut cfg = SolverConfig::default();
    if let Some(t) = section.tolerance {
        cfg.tolerance = t;
    }
    if let Some(k) = section.max_iterations {
        cfg.max_iterations = k;
    }
    cfg.lookahead = section.lookahead.clone().unwrap_or_else(|| vec![DEFAULT_LOOKAHEAD]);
    let staleness = section.staleness.unwrap_or(DEFAULT_STALENESS);
    cfg.schedule = AsyncSchedule::new(ScheduleKind::Random {
        seed: seed.unwrap_or(0),
        update_prob: 0.5,
        staleness,
        window: 2 * (staleness + 1),
    });
    Ok(cfg)
}

fn run_engine(problem: &Problem, engine: Engine, cfg: &SolverConfig) -> Result<SolveReport> {
    match problem {
        Problem::Deterministic(m) => solve(m, engine, cfg),
        Problem::Stochastic(m) => solve_stochastic(m, engine, cfg),
        Problem::Jump(p) => Ok(solve_jump(p, engine, cfg)?.report),
    }
}

fn report_code(report: &SolveReport) -> i32 {
    if !report.converged {
        3
    } else if !report.stable {
        4
    } else {
        0
    }
}

fn print_report(r: &SolveReport) {
    println!("engine: {}", r.engine);
    println!("converged: {} after {} iterations", r.converged, r.iterations);
    println!("residual: {:e}", r.residual);
    println!("spectral radius: {}", r.spectral_radius);
    println!("c*: {}", r.c_star);
    for d in &r.diagnostics {
        println!("note: {d}");
    }
}

fn start_state(settings: &RolloutSection, n: usize) -> Result<DVector<f64>> {
    let x0 = match &settings.x0 {
        Some(v) => DVector::from_column_slice(v),
        None => DVector::from_element(n, 1.0),
    };
    if x0.len() != n {
        return Err(Error::dims("rollout.x0", n, x0.len()));
    }
    if x0.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::invalid("rollout.x0", "entries must be finite and >= 0"));
    }
    Ok(x0)
}

/// Rollout statistics and the predicted cost `c*'x0`.
fn rollout(res: &ResultFile, lp: &LoadedProblem, settings: &RolloutSection) -> Result<(RolloutStats, f64)> {
    let n = lp.problem.state_dim();
    let x0 = start_state(settings, n)?;
    let seed = settings.seed.unwrap_or(0);
    let paths = settings.paths.unwrap_or(DEFAULT_PATHS);
    let policy = res.policy()?;
    let c_star = DVector::from_column_slice(&res.c_star);
    match &lp.problem {
        Problem::Stochastic(m) => {
            let horizon = match settings.horizon {
                Some(h) => h,
                None => rollout_horizon(&expected_policy(m, &policy.control)?, m.alpha(), &x0)?,
            };
            let stats = monte_carlo_rollout(m, &policy.control, &x0, horizon, paths, seed)?;
            Ok((stats, c_star.dot(&x0)))
        }
        Problem::Jump(p) => {
            let PolicyControl::Modes(controls) = &policy.control else {
                return Err(Error::invalid("policy.control", "jump results need one control per mode"));
            };
            let theta0 = settings.theta0.unwrap_or(0);
            if theta0 >= p.modes() {
                return Err(Error::invalid("rollout.theta0", format!("{theta0} is not a mode index")));
            }
            let horizon = match settings.horizon {
                Some(h) => h,
                None => jump_rollout_horizon(p, controls, &x0, theta0)?,
            };
            let stats = jump_rollout(p, controls, &x0, theta0, horizon, paths, seed)?;
            Ok((stats, c_star.rows(theta0 * n, n).dot(&x0)))
        }
        Problem::Deterministic(m) => {
            use crate::SemilinearModel;
            let alpha = m.alpha();
            let horizon = match settings.horizon {
                Some(h) => h,
                None => rollout_horizon(&policy, alpha, &x0)?,
            };
            // deterministic: one path suffices
            let mut x = x0.clone();
            let mut discount = 1.0;
            let mut total = 0.0;
            for _ in 0..horizon {
                total += discount * policy.q().dot(&x);
                x = policy.a() * &x;
                discount *= alpha;
            }
            let stats = RolloutStats { mean_cost: total, std_error: 0.0, num_paths: 1, horizon, seed, rng: "none" };
            Ok((stats, c_star.dot(&x0)))
        }
    }
}

fn check(lp: &LoadedProblem, horizon: Option<usize>) -> Result<i32> {
    let ce;
    let target = match &lp.problem {
        Problem::Deterministic(m) => OracleTarget::from(m),
        Problem::Stochastic(m) => {
            ce = certainty_equivalent(m)?;
            OracleTarget::from(&ce)
        }
        Problem::Jump(p) => OracleTarget::from(p),
    };
    let dim = match &lp.problem {
        Problem::Jump(p) => p.modes() * p.state_dim(),
        other => other.state_dim(),
    };
    let spec = FiniteHorizonSpec::new(target, horizon.unwrap_or(dim));
    let value = finite_horizon_value(&spec)?;
    let positive = check_assumption_d(&spec)?;
    println!("stages: {}", spec.horizon);
    println!("combinations per stage: {}", spec.combinations());
    println!("G^N(0): {value}");
    println!("N-stage cost positive from every basis state: {positive}");
    Ok(if positive { 0 } else { 5 })
}

fn compare(lp: &LoadedProblem, cfg: &SolverConfig) -> Result<i32> {
    let mut reports = Vec::new();
    for engine in Engine::ALL {
        let r = run_engine(&lp.problem, engine, cfg)?;
        println!("{:<9} converged={} iterations={} residual={:e} c*={}", engine.name(), r.converged, r.iterations, r.residual, r.c_star);
        reports.push(r);
    }
    let mut worst: f64 = 0.0;
    for i in 0..reports.len() {
        for j in i + 1..reports.len() {
            let d = reports[i].c_star.max_abs_diff(&reports[j].c_star);
            println!("{} vs {}: {:e}", reports[i].engine, reports[j].engine, d);
            worst = worst.max(d);
        }
    }
    println!("max deviation: {worst:e}");
    let _ = std::io::stdout().flush();
    Ok(reports.iter().map(report_code).max().unwrap_or(0))
}
