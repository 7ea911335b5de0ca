use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ieq_pdmm::engine::{Engine, Mode, ScheduleConfig};
use ieq_pdmm::oracle::{kkt_check, reference_solution, KktReport};
use ieq_pdmm::problem::{read_problem, serialize_problem, SolutionFile};
use ieq_pdmm::scenarios::{gen_geometric, gen_localisation, gen_toy};
use ieq_pdmm::{Error, ProblemGraph, RunOutcome};
use nalgebra::DVector;

const EXIT_USAGE: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "ieq-pdmm",
    version,
    about = "Distributed solver for inequality-constrained problems over graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a seeded scenario as a problem file.
    Generate(GenerateArgs),
    /// Run the iteration on a problem file.
    Solve(SolveArgs),
    /// Run the iteration and check the result against the KKT conditions.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Scenario {
    Toy,
    Geometric,
    Localisation,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    kind: Scenario,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Node count for `geometric`.
    #[arg(long, default_value_t = 50)]
    n: usize,
    /// Sensor count for `localisation`.
    #[arg(long, default_value_t = 4)]
    sensors: usize,
    /// Output file; stdout if omitted. For `localisation` this names the
    /// Chebyshev file `<stem>.chebyshev.toml` and the rectangle files
    /// `<stem>.xmin.toml`, `<stem>.xmax.toml`, `<stem>.ymin.toml`, `<stem>.ymax.toml`.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Sync,
    Stoch,
}

#[derive(Args, Debug)]
struct EngineArgs {
    #[arg(long, value_enum, default_value_t = ModeArg::Sync)]
    mode: ModeArg,
    /// Averaging weight in (0, 1]; 1 is the plain iteration.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Penalty parameter.
    #[arg(long, default_value_t = 0.5)]
    c: f64,
    /// Iteration budget.
    #[arg(long, default_value_t = 5000)]
    iters: usize,
    /// Schedule seed for activations and losses.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    loss_rate: f64,
    #[arg(long, default_value_t = 1.0)]
    active_prob: f64,
    /// Primal tolerance (distance to the reference, or per-iteration movement
    /// without one).
    #[arg(long)]
    tol: Option<f64>,
    /// Fixed-point residual tolerance for averaged runs.
    #[arg(long)]
    tol_residual: Option<f64>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Start from the `z` stored in a solution file instead of zeros.
    #[arg(long)]
    init_z: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SolveArgs {
    problem: PathBuf,
    #[command(flatten)]
    engine: EngineArgs,
    /// Compute a reference solution and stop on distance to it.
    #[arg(long)]
    oracle: bool,
    /// Write the per-iteration trace as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    trace_every: usize,
    /// Write the final primal iterate, recovered multipliers and `z`.
    #[arg(long)]
    solution_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    problem: PathBuf,
    /// Check this solution file instead of running the iteration.
    #[arg(long)]
    solution: Option<PathBuf>,
    #[command(flatten)]
    engine: EngineArgs,
    /// Bound on every KKT residual.
    #[arg(long, default_value_t = 1e-6)]
    kkt_tol: f64,
}

enum Failure {
    Usage(String),
    Numerical(String),
    NotConverged(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::SingularSystem { .. }
            | Error::Infeasible
            | Error::Unbounded
            | Error::TooManyRows { .. }
            | Error::OraclePrecondition(_)
            | Error::EmptyIntersection => Failure::Numerical(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Generate(args) => generate(&args),
        Command::Solve(args) => solve(&args),
        Command::Verify(args) => verify(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(EXIT_NUMERICAL)
        }
        Err(Failure::NotConverged(msg)) => {
            eprintln!("not converged: {msg}");
            ExitCode::from(EXIT_NOT_CONVERGED)
        }
    }
}

fn emit(graph: &ProblemGraph, out: Option<&Path>) -> Result<(), Failure> {
    let text = serialize_problem(graph);
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}.toml"))
}

fn generate(args: &GenerateArgs) -> Result<(), Failure> {
    match args.kind {
        Scenario::Toy => emit(&gen_toy(args.seed), args.output.as_deref()),
        Scenario::Geometric => emit(&gen_geometric(args.n, args.seed)?.problem, args.output.as_deref()),
        Scenario::Localisation => {
            let Some(out) = args.output.as_deref() else {
                return Err(Failure::Usage(
                    "localisation writes several files; pass -o <stem>".into(),
                ));
            };
            let sc = gen_localisation(args.sensors, args.seed)?;
            let cheb = with_suffix(out, "chebyshev");
            emit(&sc.chebyshev, Some(&cheb))?;
            println!("{}", cheb.display());
            for (lp, name) in sc.rectangles.iter().zip(["xmin", "xmax", "ymin", "ymax"]) {
                let path = with_suffix(out, name);
                emit(lp, Some(&path))?;
                println!("{}", path.display());
            }
            Ok(())
        }
    }
}

fn config(args: &EngineArgs, trace_every: usize, tol: f64, tol_residual: f64) -> Result<ScheduleConfig, Failure> {
    let config = ScheduleConfig {
        mode: match args.mode {
            ModeArg::Sync => Mode::Synchronous,
            ModeArg::Stoch => Mode::Stochastic,
        },
        alpha: args.alpha,
        c: args.c,
        node_active_prob: args.active_prob,
        loss_rate: args.loss_rate,
        seed: args.seed,
        max_iters: args.iters,
        tol_primal: args.tol.unwrap_or(tol),
        tol_residual: args.tol_residual.unwrap_or(tol_residual),
        trace_every,
        threads: args.threads,
    };
    config.validate()?;
    Ok(config)
}

fn iterate(
    problem: &ProblemGraph,
    config: &ScheduleConfig,
    init_z: Option<&Path>,
    reference: Option<&[DVector<f64>]>,
) -> Result<RunOutcome, Failure> {
    let engine = Engine::new(problem, config.c)?.with_threads(config.threads)?;
    let z0 = match init_z {
        Some(path) => SolutionFile::read(path)?
            .z
            .ok_or_else(|| Failure::Usage(format!("{} has no z entry", path.display())))?,
        None => vec![0.0; engine.num_slots()],
    };
    Ok(engine.run_from(z0, config, reference)?)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.3e}"))
}

fn solve(args: &SolveArgs) -> Result<(), Failure> {
    let problem = read_problem(&args.problem)?;
    let config = config(&args.engine, args.trace_every, 1e-6, 1e-8)?;
    let reference = if args.oracle {
        Some(reference_solution(&problem)?)
    } else {
        None
    };

    let start = Instant::now();
    let out = iterate(&problem, &config, args.engine.init_z.as_deref(), reference.as_deref())?;
    let elapsed = start.elapsed();

    if let Some(path) = &args.trace {
        out.trace.write_csv(BufWriter::new(File::create(path)?))?;
    }
    if let Some(path) = &args.solution_out {
        let sol = SolutionFile {
            z: Some(out.z.clone()),
            ..SolutionFile::new(&out.x, Some(&out.lambda))
        };
        sol.write(path)?;
    }
    let last = out.trace.last().expect("a run records at least one row");
    println!(
        "converged={} iterations={} primal_error={} residual={:.3e} max_violation={:.3e} objective={:.9} time={:.3}s",
        out.converged,
        out.iterations,
        fmt_opt(last.primal_error),
        last.fixed_point_residual,
        last.max_violation,
        last.objective,
        elapsed.as_secs_f64(),
    );
    if out.converged {
        Ok(())
    } else {
        Err(Failure::NotConverged(format!(
            "iteration budget of {} spent",
            config.max_iters
        )))
    }
}

fn print_report(r: &KktReport) {
    println!("primal_eq_residual    {:.3e}", r.primal_eq_residual);
    println!("primal_ineq_violation {:.3e}", r.primal_ineq_violation);
    println!("dual_negativity       {:.3e}", r.dual_negativity);
    println!("complementarity       {:.3e}", r.complementarity);
    println!("stationarity          {:.3e}", r.stationarity);
}

fn verify(args: &VerifyArgs) -> Result<(), Failure> {
    let problem = read_problem(&args.problem)?;

    // an oracle verdict of infeasible or unbounded settles the question;
    // problems too large for the oracle are checked on KKT alone
    let reference = match reference_solution(&problem) {
        Ok(x) => Some(x),
        Err(e @ (Error::Infeasible | Error::Unbounded | Error::EmptyIntersection)) => {
            println!("oracle: {e}");
            return Err(e.into());
        }
        Err(e) => {
            println!("oracle: skipped ({e})");
            None
        }
    };

    let (x, lambda, converged) = match &args.solution {
        Some(path) => {
            let sol = SolutionFile::read(path)?;
            let lambda = sol
                .lambda
                .clone()
                .ok_or_else(|| Failure::Usage(format!("{} has no lambda entry", path.display())))?;
            (sol.primal(), lambda, true)
        }
        None => {
            let config = config(&args.engine, 1, 1e-10, 1e-10)?;
            let out = iterate(&problem, &config, args.engine.init_z.as_deref(), None)?;
            println!("engine: converged={} iterations={}", out.converged, out.iterations);
            (out.x, out.lambda, out.converged)
        }
    };

    let report = kkt_check(&problem, &x, &lambda)?;
    print_report(&report);
    if let Some(reference) = &reference {
        let err = x
            .iter()
            .zip(reference)
            .map(|(a, b)| (a - b).norm_squared())
            .sum::<f64>()
            .sqrt();
        println!("distance_to_oracle    {err:.3e}");
    }
    if !converged {
        return Err(Failure::NotConverged(
            "iteration budget spent before the stopping rule fired".into(),
        ));
    }
    if report.within(args.kkt_tol) {
        println!("verified: all residuals <= {:.1e}", args.kkt_tol);
        Ok(())
    } else {
        Err(Failure::Numerical(format!(
            "largest KKT residual {:.3e} exceeds {:.1e}",
            report.max(),
            args.kkt_tol
        )))
    }
}
