use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use simproj::bench::{run_bench, run_check, write_bench_csv, Algorithm, Family};
use simproj::instances::{gen_example1, gen_example2, gen_example3, read_returns_csv, Seed};
use simproj::jacobian::DEFAULT_ACTIVE_TOL;
use simproj::{compute_jacobian, lrsa_project, ssn_project, Instance64, SolveStatus, SolverConfig};

/// Largest oracle deviation `check` tolerates before exiting nonzero.
const CHECK_TOL: f64 = 1e-6;

#[derive(Parser)]
#[command(
    name = "simproj",
    version,
    about = "Projection onto the simplex cut by one halfspace"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance and write it as JSON.
    Gen(GenArgs),
    /// Project one instance and write the solve report as JSON.
    Project(ProjectArgs),
    /// Time both solvers over generated instances and write a CSV table.
    Bench(BenchArgs),
    /// Solve an instance, then export the generalized Jacobian or apply it to a vector.
    Jacobian(JacobianArgs),
    /// Compare both solvers with the brute-force oracle on small random instances.
    Check(CheckArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum GenFamily {
    Ex1,
    Ex2,
    /// Portfolio instance built from a returns CSV.
    Ex3,
}

#[derive(Clone, Copy, ValueEnum)]
enum BenchFamily {
    Ex1,
    Ex2,
}

impl From<BenchFamily> for Family {
    fn from(f: BenchFamily) -> Self {
        match f {
            BenchFamily::Ex1 => Family::Ex1,
            BenchFamily::Ex2 => Family::Ex2,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Lrsa,
    Ssn,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Lrsa => Algorithm::Lrsa,
            AlgorithmArg::Ssn => Algorithm::Ssn,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum JacobianMode {
    Dense,
    Apply,
}

#[derive(Args)]
struct GenArgs {
    family: GenFamily,
    /// Dimension; for ex3 it defaults to the number of CSV columns and must match it.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Returns CSV (one row per observation, one column per asset); ex3 only.
    #[arg(long)]
    returns: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ProjectArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "lrsa")]
    algorithm: AlgorithmArg,
    #[arg(long, default_value_t = 1e-7)]
    epsilon: f64,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    #[arg(long)]
    out: PathBuf,
    /// Also write the Newton trace (ssn only).
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    family: BenchFamily,
    /// Comma-separated sizes; scientific notation such as 1e5 is accepted.
    #[arg(long, value_delimiter = ',', value_parser = parse_size, required = true)]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "lrsa,ssn")]
    algorithms: Vec<AlgorithmArg>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-7)]
    epsilon: f64,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct JacobianArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    mode: JacobianMode,
    /// JSON array of n numbers to multiply; apply mode only.
    #[arg(long)]
    vector: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-7)]
    epsilon: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long, default_value_t = 8)]
    n_max: usize,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-7)]
    epsilon: f64,
}

fn parse_size(s: &str) -> Result<usize, String> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| format!("`{s}` is not a number"))?;
    if !(1.0..=1e10).contains(&v) || v.fract() != 0.0 {
        return Err(format!("`{s}` is not a positive integer size"));
    }
    Ok(v as usize)
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn read_instance(path: &Path) -> Result<Instance64> {
    Instance64::read_json(path).with_context(|| format!("reading instance {}", path.display()))
}

fn config(epsilon: f64, max_iter: usize) -> Result<SolverConfig> {
    let cfg = SolverConfig::default()
        .with_epsilon(epsilon)
        .with_max_iter(max_iter);
    cfg.validate()?;
    Ok(cfg)
}

fn infeasible(inst: &Instance64) -> ExitCode {
    eprintln!(
        "error: instance is infeasible: min(a) = {} exceeds b = {}",
        inst.min_a(),
        inst.b()
    );
    ExitCode::from(2)
}

fn gen(args: GenArgs) -> Result<ExitCode> {
    let seed = Seed(args.seed);
    let inst: Instance64 = match args.family {
        GenFamily::Ex1 | GenFamily::Ex2 => {
            if args.returns.is_some() {
                bail!("--returns only applies to ex3");
            }
            let n = args.n.context("--n is required for ex1 and ex2")?;
            if matches!(args.family, GenFamily::Ex1) {
                gen_example1(n, seed)?
            } else {
                gen_example2(n, seed)?
            }
        }
        GenFamily::Ex3 => {
            let path = args.returns.context("ex3 needs --returns <csv>")?;
            let tbl = read_returns_csv(&path)?;
            if let Some(n) = args.n {
                if n != tbl.n() {
                    bail!(
                        "--n {n} does not match the {} assets in {}",
                        tbl.n(),
                        path.display()
                    );
                }
            }
            gen_example3(&tbl, seed)?
        }
    };
    inst.write_json(&args.out)?;
    Ok(ExitCode::SUCCESS)
}

fn project(args: ProjectArgs) -> Result<ExitCode> {
    let inst = read_instance(&args.input)?;
    let cfg = config(args.epsilon, args.max_iter)?;
    if args.trace.is_some() && matches!(args.algorithm, AlgorithmArg::Lrsa) {
        bail!("--trace is only available with --algorithm ssn");
    }
    let report = match args.algorithm {
        AlgorithmArg::Lrsa => lrsa_project(&inst, &cfg)?,
        AlgorithmArg::Ssn => {
            let (report, trace) = ssn_project(&inst, &cfg)?;
            if let Some(path) = &args.trace {
                write_file(path, (trace.to_json()? + "\n").as_bytes())?;
            }
            report
        }
    };
    write_file(&args.out, (report.to_json()? + "\n").as_bytes())?;
    Ok(match report.status {
        SolveStatus::Converged | SolveStatus::ConstraintInactive => ExitCode::SUCCESS,
        SolveStatus::Infeasible => infeasible(&inst),
        SolveStatus::MaxIterExceeded => {
            eprintln!(
                "error: no convergence within {} iterations (residual {:e})",
                cfg.max_iter, report.residual
            );
            ExitCode::FAILURE
        }
    })
}

fn bench(args: BenchArgs) -> Result<ExitCode> {
    let cfg = config(args.epsilon, SolverConfig::default().max_iter)?;
    let algorithms: Vec<Algorithm> = args.algorithms.iter().map(|&a| a.into()).collect();
    let rows = run_bench(
        args.family.into(),
        &args.sizes,
        args.reps,
        &algorithms,
        Seed(args.seed),
        &cfg,
    )?;
    let mut buf = Vec::new();
    write_bench_csv(&rows, &mut buf)?;
    match &args.out {
        Some(path) => write_file(path, &buf)?,
        None => std::io::stdout().write_all(&buf)?,
    }
    for row in rows.iter().filter(|r| r.failures > 0) {
        eprintln!(
            "warning: {} failed on {} of {} instances at n = {}",
            row.algorithm, row.failures, args.reps, row.n
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn jacobian(args: JacobianArgs) -> Result<ExitCode> {
    let inst = read_instance(&args.input)?;
    let vector = match (args.mode, &args.vector) {
        (JacobianMode::Apply, Some(path)) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let d: Vec<f64> = serde_json::from_str(&text)
                .with_context(|| format!("parsing vector {}", path.display()))?;
            Some(d)
        }
        (JacobianMode::Apply, None) => bail!("apply mode needs --vector <json>"),
        (JacobianMode::Dense, Some(_)) => bail!("--vector only applies to apply mode"),
        (JacobianMode::Dense, None) => None,
    };
    let cfg = config(args.epsilon, SolverConfig::default().max_iter)?;
    let report = lrsa_project(&inst, &cfg)?;
    match report.status {
        SolveStatus::Infeasible => return Ok(infeasible(&inst)),
        SolveStatus::MaxIterExceeded => bail!(
            "projection did not converge (residual {:e})",
            report.residual
        ),
        SolveStatus::Converged | SolveStatus::ConstraintInactive => {}
    }
    let op = compute_jacobian(&inst, &report.x, DEFAULT_ACTIVE_TOL)?;
    let out = match vector {
        None => op.to_dense_text()?,
        Some(d) => serde_json::to_string(&op.apply(&d)?)? + "\n",
    };
    write_file(&args.out, out.as_bytes())?;
    Ok(ExitCode::SUCCESS)
}

fn check(args: CheckArgs) -> Result<ExitCode> {
    let cfg = config(args.epsilon, SolverConfig::default().max_iter)?;
    let report = run_check(args.n_max, args.trials, Seed(args.seed), &cfg)?;
    println!("trials: {}", report.trials);
    for (alg, dev) in &report.max_deviation {
        println!("{alg}: max deviation {dev:e}");
    }
    println!("failures: {}", report.failures);
    if report.passes(CHECK_TOL) {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("error: deviation above {CHECK_TOL:e} or failed solves");
        Ok(ExitCode::FAILURE)
    }
}

fn main() -> ExitCode {
    // Usage errors exit 1 rather than clap's 2, which is reserved for infeasible instances.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Project(a) => project(a),
        Command::Bench(a) => bench(a),
        Command::Jacobian(a) => jacobian(a),
        Command::Check(a) => check(a),
    };
    outcome.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::FAILURE
    })
}
