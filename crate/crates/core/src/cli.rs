//! Command-line front end.
//!
//! Exit status: 0 on success, 2 on usage errors, 1 when a computation
//! fails. Data goes out as CSV (header row, `.` decimals, LF endings) and
//! certificates as JSON.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::error::Error;
use crate::eulerlagrange::{classical_residual, el_report, ELReport};
use crate::fracops::{
    caputo_left, gamma, left_frac_integral, rl_left_derivative, rl_right_derivative,
    right_frac_integral,
};
use crate::functional::{evaluate_fields, evaluate_j};
use crate::grid::{fmt_num, SampledPath};
use crate::ibp::{catalog_grid, rows_to_csv, run_catalog};
use crate::problem::{
    catalog, is_builtin_example, linear_interpolant, load_problem, make_reference,
    make_trajectory, Mode, ProblemSpec, Trajectory, CATALOG_NAMES,
};
use crate::solver::{minimize, Init, Method, SolverConfig};
use crate::sufficiency::{certify, Conclusion, DEFAULT_INFLATION, DEFAULT_TRIALS};

/// Resolutions visited by `--sweep`.
pub const SWEEP: [usize; 4] = [64, 128, 256, 512];

const DEFAULT_N: usize = 128;
const DEFAULT_ALPHA: f64 = 0.5;

#[derive(Debug, Parser)]
#[command(name = "fracvar", version, about = "Delayed fractional variational problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Apply a fractional operator to a power function on [0, 2] and compare
    /// with its closed form.
    FracOp(FracOpArgs),
    /// Check the integration-by-parts identities on the test catalog.
    VerifyIbp(IbpArgs),
    /// Evaluate the cost of a trajectory.
    Eval(EvalArgs),
    /// Evaluate the optimality-condition residuals of a trajectory.
    Residual(ResidualArgs),
    /// Minimise the cost over the free nodal values.
    Solve(SolveArgs),
    /// Check the convexity hypotheses of the sufficiency theorem.
    Suffcheck(SuffArgs),
    /// Run eval, residual and suffcheck on the built-in example and its
    /// analytic minimizer.
    Example(ExampleArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Operator {
    Caputo,
    RlLeft,
    IntegralLeft,
    RlRight,
    IntegralRight,
}

#[derive(Debug, Args)]
struct FracOpArgs {
    #[arg(value_enum)]
    operator: Operator,
    /// Order of the operator.
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = 256)]
    n: usize,
    /// Exponent p of the test function (x^p for left operators, (2-x)^p for
    /// right ones); defaults to alpha + 1.
    #[arg(long)]
    power: Option<f64>,
    #[arg(long)]
    sweep: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct IbpArgs {
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    /// Order of the fractional integral identity.
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    beta: f64,
    #[arg(long, default_value_t = 256)]
    n: usize,
    #[arg(long)]
    sweep: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ProblemArgs {
    /// A `.fvp` file or a built-in name (example, quadratic, coupled, smooth).
    problem: String,
    /// Number of steps on [a, b].
    #[arg(long)]
    n: Option<usize>,
    /// Fractional order for built-in problems.
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Debug, Args)]
struct TrajectoryArg {
    /// CSV with columns x,y over every grid node. Defaults to the analytic
    /// minimizer for the example and to the straight line otherwise.
    #[arg(long)]
    trajectory: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    traj: TrajectoryArg,
    #[arg(long)]
    sweep: bool,
    /// Where to write the sampled fields (or the sweep table).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ResidualArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    traj: TrajectoryArg,
    /// Use the classical conditions (v = y', no fractional terms).
    #[arg(long)]
    classical: bool,
    #[arg(long)]
    sweep: bool,
    /// Where to write the per-node residuals (or the sweep table).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Cg,
    Gd,
    Nm,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum InitArg {
    Linear,
    Zero,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, value_enum, default_value_t = MethodArg::Cg)]
    method: MethodArg,
    #[arg(long, value_enum, default_value_t = InitArg::Linear)]
    init: InitArg,
    #[arg(long, default_value_t = 20_000)]
    max_iters: usize,
    /// Directory receiving history.csv and trajectory.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SamplingArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    trials: usize,
    #[arg(long, default_value_t = DEFAULT_INFLATION)]
    inflation: f64,
}

#[derive(Debug, Args)]
struct SuffArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    traj: TrajectoryArg,
    #[command(flatten)]
    sampling: SamplingArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExampleArgs {
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = 256)]
    n: usize,
    #[command(flatten)]
    sampling: SamplingArgs,
    /// Directory receiving fields.csv, residual.csv and certificate.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Error)]
enum Failure {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Compute(#[from] Error),
    #[error("{path}: {message}")]
    File { path: PathBuf, message: String },
}

type Outcome<T> = std::result::Result<T, Failure>;

fn usage<T>(msg: impl Into<String>) -> Outcome<T> {
    Err(Failure::Usage(msg.into()))
}

fn check_n(n: usize) -> Outcome<()> {
    if n < 2 {
        return usage(format!("--n must be at least 2, got {n}"));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Outcome<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return usage(format!("--alpha must lie in (0, 1), got {alpha}"));
    }
    Ok(())
}

fn check_problem(p: &ProblemArgs) -> Outcome<()> {
    if let Some(n) = p.n {
        check_n(n)?;
    }
    if let Some(a) = p.alpha {
        check_alpha(a)?;
        if !CATALOG_NAMES.contains(&p.problem.as_str()) {
            return usage("--alpha applies to built-in problems only");
        }
    }
    Ok(())
}

fn check_sampling(s: &SamplingArgs) -> Outcome<()> {
    if s.trials == 0 {
        return usage("--trials must be at least 1");
    }
    if !(s.inflation >= 1.0 && s.inflation.is_finite()) {
        return usage(format!("--inflation must be at least 1, got {}", s.inflation));
    }
    Ok(())
}

fn validate(cmd: &Command) -> Outcome<()> {
    match cmd {
        Command::FracOp(a) => {
            check_n(a.n)?;
            if !(a.alpha > 0.0 && a.alpha.is_finite()) {
                return usage(format!("--alpha must be positive, got {}", a.alpha));
            }
            if matches!(a.operator, Operator::Caputo | Operator::RlLeft | Operator::RlRight) {
                check_alpha(a.alpha)?;
            }
            if let Some(p) = a.power {
                if !(p >= 0.0 && p.is_finite()) {
                    return usage(format!("--power must be non-negative, got {p}"));
                }
            }
        }
        Command::VerifyIbp(a) => {
            check_n(a.n)?;
            check_alpha(a.alpha)?;
            if !(a.beta > 0.0 && a.beta.is_finite()) {
                return usage(format!("--beta must be positive, got {}", a.beta));
            }
        }
        Command::Eval(a) => {
            check_problem(&a.problem)?;
            if a.sweep && a.traj.trajectory.is_some() {
                return usage("--sweep cannot be combined with --trajectory");
            }
        }
        Command::Residual(a) => {
            check_problem(&a.problem)?;
            if a.sweep && a.traj.trajectory.is_some() {
                return usage("--sweep cannot be combined with --trajectory");
            }
        }
        Command::Solve(a) => {
            check_problem(&a.problem)?;
            if a.max_iters == 0 {
                return usage("--max-iters must be at least 1");
            }
        }
        Command::Suffcheck(a) => {
            check_problem(&a.problem)?;
            check_sampling(&a.sampling)?;
        }
        Command::Example(a) => {
            check_n(a.n)?;
            check_alpha(a.alpha)?;
            check_sampling(&a.sampling)?;
        }
    }
    Ok(())
}

/// Runs the command line `argv` (program name first) against the process's
/// stdout and stderr and returns the exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// [`run`] with explicit output streams.
pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let result = validate(&cli.command).and_then(|()| dispatch(cli.command, out));
    match result {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(err, "error: {f}");
            match f {
                Failure::Usage(_) => 2,
                Failure::Compute(_) | Failure::File { .. } => 1,
            }
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Outcome<()> {
    match cmd {
        Command::FracOp(a) => frac_op(&a, out),
        Command::VerifyIbp(a) => verify_ibp(&a, out),
        Command::Eval(a) => eval(&a, out),
        Command::Residual(a) => residual(&a, out),
        Command::Solve(a) => solve(&a, out),
        Command::Suffcheck(a) => suffcheck(&a, out),
        Command::Example(a) => example(&a, out),
    }
}

fn io_fail(path: &Path, e: std::io::Error) -> Failure {
    Failure::File {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn write_file(path: &Path, contents: &str) -> Outcome<()> {
    std::fs::write(path, contents).map_err(|e| io_fail(path, e))
}

fn emit(out: &mut dyn Write, text: &str) -> Outcome<()> {
    out.write_all(text.as_bytes())
        .map_err(|e| Failure::Compute(e.into()))
}

/// Writes `text` to `path` when given, otherwise to `out`.
fn emit_to(out: &mut dyn Write, path: Option<&Path>, text: &str) -> Outcome<()> {
    match path {
        Some(p) => write_file(p, text),
        None => emit(out, text),
    }
}

fn in_dir(dir: &Path, name: &str) -> Outcome<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| io_fail(dir, e))?;
    Ok(dir.join(name))
}

fn load(p: &ProblemArgs) -> Outcome<ProblemSpec> {
    if CATALOG_NAMES.contains(&p.problem.as_str()) {
        let alpha = p.alpha.unwrap_or(DEFAULT_ALPHA);
        return Ok(catalog(&p.problem, alpha, p.n.unwrap_or(DEFAULT_N))?);
    }
    let path = Path::new(&p.problem);
    let text = std::fs::read_to_string(path).map_err(|e| io_fail(path, e))?;
    let spec = load_problem(&text).map_err(|e| Failure::File {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(match p.n {
        Some(n) => spec.with_n(n)?,
        None => spec,
    })
}

fn default_trajectory(spec: &ProblemSpec) -> crate::Result<Trajectory> {
    if is_builtin_example(spec) {
        make_reference(spec)
    } else {
        linear_interpolant(spec)
    }
}

fn read_trajectory(spec: &ProblemSpec, path: &Path) -> Outcome<Trajectory> {
    let text = std::fs::read_to_string(path).map_err(|e| io_fail(path, e))?;
    let bad = |message: String| Failure::File {
        path: path.to_path_buf(),
        message,
    };
    let g = spec.grid();
    let mut values = Vec::with_capacity(g.len());
    for (k, line) in text.lines().skip(1).filter(|l| !l.trim().is_empty()).enumerate() {
        let mut cols = line.split(',');
        let mut num = |what: &str| -> Outcome<f64> {
            cols.next()
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| bad(format!("line {}: unreadable {what}", k + 2)))
        };
        let (x, y) = (num("x")?, num("y")?);
        if k < g.len() && (x - g.x(k)).abs() > 1e-9 * (1.0 + x.abs()) {
            return Err(bad(format!("line {}: x = {x} is not grid node {}", k + 2, g.x(k))));
        }
        values.push(y);
    }
    if values.len() != g.len() {
        return Err(bad(format!(
            "expected {} rows (one per grid node), found {}",
            g.len(),
            values.len()
        )));
    }
    Ok(make_trajectory(spec, &values[g.idx_a() + 1..g.idx_b()])?)
}

fn trajectory(spec: &ProblemSpec, arg: &TrajectoryArg) -> Outcome<Trajectory> {
    match &arg.trajectory {
        Some(path) => read_trajectory(spec, path),
        None => Ok(default_trajectory(spec)?),
    }
}

fn order(prev: Option<f64>, cur: f64) -> String {
    match prev {
        Some(p) if p > 0.0 && cur > 0.0 => fmt_num((p / cur).log2()),
        _ => String::new(),
    }
}

struct OpErrors {
    all: f64,
    interior: f64,
    table: String,
}

/// Interior nodes are those at least an eighth of the interval away from
/// the operator's base point.
fn apply_operator(op: Operator, alpha: f64, p: f64, n: usize) -> Outcome<OpErrors> {
    let g = catalog_grid(n)?;
    let (lo, hi) = (g.idx_a(), g.idx_b());
    let (a, b) = (g.a(), g.b());
    let left = matches!(op, Operator::Caputo | Operator::RlLeft | Operator::IntegralLeft);
    let (base, f): (f64, Box<dyn Fn(f64) -> f64>) = if left {
        (a, Box::new(move |x: f64| (x - a).max(0.0).powf(p)))
    } else {
        (b, Box::new(move |x: f64| (b - x).max(0.0).powf(p)))
    };
    let path = SampledPath::from_fn(g, lo, hi, &f)?;
    let value = match op {
        Operator::Caputo => caputo_left(&path, alpha, lo)?,
        Operator::RlLeft => rl_left_derivative(&path, alpha, lo)?,
        Operator::IntegralLeft => left_frac_integral(&path, alpha, lo)?,
        Operator::RlRight => rl_right_derivative(&path, alpha, hi)?,
        Operator::IntegralRight => right_frac_integral(&path, alpha, hi)?,
    };
    let integral = matches!(op, Operator::IntegralLeft | Operator::IntegralRight);
    let shift = if integral { alpha } else { -alpha };
    let coef = gamma(p + 1.0) / gamma(p + 1.0 + shift);
    let exact = |x: f64| {
        let d = (x - base).abs();
        if matches!(op, Operator::Caputo) && p == 0.0 {
            0.0
        } else if d == 0.0 {
            if p + shift > 0.0 { 0.0 } else { f64::NAN }
        } else {
            coef * d.powf(p + shift)
        }
    };
    let mut table = String::from("x,value,exact,error\n");
    let (mut all, mut interior) = (0.0f64, 0.0f64);
    for i in value.range() {
        let x = g.x(i);
        let (v, e) = (value.at(i), exact(x));
        let err = (v - e).abs();
        if err.is_finite() {
            all = all.max(err);
            if (x - base).abs() >= (b - a) / 8.0 {
                interior = interior.max(err);
            }
        }
        let _ = writeln!(table, "{},{},{},{}", fmt_num(x), fmt_num(v), fmt_num(e), fmt_num(err));
    }
    Ok(OpErrors { all, interior, table })
}

fn frac_op(a: &FracOpArgs, out: &mut dyn Write) -> Outcome<()> {
    let p = a.power.unwrap_or(a.alpha + 1.0);
    if !a.sweep {
        let r = apply_operator(a.operator, a.alpha, p, a.n)?;
        return emit_to(out, a.out.as_deref(), &r.table);
    }
    let mut table = String::from("n,h,max_error,order,max_error_interior,order_interior\n");
    let mut prev: Option<(f64, f64)> = None;
    for n in SWEEP {
        let r = apply_operator(a.operator, a.alpha, p, n)?;
        let _ = writeln!(
            table,
            "{n},{},{},{},{},{}",
            fmt_num(2.0 / n as f64),
            fmt_num(r.all),
            order(prev.map(|x| x.0), r.all),
            fmt_num(r.interior),
            order(prev.map(|x| x.1), r.interior)
        );
        prev = Some((r.all, r.interior));
    }
    emit_to(out, a.out.as_deref(), &table)
}

fn verify_ibp(a: &IbpArgs, out: &mut dyn Write) -> Outcome<()> {
    let ns: Vec<usize> = if a.sweep { SWEEP.to_vec() } else { vec![a.n] };
    let mut rows = Vec::new();
    for n in ns {
        rows.extend(run_catalog(n, a.alpha, a.beta)?);
    }
    // group each identity and test pair, resolutions ascending
    rows.sort_by(|x, y| (x.identity, x.f, x.g, x.n).cmp(&(y.identity, y.f, y.g, y.n)));
    emit_to(out, a.out.as_deref(), &rows_to_csv(&rows))
}

fn eval(a: &EvalArgs, out: &mut dyn Write) -> Outcome<()> {
    let spec = load(&a.problem)?;
    if a.sweep {
        let mut table = String::from("n,J\n");
        for n in SWEEP {
            let s = spec.with_n(n)?;
            let j = evaluate_j(&default_trajectory(&s)?, &s)?;
            let _ = writeln!(table, "{n},{}", fmt_num(j));
        }
        return emit_to(out, a.out.as_deref(), &table);
    }
    let traj = trajectory(&spec, &a.traj)?;
    let fields = evaluate_fields(&traj, &spec)?;
    emit(out, &format!("J = {}\n", fmt_num(evaluate_j(&traj, &spec)?)))?;
    if let Some(p) = &a.out {
        write_file(p, &fields.to_csv())?;
    }
    Ok(())
}

fn report(spec: &ProblemSpec, traj: &Trajectory, classical: bool) -> Outcome<ELReport> {
    if classical || spec.mode == Mode::Classical {
        let c = if spec.mode == Mode::Classical {
            spec.clone()
        } else {
            spec.to_classical()?
        };
        Ok(classical_residual(traj, &c)?)
    } else {
        Ok(el_report(traj, spec)?)
    }
}

fn norms_text(r: &ELReport) -> String {
    format!(
        "terminal_residual = {}\ninner_norm = {}\nouter_norm = {}\n\
         inner_norm_nodal = {}\nouter_norm_nodal = {}\nsplit_mismatch = {}\n",
        fmt_num(r.terminal_residual),
        fmt_num(r.inner_norm),
        fmt_num(r.outer_norm),
        fmt_num(r.inner_norm_nodal),
        fmt_num(r.outer_norm_nodal),
        fmt_num(r.split_mismatch),
    )
}

fn residual(a: &ResidualArgs, out: &mut dyn Write) -> Outcome<()> {
    let spec = load(&a.problem)?;
    if a.sweep {
        let mut table = String::from(
            "n,h,terminal_residual,inner_norm,outer_norm,inner_norm_nodal,outer_norm_nodal\n",
        );
        for n in SWEEP {
            let s = spec.with_n(n)?;
            let r = report(&s, &default_trajectory(&s)?, a.classical)?;
            let _ = writeln!(
                table,
                "{n},{},{},{},{},{},{}",
                fmt_num(r.grid_h),
                fmt_num(r.terminal_residual),
                fmt_num(r.inner_norm),
                fmt_num(r.outer_norm),
                fmt_num(r.inner_norm_nodal),
                fmt_num(r.outer_norm_nodal)
            );
        }
        return emit_to(out, a.out.as_deref(), &table);
    }
    let traj = trajectory(&spec, &a.traj)?;
    let r = report(&spec, &traj, a.classical)?;
    emit(out, &norms_text(&r))?;
    if let Some(p) = &a.out {
        write_file(p, &r.to_csv())?;
    }
    Ok(())
}

fn solve(a: &SolveArgs, out: &mut dyn Write) -> Outcome<()> {
    let spec = load(&a.problem)?;
    let config = SolverConfig {
        method: match a.method {
            MethodArg::Cg => Method::ConjugateGradient,
            MethodArg::Gd => Method::GradientDescent,
            MethodArg::Nm => Method::CoordinateNelderMead,
        },
        init: match a.init {
            InitArg::Linear => Init::LinearInterpolant,
            InitArg::Zero => Init::Zero,
        },
        max_iters: a.max_iters,
        ..SolverConfig::default()
    };
    let r = minimize(&spec, &config)?;
    let mut text = format!(
        "J_initial = {}\nJ_final = {}\niterations = {}\nconverged = {}\n",
        fmt_num(r.j_history[0]),
        fmt_num(r.j_final),
        r.iterations,
        r.converged
    );
    text.push_str(&norms_text(&r.el));
    emit(out, &text)?;
    if let Some(dir) = &a.out {
        write_file(&in_dir(dir, "history.csv")?, &r.history_csv())?;
        let traj_csv = r.trajectory.path().to_csv().replacen("x,value", "x,y", 1);
        write_file(&in_dir(dir, "trajectory.csv")?, &traj_csv)?;
    }
    Ok(())
}

fn suffcheck(a: &SuffArgs, out: &mut dyn Write) -> Outcome<()> {
    let spec = load(&a.problem)?;
    let traj = trajectory(&spec, &a.traj)?;
    let s = &a.sampling;
    let cert = certify(&spec, &traj, s.inflation, s.trials, s.seed)?;
    emit_to(out, a.out.as_deref(), &(cert.to_json() + "\n"))
}

fn example(a: &ExampleArgs, out: &mut dyn Write) -> Outcome<()> {
    let spec = catalog("example", a.alpha, a.n)?;
    let traj = make_reference(&spec)?;
    let j = evaluate_j(&traj, &spec)?;
    let r = el_report(&traj, &spec)?;
    let s = &a.sampling;
    let cert = certify(&spec, &traj, s.inflation, s.trials, s.seed)?;
    let conclusion = match cert.conclusion {
        Conclusion::SufficientMinimizer => "sufficient-minimizer",
        Conclusion::Inconclusive => "inconclusive",
    };
    let mut text = format!("problem = {}\nn = {}\nJ = {}\n", spec.label, spec.n, fmt_num(j));
    text.push_str(&norms_text(&r));
    let _ = writeln!(text, "certificate = {conclusion}");
    emit(out, &text)?;
    if let Some(dir) = &a.out {
        write_file(&in_dir(dir, "fields.csv")?, &evaluate_fields(&traj, &spec)?.to_csv())?;
        write_file(&in_dir(dir, "residual.csv")?, &r.to_csv())?;
        write_file(&in_dir(dir, "certificate.json")?, &(cert.to_json() + "\n"))?;
    }
    Ok(())
}
