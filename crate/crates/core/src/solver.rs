//! Direct minimisation of the discrete cost over the free nodal values.
//!
//! The history and the terminal value stay pinned; only the nodes strictly
//! inside `(a, b)` move. Gradients are central differences of the discrete
//! cost, evaluated in parallel and collected in index order.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::eulerlagrange::{el_report, ELReport};
use crate::functional::evaluate_j;
use crate::grid::fmt_num;
use crate::problem::{linear_interpolant, make_trajectory, ProblemSpec, Trajectory};

/// Search strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    /// Steepest descent with Armijo backtracking. The trial step is the
    /// Barzilai–Borwein step from the last two iterates.
    GradientDescent,
    /// Nonlinear conjugate gradients (Polak–Ribière, clipped at zero and
    /// restarted whenever the direction stops descending) on the same
    /// finite-difference gradient, with a parabolic trial step and Armijo
    /// backtracking.
    #[default]
    ConjugateGradient,
    /// Sweeps over the coordinates, each minimised by a one-dimensional
    /// Nelder–Mead search. Derivative free and slow; meant for small grids.
    CoordinateNelderMead,
}

/// Starting trajectory.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Init {
    /// Straight line from `phi(a)` to `y_b`.
    #[default]
    LinearInterpolant,
    /// All free values zero.
    Zero,
    /// Explicit free values, one per node strictly inside `(a, b)`.
    Custom(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub method: Method,
    pub max_iters: usize,
    /// Finite-difference step; `None` means `1e-6 * max(1, max |y|)`.
    pub grad_step: Option<f64>,
    /// Stop once the relative decrease of `J` over the last
    /// [`STALL_WINDOW`] iterations drops below this.
    pub tol_j: f64,
    pub armijo_c: f64,
    pub init: Init,
}

/// Iterations over which the relative decrease is measured.
pub const STALL_WINDOW: usize = 5;

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            method: Method::ConjugateGradient,
            max_iters: 20_000,
            grad_step: None,
            tol_j: 1e-10,
            armijo_c: 1e-4,
            init: Init::LinearInterpolant,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: &str| Err(Error::field(field, msg));
        if self.max_iters == 0 {
            return bad("max_iters", "must be at least 1");
        }
        if let Some(h) = self.grad_step {
            if !(h > 0.0 && h.is_finite()) {
                return bad("grad_step", "must be positive");
            }
        }
        if !(self.tol_j > 0.0 && self.tol_j.is_finite()) {
            return bad("tol_j", "must be positive");
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return bad("armijo_c", "must lie in (0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult {
    pub trajectory: Trajectory,
    pub j_final: f64,
    /// `J` at the start and after every accepted step.
    pub j_history: Vec<f64>,
    pub el: ELReport,
    pub iterations: usize,
    pub converged: bool,
}

impl SolverResult {
    /// `iteration,J` table.
    pub fn history_csv(&self) -> String {
        let mut out = String::from("iteration,J\n");
        for (k, j) in self.j_history.iter().enumerate() {
            out.push_str(&format!("{k},{}\n", fmt_num(*j)));
        }
        out
    }
}

fn fail(message: impl Into<String>, traj: &Trajectory) -> Error {
    Error::Solver {
        message: message.into(),
        trajectory: traj.values().to_vec(),
    }
}

fn cost(spec: &ProblemSpec, traj: &Trajectory) -> Result<f64> {
    match evaluate_j(traj, spec) {
        Ok(j) if j.is_finite() => Ok(j),
        Ok(j) => Err(fail(format!("cost evaluated to {j}"), traj)),
        Err(e) => Err(fail(format!("cost evaluation failed: {e}"), traj)),
    }
}

fn default_step(traj: &Trajectory) -> f64 {
    1e-6 * traj.values().iter().fold(1.0f64, |m, v| m.max(v.abs()))
}

/// Central-difference gradient of the discrete cost with respect to the
/// free values.
pub fn gradient_fd(spec: &ProblemSpec, traj: &Trajectory, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::domain(format!("gradient step must be positive, got {step}")));
    }
    let free = traj.interior().len();
    (0..free)
        .into_par_iter()
        .map(|k| {
            let mut probe = traj.clone();
            let base = traj.interior()[k];
            probe.set_free(k, base + step);
            let up = cost(spec, &probe)?;
            probe.set_free(k, base - step);
            let down = cost(spec, &probe)?;
            Ok((up - down) / (2.0 * step))
        })
        .collect()
}

fn initial(spec: &ProblemSpec, init: &Init) -> Result<Trajectory> {
    match init {
        Init::LinearInterpolant => linear_interpolant(spec),
        Init::Zero => make_trajectory(spec, &vec![0.0; spec.grid().interior().count()]),
        Init::Custom(values) => make_trajectory(spec, values),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn stalled(history: &[f64], tol: f64) -> bool {
    if history.len() <= STALL_WINDOW {
        return false;
    }
    let last = history[history.len() - 1];
    let earlier = history[history.len() - 1 - STALL_WINDOW];
    earlier - last <= tol * earlier.abs().max(f64::MIN_POSITIVE)
}

struct Run {
    traj: Trajectory,
    j: f64,
    history: Vec<f64>,
    iterations: usize,
    converged: bool,
}

/// Backtracks from `alpha` along `dir` until the Armijo condition holds.
fn backtrack(
    spec: &ProblemSpec,
    x: &[f64],
    dir: &[f64],
    j: f64,
    slope: f64,
    mut alpha: f64,
    c: f64,
) -> Result<Option<(f64, Trajectory, f64)>> {
    for _ in 0..60 {
        let cand: Vec<f64> = x.iter().zip(dir).map(|(xi, di)| xi + alpha * di).collect();
        let cand_traj = make_trajectory(spec, &cand)?;
        let jc = cost(spec, &cand_traj)?;
        if jc <= j + c * alpha * slope {
            return Ok(Some((alpha, cand_traj, jc)));
        }
        alpha *= 0.5;
    }
    Ok(None)
}

fn descend(spec: &ProblemSpec, config: &SolverConfig, traj: Trajectory, conjugate: bool) -> Result<Run> {
    let mut j = cost(spec, &traj)?;
    let mut run = Run {
        traj,
        j,
        history: vec![j],
        iterations: 0,
        converged: false,
    };
    let step = config.grad_step.unwrap_or_else(|| default_step(&run.traj));
    let mut grad = gradient_fd(spec, &run.traj, step)?;
    let mut dir: Vec<f64> = grad.iter().map(|g| -g).collect();
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut trial = 1.0 / grad.iter().fold(1.0f64, |m, g| m.max(g.abs()));
    while run.iterations < config.max_iters {
        let gnorm2 = dot(&grad, &grad);
        if gnorm2 == 0.0 || j == 0.0 {
            run.converged = true;
            break;
        }
        let x = run.traj.interior().to_vec();
        if let Some((x_old, g_old)) = &prev {
            let yv: Vec<f64> = grad.iter().zip(g_old).map(|(a, b)| a - b).collect();
            if conjugate {
                let beta = (dot(&grad, &yv) / dot(g_old, g_old)).max(0.0);
                dir = dir.iter().zip(&grad).map(|(d, g)| beta * d - g).collect();
                if dot(&dir, &grad) >= 0.0 || run.iterations.is_multiple_of(x.len().max(1)) {
                    dir = grad.iter().map(|g| -g).collect();
                }
            } else {
                dir = grad.iter().map(|g| -g).collect();
                let s: Vec<f64> = x.iter().zip(x_old).map(|(a, b)| a - b).collect();
                let sy = dot(&s, &yv);
                trial = if sy > 0.0 { dot(&s, &s) / sy } else { 2.0 * trial };
            }
        }
        let slope = dot(&grad, &dir);
        if conjugate {
            // minimiser of the parabola through J(0), J'(0) and J(trial)
            let probe = make_trajectory(
                spec,
                &x.iter().zip(&dir).map(|(xi, di)| xi + trial * di).collect::<Vec<_>>(),
            )?;
            let jt = cost(spec, &probe)?;
            let curv = (jt - j - slope * trial) / (trial * trial);
            if curv > 0.0 {
                trial = -slope / (2.0 * curv);
            } else {
                trial *= 2.0;
            }
        }
        let Some((alpha, next, jn)) = backtrack(spec, &x, &dir, j, slope, trial, config.armijo_c)?
        else {
            // no decrease along a descent direction at working precision
            run.converged = true;
            break;
        };
        run.iterations += 1;
        prev = Some((x, grad));
        run.traj = next;
        j = jn;
        run.j = j;
        run.history.push(j);
        if conjugate {
            trial = alpha;
        }
        if stalled(&run.history, config.tol_j) {
            run.converged = true;
            break;
        }
        grad = gradient_fd(spec, &run.traj, step)?;
    }
    Ok(run)
}

/// One-dimensional Nelder–Mead on `t -> J(x + t e_k)`, starting from the
/// simplex `{0, delta}`. Returns the best offset and cost found.
fn line_nelder_mead(
    spec: &ProblemSpec,
    traj: &mut Trajectory,
    k: usize,
    j0: f64,
    delta: f64,
) -> Result<(f64, f64)> {
    let base = traj.interior()[k];
    let mut eval = |t: f64| -> Result<f64> {
        traj.set_free(k, base + t);
        cost(spec, traj)
    };
    let mut s = [(0.0, j0), (delta, eval(delta)?)];
    for _ in 0..40 {
        s.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (s[0], s[1]);
        if (best.0 - worst.0).abs() <= 1e-12 * (1.0 + base.abs()) {
            break;
        }
        let reflect = best.0 + (best.0 - worst.0);
        let jr = eval(reflect)?;
        if jr < best.1 {
            let expand = best.0 + 2.0 * (best.0 - worst.0);
            let je = eval(expand)?;
            s[1] = if je < jr { (expand, je) } else { (reflect, jr) };
        } else {
            let contract = 0.5 * (best.0 + worst.0);
            let jc = eval(contract)?;
            if jc < worst.1 {
                s[1] = (contract, jc);
            } else {
                break;
            }
        }
    }
    s.sort_by(|a, b| a.1.total_cmp(&b.1));
    traj.set_free(k, base + s[0].0);
    Ok(s[0])
}

fn coordinate_search(spec: &ProblemSpec, config: &SolverConfig, mut traj: Trajectory) -> Result<Run> {
    let mut j = cost(spec, &traj)?;
    let mut history = vec![j];
    let mut iterations = 0;
    let mut converged = false;
    let mut delta = 0.1 * traj.values().iter().fold(1.0f64, |m, v| m.max(v.abs()));
    while iterations < config.max_iters {
        if j == 0.0 {
            converged = true;
            break;
        }
        let start = j;
        for k in 0..traj.interior().len() {
            let (_, jk) = line_nelder_mead(spec, &mut traj, k, j, delta)?;
            j = j.min(jk);
        }
        iterations += 1;
        history.push(j);
        if j >= start {
            delta *= 0.5;
        }
        if stalled(&history, config.tol_j) {
            converged = true;
            break;
        }
    }
    Ok(Run {
        traj,
        j,
        history,
        iterations,
        converged,
    })
}

/// Searches for a local minimiser of the discrete cost.
///
/// Non-convergence within `max_iters` is reported through
/// [`SolverResult::converged`], not as an error.
pub fn minimize(spec: &ProblemSpec, config: &SolverConfig) -> Result<SolverResult> {
    config.validate()?;
    let start = initial(spec, &config.init)?;
    let run = match config.method {
        Method::GradientDescent => descend(spec, config, start, false)?,
        Method::ConjugateGradient => descend(spec, config, start, true)?,
        Method::CoordinateNelderMead => coordinate_search(spec, config, start)?,
    };
    let el = el_report(&run.traj, spec)?;
    Ok(SolverResult {
        j_final: run.j,
        trajectory: run.traj,
        j_history: run.history,
        el,
        iterations: run.iterations,
        converged: run.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, VarSet};
    use crate::problem::{builtin_example_n, catalog, make_reference};

    #[test]
    fn zero_cost_returns_init() {
        let mut spec = catalog("quadratic", 0.5, 16).unwrap();
        spec.lagrangian = parse("0", VarSet::OUTER).unwrap();
        let r = minimize(&spec, &SolverConfig::default()).unwrap();
        assert!(r.converged && r.iterations <= 5);
        assert_eq!(r.j_final, 0.0);
        assert_eq!(r.trajectory, linear_interpolant(&spec).unwrap());
        let g = gradient_fd(&spec, &r.trajectory, 1e-6).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn separable_quadratic_goes_to_one() {
        let spec = catalog("quadratic", 0.5, 32).unwrap();
        let r = minimize(&spec, &SolverConfig::default()).unwrap();
        assert!(r.converged);
        // each free node minimises its own (y - 1)^2 trapezoid weight
        assert!(r.trajectory.interior().iter().all(|v| (v - 1.0).abs() < 1e-5));
        assert!(r.j_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn coordinate_search_on_quadratic() {
        let spec = catalog("quadratic", 0.5, 8).unwrap();
        let config = SolverConfig {
            method: Method::CoordinateNelderMead,
            max_iters: 200,
            ..SolverConfig::default()
        };
        let r = minimize(&spec, &config).unwrap();
        assert!(r.trajectory.interior().iter().all(|v| (v - 1.0).abs() < 1e-4));
        assert!(r.j_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn pinned_nodes_never_move() {
        let spec = catalog("coupled", 0.5, 16).unwrap();
        let config = SolverConfig {
            max_iters: 20,
            ..SolverConfig::default()
        };
        let r = minimize(&spec, &config).unwrap();
        let start = linear_interpolant(&spec).unwrap();
        let g = spec.grid();
        assert_eq!(r.trajectory.values()[..=g.idx_a()], start.values()[..=g.idx_a()]);
        assert_eq!(r.trajectory.values()[g.idx_b()], spec.y_b);
        assert!(r.j_final <= r.j_history[0]);
    }

    #[test]
    fn gradient_small_at_reference() {
        let norms: Vec<f64> = [32, 64]
            .iter()
            .map(|&n| {
                let spec = builtin_example_n(0.5, n).unwrap();
                let t = make_reference(&spec).unwrap();
                let g = gradient_fd(&spec, &t, 1e-6).unwrap();
                g.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
            })
            .collect();
        assert!(norms[1] < norms[0], "{norms:?}");
    }

    #[test]
    fn gradient_differences_are_symmetric() {
        let spec = catalog("coupled", 0.5, 8).unwrap();
        let t = linear_interpolant(&spec).unwrap();
        let delta = 1e-3;
        let g0 = gradient_fd(&spec, &t, 1e-5).unwrap();
        let shifted: Vec<Vec<f64>> = (0..g0.len())
            .map(|k| {
                let mut p = t.clone();
                p.set_free(k, t.interior()[k] + delta);
                gradient_fd(&spec, &p, 1e-5).unwrap()
            })
            .collect();
        for i in 0..g0.len() {
            for k in 0..g0.len() {
                let hik = (shifted[k][i] - g0[i]) / delta;
                let hki = (shifted[i][k] - g0[k]) / delta;
                assert!((hik - hki).abs() < 1e-2 * (1.0 + hik.abs()), "{i} {k}: {hik} {hki}");
            }
        }
    }

    #[test]
    fn invalid_config_is_rejected() {
        let spec = catalog("quadratic", 0.5, 8).unwrap();
        let config = SolverConfig {
            max_iters: 0,
            ..SolverConfig::default()
        };
        assert!(minimize(&spec, &config).is_err());
        assert!(gradient_fd(&spec, &linear_interpolant(&spec).unwrap(), 0.0).is_err());
    }

    #[test]
    fn evaluation_failure_dumps_trajectory() {
        let mut spec = catalog("quadratic", 0.5, 8).unwrap();
        spec.lagrangian = parse("ln(y - 5)", VarSet::OUTER).unwrap();
        match minimize(&spec, &SolverConfig::default()) {
            Err(Error::Solver { trajectory, .. }) => assert_eq!(trajectory.len(), spec.grid().len()),
            other => panic!("{other:?}"),
        }
    }
}
