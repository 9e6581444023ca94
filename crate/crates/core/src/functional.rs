//! The cost functional `J(y) = ∫_a^b L(x, y, v, w, z, y(x-τ), y'(x-τ)) dx`.

use crate::error::{Error, Result};
use crate::expr::{Env, Expr, Var};
use crate::fracops::{caputo_left, left_frac_integral};
use crate::grid::SampledPath;
use crate::problem::{Mode, ProblemSpec, Trajectory};
use crate::quadrature::{cumulative_trapezoid, fd_derivative4, trapezoid};

/// Every argument of `L` sampled along a trajectory.
///
/// All paths except `yprime` live on `[a, b]`; `yprime` covers the whole
/// grid so delayed derivatives are a plain index shift.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluatedFields {
    pub y: SampledPath,
    /// Caputo derivative (fractional mode) or `y'` (classical mode).
    pub v: SampledPath,
    /// Left fractional integral; zero in classical mode.
    pub w: SampledPath,
    pub z: SampledPath,
    pub y_del: SampledPath,
    pub v_del: SampledPath,
    pub yprime: SampledPath,
}

impl EvaluatedFields {
    /// Environment for `L` at node `i` of `[a, b]`.
    pub fn outer_env(&self, spec: &ProblemSpec, i: usize) -> Env {
        let mut env = self.inner_env(spec, i);
        env.set_var(Var::Z, self.z.at(i));
        env.set_var(Var::YTau, self.y_del.at(i));
        env.set_var(Var::VTau, self.v_del.at(i));
        env
    }

    /// Environment for `l` at node `i` of `[a, b]`.
    pub fn inner_env(&self, spec: &ProblemSpec, i: usize) -> Env {
        spec.env()
            .with_var(Var::X, spec.grid().x(i))
            .with_var(Var::Y, self.y.at(i))
            .with_var(Var::V, self.v.at(i))
            .with_var(Var::W, self.w.at(i))
    }

    /// Evaluates `e` at every node of `[a, b]` using the outer environment.
    pub fn sample_outer(&self, spec: &ProblemSpec, e: &Expr) -> Result<SampledPath> {
        self.sample(spec, e, |i| self.outer_env(spec, i))
    }

    /// Evaluates `e` at every node of `[a, b]` using the inner environment.
    pub fn sample_inner(&self, spec: &ProblemSpec, e: &Expr) -> Result<SampledPath> {
        self.sample(spec, e, |i| self.inner_env(spec, i))
    }

    fn sample(&self, spec: &ProblemSpec, e: &Expr, env: impl Fn(usize) -> Env) -> Result<SampledPath> {
        let g = spec.grid();
        if e.is_zero() {
            return Ok(SampledPath::zeros(*g, g.idx_a(), g.idx_b()));
        }
        let e = &e.bind_params(&spec.env());
        let values = (g.idx_a()..=g.idx_b())
            .map(|i| e.eval(&env(i)).map_err(|err| at_node(g.x(i), err)))
            .collect::<Result<Vec<_>>>()?;
        SampledPath::new(*g, g.idx_a(), values)
    }

    /// `y'` on `[a - tau, b]` as a CSV-ready set of named columns.
    pub fn columns(&self) -> [(&'static str, &SampledPath); 6] {
        [
            ("y", &self.y),
            ("v", &self.v),
            ("w", &self.w),
            ("z", &self.z),
            ("y_del", &self.y_del),
            ("v_del", &self.v_del),
        ]
    }

    /// All fields on `[a, b]` as one CSV table.
    pub fn to_csv(&self) -> String {
        use std::fmt::Write as _;
        let g = self.y.grid();
        let mut out = String::from("x,y,v,w,z,y_del,v_del,yprime\n");
        for i in g.idx_a()..=g.idx_b() {
            let _ = write!(out, "{}", crate::grid::fmt_num(g.x(i)));
            for (_, p) in self.columns() {
                let _ = write!(out, ",{}", crate::grid::fmt_num(p.at(i)));
            }
            let _ = writeln!(out, ",{}", crate::grid::fmt_num(self.yprime.at(i)));
        }
        out
    }
}

pub(crate) fn at_node(x: f64, err: Error) -> Error {
    match err {
        e @ Error::AtNode { .. } => e,
        e => Error::AtNode {
            x,
            source: Box::new(e),
        },
    }
}

fn check_grid(traj: &Trajectory, spec: &ProblemSpec) -> Result<()> {
    if traj.path().grid() != spec.grid() || traj.path().lo() != 0 {
        return Err(Error::domain("trajectory does not live on the problem grid"));
    }
    Ok(())
}

/// `y'` on the whole grid: the history slope `phi'` on `[a - tau, a)`,
/// five-point differences of the samples on `[a, b]` (one-sided next to `a`
/// and `b`, centered elsewhere).
pub fn trajectory_slope(traj: &Trajectory, spec: &ProblemSpec) -> Result<SampledPath> {
    let g = spec.grid();
    let dphi = spec.history.differentiate(Var::X)?;
    let mut out = Vec::with_capacity(g.len());
    for i in 0..g.idx_a() {
        let x = g.x(i);
        out.push(
            dphi.eval(&spec.env().with_var(Var::X, x))
                .map_err(|e| at_node(x, e))?,
        );
    }
    out.extend(fd_derivative4(&traj.values()[g.idx_a()..], g.h()));
    SampledPath::new(*g, 0, out)
}

/// Samples `y, v, w, z` and the delayed values along `traj`.
///
/// `v` and `w` are left at zero when neither Lagrangian reads them.
pub fn evaluate_fields(traj: &Trajectory, spec: &ProblemSpec) -> Result<EvaluatedFields> {
    check_grid(traj, spec)?;
    let g = spec.grid();
    let (ia, ib) = (g.idx_a(), g.idx_b());
    let y = traj.path().restrict(ia, ib)?;
    let yprime = trajectory_slope(traj, spec)?;
    let uses = |var| spec.lagrangian.depends_on(var) || spec.inner.depends_on(var);
    let zeros = || SampledPath::zeros(*g, ia, ib);
    let (v, w) = match spec.mode {
        Mode::Fractional => (
            if uses(Var::V) { caputo_left(&y, spec.alpha, ia)? } else { zeros() },
            if uses(Var::W) { left_frac_integral(&y, spec.beta, ia)? } else { zeros() },
        ),
        Mode::Classical => (yprime.restrict(ia, ib)?, zeros()),
    };
    let m = g.shift();
    let y_del = SampledPath::new(*g, ia, traj.values()[ia - m..=ib - m].to_vec())?;
    let v_del = SampledPath::new(*g, ia, yprime.values()[ia - m..=ib - m].to_vec())?;
    let mut fields = EvaluatedFields {
        y,
        v,
        w,
        z: SampledPath::zeros(*g, ia, ib),
        y_del,
        v_del,
        yprime,
    };
    fields.z = compute_z(&fields, spec)?;
    Ok(fields)
}

/// `z(x) = ∫_a^x l(t, y, v, w) dt` by cumulative trapezoid; `z(a) = 0`.
pub fn compute_z(fields: &EvaluatedFields, spec: &ProblemSpec) -> Result<SampledPath> {
    let integrand = fields.sample_inner(spec, &spec.inner)?;
    let z = cumulative_trapezoid(integrand.values(), spec.grid().h());
    SampledPath::new(*spec.grid(), spec.grid().idx_a(), z)
}

/// The discrete cost: composite trapezoid of `L` over `[a, b]`.
pub fn evaluate_j(traj: &Trajectory, spec: &ProblemSpec) -> Result<f64> {
    let fields = evaluate_fields(traj, spec)?;
    j_from_fields(&fields, spec)
}

pub(crate) fn j_from_fields(fields: &EvaluatedFields, spec: &ProblemSpec) -> Result<f64> {
    let integrand = fields.sample_outer(spec, &spec.lagrangian)?;
    Ok(trapezoid(integrand.values(), spec.grid().h()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, VarSet};
    use crate::fracops::gamma;
    use crate::problem::{builtin_example_n, make_reference, make_trajectory, trajectory_from_fn};

    fn with_lagrangians(spec: &ProblemSpec, big: &str, small: &str) -> ProblemSpec {
        let mut s = spec.clone();
        s.lagrangian = parse(big, VarSet::OUTER).unwrap();
        s.inner = parse(small, VarSet::INNER).unwrap();
        s
    }

    #[test]
    fn caputo_field_of_reference() {
        let err = |n: usize| {
            let spec = builtin_example_n(0.5, n).unwrap();
            let f = evaluate_fields(&make_reference(&spec).unwrap(), &spec).unwrap();
            let g = spec.grid();
            // fixed window [0.5, 2] away from the weak singularity at a
            (g.idx_a() + n / 4..=g.idx_b())
                .map(|i| (f.v.at(i) - gamma(2.5) * g.x(i)).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2, e3) = (err(64), err(128), err(256));
        assert!(e3 < e2 && e2 < e1, "{e1} {e2} {e3}");
    }

    #[test]
    fn zero_trajectory_has_zero_delays() {
        let spec = builtin_example_n(0.5, 16).unwrap();
        let t = make_trajectory(&spec, &[0.0; 15]).unwrap();
        let f = evaluate_fields(&t, &spec).unwrap();
        assert_eq!(f.y_del.max_abs(), 0.0);
        assert_eq!(f.v_del.max_abs(), 0.0);
        assert_eq!(f.v.at(spec.grid().idx_a()), 0.0);
        assert_eq!(f.w.at(spec.grid().idx_a()), 0.0);
    }

    #[test]
    fn delayed_values_on_first_stretch_are_history() {
        let mut spec = builtin_example_n(0.5, 16).unwrap();
        spec.history = parse("0.3*x^2 - x", VarSet::HISTORY).unwrap();
        let t = trajectory_from_fn(&spec, |x| x.sin()).unwrap();
        let f = evaluate_fields(&t, &spec).unwrap();
        let g = spec.grid();
        for i in g.idx_a()..=g.idx_a() + g.shift() {
            let xd = g.x(i) - spec.tau;
            assert_eq!(f.y_del.at(i), spec.phi(xd).unwrap());
            if i < g.idx_a() + g.shift() {
                assert!((f.v_del.at(i) - (0.6 * xd - 1.0)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn z_of_simple_integrands() {
        let spec = builtin_example_n(0.5, 16).unwrap();
        let t = trajectory_from_fn(&spec, |x| x * x).unwrap();
        let zero = with_lagrangians(&spec, "z", "0");
        assert_eq!(evaluate_fields(&t, &zero).unwrap().z.max_abs(), 0.0);
        let one = with_lagrangians(&spec, "z", "1");
        let f = evaluate_fields(&t, &one).unwrap();
        for i in f.z.range() {
            assert!((f.z.at(i) - spec.grid().x(i)).abs() < 1e-14);
        }
    }

    #[test]
    fn z_vanishes_along_reference() {
        let spec = builtin_example_n(0.5, 64).unwrap();
        let f = evaluate_fields(&make_reference(&spec).unwrap(), &spec).unwrap();
        assert!(f.z.max_abs() < 1e-20);
    }

    #[test]
    fn constant_lagrangian_gives_length() {
        let spec = with_lagrangians(&builtin_example_n(0.5, 16).unwrap(), "1", "0");
        let t = trajectory_from_fn(&spec, |x| x).unwrap();
        assert_eq!(evaluate_j(&t, &spec).unwrap(), 2.0);
    }

    #[test]
    fn j_at_reference_is_small_and_nonnegative() {
        let spec = builtin_example_n(0.5, 128).unwrap();
        let j = evaluate_j(&make_reference(&spec).unwrap(), &spec).unwrap();
        assert!((0.0..1e-2).contains(&j), "{j}");
    }

    #[test]
    fn z_monotone_for_nonnegative_integrand() {
        let spec = builtin_example_n(0.5, 32).unwrap();
        let t = trajectory_from_fn(&spec, |x| (3.0 * x).cos()).unwrap();
        let f = evaluate_fields(&t, &spec).unwrap();
        assert!(f.z.values().windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn evaluation_errors_carry_position() {
        let spec = with_lagrangians(&builtin_example_n(0.5, 16).unwrap(), "1/y", "0");
        let t = trajectory_from_fn(&spec, |x| x - 1.0).unwrap();
        match evaluate_j(&t, &spec) {
            Err(Error::AtNode { x, .. }) => assert_eq!(x, 0.0),
            other => panic!("{other:?}"),
        }
    }
}
