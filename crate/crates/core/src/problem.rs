//! Problem definitions, the `.fvp` file format and the built-in catalog.
//!
//! A problem file is flat `key = value` text:
//!
//! ```text
//! # delayed fractional problem
//! label = example
//! a = 0
//! b = 2
//! tau = 1
//! alpha = 0.5
//! beta = 1
//! n = 128
//! y_b = 2.8284271247461903
//! L = (v - gamma(alpha+2)*x)^2 + z + (v_tau - (alpha+1)*pospart(x-1)^alpha)^2
//! l = (y - x^(alpha+1))^2
//! phi = 0
//! ```
//!
//! Keys may appear in any order; unknown keys are rejected. Besides the
//! required keys there are two optional ones: `mode` (`fractional` or
//! `classical`) and `positive_base` (`true` admits `^` with a
//! variable-dependent exponent, asserting the base stays positive).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::expr::{parse, Env, Expr, Param, Var, VarSet};
use crate::fracops::{check_alpha, check_beta};
use crate::grid::{make_grid, Grid, SampledPath};

/// How `v` and `w` are interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    /// `v` is the left Caputo derivative, `w` the left fractional integral.
    #[default]
    Fractional,
    /// `v` is the ordinary derivative `y'`; `w` is not available.
    Classical,
}

/// A complete delayed fractional variational problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub label: String,
    pub a: f64,
    pub b: f64,
    pub tau: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Outer Lagrangian over `(x, y, v, w, z, y_tau, v_tau)`.
    pub lagrangian: Expr,
    /// Inner Lagrangian over `(x, y, v, w)`, integrated into `z`.
    pub inner: Expr,
    /// History on `[a - tau, a]`.
    pub history: Expr,
    pub y_b: f64,
    pub n: usize,
    pub mode: Mode,
    pub positive_base: bool,
    grid: Grid,
}

const KEYS: [&str; 13] = [
    "label", "a", "b", "tau", "alpha", "beta", "n", "y_b", "L", "l", "phi", "mode", "positive_base",
];

impl ProblemSpec {
    /// Validates and assembles a problem from parsed components.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        label: impl Into<String>,
        (a, b, tau): (f64, f64, f64),
        alpha: f64,
        beta: f64,
        lagrangian: Expr,
        inner: Expr,
        history: Expr,
        y_b: f64,
        n: usize,
    ) -> Result<Self> {
        let grid = grid_for(a, b, tau, n)?;
        let spec = ProblemSpec {
            label: label.into(),
            a,
            b,
            tau: grid.tau(),
            alpha,
            beta,
            lagrangian,
            inner,
            history,
            y_b,
            n,
            mode: Mode::Fractional,
            positive_base: false,
            grid,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        check_alpha(self.alpha).map_err(|e| Error::field("alpha", e.to_string()))?;
        check_beta(self.beta).map_err(|e| Error::field("beta", e.to_string()))?;
        if !self.y_b.is_finite() {
            return Err(Error::field("y_b", "must be finite"));
        }
        for (field, e, allowed) in [
            ("L", &self.lagrangian, VarSet::OUTER),
            ("l", &self.inner, VarSet::INNER),
            ("phi", &self.history, VarSet::HISTORY),
        ] {
            if let Some(v) = Var::ALL
                .into_iter()
                .find(|v| !allowed.contains(*v) && e.depends_on(*v))
            {
                return Err(Error::field(field, format!("variable `{v}` not allowed here")));
            }
            if !self.positive_base {
                if let Some(bad) = variable_exponent(e) {
                    return Err(Error::field(
                        field,
                        format!("`{bad}` has a variable exponent; set positive_base = true"),
                    ));
                }
            }
        }
        if self.mode == Mode::Classical {
            for (field, e) in [("L", &self.lagrangian), ("l", &self.inner)] {
                if e.depends_on(Var::W) {
                    return Err(Error::Mode(format!(
                        "{field} uses the fractional integral `w` in classical mode"
                    )));
                }
            }
        }
        let phi_a = self
            .history
            .eval(&self.env().with_var(Var::X, self.a))
            .map_err(|e| Error::field("phi", format!("not finite at a: {e}")))?;
        if !phi_a.is_finite() {
            return Err(Error::field("phi", "not finite at a"));
        }
        Ok(())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Environment holding the problem parameters.
    pub fn env(&self) -> Env {
        Env::new()
            .with_param(Param::Alpha.name(), self.alpha)
            .with_param(Param::Beta.name(), self.beta)
            .with_param(Param::Tau.name(), self.tau)
    }

    /// The same problem at a different resolution.
    pub fn with_n(&self, n: usize) -> Result<Self> {
        let grid = grid_for(self.a, self.b, self.tau, n)?;
        Ok(ProblemSpec {
            n,
            grid,
            ..self.clone()
        })
    }

    /// The same problem read in classical mode.
    pub fn to_classical(&self) -> Result<Self> {
        let spec = ProblemSpec {
            mode: Mode::Classical,
            ..self.clone()
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_mode(mut self, mode: Mode) -> Result<Self> {
        self.mode = mode;
        self.validate()?;
        Ok(self)
    }

    pub fn with_positive_base(mut self, on: bool) -> Result<Self> {
        self.positive_base = on;
        self.validate()?;
        Ok(self)
    }

    /// History value `phi(x)`.
    pub fn phi(&self, x: f64) -> Result<f64> {
        self.history
            .eval(&self.env().with_var(Var::X, x))
            .map_err(|e| Error::AtNode {
                x,
                source: Box::new(e),
            })
    }

    /// Serializes to the `.fvp` format; [`load_problem`] reads it back.
    pub fn to_fvp(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "label = {}", self.label);
        for (k, v) in [
            ("a", self.a),
            ("b", self.b),
            ("tau", self.tau),
            ("alpha", self.alpha),
            ("beta", self.beta),
        ] {
            let _ = writeln!(out, "{k} = {v}");
        }
        let _ = writeln!(out, "n = {}", self.n);
        let _ = writeln!(out, "y_b = {}", self.y_b);
        let _ = writeln!(out, "L = {}", self.lagrangian);
        let _ = writeln!(out, "l = {}", self.inner);
        let _ = writeln!(out, "phi = {}", self.history);
        if self.mode == Mode::Classical {
            let _ = writeln!(out, "mode = classical");
        }
        if self.positive_base {
            let _ = writeln!(out, "positive_base = true");
        }
        out
    }
}

fn grid_for(a: f64, b: f64, tau: f64, n: usize) -> Result<Grid> {
    make_grid(a, b, tau, n).map_err(|e| match e {
        Error::Domain(msg) if !(tau > 0.0 && tau < b - a) => Error::field("tau", msg),
        other => other,
    })
}

// First power whose exponent depends on a variable.
fn variable_exponent(e: &Expr) -> Option<String> {
    let mut found = None;
    e.walk(&mut |node| {
        if found.is_none() {
            if let Expr::Bin(crate::expr::BinOp::Pow, _, exp) = node {
                if !exp.is_constant() {
                    found = Some(node.to_string());
                }
            }
        }
    });
    found
}

/// Parses and validates a problem file.
pub fn load_problem(contents: &str) -> Result<ProblemSpec> {
    let mut fields: BTreeMap<&str, (&str, usize)> = BTreeMap::new();
    for (lineno, raw) in contents.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Syntax {
                offset: lineno + 1,
                message: format!("line {} is not `key = value`", lineno + 1),
            });
        };
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(Error::UnknownField(key.to_string()));
        }
        if fields.insert(key, (value.trim(), lineno + 1)).is_some() {
            return Err(Error::DuplicateField(key.to_string()));
        }
    }
    let get = |k: &str| -> Result<&str> {
        fields
            .get(k)
            .map(|(v, _)| *v)
            .ok_or_else(|| Error::MissingField(k.to_string()))
    };
    let real = |k: &str| -> Result<f64> {
        let raw = get(k)?;
        raw.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::field(k, format!("`{raw}` is not a finite real")))
    };
    let expr = |k: &str, vars: VarSet| -> Result<Expr> {
        parse(get(k)?, vars).map_err(|e| Error::field(k, e.to_string()))
    };

    let a = real("a")?;
    let b = real("b")?;
    let tau = real("tau")?;
    let alpha = real("alpha")?;
    let beta = real("beta")?;
    let y_b = real("y_b")?;
    let n_raw = get("n")?;
    let n: usize = n_raw
        .parse()
        .map_err(|_| Error::field("n", format!("`{n_raw}` is not a positive integer")))?;
    let lagrangian = expr("L", VarSet::OUTER)?;
    let inner = expr("l", VarSet::INNER)?;
    let history = expr("phi", VarSet::HISTORY)?;
    let label = fields.get("label").map(|(v, _)| v.to_string()).unwrap_or_default();
    let mode = match fields.get("mode").map(|(v, _)| *v) {
        None | Some("fractional") => Mode::Fractional,
        Some("classical") => Mode::Classical,
        Some(other) => return Err(Error::field("mode", format!("unknown mode `{other}`"))),
    };
    let positive_base = match fields.get("positive_base").map(|(v, _)| *v) {
        None | Some("false") => false,
        Some("true") => true,
        Some(other) => return Err(Error::field("positive_base", format!("`{other}` is not a boolean"))),
    };

    let grid = grid_for(a, b, tau, n)?;
    let spec = ProblemSpec {
        label,
        a,
        b,
        tau: grid.tau(),
        alpha,
        beta,
        lagrangian,
        inner,
        history,
        y_b,
        n,
        mode,
        positive_base,
        grid,
    };
    spec.validate()?;
    Ok(spec)
}

const EXAMPLE_L: &str = "(v - gamma(alpha+2)*x)^2 + z + (v_tau - (alpha+1)*pospart(x-1)^alpha)^2";
const EXAMPLE_INNER: &str = "(y - x^(alpha+1))^2";

/// The delayed example on `[0, 2]` with delay 1, whose minimizer is
/// `x^(alpha+1)` on `[0, 2]` (zero on the history) with minimum value 0.
pub fn builtin_example(alpha: f64) -> Result<ProblemSpec> {
    builtin_example_n(alpha, 128)
}

/// [`builtin_example`] at resolution `n`.
pub fn builtin_example_n(alpha: f64, n: usize) -> Result<ProblemSpec> {
    check_alpha(alpha)?;
    ProblemSpec::new(
        format!("example alpha={alpha}"),
        (0.0, 2.0, 1.0),
        alpha,
        1.0,
        parse(EXAMPLE_L, VarSet::OUTER)?,
        parse(EXAMPLE_INNER, VarSet::INNER)?,
        Expr::Num(0.0),
        2f64.powf(alpha + 1.0),
        n,
    )
}

/// Names accepted by [`catalog`].
pub const CATALOG_NAMES: [&str; 4] = ["example", "quadratic", "coupled", "smooth"];

/// Built-in problems by name. `example` takes `alpha` from the argument;
/// the others are fixed test problems:
///
/// * `quadratic`: `L = (y - 1)^2`, a separable toy;
/// * `coupled`: every variable of `L` and `l` enters, used to cross-check
///   the optimality conditions against directional derivatives;
/// * `smooth`: a smooth quadratic with no delay dependence, used to
///   compare the fractional and classical conditions.
pub fn catalog(name: &str, alpha: f64, n: usize) -> Result<ProblemSpec> {
    let p = |s: &str, vars| parse(s, vars);
    match name {
        "example" => builtin_example_n(alpha, n),
        "quadratic" => ProblemSpec::new(
            "quadratic",
            (0.0, 1.0, 0.25),
            alpha,
            1.0,
            p("(y - 1)^2", VarSet::OUTER)?,
            Expr::Num(0.0),
            Expr::Num(0.0),
            0.0,
            n,
        ),
        "coupled" => ProblemSpec::new(
            "coupled",
            (0.0, 1.0, 0.5),
            alpha,
            0.7,
            p(
                "0.5*v^2 + y*w + 0.3*z*y + sin(x)*y_tau^2 + 0.5*(v_tau - y)^2 + cos(v)",
                VarSet::OUTER,
            )?,
            p("y^2*v + 0.5*w^2 + x*v", VarSet::INNER)?,
            p("0.2*x + 0.1", VarSet::HISTORY)?,
            0.8,
            n,
        ),
        "smooth" => ProblemSpec::new(
            "smooth",
            (0.0, 1.0, 0.5),
            alpha,
            1.0,
            p("0.5*v^2 + 0.5*y^2 - x*y", VarSet::OUTER)?,
            Expr::Num(0.0),
            Expr::Num(0.0),
            1.0,
            n,
        ),
        other => Err(Error::Unsupported(format!(
            "no built-in problem `{other}`; known: {}",
            CATALOG_NAMES.join(", ")
        ))),
    }
}

/// A sampled trajectory on `[a - tau, b]` with the history and terminal
/// value pinned.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    path: SampledPath,
}

impl Trajectory {
    pub fn path(&self) -> &SampledPath {
        &self.path
    }

    pub fn values(&self) -> &[f64] {
        self.path.values()
    }

    /// Overwrites the `k`-th free value (counting from the node after `a`).
    pub(crate) fn set_free(&mut self, k: usize, value: f64) {
        let i = self.path.grid().idx_a() + 1 + k;
        self.path.values_mut()[i] = value;
    }

    /// Values at the nodes strictly between `a` and `b`.
    pub fn interior(&self) -> &[f64] {
        let g = self.path.grid();
        &self.path.values()[g.idx_a() + 1..g.idx_b()]
    }
}

/// Assembles a trajectory from its free values strictly inside `(a, b)`.
pub fn make_trajectory(spec: &ProblemSpec, interior: &[f64]) -> Result<Trajectory> {
    let g = spec.grid();
    let expected = g.idx_b() - g.idx_a() - 1;
    if interior.len() != expected {
        return Err(Error::Length {
            expected,
            found: interior.len(),
        });
    }
    let mut values = Vec::with_capacity(g.len());
    for i in 0..=g.idx_a() {
        values.push(spec.phi(g.x(i))?);
    }
    values.extend_from_slice(interior);
    values.push(spec.y_b);
    Ok(Trajectory {
        path: SampledPath::new(*g, 0, values)?,
    })
}

/// Trajectory whose free values are `f(x)` at the interior nodes.
pub fn trajectory_from_fn(spec: &ProblemSpec, f: impl Fn(f64) -> f64) -> Result<Trajectory> {
    let g = spec.grid();
    let interior: Vec<f64> = g.interior().map(|i| f(g.x(i))).collect();
    make_trajectory(spec, &interior)
}

/// The straight line from `phi(a)` to `y_b`.
pub fn linear_interpolant(spec: &ProblemSpec) -> Result<Trajectory> {
    let start = spec.phi(spec.a)?;
    let (a, b, yb) = (spec.a, spec.b, spec.y_b);
    trajectory_from_fn(spec, |x| start + (yb - start) * (x - a) / (b - a))
}

/// True when `spec` is the built-in example for its `alpha`.
pub fn is_builtin_example(spec: &ProblemSpec) -> bool {
    builtin_example_n(spec.alpha, spec.n).is_ok_and(|ex| {
        ex.a == spec.a
            && ex.b == spec.b
            && ex.tau == spec.tau
            && ex.lagrangian == spec.lagrangian
            && ex.inner == spec.inner
            && ex.history == spec.history
            && ex.y_b == spec.y_b
            && spec.mode == Mode::Fractional
    })
}

/// The analytic minimizer of the built-in example: 0 on the history,
/// `x^(alpha+1)` on `[0, 2]`.
pub fn make_reference(spec: &ProblemSpec) -> Result<Trajectory> {
    if !is_builtin_example(spec) {
        return Err(Error::Unsupported(format!(
            "no analytic reference for problem `{}`",
            spec.label
        )));
    }
    let g = spec.grid();
    let p = spec.alpha + 1.0;
    let mut values: Vec<f64> = (0..g.len())
        .map(|i| {
            let x = g.x(i);
            if x <= 0.0 {
                0.0
            } else {
                x.powf(p)
            }
        })
        .collect();
    *values.last_mut().expect("non-empty grid") = spec.y_b;
    Ok(Trajectory {
        path: SampledPath::new(*g, 0, values)?,
    })
}
