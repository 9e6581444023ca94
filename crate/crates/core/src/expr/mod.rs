//! A small expression language for Lagrangians and history functions.
//!
//! Expressions are built from numeric literals, the variables of a
//! Lagrangian (`x, y, v, w, z, y_tau, v_tau`), the problem parameters
//! (`alpha, beta, tau`) and the constant `pi`, combined with
//! `+ - * / ^`, unary minus and one-argument function calls.
//!
//! ```
//! use fracvar::expr::{parse, Env, VarSet, Var};
//!
//! let e = parse("(y - x^(alpha+1))^2", VarSet::INNER).unwrap();
//! let d = e.differentiate(Var::Y).unwrap();
//! assert_eq!(d.to_string(), "2 * (y - x ^ (alpha + 1))");
//!
//! let env = Env::new().with_var(Var::X, 1.0).with_var(Var::Y, 3.0).with_param("alpha", 0.5);
//! assert_eq!(e.eval(&env).unwrap(), 4.0);
//! ```

mod diff;
mod parse;

use std::fmt;

use crate::error::{Error, Result};
use crate::fracops::gamma;

pub use parse::parse;

/// Variables an expression may depend on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    X,
    Y,
    V,
    W,
    Z,
    YTau,
    VTau,
}

impl Var {
    pub const ALL: [Var; 7] = [Var::X, Var::Y, Var::V, Var::W, Var::Z, Var::YTau, Var::VTau];

    pub fn name(self) -> &'static str {
        match self {
            Var::X => "x",
            Var::Y => "y",
            Var::V => "v",
            Var::W => "w",
            Var::Z => "z",
            Var::YTau => "y_tau",
            Var::VTau => "v_tau",
        }
    }

    pub fn from_name(name: &str) -> Option<Var> {
        Var::ALL.into_iter().find(|v| v.name() == name)
    }

    fn bit(self) -> u8 {
        1 << self as u8
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A set of admissible variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct VarSet(u8);

impl VarSet {
    /// Variables of the outer Lagrangian `L`.
    pub const OUTER: VarSet = VarSet(0b111_1111);
    /// Variables of the inner Lagrangian `l`.
    pub const INNER: VarSet = VarSet(0b000_1111);
    /// The history function depends on `x` only.
    pub const HISTORY: VarSet = VarSet(0b000_0001);

    pub fn of(vars: &[Var]) -> VarSet {
        VarSet(vars.iter().fold(0, |acc, v| acc | v.bit()))
    }

    pub fn contains(self, v: Var) -> bool {
        self.0 & v.bit() != 0
    }

    pub fn iter(self) -> impl Iterator<Item = Var> {
        Var::ALL.into_iter().filter(move |v| self.contains(*v))
    }
}

/// Named constants: problem parameters and `pi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Param {
    Alpha,
    Beta,
    Tau,
    Pi,
}

impl Param {
    pub fn name(self) -> &'static str {
        match self {
            Param::Alpha => "alpha",
            Param::Beta => "beta",
            Param::Tau => "tau",
            Param::Pi => "pi",
        }
    }

    pub fn from_name(name: &str) -> Option<Param> {
        [Param::Alpha, Param::Beta, Param::Tau, Param::Pi]
            .into_iter()
            .find(|p| p.name() == name)
    }
}

/// One-argument functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
    Abs,
    Gamma,
    Digamma,
    /// `max(u, 0)`
    Pospart,
    /// Heaviside step, 1 for `u > 0`, else 0.
    Step,
    /// Sign of `u`; undefined at 0.
    Sign,
}

impl Func {
    const ALL: [Func; 10] = [
        Func::Sin,
        Func::Cos,
        Func::Exp,
        Func::Ln,
        Func::Abs,
        Func::Gamma,
        Func::Digamma,
        Func::Pospart,
        Func::Step,
        Func::Sign,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Abs => "abs",
            Func::Gamma => "gamma",
            Func::Digamma => "digamma",
            Func::Pospart => "pospart",
            Func::Step => "step",
            Func::Sign => "sign",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

/// Expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Param(Param),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Values for variables and parameters.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Env {
    vars: [Option<f64>; 7],
    alpha: Option<f64>,
    beta: Option<f64>,
    tau: Option<f64>,
}

impl Env {
    pub fn new() -> Self {
        Env::default()
    }

    pub fn with_var(mut self, v: Var, value: f64) -> Self {
        self.set_var(v, value);
        self
    }

    pub fn set_var(&mut self, v: Var, value: f64) {
        self.vars[v as usize] = Some(value);
    }

    /// Sets a variable or parameter by name.
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        if let Some(v) = Var::from_name(name) {
            self.set_var(v, value);
            return Ok(());
        }
        match Param::from_name(name) {
            Some(Param::Alpha) => self.alpha = Some(value),
            Some(Param::Beta) => self.beta = Some(value),
            Some(Param::Tau) => self.tau = Some(value),
            _ => {
                return Err(Error::UnknownIdentifier {
                    name: name.to_string(),
                    offset: 0,
                })
            }
        }
        Ok(())
    }

    /// Sets a parameter by name; panics on unknown names.
    pub fn with_param(mut self, name: &str, value: f64) -> Self {
        self.set(name, value).expect("unknown parameter");
        self
    }

    pub fn var(&self, v: Var) -> Option<f64> {
        self.vars[v as usize]
    }

    pub fn param(&self, p: Param) -> Option<f64> {
        match p {
            Param::Alpha => self.alpha,
            Param::Beta => self.beta,
            Param::Tau => self.tau,
            Param::Pi => Some(std::f64::consts::PI),
        }
    }
}

fn eval_error(e: &Expr, message: impl Into<String>) -> Error {
    Error::Eval {
        expr: e.to_string(),
        message: message.into(),
    }
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    /// True when the expression is the literal zero.
    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Num(v) if *v == 0.0)
    }

    pub fn depends_on(&self, var: Var) -> bool {
        match self {
            Expr::Num(_) | Expr::Param(_) => false,
            Expr::Var(v) => *v == var,
            Expr::Neg(u) | Expr::Call(_, u) => u.depends_on(var),
            Expr::Bin(_, l, r) => l.depends_on(var) || r.depends_on(var),
        }
    }

    /// Variables occurring in the expression.
    pub fn free_vars(&self) -> VarSet {
        VarSet::of(&Var::ALL.into_iter().filter(|v| self.depends_on(*v)).collect::<Vec<_>>())
    }

    /// True when no variable occurs, so the value is fixed once parameters are.
    pub fn is_constant(&self) -> bool {
        self.free_vars() == VarSet::default()
    }

    /// Nesting depth of operator nodes (calls and leaves do not count).
    pub fn depth(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Var(_) | Expr::Param(_) => 0,
            Expr::Call(_, u) => u.depth(),
            Expr::Neg(u) => 1 + u.depth(),
            Expr::Bin(_, l, r) => 1 + l.depth().max(r.depth()),
        }
    }

    /// Visits every node, parents before children.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Neg(u) | Expr::Call(_, u) => u.walk(f),
            Expr::Bin(_, l, r) => {
                l.walk(f);
                r.walk(f);
            }
            _ => {}
        }
    }

    /// Substitutes the parameters bound in `env` and folds every
    /// variable-free subtree that evaluates cleanly into a literal.
    /// Subtrees whose evaluation fails are kept, so the error still
    /// surfaces at evaluation time.
    pub fn bind_params(&self, env: &Env) -> Expr {
        let out = match self {
            Expr::Num(_) | Expr::Var(_) => return self.clone(),
            Expr::Param(p) => return env.param(*p).map_or_else(|| self.clone(), Expr::Num),
            Expr::Neg(u) => Expr::Neg(Box::new(u.bind_params(env))),
            Expr::Call(f, u) => Expr::Call(*f, Box::new(u.bind_params(env))),
            Expr::Bin(op, l, r) => {
                Expr::Bin(*op, Box::new(l.bind_params(env)), Box::new(r.bind_params(env)))
            }
        };
        let literal_children = match &out {
            Expr::Neg(u) | Expr::Call(_, u) => matches!(**u, Expr::Num(_)),
            Expr::Bin(_, l, r) => matches!(**l, Expr::Num(_)) && matches!(**r, Expr::Num(_)),
            _ => false,
        };
        if literal_children {
            if let Ok(v) = out.eval(&Env::new()) {
                return Expr::Num(v);
            }
        }
        out
    }

    pub fn eval(&self, env: &Env) -> Result<f64> {
        match self {
            Expr::Num(v) => Ok(*v),
            Expr::Var(v) => env
                .var(*v)
                .ok_or_else(|| eval_error(self, format!("variable `{v}` is unbound"))),
            Expr::Param(p) => env
                .param(*p)
                .ok_or_else(|| eval_error(self, format!("parameter `{}` is unbound", p.name()))),
            Expr::Neg(u) => Ok(-u.eval(env)?),
            Expr::Bin(op, l, r) => {
                let a = l.eval(env)?;
                let b = r.eval(env)?;
                let out = match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(eval_error(self, "division by zero"));
                        }
                        a / b
                    }
                    BinOp::Pow => pow(a, b).map_err(|m| eval_error(self, m))?,
                };
                finite(self, out)
            }
            Expr::Call(func, u) => {
                let a = u.eval(env)?;
                let out = match func {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Exp => a.exp(),
                    Func::Ln => {
                        if a <= 0.0 {
                            return Err(eval_error(self, "logarithm of a non-positive number"));
                        }
                        a.ln()
                    }
                    Func::Abs => a.abs(),
                    Func::Gamma | Func::Digamma => {
                        if a <= 0.0 && a == a.floor() {
                            return Err(eval_error(self, "pole at a non-positive integer"));
                        }
                        if *func == Func::Gamma {
                            gamma(a)
                        } else {
                            statrs::function::gamma::digamma(a)
                        }
                    }
                    Func::Pospart => a.max(0.0),
                    Func::Step => {
                        if a > 0.0 {
                            1.0
                        } else {
                            0.0
                        }
                    }
                    Func::Sign => {
                        if a == 0.0 {
                            return Err(eval_error(self, "sign is undefined at 0"));
                        }
                        a.signum()
                    }
                };
                finite(self, out)
            }
        }
    }
}

fn pow(a: f64, b: f64) -> std::result::Result<f64, &'static str> {
    if a == 0.0 && b < 0.0 {
        return Err("zero raised to a negative power");
    }
    if a < 0.0 && b != b.trunc() {
        return Err("negative base raised to a fractional power");
    }
    if b == 2.0 {
        Ok(a * a)
    } else {
        Ok(a.powf(b))
    }
}

fn finite(e: &Expr, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(eval_error(e, format!("non-finite result {v}")))
    }
}

// Binding strength used when printing.
fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
        Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
        Expr::Neg(_) => 3,
        Expr::Num(v) if *v < 0.0 => 3,
        Expr::Bin(BinOp::Pow, ..) => 4,
        _ => 5,
    }
}

struct Wrapped<'a>(&'a Expr, bool);

impl fmt::Display for Wrapped<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.1 {
            write!(f, "({})", self.0)
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) if *v < 0.0 => write!(f, "-{}", -v),
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(v) => f.write_str(v.name()),
            Expr::Param(p) => f.write_str(p.name()),
            Expr::Call(func, u) => write!(f, "{}({u})", func.name()),
            Expr::Neg(u) => write!(f, "-{}", Wrapped(u, precedence(u) < 3)),
            Expr::Bin(op, l, r) => {
                let (lp, rp) = (precedence(l), precedence(r));
                let (wrap_l, wrap_r) = match op {
                    BinOp::Add => (false, rp <= 1),
                    BinOp::Sub => (false, rp <= 1),
                    BinOp::Mul | BinOp::Div => (lp < 2, rp <= 2),
                    BinOp::Pow => (lp < 5, rp < 3),
                };
                write!(f, "{} {} {}", Wrapped(l, wrap_l), op.symbol(), Wrapped(r, wrap_r))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env_x(x: f64) -> Env {
        Env::new().with_var(Var::X, x)
    }

    #[test]
    fn evaluates_square() {
        let e = parse("x^2", VarSet::HISTORY).unwrap();
        assert_eq!(e.eval(&env_x(3.0)).unwrap(), 9.0);
    }

    #[test]
    fn evaluates_gamma_of_parameter() {
        let e = parse("gamma(alpha+2)", VarSet::HISTORY).unwrap();
        let v = e.eval(&Env::new().with_param("alpha", 0.5)).unwrap();
        assert!((v - 1.329_340_388_179_137).abs() < 1e-14);
    }

    #[test]
    fn evaluation_errors_name_subexpression() {
        let e = parse("1 + 1/x", VarSet::HISTORY).unwrap();
        match e.eval(&env_x(0.0)) {
            Err(Error::Eval { expr, .. }) => assert_eq!(expr, "1 / x"),
            other => panic!("{other:?}"),
        }
        for (text, x) in [("ln(x)", 0.0), ("x^-1", 0.0), ("gamma(x)", -2.0), ("x^0.5", -1.0)] {
            let e = parse(text, VarSet::HISTORY).unwrap();
            assert!(matches!(e.eval(&env_x(x)), Err(Error::Eval { .. })), "{text}");
        }
    }

    #[test]
    fn unbound_names_are_errors() {
        let e = parse("y + alpha", VarSet::INNER).unwrap();
        assert!(e.eval(&Env::new().with_var(Var::Y, 1.0)).is_err());
        assert!(e.eval(&Env::new().with_param("alpha", 1.0)).is_err());
    }

    #[test]
    fn pospart_guards_fractional_power() {
        let e = parse("pospart(x - 1)^alpha", VarSet::HISTORY).unwrap();
        let env = |x| env_x(x).with_param("alpha", 0.5);
        assert_eq!(e.eval(&env(0.5)).unwrap(), 0.0);
        assert!((e.eval(&env(1.25)).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn depth_counts_operator_nesting() {
        let e = parse("(v - gamma(alpha+2)*x)^2", VarSet::of(&[Var::X, Var::V])).unwrap();
        assert_eq!(e.depth(), 4);
        assert_eq!(parse("x", VarSet::HISTORY).unwrap().depth(), 0);
    }

    #[test]
    fn printing_respects_precedence() {
        for (text, shown) in [
            ("-x^2", "-x ^ 2"),
            ("(-x)^2", "(-x) ^ 2"),
            ("x - (x - 1)", "x - (x - 1)"),
            ("x / (x * 2)", "x / (x * 2)"),
            ("2^3^x", "2 ^ 3 ^ x"),
            ("(2^3)^x", "(2 ^ 3) ^ x"),
            ("-(x + 1)", "-(x + 1)"),
        ] {
            assert_eq!(parse(text, VarSet::HISTORY).unwrap().to_string(), shown);
        }
    }

    #[test]
    fn binding_folds_parameter_subtrees() {
        let e = parse("(v - gamma(alpha+2)*x)^2 + gamma(-1 + 0*alpha)", VarSet::OUTER).unwrap();
        let env = Env::new().with_param("alpha", 0.5);
        let bound = e.bind_params(&env);
        assert!(bound.to_string().starts_with("(v - 1.32934038817914"), "{bound}");
        // the pole stays unevaluated and still errors
        assert!(bound.eval(&env.with_var(Var::V, 1.0).with_var(Var::X, 1.0)).is_err());
        let f = parse("sin(x) * alpha + y", VarSet::OUTER).unwrap();
        let full = env.with_var(Var::X, 0.3).with_var(Var::Y, 2.0);
        assert_eq!(f.bind_params(&env).eval(&full).unwrap(), f.eval(&full).unwrap());
    }
}
