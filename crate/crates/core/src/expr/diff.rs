//! Symbolic partial derivatives with literal constant folding.

use super::{BinOp, Expr, Func, Var};
use crate::error::{Error, Result};

fn bin(op: BinOp, l: Expr, r: Expr) -> Expr {
    Expr::Bin(op, Box::new(l), Box::new(r))
}

fn call(f: Func, u: Expr) -> Expr {
    Expr::Call(f, Box::new(u))
}

fn lit(e: &Expr) -> Option<f64> {
    match e {
        Expr::Num(v) => Some(*v),
        _ => None,
    }
}

pub(crate) fn add(l: Expr, r: Expr) -> Expr {
    match (lit(&l), lit(&r)) {
        (Some(a), Some(b)) => Expr::Num(a + b),
        (Some(0.0), _) => r,
        (_, Some(0.0)) => l,
        _ => bin(BinOp::Add, l, r),
    }
}

pub(crate) fn sub(l: Expr, r: Expr) -> Expr {
    match (lit(&l), lit(&r)) {
        (Some(a), Some(b)) => Expr::Num(a - b),
        (_, Some(0.0)) => l,
        (Some(0.0), _) => neg(r),
        _ => bin(BinOp::Sub, l, r),
    }
}

pub(crate) fn mul(l: Expr, r: Expr) -> Expr {
    match (lit(&l), lit(&r)) {
        (Some(a), Some(b)) => Expr::Num(a * b),
        (Some(0.0), _) | (_, Some(0.0)) => Expr::Num(0.0),
        (Some(1.0), _) => r,
        (_, Some(1.0)) => l,
        (Some(-1.0), _) => neg(r),
        (_, Some(-1.0)) => neg(l),
        _ => bin(BinOp::Mul, l, r),
    }
}

pub(crate) fn div(l: Expr, r: Expr) -> Expr {
    match (lit(&l), lit(&r)) {
        (Some(a), Some(b)) if b != 0.0 => Expr::Num(a / b),
        (Some(0.0), _) => Expr::Num(0.0),
        (_, Some(1.0)) => l,
        _ => bin(BinOp::Div, l, r),
    }
}

pub(crate) fn pow(base: Expr, exp: Expr) -> Expr {
    match (lit(&base), lit(&exp)) {
        (_, Some(0.0)) => Expr::Num(1.0),
        (_, Some(1.0)) => base,
        (Some(b), Some(e)) if b.powf(e).is_finite() && (b >= 0.0 || e == e.trunc()) => {
            Expr::Num(b.powf(e))
        }
        _ => bin(BinOp::Pow, base, exp),
    }
}

pub(crate) fn neg(u: Expr) -> Expr {
    match u {
        Expr::Num(v) => Expr::Num(-v),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

impl Expr {
    /// Partial derivative with respect to `var`.
    ///
    /// Sub-trees not containing `var` differentiate to the literal `0`, so a
    /// term whose partial derivative is identically zero is recognisable
    /// with [`Expr::is_zero`].
    pub fn differentiate(&self, var: Var) -> Result<Expr> {
        if !self.depends_on(var) {
            return Ok(Expr::Num(0.0));
        }
        Ok(match self {
            Expr::Num(_) | Expr::Param(_) => Expr::Num(0.0),
            Expr::Var(v) => Expr::Num(if *v == var { 1.0 } else { 0.0 }),
            Expr::Neg(u) => neg(u.differentiate(var)?),
            Expr::Bin(op, l, r) => {
                let (l, r) = (l.as_ref(), r.as_ref());
                match op {
                    BinOp::Add => add(l.differentiate(var)?, r.differentiate(var)?),
                    BinOp::Sub => sub(l.differentiate(var)?, r.differentiate(var)?),
                    BinOp::Mul => add(
                        mul(l.differentiate(var)?, r.clone()),
                        mul(l.clone(), r.differentiate(var)?),
                    ),
                    BinOp::Div => sub(
                        div(l.differentiate(var)?, r.clone()),
                        div(mul(l.clone(), r.differentiate(var)?), pow(r.clone(), Expr::Num(2.0))),
                    ),
                    BinOp::Pow => {
                        let dl = l.differentiate(var)?;
                        if !r.depends_on(var) {
                            // d(u^e) = e u^(e-1) u'
                            let lower = pow(l.clone(), sub(r.clone(), Expr::Num(1.0)));
                            mul(mul(r.clone(), lower), dl)
                        } else {
                            // d(u^e) = u^e (e' ln u + e u'/u)
                            let dr = r.differentiate(var)?;
                            let log_term = mul(dr, call(Func::Ln, l.clone()));
                            let base_term = div(mul(r.clone(), dl), l.clone());
                            mul(self.clone(), add(log_term, base_term))
                        }
                    }
                }
            }
            Expr::Call(f, u) => {
                let du = u.differentiate(var)?;
                let u = u.as_ref().clone();
                let outer = match f {
                    Func::Sin => call(Func::Cos, u),
                    Func::Cos => neg(call(Func::Sin, u)),
                    Func::Exp => call(Func::Exp, u),
                    Func::Ln => div(Expr::Num(1.0), u),
                    Func::Abs => call(Func::Sign, u),
                    Func::Gamma => mul(call(Func::Gamma, u.clone()), call(Func::Digamma, u)),
                    Func::Pospart => call(Func::Step, u),
                    Func::Step | Func::Sign => Expr::Num(0.0),
                    Func::Digamma => {
                        return Err(Error::Unsupported(format!(
                            "derivative of digamma({u}) with respect to {var}"
                        )))
                    }
                };
                mul(outer, du)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, Env, VarSet};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p(s: &str) -> Expr {
        parse(s, VarSet::OUTER).unwrap()
    }

    #[test]
    fn inner_lagrangian_partial() {
        let d = p("(y - x^(alpha+1))^2").differentiate(Var::Y).unwrap();
        assert_eq!(d, p("2*(y - x^(alpha+1))"));
    }

    #[test]
    fn linear_z_term() {
        let l = p("(v - gamma(alpha+2)*x)^2 + z + (v_tau - (alpha+1)*pospart(x-1)^alpha)^2");
        assert_eq!(l.differentiate(Var::Z).unwrap(), Expr::Num(1.0));
        assert!(p("(v - x)^2 + z").differentiate(Var::VTau).unwrap().is_zero());
    }

    #[test]
    fn variable_free_derivative_is_literal_zero() {
        for s in ["gamma(alpha + 2) * pi", "3", "sin(x) * alpha"] {
            assert_eq!(p(s).differentiate(Var::Y).unwrap(), Expr::Num(0.0));
        }
    }

    #[test]
    fn abs_differentiates_to_sign() {
        let d = p("abs(y)").differentiate(Var::Y).unwrap();
        assert_eq!(d, p("sign(y)"));
        assert!(d.eval(&Env::new().with_var(Var::Y, 0.0)).is_err());
        assert_eq!(d.eval(&Env::new().with_var(Var::Y, -2.0)).unwrap(), -1.0);
    }

    #[test]
    fn folding_collapses_literals() {
        assert_eq!(add(Expr::Num(2.0), Expr::Num(3.0)), Expr::Num(5.0));
        assert_eq!(mul(Expr::Num(0.0), p("x")), Expr::Num(0.0));
        assert_eq!(mul(Expr::Num(1.0), p("x")), p("x"));
        assert_eq!(pow(p("x"), Expr::Num(1.0)), p("x"));
        assert_eq!(p("y^3").differentiate(Var::Y).unwrap(), p("3*y^2"));
    }

    // Catalog of expressions and boxes where they are smooth.
    const CATALOG: &[(&str, f64, f64)] = &[
        ("(v - gamma(alpha+2)*x)^2 + z + (v_tau - (alpha+1)*pospart(x-1)^alpha)^2", 1.05, 2.0),
        ("(y - x^(alpha+1))^2", 0.1, 2.0),
        ("sin(y*v) + exp(w/3) - ln(z) * y_tau", 0.2, 2.0),
        ("y^v + x^w", 0.2, 2.0),
        ("v_tau^3 / (1 + y^2) - cos(x*y)*w", -2.0, 2.0),
        ("abs(y - 5) * gamma(w + 1)", 0.1, 3.0),
        ("pospart(y - 7)^2 + y*z*w", 0.1, 3.0),
    ];

    #[test]
    fn derivatives_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let step = 1e-6;
        for &(text, lo, hi) in CATALOG {
            let e = p(text);
            for _ in 0..100 {
                let mut env = Env::new().with_param("alpha", 0.5).with_param("beta", 1.2);
                for v in Var::ALL {
                    env.set_var(v, rng.random_range(lo..hi));
                }
                for v in Var::ALL {
                    let d = e.differentiate(v).unwrap().eval(&env).unwrap();
                    let at = |t: f64| {
                        let mut shifted = env;
                        shifted.set_var(v, env.var(v).unwrap() + t);
                        e.eval(&shifted).unwrap()
                    };
                    let fd = (at(step) - at(-step)) / (2.0 * step);
                    let scale = d.abs().max(1.0);
                    assert!(
                        (fd - d).abs() <= 1e-6 * scale,
                        "{text} d/d{v}: symbolic {d}, fd {fd}"
                    );
                }
            }
        }
    }
}
