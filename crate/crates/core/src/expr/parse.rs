use super::{BinOp, Expr, Func, Param, Var, VarSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
    End,
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            '+' | '-' | '*' | '/' | '^' => {
                i += 1;
                Tok::Op(c)
            }
            '(' => {
                i += 1;
                Tok::LParen
            }
            ')' => {
                i += 1;
                Tok::RParen
            }
            ',' => {
                i += 1;
                Tok::Comma
            }
            _ if c.is_ascii_digit() || c == '.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let lit = &text[start..i];
                let v: f64 = lit.parse().map_err(|_| Error::Syntax {
                    offset: start,
                    message: format!("malformed number `{lit}`"),
                })?;
                Tok::Num(v)
            }
            _ if c.is_ascii_alphabetic() || c == '_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                Tok::Ident(text[start..i].to_string())
            }
            _ => {
                let ch = text[start..].chars().next().unwrap_or(c);
                return Err(Error::Syntax {
                    offset: start,
                    message: format!("unexpected character `{ch}`"),
                });
            }
        };
        out.push((tok, start));
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    allowed: VarSet,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn syntax(&self, message: impl Into<String>) -> Error {
        Error::Syntax {
            offset: self.offset(),
            message: message.into(),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Tok::Op(c @ ('+' | '-')) = *self.peek() {
            self.bump();
            let rhs = self.term()?;
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Tok::Op(c @ ('*' | '/')) = *self.peek() {
            self.bump();
            let rhs = self.unary()?;
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if *self.peek() == Tok::Op('-') {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if *self.peek() == Tok::Op('^') {
            self.bump();
            let exp = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let (tok, offset) = self.bump();
        match tok {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            Tok::Ident(name) => self.identifier(name, offset),
            Tok::End => Err(Error::Syntax {
                offset,
                message: "unexpected end of input".into(),
            }),
            other => Err(Error::Syntax {
                offset,
                message: format!("unexpected token {}", describe(&other)),
            }),
        }
    }

    fn identifier(&mut self, name: String, offset: usize) -> Result<Expr> {
        if let Some(func) = Func::from_name(&name) {
            if *self.peek() != Tok::LParen {
                return Err(Error::Syntax {
                    offset,
                    message: format!("function `{name}` must be called with parentheses"),
                });
            }
            self.bump();
            let mut args = vec![self.expr()?];
            while *self.peek() == Tok::Comma {
                self.bump();
                args.push(self.expr()?);
            }
            self.expect_rparen()?;
            if args.len() != 1 {
                return Err(Error::Arity {
                    name,
                    expected: 1,
                    found: args.len(),
                    offset,
                });
            }
            return Ok(Expr::Call(func, Box::new(args.pop().expect("one argument"))));
        }
        let leaf = if let Some(p) = Param::from_name(&name) {
            Expr::Param(p)
        } else {
            match Var::from_name(&name) {
                Some(v) if self.allowed.contains(v) => Expr::Var(v),
                _ => return Err(Error::UnknownIdentifier { name, offset }),
            }
        };
        if *self.peek() == Tok::LParen {
            return Err(self.syntax(format!("`{name}` is not a function")));
        }
        Ok(leaf)
    }

    fn expect_rparen(&mut self) -> Result<()> {
        if *self.peek() == Tok::RParen {
            self.bump();
            Ok(())
        } else {
            Err(self.syntax(format!("expected `)`, found {}", describe(self.peek()))))
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Op(c) => format!("`{c}`"),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Comma => "`,`".into(),
        Tok::End => "end of input".into(),
    }
}

/// Parses `text` admitting only the variables in `allowed`.
///
/// Precedence from loosest to tightest: `+ -`, `* /`, unary `-`, `^`
/// (right associative), then calls and atoms.
pub fn parse(text: &str, allowed: VarSet) -> Result<Expr> {
    if text.trim().is_empty() {
        return Err(Error::Syntax {
            offset: 0,
            message: "empty expression".into(),
        });
    }
    let mut p = Parser {
        toks: tokenize(text)?,
        pos: 0,
        allowed,
    };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.syntax(format!("unexpected {}", describe(p.peek()))));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Env;
    use proptest::prelude::*;

    #[test]
    fn example_lagrangian_term() {
        let e = parse("(v - gamma(alpha+2)*x)^2", VarSet::of(&[Var::X, Var::V])).unwrap();
        assert!(matches!(e, Expr::Bin(BinOp::Pow, _, _)));
    }

    #[test]
    fn unknown_identifier_is_named() {
        match parse("y_tau + q", VarSet::OUTER) {
            Err(Error::UnknownIdentifier { name, offset }) => {
                assert_eq!(name, "q");
                assert_eq!(offset, 8);
            }
            other => panic!("{other:?}"),
        }
        // variables outside the context are unknown too
        assert!(matches!(
            parse("x + z", VarSet::INNER),
            Err(Error::UnknownIdentifier { .. })
        ));
    }

    #[test]
    fn constant_arithmetic() {
        let e = parse("2*(3+4)", VarSet::HISTORY).unwrap();
        assert!(e.is_constant());
        assert_eq!(e.eval(&Env::new()).unwrap(), 14.0);
    }

    #[test]
    fn precedence_and_associativity() {
        let ev = |s: &str| parse(s, VarSet::HISTORY).unwrap().eval(&Env::new()).unwrap();
        assert_eq!(ev("2^3^2"), 512.0);
        assert_eq!(ev("-2^2"), -4.0);
        assert_eq!(ev("2^-1"), 0.5);
        assert_eq!(ev("8/4/2"), 1.0);
        assert_eq!(ev("1-2-3"), -4.0);
        assert_eq!(ev("2*-3"), -6.0);
        assert_eq!(ev(" 1.5e1 + .5 "), 15.5);
    }

    #[test]
    fn syntax_errors_carry_offsets() {
        match parse("x + * 2", VarSet::HISTORY) {
            Err(Error::Syntax { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("{other:?}"),
        }
        match parse("(x + 1", VarSet::HISTORY) {
            Err(Error::Syntax { offset, .. }) => assert_eq!(offset, 6),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse("x $ 1", VarSet::HISTORY), Err(Error::Syntax { offset: 2, .. })));
        assert!(matches!(parse("   ", VarSet::HISTORY), Err(Error::Syntax { .. })));
        assert!(matches!(parse("sin x", VarSet::HISTORY), Err(Error::Syntax { .. })));
        assert!(matches!(parse("x(2)", VarSet::HISTORY), Err(Error::Syntax { .. })));
    }

    #[test]
    fn arity_errors() {
        match parse("sin(x, 2)", VarSet::HISTORY) {
            Err(Error::Arity {
                name,
                expected,
                found,
                ..
            }) => assert_eq!((name.as_str(), expected, found), ("sin", 1, 2)),
            other => panic!("{other:?}"),
        }
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (0u32..1000).prop_map(|k| Expr::Num(k as f64 / 8.0)),
            prop::sample::select(Var::ALL.to_vec()).prop_map(Expr::Var),
            Just(Expr::Param(Param::Alpha)),
            Just(Expr::Param(Param::Pi)),
        ];
        leaf.prop_recursive(5, 40, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
                (
                    prop::sample::select(vec![BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Pow]),
                    inner.clone(),
                    inner.clone()
                )
                    .prop_map(|(op, l, r)| Expr::Bin(op, Box::new(l), Box::new(r))),
                (prop::sample::select(Func::ALL.to_vec()), inner)
                    .prop_map(|(f, e)| Expr::Call(f, Box::new(e))),
            ]
        })
    }

    proptest! {
        #[test]
        fn printed_trees_reparse_identically(e in arb_expr()) {
            let text = e.to_string();
            let back = parse(&text, VarSet::OUTER).unwrap();
            prop_assert_eq!(back, e, "printed as {}", text);
        }
    }
}
