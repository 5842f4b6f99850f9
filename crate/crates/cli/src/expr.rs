//! Arithmetic expression language for candidate components. Grammar, in
//! decreasing precedence: `^` (right associative), unary `-`, `* /`, `+ -`;
//! atoms are real literals, identifiers, single-argument calls of
//! sqrt sin cos exp log abs, and parenthesized expressions. So
//! `-q1^2` reads as `-(q1^2)` and `a^b^c` as `a^(b^c)`.
//!
//! Parsing produces a name-carrying AST; `resolve` binds identifiers to
//! coordinate slots or parameter constants, after which evaluation is
//! generic over the differentiation scalar.

use std::collections::BTreeMap;
use std::fmt;

use hjt_core::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sqrt,
    Sin,
    Cos,
    Exp,
    Log,
    Abs,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Abs => "abs",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "sqrt" => Func::Sqrt,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "abs" => Func::Abs,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Ident(String),
    Neg(Box<Expr>),
    Bin(Op, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Position-annotated parse failure (1-based line and column).
#[derive(Clone, Debug, PartialEq)]
pub struct SyntaxError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "syntax error at {}:{}: {}", self.line, self.col, self.msg)
    }
}

impl std::error::Error for SyntaxError {}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { src: src.as_bytes(), pos: 0, line: 1, col: 1 }
    }

    fn err(&self, at: (usize, usize), msg: impl Into<String>) -> SyntaxError {
        SyntaxError { line: at.0, col: at.1, msg: msg.into() }
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.src.get(self.pos).copied()?;
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn tokens(mut self) -> Result<Vec<(Tok, (usize, usize))>, SyntaxError> {
        let mut out = Vec::new();
        while let Some(&c) = self.src.get(self.pos) {
            let at = (self.line, self.col);
            match c {
                b' ' | b'\t' | b'\r' | b'\n' => {
                    self.bump();
                }
                b'+' => {
                    self.bump();
                    out.push((Tok::Plus, at));
                }
                b'-' => {
                    self.bump();
                    out.push((Tok::Minus, at));
                }
                b'*' => {
                    self.bump();
                    out.push((Tok::Star, at));
                }
                b'/' => {
                    self.bump();
                    out.push((Tok::Slash, at));
                }
                b'^' => {
                    self.bump();
                    out.push((Tok::Caret, at));
                }
                b'(' => {
                    self.bump();
                    out.push((Tok::LParen, at));
                }
                b')' => {
                    self.bump();
                    out.push((Tok::RParen, at));
                }
                b'0'..=b'9' | b'.' => {
                    let start = self.pos;
                    while matches!(self.src.get(self.pos), Some(b'0'..=b'9') | Some(b'.')) {
                        self.bump();
                    }
                    if matches!(self.src.get(self.pos), Some(b'e') | Some(b'E')) {
                        let mark = self.pos;
                        self.bump();
                        if matches!(self.src.get(self.pos), Some(b'+') | Some(b'-')) {
                            self.bump();
                        }
                        if matches!(self.src.get(self.pos), Some(b'0'..=b'9')) {
                            while matches!(self.src.get(self.pos), Some(b'0'..=b'9')) {
                                self.bump();
                            }
                        } else {
                            // not an exponent: roll back to treat `e` as the
                            // start of the next identifier
                            self.pos = mark;
                        }
                    }
                    let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                    let v: f64 = text
                        .parse()
                        .map_err(|_| self.err(at, format!("bad number literal `{}`", text)))?;
                    out.push((Tok::Num(v), at));
                }
                b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                    let start = self.pos;
                    while matches!(
                        self.src.get(self.pos),
                        Some(b'a'..=b'z') | Some(b'A'..=b'Z') | Some(b'0'..=b'9') | Some(b'_')
                    ) {
                        self.bump();
                    }
                    let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                    out.push((Tok::Ident(text.to_string()), at));
                }
                other => {
                    return Err(self.err(at, format!("unexpected character `{}`", other as char)));
                }
            }
        }
        Ok(out)
    }
}

struct Parser {
    toks: Vec<(Tok, (usize, usize))>,
    pos: usize,
    end: (usize, usize),
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn here(&self) -> (usize, usize) {
        self.toks.get(self.pos).map(|(_, at)| *at).unwrap_or(self.end)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn err(&self, msg: impl Into<String>) -> SyntaxError {
        let (line, col) = self.here();
        SyntaxError { line, col, msg: msg.into() }
    }

    fn expr(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.next();
                    let rhs = self.term()?;
                    lhs = Expr::Bin(Op::Add, Box::new(lhs), Box::new(rhs));
                }
                Some(Tok::Minus) => {
                    self.next();
                    let rhs = self.term()?;
                    lhs = Expr::Bin(Op::Sub, Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.next();
                    let rhs = self.unary()?;
                    lhs = Expr::Bin(Op::Mul, Box::new(lhs), Box::new(rhs));
                }
                Some(Tok::Slash) => {
                    self.next();
                    let rhs = self.unary()?;
                    lhs = Expr::Bin(Op::Div, Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, SyntaxError> {
        if matches!(self.peek(), Some(Tok::Minus)) {
            self.next();
            let inner = self.unary()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, SyntaxError> {
        let base = self.atom()?;
        if matches!(self.peek(), Some(Tok::Caret)) {
            self.next();
            let exp = self.exponent()?;
            return Ok(Expr::Bin(Op::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    /// Right-hand side of `^`: right associative, unary minus admitted.
    fn exponent(&mut self) -> Result<Expr, SyntaxError> {
        if matches!(self.peek(), Some(Tok::Minus)) {
            self.next();
            let inner = self.exponent()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn atom(&mut self) -> Result<Expr, SyntaxError> {
        match self.next() {
            Some(Tok::Num(v)) => Ok(Expr::Num(v)),
            Some(Tok::Ident(name)) => {
                if matches!(self.peek(), Some(Tok::LParen)) {
                    let func = Func::from_name(&name)
                        .ok_or_else(|| self.err(format!("unknown function `{}`", name)))?;
                    self.next();
                    let arg = self.expr()?;
                    match self.next() {
                        Some(Tok::RParen) => Ok(Expr::Call(func, Box::new(arg))),
                        _ => Err(self.err("expected `)`")),
                    }
                } else {
                    Ok(Expr::Ident(name))
                }
            }
            Some(Tok::LParen) => {
                let inner = self.expr()?;
                match self.next() {
                    Some(Tok::RParen) => Ok(inner),
                    _ => Err(self.err("expected `)`")),
                }
            }
            Some(t) => Err(SyntaxError {
                line: self.toks[self.pos - 1].1 .0,
                col: self.toks[self.pos - 1].1 .1,
                msg: format!("unexpected token `{:?}`", t),
            }),
            None => Err(self.err("unexpected end of expression")),
        }
    }
}

pub fn parse(src: &str) -> Result<Expr, SyntaxError> {
    let mut end = (1, 1);
    for c in src.chars() {
        if c == '\n' {
            end.0 += 1;
            end.1 = 1;
        } else {
            end.1 += 1;
        }
    }
    let toks = Lexer::new(src).tokens()?;
    if toks.is_empty() {
        return Err(SyntaxError { line: 1, col: 1, msg: "empty expression".into() });
    }
    let mut p = Parser { toks, pos: 0, end };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(p.err("trailing input after expression"));
    }
    Ok(e)
}

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Bin(Op::Add, ..) | Expr::Bin(Op::Sub, ..) => 1,
        Expr::Bin(Op::Mul, ..) | Expr::Bin(Op::Div, ..) => 2,
        Expr::Neg(_) => 3,
        Expr::Bin(Op::Pow, ..) => 4,
        _ => 5,
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn wrap(f: &mut fmt::Formatter<'_>, e: &Expr, need: bool) -> fmt::Result {
            if need {
                write!(f, "(")?;
                write!(f, "{}", e)?;
                write!(f, ")")
            } else {
                write!(f, "{}", e)
            }
        }
        match self {
            Expr::Num(v) => {
                if *v == v.trunc() && v.abs() < 1e15 {
                    write!(f, "{:.1}", v)
                } else {
                    write!(f, "{}", v)
                }
            }
            Expr::Ident(s) => write!(f, "{}", s),
            Expr::Neg(e) => {
                write!(f, "-")?;
                wrap(f, e, prec(e) < 3)
            }
            Expr::Bin(op, l, r) => {
                let (sym, p) = match op {
                    Op::Add => ("+", 1),
                    Op::Sub => ("-", 1),
                    Op::Mul => ("*", 2),
                    Op::Div => ("/", 2),
                    Op::Pow => ("^", 4),
                };
                if *op == Op::Pow {
                    // right associative: parenthesize an operand chain on
                    // the left, keep it bare on the right
                    wrap(f, l, prec(l) <= p)?;
                    write!(f, " {} ", sym)?;
                    wrap(f, r, prec(r) < p)
                } else {
                    wrap(f, l, prec(l) < p)?;
                    write!(f, " {} ", sym)?;
                    wrap(f, r, prec(r) <= p)
                }
            }
            Expr::Call(func, arg) => write!(f, "{}({})", func.name(), arg),
        }
    }
}

/// Identifier with no binding in scope.
#[derive(Clone, Debug, PartialEq)]
pub struct UnknownIdentifier(pub String);

impl fmt::Display for UnknownIdentifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown identifier `{}`", self.0)
    }
}

impl std::error::Error for UnknownIdentifier {}

/// Expression with identifiers bound: coordinates by slot, parameters as
/// constants. Integer literal exponents are specialized so that negative
/// bases stay in the real domain.
#[derive(Clone, Debug)]
pub enum Resolved {
    Num(f64),
    Var(usize),
    Neg(Box<Resolved>),
    Add(Box<Resolved>, Box<Resolved>),
    Sub(Box<Resolved>, Box<Resolved>),
    Mul(Box<Resolved>, Box<Resolved>),
    Div(Box<Resolved>, Box<Resolved>),
    Powi(Box<Resolved>, i32),
    Pow(Box<Resolved>, Box<Resolved>),
    Call(Func, Box<Resolved>),
}

pub fn resolve(
    e: &Expr,
    vars: &BTreeMap<String, usize>,
    params: &BTreeMap<String, f64>,
) -> Result<Resolved, UnknownIdentifier> {
    Ok(match e {
        Expr::Num(v) => Resolved::Num(*v),
        Expr::Ident(name) => {
            if let Some(&slot) = vars.get(name) {
                Resolved::Var(slot)
            } else if let Some(&v) = params.get(name) {
                Resolved::Num(v)
            } else {
                return Err(UnknownIdentifier(name.clone()));
            }
        }
        Expr::Neg(inner) => Resolved::Neg(Box::new(resolve(inner, vars, params)?)),
        Expr::Bin(op, l, r) => {
            let l = resolve(l, vars, params)?;
            let r = resolve(r, vars, params)?;
            match op {
                Op::Add => Resolved::Add(Box::new(l), Box::new(r)),
                Op::Sub => Resolved::Sub(Box::new(l), Box::new(r)),
                Op::Mul => Resolved::Mul(Box::new(l), Box::new(r)),
                Op::Div => Resolved::Div(Box::new(l), Box::new(r)),
                Op::Pow => match constant_integer(&r) {
                    Some(k) => Resolved::Powi(Box::new(l), k),
                    None => Resolved::Pow(Box::new(l), Box::new(r)),
                },
            }
        }
        Expr::Call(func, arg) => Resolved::Call(*func, Box::new(resolve(arg, vars, params)?)),
    })
}

fn constant_integer(r: &Resolved) -> Option<i32> {
    match r {
        Resolved::Num(v) if *v == v.trunc() && v.abs() <= 64.0 => Some(*v as i32),
        Resolved::Neg(inner) => constant_integer(inner).map(|k| -k),
        _ => None,
    }
}

impl Resolved {
    /// Evaluate with coordinates `x`; generic over the scalar so dual
    /// differentiation passes through. Non-integer powers go through
    /// exp(b ln a) and so require a positive base.
    pub fn eval<R: Real>(&self, x: &[R]) -> R {
        match self {
            Resolved::Num(v) => R::from_f64(*v),
            Resolved::Var(slot) => x[*slot],
            Resolved::Neg(e) => -e.eval(x),
            Resolved::Add(l, r) => l.eval(x) + r.eval(x),
            Resolved::Sub(l, r) => l.eval(x) - r.eval(x),
            Resolved::Mul(l, r) => l.eval(x) * r.eval(x),
            Resolved::Div(l, r) => l.eval(x) / r.eval(x),
            Resolved::Powi(b, k) => b.eval(x).powi(*k),
            Resolved::Pow(b, e) => (e.eval(x) * b.eval(x).ln()).exp(),
            Resolved::Call(func, arg) => {
                let a = arg.eval(x);
                match func {
                    Func::Sqrt => a.sqrt(),
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Exp => a.exp(),
                    Func::Log => a.ln(),
                    Func::Abs => a.abs(),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use hjt_core::D1;

    fn p(s: &str) -> Expr {
        parse(s).unwrap()
    }

    #[test]
    fn precedence_matches_the_usual_rules() {
        assert_eq!(
            p("(k*q2 - l)/q1"),
            Expr::Bin(
                Op::Div,
                Box::new(Expr::Bin(
                    Op::Sub,
                    Box::new(Expr::Bin(
                        Op::Mul,
                        Box::new(Expr::Ident("k".into())),
                        Box::new(Expr::Ident("q2".into()))
                    )),
                    Box::new(Expr::Ident("l".into()))
                )),
                Box::new(Expr::Ident("q1".into()))
            )
        );
        assert_eq!(p("1 + 2 * 3"), p("1 + (2 * 3)"));
        assert_eq!(p("-q1^2"), Expr::Neg(Box::new(p("q1^2"))));
        assert_eq!(p("2^3^2"), p("2^(3^2)"));
        assert_eq!(p("q1^-2"), p("q1^(-2)"));
        assert_eq!(p("a - b - c"), p("(a - b) - c"));
    }

    #[test]
    fn errors_carry_positions() {
        let e = parse("q1 +").unwrap_err();
        assert_eq!((e.line, e.col), (1, 5));
        let e = parse("sqrt(2*E1 - q1^2").unwrap_err();
        assert_eq!(e.col, 17);
        let e = parse("foo(1)").unwrap_err();
        assert!(e.msg.contains("unknown function"));
        let e = parse("1 $ 2").unwrap_err();
        assert_eq!(e.col, 3);
        let e = parse("a + b\n* ").unwrap_err();
        assert_eq!((e.line, e.col), (2, 3));
        assert!(e.msg.contains("unexpected end"));
    }

    #[test]
    fn print_parse_round_trips_on_representative_forms() {
        for s in [
            "(k * q2 - l) / q1",
            "sqrt(2.0 * E1 - q1 ^ 2)",
            "-q1 ^ 2 + abs(-q2)",
            "(a + b) * (c - d) / e ^ (f + 1.0)",
            "2.0 ^ 3.0 ^ 2.0",
            "-(a + b)",
            "(-a) ^ 2.0",
            "q1 ^ (-2.0)",
            "exp(log(q1)) - sin(cos(t))",
            "1.5e-3 * q1",
        ] {
            let ast = p(s);
            let printed = ast.to_string();
            assert_eq!(p(&printed), ast, "round trip failed for `{}` -> `{}`", s, printed);
        }
    }

    #[test]
    fn resolution_binds_vars_then_params_and_rejects_strays() {
        let vars: BTreeMap<String, usize> = [("q1".to_string(), 0), ("q2".to_string(), 1)]
            .into_iter()
            .collect();
        let params: BTreeMap<String, f64> = [("k".to_string(), 2.0)].into_iter().collect();
        let r = resolve(&p("k*q2 - q1"), &vars, &params).unwrap();
        assert_eq!(r.eval(&[0.5, 3.0]), 5.5);
        let e = resolve(&p("k + zz"), &vars, &params).unwrap_err();
        assert_eq!(e.0, "zz");
    }

    #[test]
    fn integer_powers_survive_negative_bases_and_differentiate() {
        let vars: BTreeMap<String, usize> = [("q1".to_string(), 0)].into_iter().collect();
        let r = resolve(&p("q1^2 + q1^-1"), &vars, &BTreeMap::new()).unwrap();
        assert!((r.eval(&[-2.0_f64]) - 3.5).abs() < 1e-15);
        let d = r.eval(&[D1::variable(-2.0)]);
        // d/dq (q^2 + 1/q) = 2q - 1/q^2
        assert!((d.im - (-4.25)).abs() < 1e-15);
    }

    #[test]
    fn general_powers_use_the_exponential_route() {
        let vars: BTreeMap<String, usize> = [("q1".to_string(), 0)].into_iter().collect();
        let r = resolve(&p("q1^0.5"), &vars, &BTreeMap::new()).unwrap();
        assert!((r.eval(&[4.0_f64]) - 2.0).abs() < 1e-15);
        assert!(!r.eval(&[-4.0_f64]).is_finite());
    }
}
