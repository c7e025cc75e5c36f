//! A small arithmetic expression language used to enter the triangular
//! nonlinearity and the exogenous input as plain text.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! expr    := term   (('+' | '-') term)*
//! term    := unary  (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := primary ('^' unary)?          right-associative
//! primary := number | variable | func '(' expr ')' | '(' expr ')' | 'pi'
//! ```
//!
//! Variables are `x1`, `x2`, ..., `u` and `t`; which of them are legal is
//! decided by the caller at parse time. Functions: sin, cos, tan, tanh, exp,
//! log (natural), sqrt, abs.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use crate::error::{Error, Result};

/// A free variable of an expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    /// State component, zero-based (`x1` is `State(0)`).
    State(usize),
    Input,
    Time,
}

impl Var {
    fn from_name(name: &str) -> Option<Var> {
        match name {
            "u" => Some(Var::Input),
            "t" => Some(Var::Time),
            _ => {
                let digits = name.strip_prefix('x')?;
                if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
                    return None;
                }
                let k: usize = digits.parse().ok()?;
                (k >= 1 && !digits.starts_with('0')).then(|| Var::State(k - 1))
            }
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::State(i) => write!(f, "x{}", i + 1),
            Var::Input => f.write_str("u"),
            Var::Time => f.write_str("t"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Tanh,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "tanh" => Func::Tanh,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Tanh => "tanh",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    fn apply(self, x: f64) -> Result<f64> {
        Ok(match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Tan => x.tan(),
            Func::Tanh => x.tanh(),
            Func::Exp => x.exp(),
            Func::Log => {
                if x <= 0.0 {
                    return Err(Error::Domain(format!("log of nonpositive value {x}")));
                }
                x.ln()
            }
            Func::Sqrt => {
                if x < 0.0 {
                    return Err(Error::Domain(format!("sqrt of negative value {x}")));
                }
                x.sqrt()
            }
            Func::Abs => x.abs(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Source of variable values during evaluation.
pub trait Env {
    fn lookup(&self, var: Var) -> Option<f64>;
}

impl Env for HashMap<String, f64> {
    fn lookup(&self, var: Var) -> Option<f64> {
        self.get(&var.to_string()).copied()
    }
}

/// Bindings for the plant nonlinearity: state, input and time.
#[derive(Debug, Clone, Copy)]
pub struct StateEnv<'a> {
    pub x: &'a [f64],
    pub u: f64,
    pub t: f64,
}

impl Env for StateEnv<'_> {
    fn lookup(&self, var: Var) -> Option<f64> {
        match var {
            Var::State(i) => self.x.get(i).copied(),
            Var::Input => Some(self.u),
            Var::Time => Some(self.t),
        }
    }
}

impl Expr {
    pub fn parse(src: &str, allowed_vars: &[&str]) -> Result<Expr> {
        parse_expression(src, allowed_vars)
    }

    pub fn eval(&self, env: &impl Env) -> Result<f64> {
        match self {
            Expr::Num(v) => Ok(*v),
            Expr::Var(v) => env.lookup(*v).ok_or_else(|| Error::MissingBinding(v.to_string())),
            Expr::Neg(a) => Ok(-a.eval(env)?),
            Expr::Call(f, a) => f.apply(a.eval(env)?),
            Expr::Bin(op, a, b) => {
                let a = a.eval(env)?;
                let b = b.eval(env)?;
                match op {
                    BinOp::Add => Ok(a + b),
                    BinOp::Sub => Ok(a - b),
                    BinOp::Mul => Ok(a * b),
                    BinOp::Div => {
                        if b == 0.0 {
                            Err(Error::Domain("division by zero".into()))
                        } else {
                            Ok(a / b)
                        }
                    }
                    BinOp::Pow => {
                        let v = a.powf(b);
                        if v.is_nan() {
                            Err(Error::Domain(format!("{a}^{b} is undefined")))
                        } else {
                            Ok(v)
                        }
                    }
                }
            }
        }
    }

    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(v) => {
                out.insert(*v);
            }
            Expr::Neg(a) | Expr::Call(_, a) => a.collect_vars(out),
            Expr::Bin(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    /// True when the expression is the literal constant zero.
    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Num(v) if *v == 0.0)
    }
}

/// Fully parenthesised rendering; parsing the output yields the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Bin(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || c == '.' {
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
            let text = &src[start..i];
            let v: f64 = text.parse().map_err(|_| Error::Syntax {
                pos: start,
                msg: format!("malformed number `{text}`"),
            })?;
            if !v.is_finite() {
                return Err(Error::Syntax { pos: start, msg: format!("number `{text}` out of range") });
            }
            out.push((start, Tok::Num(v)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(src[start..i].to_string())));
        } else {
            let tok = match c {
                '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                _ => {
                    return Err(Error::Syntax { pos: start, msg: format!("unexpected character `{c}`") })
                }
            };
            out.push((start, tok));
            i += 1;
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
    allowed: &'a [&'a str],
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(p, _)| *p)
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(c @ ('+' | '-'))) = self.peek() {
            let op = if *c == '+' { BinOp::Add } else { BinOp::Sub };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(c @ ('*' | '/'))) = self.peek() {
            let op = if *c == '*' { BinOp::Mul } else { BinOp::Div };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(Tok::Op('-')) => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some(Tok::Op('+')) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.primary()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn expect_rparen(&mut self) -> Result<()> {
        match self.peek() {
            Some(Tok::RParen) => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(Error::Syntax { pos: self.here(), msg: "expected `)`".into() }),
        }
    }

    fn primary(&mut self) -> Result<Expr> {
        let pos = self.here();
        let tok = self
            .peek()
            .cloned()
            .ok_or_else(|| Error::Syntax { pos, msg: "unexpected end of input".into() })?;
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if let Some(func) = Func::from_name(&name) {
                    if self.peek() != Some(&Tok::LParen) {
                        return Err(Error::Syntax {
                            pos: self.here(),
                            msg: format!("expected `(` after `{name}`"),
                        });
                    }
                    self.pos += 1;
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                if name == "pi" {
                    return Ok(Expr::Num(std::f64::consts::PI));
                }
                match Var::from_name(&name) {
                    Some(v) if self.allowed.contains(&name.as_str()) => Ok(Expr::Var(v)),
                    _ => Err(Error::UnknownIdentifier(name)),
                }
            }
            Tok::Op(c) => Err(Error::Syntax { pos, msg: format!("unexpected operator `{c}`") }),
            Tok::RParen => Err(Error::Syntax { pos, msg: "unexpected `)`".into() }),
        }
    }
}

/// Parses `src`; every variable must appear in `allowed_vars`.
pub fn parse_expression(src: &str, allowed_vars: &[&str]) -> Result<Expr> {
    if src.trim().is_empty() {
        return Err(Error::Syntax { pos: 0, msg: "empty expression".into() });
    }
    let toks = tokenize(src)?;
    let mut p = Parser { toks, pos: 0, end: src.len(), allowed: allowed_vars };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(Error::Syntax { pos: p.here(), msg: "trailing input".into() });
    }
    Ok(e)
}

/// Evaluates with name-keyed bindings (`"x1"`, `"u"`, `"t"`, ...).
pub fn eval_expression(ast: &Expr, bindings: &HashMap<String, f64>) -> Result<f64> {
    ast.eval(bindings)
}

/// Variable names `x1..xn` plus `u`.
pub fn state_input_names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("x{i}")).chain(std::iter::once("u".to_string())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bind(pairs: &[(&str, f64)]) -> HashMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn single_function_node() {
        let e = parse_expression("tanh(x1+x2)", &["x1", "x2", "u"]).unwrap();
        assert!(matches!(e, Expr::Call(Func::Tanh, _)));
        assert_eq!(e.eval(&bind(&[("x1", 0.0), ("x2", 0.0)])).unwrap(), 0.0);
    }

    #[test]
    fn example_nonlinearity() {
        let e = parse_expression("-x1 + 0.5*tanh(x1+x2) + x1*u", &["x1", "x2", "u"]).unwrap();
        let v = e.eval(&bind(&[("x1", 1.0), ("x2", 0.0), ("u", 0.0)])).unwrap();
        assert!((v - (-1.0 + 0.5 * 1f64.tanh())).abs() < 1e-15);
        assert!((v + 0.61920).abs() < 1e-4);
    }

    #[test]
    fn out_of_scope_variable() {
        let err = parse_expression("x3", &["x1", "x2", "u"]).unwrap_err();
        assert_eq!(err, Error::UnknownIdentifier("x3".into()));
        let err = parse_expression("foo + 1", &["x1"]).unwrap_err();
        assert_eq!(err, Error::UnknownIdentifier("foo".into()));
    }

    #[test]
    fn power_is_right_associative() {
        let e = parse_expression("x1^2^3", &["x1"]).unwrap();
        assert_eq!(e.eval(&bind(&[("x1", 2.0)])).unwrap(), 256.0);
    }

    #[test]
    fn power_binds_tighter_than_negation() {
        let e = parse_expression("-x1^2", &["x1"]).unwrap();
        assert_eq!(e.eval(&bind(&[("x1", 3.0)])).unwrap(), -9.0);
        let e = parse_expression("2^-1", &[]).unwrap();
        assert_eq!(e.eval(&bind(&[])).unwrap(), 0.5);
    }

    #[test]
    fn left_associative_arithmetic() {
        let e = parse_expression("8 - 3 - 2", &[]).unwrap();
        assert_eq!(e.eval(&bind(&[])).unwrap(), 3.0);
        let e = parse_expression("8 / 4 / 2", &[]).unwrap();
        assert_eq!(e.eval(&bind(&[])).unwrap(), 1.0);
        let e = parse_expression("1 + 2 * 3", &[]).unwrap();
        assert_eq!(e.eval(&bind(&[])).unwrap(), 7.0);
    }

    #[test]
    fn syntax_errors_carry_position() {
        match parse_expression("x1 + * 2", &["x1"]) {
            Err(Error::Syntax { pos, .. }) => assert_eq!(pos, 5),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_expression("(x1", &["x1"]), Err(Error::Syntax { .. })));
        assert!(matches!(parse_expression("sin x1", &["x1"]), Err(Error::Syntax { .. })));
        assert!(matches!(parse_expression("   ", &[]), Err(Error::Syntax { .. })));
        assert!(matches!(parse_expression("1 2", &[]), Err(Error::Syntax { .. })));
        assert!(matches!(parse_expression("x1 # 2", &["x1"]), Err(Error::Syntax { pos: 3, .. })));
    }

    #[test]
    fn domain_and_binding_errors() {
        let env = bind(&[("x1", -1.0)]);
        for src in ["log(x1)", "sqrt(x1)", "1/(x1+1)", "log(0*x1)", "x1^0.5"] {
            let e = parse_expression(src, &["x1"]).unwrap();
            assert!(matches!(e.eval(&env), Err(Error::Domain(_))), "{src}");
        }
        let e = parse_expression("x1 + u", &["x1", "u"]).unwrap();
        assert_eq!(e.eval(&env), Err(Error::MissingBinding("u".into())));
    }

    #[test]
    fn functions_and_constants() {
        let e = parse_expression("sin(pi/2) + cos(0) + exp(0) + abs(-2) + sqrt(4) + log(1) + tan(0)", &[])
            .unwrap();
        assert!((e.eval(&bind(&[])).unwrap() - 7.0).abs() < 1e-15);
        let e = parse_expression("1.5e-3*t", &["t"]).unwrap();
        assert!((e.eval(&bind(&[("t", 2.0)])).unwrap() - 3e-3).abs() < 1e-18);
    }

    #[test]
    fn free_variables() {
        let e = parse_expression("x2*u + sin(x1)", &["x1", "x2", "u"]).unwrap();
        let vars: Vec<Var> = e.free_vars().into_iter().collect();
        assert_eq!(vars, vec![Var::State(0), Var::State(1), Var::Input]);
    }

    #[test]
    fn variable_names() {
        assert_eq!(Var::from_name("x10"), Some(Var::State(9)));
        assert_eq!(Var::from_name("x0"), None);
        assert_eq!(Var::from_name("x01"), None);
        assert_eq!(Var::from_name("y"), None);
    }
}
