//! Arithmetic expressions in `x`, `lambda` and `s`.
//!
//! Precedence from loosest: `+ -`, `* /`, unary `-`, `^` (right-associative).
//! Columns in errors are 1-based character positions.

use std::f64::consts::{E, PI};
use std::fmt;

use crate::dynamics::field::{ScalarField, StateDomain};
use crate::dynamics::shift::ParameterShift;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X,
    Lambda,
    S,
}

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::X => "x",
            Var::Lambda => "lambda",
            Var::S => "s",
        }
    }

    fn from_name(name: &str) -> Option<Var> {
        match name {
            "x" => Some(Var::X),
            "lambda" => Some(Var::Lambda),
            "s" => Some(Var::S),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Tanh,
    Cosh,
    Sinh,
    Sqrt,
    Exp,
    Log,
    Abs,
}

const FUNCS: [(&str, Func); 10] = [
    ("sin", Func::Sin),
    ("cos", Func::Cos),
    ("tan", Func::Tan),
    ("tanh", Func::Tanh),
    ("cosh", Func::Cosh),
    ("sinh", Func::Sinh),
    ("sqrt", Func::Sqrt),
    ("exp", Func::Exp),
    ("log", Func::Log),
    ("abs", Func::Abs),
];

impl Func {
    pub fn name(self) -> &'static str {
        FUNCS.iter().find(|(_, f)| *f == self).expect("every function is listed").0
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Tan => v.tan(),
            Func::Tanh => v.tanh(),
            Func::Cosh => v.cosh(),
            Func::Sinh => v.sinh(),
            Func::Sqrt => v.sqrt(),
            Func::Exp => v.exp(),
            Func::Log => v.ln(),
            Func::Abs => v.abs(),
        }
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

/// Variable values for evaluation; unused ones are ignored.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Vars {
    pub x: f64,
    pub lambda: f64,
    pub s: f64,
}

impl Expr {
    pub fn eval(&self, v: &Vars) -> f64 {
        match self {
            Expr::Num(c) => *c,
            Expr::Var(Var::X) => v.x,
            Expr::Var(Var::Lambda) => v.lambda,
            Expr::Var(Var::S) => v.s,
            Expr::Neg(a) => -a.eval(v),
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(v), b.eval(v));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => a.powf(b),
                }
            }
            Expr::Call(f, a) => f.apply(a.eval(v)),
        }
    }
}

/// Fully parenthesized; parses back to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(c) => write!(f, "{c:?}"),
            Expr::Var(v) => f.write_str(v.name()),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Bin(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    Open,
    Close,
    Comma,
    End,
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(n) => format!("number {n}"),
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Op(c) => format!("`{c}`"),
        Tok::Open => "`(`".into(),
        Tok::Close => "`)`".into(),
        Tok::Comma => "`,`".into(),
        Tok::End => "end of input".into(),
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            // exponent only when digits follow
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let lit: String = chars[start..i].iter().collect();
            let v = lit
                .parse::<f64>()
                .map_err(|_| Error::Parse { column: col, message: format!("malformed number `{lit}`") })?;
            out.push((Tok::Num(v), col));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), col));
        } else {
            let t = match c {
                '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
                '(' => Tok::Open,
                ')' => Tok::Close,
                ',' => Tok::Comma,
                _ => return Err(Error::Parse { column: col, message: format!("unexpected character `{c}`") }),
            };
            out.push((t, col));
            i += 1;
        }
    }
    out.push((Tok::End, chars.len() + 1));
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    allowed: &'a [Var],
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn col(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, wanted: &str) -> Error {
        Error::Parse { column: self.col(), message: format!("expected {wanted}, found {}", describe(self.peek())) }
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
        let base = self.primary()?;
        if *self.peek() == Tok::Op('^') {
            self.bump();
            let exp = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr> {
        let (tok, col) = self.bump();
        match tok {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::Open => {
                let e = self.expr()?;
                if *self.peek() != Tok::Close {
                    return Err(self.unexpected("`)`"));
                }
                self.bump();
                Ok(e)
            }
            Tok::Ident(name) => self.ident(name, col),
            other => {
                self.pos -= usize::from(other != Tok::End);
                Err(self.unexpected("a number, variable, function or `(`"))
            }
        }
    }

    fn ident(&mut self, name: String, col: usize) -> Result<Expr> {
        if let Some(&(_, func)) = FUNCS.iter().find(|(n, _)| *n == name) {
            if *self.peek() != Tok::Open {
                return Err(Error::Arity { name, expected: 1, found: 0, column: col });
            }
            self.bump();
            let mut args = Vec::new();
            if *self.peek() != Tok::Close {
                args.push(self.expr()?);
                while *self.peek() == Tok::Comma {
                    self.bump();
                    args.push(self.expr()?);
                }
            }
            if *self.peek() != Tok::Close {
                return Err(self.unexpected("`,` or `)`"));
            }
            self.bump();
            if args.len() != 1 {
                return Err(Error::Arity { name, expected: 1, found: args.len(), column: col });
            }
            return Ok(Expr::Call(func, Box::new(args.pop().expect("one argument"))));
        }
        match name.as_str() {
            "pi" => return Ok(Expr::Num(PI)),
            "e" => return Ok(Expr::Num(E)),
            _ => {}
        }
        match Var::from_name(&name) {
            Some(v) if self.allowed.contains(&v) => Ok(Expr::Var(v)),
            _ => Err(Error::UnknownIdentifier { name, column: col }),
        }
    }
}

/// Parse `text` over the variables in `allowed`.
pub fn parse_expression(text: &str, allowed: &[Var]) -> Result<Expr> {
    if text.trim().is_empty() {
        return Err(Error::Parse { column: 1, message: "empty expression".into() });
    }
    let mut p = Parser { toks: lex(text)?, pos: 0, allowed };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.unexpected("an operator or end of input"));
    }
    Ok(e)
}

/// Field `f(x, lambda)` from an expression, with a finite-difference derivative.
pub fn field_from_expression(name: &str, text: &str, domain: StateDomain) -> Result<ScalarField> {
    let e = parse_expression(text, &[Var::X, Var::Lambda])?;
    Ok(ScalarField::new(name, domain, move |x, lambda| e.eval(&Vars { x, lambda, s: 0.0 })))
}

/// Shift shape `Lambda(s)` from an expression, with a finite-difference slope.
pub fn shift_from_expression(text: &str, lambda_minus: f64, lambda_plus: f64) -> Result<ParameterShift> {
    let e = parse_expression(text, &[Var::S])?;
    ParameterShift::user_fd(lambda_minus, lambda_plus, move |s| e.eval(&Vars { s, ..Vars::default() }))
}

/// Function of `lambda` alone.
pub fn lambda_function(text: &str) -> Result<impl Fn(f64) -> f64 + Clone + Send + Sync + 'static> {
    let e = std::sync::Arc::new(parse_expression(text, &[Var::Lambda])?);
    Ok(move |lambda| e.eval(&Vars { lambda, ..Vars::default() }))
}

#[cfg(test)]
mod tests {
    use super::*;

    const XL: &[Var] = &[Var::X, Var::Lambda];

    fn at(text: &str, x: f64, lambda: f64) -> f64 {
        parse_expression(text, XL).unwrap().eval(&Vars { x, lambda, s: 0.0 })
    }

    #[test]
    fn evaluates() {
        assert_eq!(at("sin(x*pi)*(lambda + cos(x*pi))", 0.0, -2.0), 0.0);
        assert_eq!(at("-(x^2) + 2.5*x - 1", 2.0, 0.0), 0.0);
        assert_eq!(at("2^3^2", 0.0, 0.0), 512.0);
        assert_eq!(at("-2^2", 0.0, 0.0), -4.0);
        assert_eq!(at("2^-1", 0.0, 0.0), 0.5);
        assert_eq!(at("1 - 2 - 3", 0.0, 0.0), -4.0);
        assert_eq!(at("8 / 4 / 2", 0.0, 0.0), 1.0);
        assert_eq!(at("1.5e2 + e - e", 0.0, 0.0), 150.0);
    }

    #[test]
    fn errors_carry_columns() {
        assert_eq!(parse_expression("sin(", XL).unwrap_err(), Error::Parse {
            column: 5,
            message: "expected a number, variable, function or `(`, found end of input".into()
        });
        assert!(matches!(parse_expression("x + y", XL), Err(Error::UnknownIdentifier { column: 5, .. })));
        assert!(matches!(parse_expression("s", XL), Err(Error::UnknownIdentifier { column: 1, .. })));
        assert!(matches!(
            parse_expression("1 + tanh(x, 2)", XL),
            Err(Error::Arity { expected: 1, found: 2, column: 5, .. })
        ));
        assert!(matches!(parse_expression("(x", XL), Err(Error::Parse { column: 3, .. })));
        assert!(matches!(parse_expression("x $ 1", XL), Err(Error::Parse { column: 3, .. })));
        assert!(matches!(parse_expression("x 1", XL), Err(Error::Parse { column: 3, .. })));
    }
}
