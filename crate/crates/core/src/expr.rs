//! Closed-form arithmetic expressions used by problem definition files.
//!
//! Grammar (whitespace is insignificant):
//!
//! ```text
//! expr    := term (("+" | "-") term)*
//! term    := unary (("*" | "/") unary)*
//! unary   := "-" unary | power
//! power   := atom ("^" unary)?
//! atom    := number | variable | "pi" | func1 "(" expr ")"
//!          | func2 "(" expr "," expr ")" | "(" expr ")"
//! func1   := "sin" | "cos" | "exp" | "abs"
//! func2   := "min" | "max"
//! variable:= "x1" | "x2" | "t" | "y" | "u"
//! number  := digits ["." digits] [("e" | "E") ["+" | "-"] digits]
//! ```
//!
//! `^` binds tighter than unary minus and is right associative, so `-y^2`
//! is `-(y^2)` and `2^3^2` is `2^(3^2)`. [`Expr`]'s `Display` prints the
//! minimal parenthesization that parses back to the same tree.

use std::fmt;

use crate::error::{Error, Result};

/// Evaluation point for an expression.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Env {
    pub x1: f64,
    pub x2: f64,
    pub t: f64,
    pub y: f64,
    pub u: f64,
}

impl Env {
    pub fn new(x: &[f64], t: f64, y: f64, u: f64) -> Self {
        Env {
            x1: x.first().copied().unwrap_or(0.0),
            x2: x.get(1).copied().unwrap_or(0.0),
            t,
            y,
            u,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X1,
    X2,
    T,
    Y,
    U,
}

impl Var {
    fn name(self) -> &'static str {
        match self {
            Var::X1 => "x1",
            Var::X2 => "x2",
            Var::T => "t",
            Var::Y => "y",
            Var::U => "u",
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

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func1 {
    Sin,
    Cos,
    Exp,
    Abs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func2 {
    Min,
    Max,
}

/// Parsed expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Pi,
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call1(Func1, Box<Expr>),
    Call2(Func2, Box<Expr>, Box<Expr>),
}

const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_NEG: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let tokens = tokenize(src)?;
        let mut p = Parser {
            tokens,
            pos: 0,
            src,
        };
        let e = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(e)
    }

    pub fn eval(&self, env: &Env) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Pi => std::f64::consts::PI,
            Expr::Var(v) => match v {
                Var::X1 => env.x1,
                Var::X2 => env.x2,
                Var::T => env.t,
                Var::Y => env.y,
                Var::U => env.u,
            },
            Expr::Neg(a) => -a.eval(env),
            Expr::Bin(op, a, b) => {
                let l = a.eval(env);
                match op {
                    BinOp::Add => l + b.eval(env),
                    BinOp::Sub => l - b.eval(env),
                    BinOp::Mul => l * b.eval(env),
                    BinOp::Div => l / b.eval(env),
                    BinOp::Pow => match b.as_ref() {
                        Expr::Num(n) if n.fract() == 0.0 && n.abs() <= 64.0 => l.powi(*n as i32),
                        _ => l.powf(b.eval(env)),
                    },
                }
            }
            Expr::Call1(f, a) => {
                let v = a.eval(env);
                match f {
                    Func1::Sin => v.sin(),
                    Func1::Cos => v.cos(),
                    Func1::Exp => v.exp(),
                    Func1::Abs => v.abs(),
                }
            }
            Expr::Call2(f, a, b) => {
                let (l, r) = (a.eval(env), b.eval(env));
                match f {
                    Func2::Min => l.min(r),
                    Func2::Max => l.max(r),
                }
            }
        }
    }

    /// True if the variable occurs anywhere in the tree.
    pub fn uses(&self, var: Var) -> bool {
        match self {
            Expr::Num(_) | Expr::Pi => false,
            Expr::Var(v) => *v == var,
            Expr::Neg(a) | Expr::Call1(_, a) => a.uses(var),
            Expr::Bin(_, a, b) | Expr::Call2(_, a, b) => a.uses(var) || b.uses(var),
        }
    }

    fn prec(&self) -> u8 {
        match self {
            Expr::Bin(BinOp::Add | BinOp::Sub, ..) => PREC_ADD,
            Expr::Bin(BinOp::Mul | BinOp::Div, ..) => PREC_MUL,
            Expr::Neg(_) => PREC_NEG,
            Expr::Bin(BinOp::Pow, ..) => PREC_POW,
            _ => PREC_ATOM,
        }
    }
}

fn write_wrapped(f: &mut fmt::Formatter<'_>, e: &Expr, wrap: bool) -> fmt::Result {
    if wrap {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => {
                // integers print without a fraction, everything else uses the
                // shortest round-trip form
                let s = if v.fract() == 0.0 && v.abs() < 1e15 {
                    format!("{v}")
                } else {
                    format!("{v:?}")
                };
                if v.is_sign_negative() {
                    write!(f, "({s})")
                } else {
                    f.write_str(&s)
                }
            }
            Expr::Pi => f.write_str("pi"),
            Expr::Var(v) => f.write_str(v.name()),
            Expr::Neg(a) => {
                f.write_str("-")?;
                write_wrapped(f, a, a.prec() < PREC_NEG)
            }
            Expr::Bin(op, a, b) => {
                let (sym, p) = match op {
                    BinOp::Add => ("+", PREC_ADD),
                    BinOp::Sub => ("-", PREC_ADD),
                    BinOp::Mul => ("*", PREC_MUL),
                    BinOp::Div => ("/", PREC_MUL),
                    BinOp::Pow => ("^", PREC_POW),
                };
                if *op == BinOp::Pow {
                    write_wrapped(f, a, a.prec() <= PREC_POW)?;
                    f.write_str("^")?;
                    write_wrapped(f, b, b.prec() < PREC_NEG)
                } else {
                    write_wrapped(f, a, a.prec() < p)?;
                    write!(f, " {sym} ")?;
                    write_wrapped(f, b, b.prec() <= p)
                }
            }
            Expr::Call1(func, a) => {
                let name = match func {
                    Func1::Sin => "sin",
                    Func1::Cos => "cos",
                    Func1::Exp => "exp",
                    Func1::Abs => "abs",
                };
                write!(f, "{name}({a})")
            }
            Expr::Call2(func, a, b) => {
                let name = match func {
                    Func2::Min => "min",
                    Func2::Max => "max",
                };
                write!(f, "{name}({a}, {b})")
            }
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
    Comma,
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>> {
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
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let v: f64 = text.parse().map_err(|_| Error::Parse {
                msg: format!("bad number literal '{text}'"),
                pos: start,
            })?;
            out.push((Tok::Num(v), start));
            continue;
        }
        if c.is_ascii_alphabetic() {
            while i < bytes.len() && bytes[i].is_ascii_alphanumeric() {
                i += 1;
            }
            out.push((Tok::Ident(src[start..i].to_string()), start));
            continue;
        }
        let tok = match c {
            '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            _ => {
                return Err(Error::Parse {
                    msg: format!("unexpected character '{c}'"),
                    pos: start,
                })
            }
        };
        out.push((tok, start));
        i += 1;
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<(Tok, usize)>,
    pos: usize,
    src: &'a str,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|(t, _)| t)
    }

    fn error(&self, msg: &str) -> Error {
        let pos = self
            .tokens
            .get(self.pos)
            .map(|(_, p)| *p)
            .unwrap_or(self.src.len());
        Error::Parse {
            msg: msg.to_string(),
            pos,
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected {what}")))
        }
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
        if let Some(Tok::Op('-')) = self.peek() {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let Some((tok, _)) = self.tokens.get(self.pos).cloned() else {
            return Err(self.error("unexpected end of expression"));
        };
        match tok {
            Tok::Num(v) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Tok::LParen => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.pos += 1;
                let var = match name.as_str() {
                    "x1" => Some(Var::X1),
                    "x2" => Some(Var::X2),
                    "t" => Some(Var::T),
                    "y" => Some(Var::Y),
                    "u" => Some(Var::U),
                    _ => None,
                };
                if let Some(v) = var {
                    return Ok(Expr::Var(v));
                }
                if name == "pi" {
                    return Ok(Expr::Pi);
                }
                let f1 = match name.as_str() {
                    "sin" => Some(Func1::Sin),
                    "cos" => Some(Func1::Cos),
                    "exp" => Some(Func1::Exp),
                    "abs" => Some(Func1::Abs),
                    _ => None,
                };
                if let Some(f) = f1 {
                    self.expect(Tok::LParen, "'(' after function name")?;
                    let a = self.expr()?;
                    self.expect(Tok::RParen, "')'")?;
                    return Ok(Expr::Call1(f, Box::new(a)));
                }
                let f2 = match name.as_str() {
                    "min" => Some(Func2::Min),
                    "max" => Some(Func2::Max),
                    _ => None,
                };
                if let Some(f) = f2 {
                    self.expect(Tok::LParen, "'(' after function name")?;
                    let a = self.expr()?;
                    self.expect(Tok::Comma, "',' between arguments")?;
                    let b = self.expr()?;
                    self.expect(Tok::RParen, "')'")?;
                    return Ok(Expr::Call2(f, Box::new(a), Box::new(b)));
                }
                self.pos -= 1;
                Err(self.error(&format!("unknown identifier '{name}'")))
            }
            _ => Err(self.error("expected a number, variable, function or '('")),
        }
    }
}
