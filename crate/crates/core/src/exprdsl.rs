//! A small arithmetic expression language for coefficient functions.
//!
//! Expressions range over the fixed variable set `rho`, `i1`..`i6` and the
//! derived alias `phi` (bound to `-i1/3`), the binary operators `+ - * / ^`,
//! unary minus, and the functions `exp`, `log`, `abs`, `sqrt`. Precedence is
//! `^` over unary minus over `* /` over `+ -`; `^` associates to the right,
//! everything else to the left.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

/// The fixed variable set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    Rho,
    I1,
    I2,
    I3,
    I4,
    I5,
    I6,
    Phi,
}

impl Var {
    pub const ALL: [Var; 8] = [
        Var::Rho,
        Var::I1,
        Var::I2,
        Var::I3,
        Var::I4,
        Var::I5,
        Var::I6,
        Var::Phi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Var::Rho => "rho",
            Var::I1 => "i1",
            Var::I2 => "i2",
            Var::I3 => "i3",
            Var::I4 => "i4",
            Var::I5 => "i5",
            Var::I6 => "i6",
            Var::Phi => "phi",
        }
    }

    fn from_name(s: &str) -> Option<Var> {
        Var::ALL.iter().copied().find(|v| v.name() == s)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Abs,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        match s {
            "exp" => Some(Func::Exp),
            "log" => Some(Func::Log),
            "abs" => Some(Func::Abs),
            "sqrt" => Some(Func::Sqrt),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Pow => 4,
        }
    }
}

/// Parsed expression tree.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Number(f64),
    Variable(Var),
    Neg(Box<Expr>),
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Call {
        func: Func,
        arg: Box<Expr>,
    },
}

const NEG_PRECEDENCE: u8 = 3;
const ATOM_PRECEDENCE: u8 = 5;

impl Expr {
    pub fn parse(src: &str) -> Result<Expr, ParseError> {
        Parser::new(src)?.parse_all()
    }

    pub fn number(value: f64) -> Expr {
        Expr::Number(value)
    }

    pub fn variable(var: Var) -> Expr {
        Expr::Variable(var)
    }

    /// The set of variables the expression references.
    pub fn variables(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_variables(&mut out);
        out
    }

    fn collect_variables(&self, out: &mut BTreeSet<Var>) {
        match self {
            Expr::Number(_) => {}
            Expr::Variable(v) => {
                out.insert(*v);
            }
            Expr::Neg(e) => e.collect_variables(out),
            Expr::Binary { lhs, rhs, .. } => {
                lhs.collect_variables(out);
                rhs.collect_variables(out);
            }
            Expr::Call { arg, .. } => arg.collect_variables(out),
        }
    }

    pub fn eval(&self, ctx: &EvalContext) -> Result<f64, EvalError> {
        match self {
            Expr::Number(x) => Ok(*x),
            Expr::Variable(v) => Ok(ctx.value(*v)),
            Expr::Neg(e) => Ok(-e.eval(ctx)?),
            Expr::Binary { op, lhs, rhs } => {
                let a = lhs.eval(ctx)?;
                let b = rhs.eval(ctx)?;
                let value = match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(EvalError::DivisionByZero { expr: self.to_string() });
                        }
                        a / b
                    }
                    BinOp::Pow => a.powf(b),
                };
                if value.is_finite() {
                    Ok(value)
                } else {
                    Err(EvalError::NonFinite { expr: self.to_string() })
                }
            }
            Expr::Call { func, arg } => {
                let x = arg.eval(ctx)?;
                let value = match func {
                    Func::Exp => x.exp(),
                    Func::Log => {
                        if x <= 0.0 {
                            return Err(EvalError::LogDomain { value: x, expr: self.to_string() });
                        }
                        x.ln()
                    }
                    Func::Abs => x.abs(),
                    Func::Sqrt => {
                        if x < 0.0 {
                            return Err(EvalError::SqrtDomain {
                                value: x,
                                expr: self.to_string(),
                            });
                        }
                        x.sqrt()
                    }
                };
                if value.is_finite() {
                    Ok(value)
                } else {
                    Err(EvalError::NonFinite { expr: self.to_string() })
                }
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Number(_) | Expr::Variable(_) | Expr::Call { .. } => ATOM_PRECEDENCE,
            Expr::Neg(_) => NEG_PRECEDENCE,
            Expr::Binary { op, .. } => op.precedence(),
        }
    }

    fn fmt_with_parens(&self, f: &mut fmt::Formatter<'_>, needs_parens: bool) -> fmt::Result {
        if needs_parens {
            write!(f, "(")?;
        }
        match self {
            Expr::Number(x) => write!(f, "{x}")?,
            Expr::Variable(v) => write!(f, "{v}")?,
            Expr::Neg(e) => {
                write!(f, "-")?;
                e.fmt_with_parens(f, e.precedence() < NEG_PRECEDENCE)?;
            }
            Expr::Binary { op, lhs, rhs } => {
                let prec = op.precedence();
                if *op == BinOp::Pow {
                    // right associative: parenthesize any non-atom base
                    lhs.fmt_with_parens(f, lhs.precedence() <= prec)?;
                    write!(f, "{}", op.symbol())?;
                    rhs.fmt_with_parens(f, rhs.precedence() < prec)?;
                } else {
                    lhs.fmt_with_parens(f, lhs.precedence() < prec)?;
                    write!(f, "{}", op.symbol())?;
                    rhs.fmt_with_parens(f, rhs.precedence() <= prec)?;
                }
            }
            Expr::Call { func, arg } => {
                write!(f, "{}(", func.name())?;
                arg.fmt_with_parens(f, false)?;
                write!(f, ")")?;
            }
        }
        if needs_parens {
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Expr {
    /// Prints with the minimal parentheses needed to reparse to the same tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_with_parens(f, false)
    }
}

/// Variable bindings for evaluation. `phi` is stored explicitly so the
/// spherical-ansatz path can bind it without a round trip through `i1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalContext {
    pub rho: f64,
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub i4: f64,
    pub i5: f64,
    pub i6: f64,
    pub phi: f64,
}

impl EvalContext {
    /// Binds the six invariants; `phi` derives as `-i1/3`.
    pub fn new(rho: f64, i: [f64; 6]) -> Self {
        EvalContext {
            rho,
            i1: i[0],
            i2: i[1],
            i3: i[2],
            i4: i[3],
            i5: i[4],
            i6: i[5],
            phi: -i[0] / 3.0,
        }
    }

    /// Bindings for a spherical stress `T = -phi*I`: `i1 = -3phi`,
    /// `i2 = 3phi²`, `i3 = -3phi³`, gradient invariants zero.
    pub fn spherical(rho: f64, phi: f64) -> Self {
        EvalContext {
            rho,
            i1: -3.0 * phi,
            i2: 3.0 * phi * phi,
            i3: -3.0 * phi * phi * phi,
            i4: 0.0,
            i5: 0.0,
            i6: 0.0,
            phi,
        }
    }

    /// Bindings with every invariant zero (density-only coefficients).
    pub fn density_only(rho: f64) -> Self {
        EvalContext::new(rho, [0.0; 6])
    }

    fn value(&self, v: Var) -> f64 {
        match v {
            Var::Rho => self.rho,
            Var::I1 => self.i1,
            Var::I2 => self.i2,
            Var::I3 => self.i3,
            Var::I4 => self.i4,
            Var::I5 => self.i5,
            Var::I6 => self.i6,
            Var::Phi => self.phi,
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("empty expression")]
    Empty,
    #[error("unexpected character `{ch}` at byte {position}")]
    UnexpectedChar { ch: char, position: usize },
    #[error("malformed number at byte {position}")]
    MalformedNumber { position: usize },
    #[error("unknown identifier `{name}` at byte {position}")]
    UnknownIdentifier { name: String, position: usize },
    #[error("expected {expected} at byte {position}")]
    Expected { expected: &'static str, position: usize },
    #[error("unexpected trailing input at byte {position}")]
    TrailingInput { position: usize },
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("division by zero in `{expr}`")]
    DivisionByZero { expr: String },
    #[error("log of non-positive value {value} in `{expr}`")]
    LogDomain { value: f64, expr: String },
    #[error("sqrt of negative value {value} in `{expr}`")]
    SqrtDomain { value: f64, expr: String },
    #[error("non-finite result in `{expr}`")]
    NonFinite { expr: String },
}

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Number(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

struct Parser {
    tokens: Vec<(Token, usize)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn new(src: &str) -> Result<Self, ParseError> {
        let tokens = lex(src)?;
        if tokens.is_empty() {
            return Err(ParseError::Empty);
        }
        Ok(Parser { tokens, pos: 0, end: src.len() })
    }

    fn parse_all(mut self) -> Result<Expr, ParseError> {
        let expr = self.parse_sum()?;
        if let Some((_, position)) = self.tokens.get(self.pos) {
            return Err(ParseError::TrailingInput { position: *position });
        }
        Ok(expr)
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(t, _)| t)
    }

    fn position(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |(_, p)| *p)
    }

    fn advance(&mut self) -> Option<Token> {
        let tok = self.tokens.get(self.pos).map(|(t, _)| t.clone());
        if tok.is_some() {
            self.pos += 1;
        }
        tok
    }

    fn parse_sum(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.parse_term()?;
        loop {
            let op = match self.peek() {
                Some(Token::Plus) => BinOp::Add,
                Some(Token::Minus) => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.parse_term()?;
            lhs = Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) };
        }
    }

    fn parse_term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.parse_unary()?;
        loop {
            let op = match self.peek() {
                Some(Token::Star) => BinOp::Mul,
                Some(Token::Slash) => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.parse_unary()?;
            lhs = Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) };
        }
    }

    fn parse_unary(&mut self) -> Result<Expr, ParseError> {
        if matches!(self.peek(), Some(Token::Minus)) {
            self.advance();
            let inner = self.parse_unary()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.parse_power()
    }

    fn parse_power(&mut self) -> Result<Expr, ParseError> {
        let base = self.parse_primary()?;
        if matches!(self.peek(), Some(Token::Caret)) {
            self.advance();
            // right associative; the exponent may carry a unary minus
            let exponent = self.parse_unary()?;
            return Ok(Expr::Binary {
                op: BinOp::Pow,
                lhs: Box::new(base),
                rhs: Box::new(exponent),
            });
        }
        Ok(base)
    }

    fn parse_primary(&mut self) -> Result<Expr, ParseError> {
        let position = self.position();
        match self.advance() {
            Some(Token::Number(x)) => Ok(Expr::Number(x)),
            Some(Token::Ident(name)) => {
                if matches!(self.peek(), Some(Token::LParen)) {
                    let func = Func::from_name(&name)
                        .ok_or_else(|| ParseError::UnknownIdentifier {
                            name: name.clone(),
                            position,
                        })?;
                    self.advance(); // consume '('
                    let arg = self.parse_sum()?;
                    self.expect_rparen()?;
                    Ok(Expr::Call { func, arg: Box::new(arg) })
                } else {
                    let var = Var::from_name(&name).ok_or(ParseError::UnknownIdentifier {
                        name,
                        position,
                    })?;
                    Ok(Expr::Variable(var))
                }
            }
            Some(Token::LParen) => {
                let inner = self.parse_sum()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            _ => Err(ParseError::Expected { expected: "a number, variable, or `(`", position }),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        let position = self.position();
        match self.advance() {
            Some(Token::RParen) => Ok(()),
            _ => Err(ParseError::Expected { expected: "`)`", position }),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Token, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        match b {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b'+' => {
                tokens.push((Token::Plus, i));
                i += 1;
            }
            b'-' => {
                tokens.push((Token::Minus, i));
                i += 1;
            }
            b'*' => {
                tokens.push((Token::Star, i));
                i += 1;
            }
            b'/' => {
                tokens.push((Token::Slash, i));
                i += 1;
            }
            b'^' => {
                tokens.push((Token::Caret, i));
                i += 1;
            }
            b'(' => {
                tokens.push((Token::LParen, i));
                i += 1;
            }
            b')' => {
                tokens.push((Token::RParen, i));
                i += 1;
            }
            b'0'..=b'9' | b'.' => {
                let start = i;
                while i < bytes.len() && matches!(bytes[i], b'0'..=b'9' | b'.') {
                    i += 1;
                }
                // optional exponent part: e.g. 2.5e-3
                if i < bytes.len() && matches!(bytes[i], b'e' | b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && matches!(bytes[j], b'+' | b'-') {
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
                let value: f64 = text
                    .parse()
                    .map_err(|_| ParseError::MalformedNumber { position: start })?;
                tokens.push((Token::Number(value), start));
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                tokens.push((Token::Ident(src[start..i].to_string()), start));
            }
            _ => {
                let ch = src[i..].chars().next().unwrap_or('?');
                return Err(ParseError::UnexpectedChar { ch, position: i });
            }
        }
    }
    Ok(tokens)
}
