//! Component-wise arithmetic expressions over the state vector.
//!
//! Grammar (EBNF):
//!
//! ```text
//! expr     = term , { ( "+" | "-" ) , term } ;
//! term     = unary , { ( "*" | "/" ) , unary } ;
//! unary    = ( "-" | "+" ) , unary | power ;
//! power    = atom , [ "^" , unary ] ;
//! atom     = number | variable | call | "(" , expr , ")" ;
//! call     = func , "(" , expr , [ "," , expr ] , ")" ;
//! func     = "exp" | "log" | "sqrt" | "abs" | "tanh" | "min" | "max" ;
//! variable = "x" , digits | "x" , "[" , digits , "]" ;
//! number   = digits , [ "." , { digit } ] , [ exponent ]
//!          | "." , digits , [ exponent ] ;
//! exponent = ( "e" | "E" ) , [ "+" | "-" ] , digits ;
//! ```
//!
//! `^` binds tighter than unary minus and is right-associative, so `-x0^2`
//! is `-(x0^2)` and `x0^2^3` is `x0^(2^3)`. `min` and `max` take two
//! arguments; every other function takes one. Whitespace is insignificant.

use std::fmt;

use thiserror::Error;

use crate::error::Error;

/// Nesting limit for parentheses, unary signs and exponents.
pub const MAX_NESTING: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
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

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sqrt,
    Abs,
    Tanh,
    Min,
    Max,
}

impl Func {
    pub const ALL: [Func; 7] = [
        Func::Exp,
        Func::Log,
        Func::Sqrt,
        Func::Abs,
        Func::Tanh,
        Func::Min,
        Func::Max,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Tanh => "tanh",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Neg(Box<Expr>),
    Binary { op: BinOp, lhs: Box<Expr>, rhs: Box<Expr> },
    Call { func: Func, args: Vec<Expr> },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at byte {offset}: expected {}, found {found}", .expected.join(" or "))]
pub struct ParseError {
    pub offset: usize,
    pub expected: Vec<String>,
    pub found: String,
}

/// Undefined operation hit during evaluation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainError(pub String);

impl fmt::Display for DomainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn parse_expression(text: &str, dimension: usize) -> Result<Expr, Error> {
    let tokens = lex(text)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        depth: 0,
    };
    let expr = parser.expr()?;
    if !parser.at(&Tok::End) {
        return Err(parser.unexpected(&["operator", "end of input"]).into());
    }
    if let Some(index) = expr.max_variable() {
        if index >= dimension {
            return Err(Error::VariableIndex { index, dimension });
        }
    }
    Ok(expr)
}

impl Expr {
    pub fn eval(&self, x: &[f64]) -> Result<f64, DomainError> {
        self.eval_inner(x, &mut None)
    }

    /// Evaluate while recording which side of every `abs`/`min`/`max` kink
    /// the point falls on.
    pub fn eval_with_branches(&self, x: &[f64], branches: &mut Vec<i8>) -> Result<f64, DomainError> {
        let mut slot = Some(branches);
        self.eval_inner(x, &mut slot)
    }

    fn eval_inner(&self, x: &[f64], branches: &mut Option<&mut Vec<i8>>) -> Result<f64, DomainError> {
        let value = match self {
            Expr::Const(v) => *v,
            Expr::Var(i) => *x
                .get(*i)
                .ok_or_else(|| DomainError(format!("variable x{i} out of range")))?,
            Expr::Neg(e) => -e.eval_inner(x, branches)?,
            Expr::Binary { op, lhs, rhs } => {
                let a = lhs.eval_inner(x, branches)?;
                let b = rhs.eval_inner(x, branches)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(DomainError("division by zero".into()));
                        }
                        a / b
                    }
                    BinOp::Pow => a.powf(b),
                }
            }
            Expr::Call { func, args } => {
                let a = args[0].eval_inner(x, branches)?;
                match func {
                    Func::Exp => a.exp(),
                    Func::Log => {
                        if a <= 0.0 {
                            return Err(DomainError(format!("log of non-positive argument {a}")));
                        }
                        a.ln()
                    }
                    Func::Sqrt => {
                        if a < 0.0 {
                            return Err(DomainError(format!("sqrt of negative argument {a}")));
                        }
                        a.sqrt()
                    }
                    Func::Abs => {
                        if let Some(b) = branches.as_mut() {
                            b.push(sign(a));
                        }
                        a.abs()
                    }
                    Func::Tanh => a.tanh(),
                    Func::Min | Func::Max => {
                        let b = args[1].eval_inner(x, branches)?;
                        if let Some(br) = branches.as_mut() {
                            br.push(sign(a - b));
                        }
                        if *func == Func::Min {
                            a.min(b)
                        } else {
                            a.max(b)
                        }
                    }
                }
            }
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(DomainError(format!("non-finite result in `{self}`")))
        }
    }

    pub fn max_variable(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(e) => e.max_variable(),
            Expr::Binary { lhs, rhs, .. } => lhs.max_variable().max(rhs.max_variable()),
            Expr::Call { args, .. } => args.iter().filter_map(Expr::max_variable).max(),
        }
    }

    /// True when the tree contains `abs`, `min` or `max`.
    pub fn has_kinks(&self) -> bool {
        match self {
            Expr::Const(_) | Expr::Var(_) => false,
            Expr::Neg(e) => e.has_kinks(),
            Expr::Binary { lhs, rhs, .. } => lhs.has_kinks() || rhs.has_kinks(),
            Expr::Call { func, args } => {
                matches!(func, Func::Abs | Func::Min | Func::Max) || args.iter().any(Expr::has_kinks)
            }
        }
    }
}

fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// Fully parenthesized; re-parses to a tree with identical evaluation.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(v) if v.is_sign_negative() => write!(f, "(-{})", -v),
            Expr::Const(v) => write!(f, "{v}"),
            Expr::Var(i) => write!(f, "x{i}"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Binary { op, lhs, rhs } => write!(f, "({lhs} {} {rhs})", op.symbol()),
            Expr::Call { func, args } => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Var(usize),
    Ident(String),
    LParen,
    RParen,
    Comma,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    End,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(v) => write!(f, "number {v}"),
            Tok::Var(i) => write!(f, "variable x{i}"),
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Plus => f.write_str("`+`"),
            Tok::Minus => f.write_str("`-`"),
            Tok::Star => f.write_str("`*`"),
            Tok::Slash => f.write_str("`/`"),
            Tok::Caret => f.write_str("`^`"),
            Tok::End => f.write_str("end of input"),
        }
    }
}

fn lex_error(offset: usize, expected: &[&str], found: impl Into<String>) -> ParseError {
    ParseError {
        offset,
        expected: expected.iter().map(|s| s.to_string()).collect(),
        found: found.into(),
    }
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let simple = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            b',' => Some(Tok::Comma),
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            _ => None,
        };
        if let Some(tok) = simple {
            out.push((start, tok));
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || c == b'.' {
            i = scan_number(bytes, i)?;
            let lexeme = &text[start..i];
            let value: f64 = lexeme
                .parse()
                .map_err(|_| lex_error(start, &["number"], format!("`{lexeme}`")))?;
            if !value.is_finite() {
                return Err(lex_error(start, &["finite number"], format!("`{lexeme}`")));
            }
            out.push((start, Tok::Num(value)));
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            let word = &text[start..i];
            if word == "x" {
                // x[i]
                let mut j = i;
                while j < bytes.len() && bytes[j].is_ascii_whitespace() {
                    j += 1;
                }
                if j < bytes.len() && bytes[j] == b'[' {
                    j += 1;
                    let digits_start = j;
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    if j == digits_start || j >= bytes.len() || bytes[j] != b']' {
                        let found = text[j.min(bytes.len())..]
                            .chars()
                            .next()
                            .map_or("end of input".to_string(), |ch| format!("`{ch}`"));
                        let expected: &[&str] = if j == digits_start { &["index"] } else { &["`]`"] };
                        return Err(lex_error(j, expected, found));
                    }
                    let index = parse_index(&text[digits_start..j], digits_start)?;
                    out.push((start, Tok::Var(index)));
                    i = j + 1;
                    continue;
                }
            } else if let Some(digits) = word.strip_prefix('x') {
                if digits.bytes().all(|b| b.is_ascii_digit()) {
                    out.push((start, Tok::Var(parse_index(digits, start + 1)?)));
                    continue;
                }
            }
            out.push((start, Tok::Ident(word.to_string())));
            continue;
        }
        let ch = text[i..].chars().next().unwrap_or('?');
        return Err(lex_error(
            start,
            &["number", "variable", "function", "operator"],
            format!("`{ch}`"),
        ));
    }
    out.push((bytes.len(), Tok::End));
    Ok(out)
}

fn parse_index(digits: &str, offset: usize) -> Result<usize, ParseError> {
    digits
        .parse()
        .map_err(|_| lex_error(offset, &["variable index"], format!("`{digits}`")))
}

fn scan_number(bytes: &[u8], mut i: usize) -> Result<usize, ParseError> {
    let start = i;
    let digits = |i: &mut usize| {
        let s = *i;
        while *i < bytes.len() && bytes[*i].is_ascii_digit() {
            *i += 1;
        }
        *i - s
    };
    let int_digits = digits(&mut i);
    let mut frac_digits = 0;
    if i < bytes.len() && bytes[i] == b'.' {
        i += 1;
        frac_digits = digits(&mut i);
    }
    if int_digits + frac_digits == 0 {
        return Err(lex_error(start, &["digit"], "`.`"));
    }
    if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
        let mut j = i + 1;
        if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
            j += 1;
        }
        let mut k = j;
        if digits(&mut k) == 0 {
            let found = bytes
                .get(k)
                .map_or("end of input".to_string(), |b| format!("`{}`", *b as char));
            return Err(lex_error(k, &["exponent digits"], found));
        }
        i = k;
    }
    Ok(i)
}

struct Parser {
    tokens: Vec<(usize, Tok)>,
    pos: usize,
    depth: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].1
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].0
    }

    fn at(&self, tok: &Tok) -> bool {
        self.peek() == tok
    }

    fn bump(&mut self) -> Tok {
        let tok = self.tokens[self.pos].1.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        tok
    }

    fn unexpected(&self, expected: &[&str]) -> ParseError {
        lex_error(self.offset(), expected, self.peek().to_string())
    }

    fn expect(&mut self, tok: Tok, name: &str) -> Result<(), ParseError> {
        if self.at(&tok) {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&[name]))
        }
    }

    fn enter(&mut self) -> Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_NESTING {
            return Err(lex_error(
                self.offset(),
                &[&format!("at most {MAX_NESTING} nesting levels")],
                "deeper nesting",
            ));
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Tok::Minus | Tok::Plus => {
                let negate = self.bump() == Tok::Minus;
                self.enter()?;
                let inner = self.unary()?;
                self.depth -= 1;
                Ok(if negate { Expr::Neg(Box::new(inner)) } else { inner })
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if !self.at(&Tok::Caret) {
            return Ok(base);
        }
        self.bump();
        self.enter()?;
        let exponent = self.unary()?;
        self.depth -= 1;
        Ok(Expr::Binary {
            op: BinOp::Pow,
            lhs: Box::new(base),
            rhs: Box::new(exponent),
        })
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        const ATOM: &[&str] = &["number", "variable", "function", "`(`", "`-`"];
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Const(v))
            }
            Tok::Var(i) => {
                self.bump();
                Ok(Expr::Var(i))
            }
            Tok::LParen => {
                self.bump();
                self.enter()?;
                let inner = self.expr()?;
                self.depth -= 1;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                let Some(func) = Func::from_name(&name) else {
                    let mut expected = vec!["function name".to_string()];
                    expected.extend(Func::ALL.iter().map(|f| format!("`{}`", f.name())));
                    return Err(ParseError {
                        offset: self.offset(),
                        expected,
                        found: self.peek().to_string(),
                    });
                };
                self.bump();
                self.expect(Tok::LParen, "`(`")?;
                self.enter()?;
                let mut args = vec![self.expr()?];
                if func.arity() == 2 {
                    self.expect(Tok::Comma, "`,`")?;
                    args.push(self.expr()?);
                }
                self.depth -= 1;
                self.expect(Tok::RParen, "`)`")?;
                Ok(Expr::Call { func, args })
            }
            _ => Err(self.unexpected(ATOM)),
        }
    }
}
