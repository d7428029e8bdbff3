//! A small total expression language for test functions on [0,1]^k.
//!
//! Grammar (whitespace-insensitive):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := '-' factor | power
//! power  := atom ('^' integer)?
//! atom   := number | ident | ident '(' expr ')' | '(' expr ')'
//! ```
//!
//! Numbers are unsigned decimal literals (`2`, `0.75`). Variables are `x`
//! (arity 1 only) or `x1`..`xk`. Functions: `sin`, `cos`, `exp`, `sqrt`,
//! `abs`. Exponents are constant integers >= 0, so every expression is
//! total on the grid except through division.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Abs,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Num(f64),
    /// Zero-based variable slot; `x3` parses to `Var(2)`.
    Var(usize),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Pow(Box<Node>, u32),
    Call(Func, Box<Node>),
}

/// A parsed expression together with its declared arity.
#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    arity: usize,
    root: Node,
}

impl Expr {
    pub fn arity(&self) -> usize {
        self.arity
    }

    /// Evaluate at a point; `point.len()` must equal the arity.
    pub fn eval(&self, point: &[f64]) -> f64 {
        assert_eq!(point.len(), self.arity, "point arity mismatch");
        eval_node(&self.root, point)
    }
}

fn eval_node(node: &Node, point: &[f64]) -> f64 {
    match node {
        Node::Num(v) => *v,
        Node::Var(i) => point[*i],
        Node::Neg(inner) => -eval_node(inner, point),
        Node::Bin(op, l, r) => {
            let (a, b) = (eval_node(l, point), eval_node(r, point));
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => a / b,
            }
        }
        Node::Pow(base, e) => {
            let b = eval_node(base, point);
            if *e <= i32::MAX as u32 {
                b.powi(*e as i32)
            } else {
                b.powf(*e as f64)
            }
        }
        Node::Call(f, inner) => {
            let v = eval_node(inner, point);
            match f {
                Func::Sin => v.sin(),
                Func::Cos => v.cos(),
                Func::Exp => v.exp(),
                Func::Sqrt => v.sqrt(),
                Func::Abs => v.abs(),
            }
        }
    }
}

/// Parse `source` as an expression over `arity` variables.
pub fn parse_expr(source: &str, arity: usize) -> Result<Expr> {
    if arity == 0 {
        return Err(Error::Invalid("arity must be at least 1".into()));
    }
    let mut p = Parser {
        bytes: source.as_bytes(),
        pos: 0,
        arity,
    };
    p.skip_ws();
    if p.at_end() {
        return Err(p.syntax("empty expression"));
    }
    let root = p.expr()?;
    p.skip_ws();
    if !p.at_end() {
        return Err(p.syntax("unexpected trailing input"));
    }
    Ok(Expr { arity, root })
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
    arity: usize,
}

impl<'a> Parser<'a> {
    fn at_end(&self) -> bool {
        self.pos >= self.bytes.len()
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b' ' | b'\t' | b'\r' | b'\n')) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, b: u8) -> bool {
        if self.peek() == Some(b) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn syntax(&self, message: impl Into<String>) -> Error {
        Error::Syntax {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut acc = self.term()?;
        loop {
            self.skip_ws();
            let op = match self.peek() {
                Some(b'+') => BinOp::Add,
                Some(b'-') => BinOp::Sub,
                _ => return Ok(acc),
            };
            self.pos += 1;
            let rhs = self.term()?;
            acc = Node::Bin(op, Box::new(acc), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut acc = self.factor()?;
        loop {
            self.skip_ws();
            let op = match self.peek() {
                Some(b'*') => BinOp::Mul,
                Some(b'/') => BinOp::Div,
                _ => return Ok(acc),
            };
            self.pos += 1;
            let rhs = self.factor()?;
            acc = Node::Bin(op, Box::new(acc), Box::new(rhs));
        }
    }

    fn factor(&mut self) -> Result<Node> {
        self.skip_ws();
        if self.eat(b'-') {
            return Ok(Node::Neg(Box::new(self.factor()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        self.skip_ws();
        if !self.eat(b'^') {
            return Ok(base);
        }
        self.skip_ws();
        let start = self.pos;
        while matches!(self.peek(), Some(b'0'..=b'9')) {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.syntax("expected a nonnegative integer exponent"));
        }
        let digits = std::str::from_utf8(&self.bytes[start..self.pos]).expect("digits are ascii");
        let exponent: u32 = digits.parse().map_err(|_| Error::Syntax {
            offset: start,
            message: format!("exponent `{digits}` is too large"),
        })?;
        Ok(Node::Pow(Box::new(base), exponent))
    }

    fn atom(&mut self) -> Result<Node> {
        self.skip_ws();
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                self.skip_ws();
                if !self.eat(b')') {
                    return Err(self.syntax("expected `)`"));
                }
                Ok(inner)
            }
            Some(b'0'..=b'9') => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            Some(c) => Err(self.syntax(format!("unexpected character `{}`", c as char))),
            None => Err(self.syntax("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Node> {
        let start = self.pos;
        while matches!(self.peek(), Some(b'0'..=b'9')) {
            self.pos += 1;
        }
        if self.eat(b'.') {
            let frac_start = self.pos;
            while matches!(self.peek(), Some(b'0'..=b'9')) {
                self.pos += 1;
            }
            if self.pos == frac_start {
                return Err(self.syntax("expected digits after decimal point"));
            }
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).expect("digits are ascii");
        let value: f64 = text.parse().map_err(|_| Error::Syntax {
            offset: start,
            message: format!("malformed number `{text}`"),
        })?;
        Ok(Node::Num(value))
    }

    fn ident(&mut self) -> Result<Node> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric()) {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ident is ascii");
        if let Some(func) = Func::from_name(name) {
            self.skip_ws();
            if !self.eat(b'(') {
                return Err(self.syntax(format!("expected `(` after `{name}`")));
            }
            let inner = self.expr()?;
            self.skip_ws();
            if !self.eat(b')') {
                return Err(self.syntax("expected `)`"));
            }
            return Ok(Node::Call(func, Box::new(inner)));
        }
        if name == "x" {
            if self.arity != 1 {
                return Err(Error::Syntax {
                    offset: start,
                    message: format!("bare `x` needs arity 1; use x1..x{}", self.arity),
                });
            }
            return Ok(Node::Var(0));
        }
        if let Some(digits) = name.strip_prefix('x') {
            if digits.chars().all(|c| c.is_ascii_digit()) && !digits.is_empty() {
                let index: usize = digits.parse().map_err(|_| Error::Syntax {
                    offset: start,
                    message: format!("variable index `{digits}` is too large"),
                })?;
                if index == 0 || index > self.arity {
                    return Err(Error::VariableOutOfRange {
                        index,
                        arity: self.arity,
                        offset: start,
                    });
                }
                return Ok(Node::Var(index - 1));
            }
        }
        Err(Error::UnknownIdentifier {
            name: name.to_string(),
            offset: start,
        })
    }
}

// Canonical printer. Parenthesization is conservative (same-precedence
// right children are wrapped), so printing and reparsing reproduces the
// tree exactly.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(f, &self.root, self.arity)
    }
}

fn precedence(node: &Node) -> u8 {
    match node {
        Node::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
        Node::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
        Node::Neg(_) => 3,
        Node::Pow(..) => 4,
        Node::Num(_) | Node::Var(_) | Node::Call(..) => 5,
    }
}

fn write_child(
    f: &mut fmt::Formatter<'_>,
    child: &Node,
    arity: usize,
    min_prec: u8,
) -> fmt::Result {
    if precedence(child) < min_prec {
        write!(f, "(")?;
        write_node(f, child, arity)?;
        write!(f, ")")
    } else {
        write_node(f, child, arity)
    }
}

fn write_node(f: &mut fmt::Formatter<'_>, node: &Node, arity: usize) -> fmt::Result {
    match node {
        Node::Num(v) => write!(f, "{v}"),
        Node::Var(i) => {
            if arity == 1 {
                write!(f, "x")
            } else {
                write!(f, "x{}", i + 1)
            }
        }
        Node::Neg(inner) => {
            write!(f, "-")?;
            write_child(f, inner, arity, 3)
        }
        Node::Bin(op, l, r) => {
            let (prec, sym) = match op {
                BinOp::Add => (1, "+"),
                BinOp::Sub => (1, "-"),
                BinOp::Mul => (2, "*"),
                BinOp::Div => (2, "/"),
            };
            write_child(f, l, arity, prec)?;
            write!(f, " {sym} ")?;
            write_child(f, r, arity, prec + 1)
        }
        Node::Pow(base, e) => {
            write_child(f, base, arity, 5)?;
            write!(f, "^{e}")
        }
        Node::Call(func, inner) => {
            write!(f, "{}(", func.name())?;
            write_node(f, inner, arity)?;
            write!(f, ")")
        }
    }
}
