//! Arithmetic expressions for potentials, sources and initial data.
//!
//! Grammar, loosest binding first: `+ -` (left), `* /` (left), unary `-`,
//! `^` (right). So `-x^2` is `-(x^2)` and `2^3^2` is `2^(3^2)`. Calls are
//! limited to `sin cos exp tanh sqrt abs`.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Tanh,
    Sqrt,
    Abs,
}

impl Func {
    fn lookup(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "tanh" => Func::Tanh,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Tanh => "tanh",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
            Func::Tanh => v.tanh(),
            Func::Sqrt => v.sqrt(),
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

    fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            BinOp::Add => a + b,
            BinOp::Sub => a - b,
            BinOp::Mul => a * b,
            BinOp::Div => a / b,
            BinOp::Pow => a.powf(b),
        }
    }

    /// (left, right) binding powers.
    fn binding_power(self) -> (u8, u8) {
        match self {
            BinOp::Add | BinOp::Sub => (1, 2),
            BinOp::Mul | BinOp::Div => (3, 4),
            BinOp::Pow => (8, 7),
        }
    }
}

const UNARY_BP: u8 = 5;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(String),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl fmt::Display for Expr {
    /// Fully parenthesized; re-parses to an equivalent tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => {
                if *v < 0.0 {
                    write!(f, "(-{:?})", -v)
                } else {
                    write!(f, "{v:?}")
                }
            }
            Expr::Var(name) => f.write_str(name),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Call(func, e) => write!(f, "{}({e})", func.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

fn tokenize(src: &str) -> Result<Vec<(usize, Token)>> {
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
            let value: f64 = text.parse().map_err(|_| Error::Syntax {
                offset: start,
                message: format!("malformed number `{text}`"),
            })?;
            out.push((start, Token::Num(value)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Token::Ident(src[start..i].to_string())));
        } else {
            let tok = match c {
                '+' | '-' | '*' | '/' | '^' => Token::Op(c),
                '(' => Token::LParen,
                ')' => Token::RParen,
                _ => {
                    // report the whole character, not a byte of it
                    let ch = src[start..].chars().next().unwrap_or(c);
                    return Err(Error::Syntax {
                        offset: start,
                        message: format!("unexpected character `{ch}`"),
                    });
                }
            };
            out.push((start, tok));
            i += 1;
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: &'a [(usize, Token)],
    pos: usize,
    end: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |(o, _)| *o)
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Syntax {
            offset: self.offset(),
            message: message.into(),
        })
    }

    fn expr(&mut self, min_bp: u8) -> Result<Expr> {
        let mut lhs = self.prefix()?;
        loop {
            let op = match self.peek() {
                Some(Token::Op('+')) => BinOp::Add,
                Some(Token::Op('-')) => BinOp::Sub,
                Some(Token::Op('*')) => BinOp::Mul,
                Some(Token::Op('/')) => BinOp::Div,
                Some(Token::Op('^')) => BinOp::Pow,
                Some(Token::RParen) | None => break,
                Some(_) => return self.error("expected an operator"),
            };
            let (l_bp, r_bp) = op.binding_power();
            if l_bp < min_bp {
                break;
            }
            self.pos += 1;
            let rhs = self.expr(r_bp)?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn prefix(&mut self) -> Result<Expr> {
        let Some((offset, token)) = self.tokens.get(self.pos).cloned() else {
            return self.error("unexpected end of input");
        };
        match token {
            Token::Num(v) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Token::Op('-') => {
                self.pos += 1;
                let e = self.expr(UNARY_BP)?;
                Ok(Expr::Neg(Box::new(e)))
            }
            Token::LParen => {
                self.pos += 1;
                let e = self.expr(0)?;
                self.close_paren()?;
                Ok(e)
            }
            Token::Ident(name) => {
                self.pos += 1;
                if self.peek() == Some(&Token::LParen) {
                    let func = Func::lookup(&name)
                        .ok_or(Error::UnknownFunction { name, offset })?;
                    self.pos += 1;
                    let arg = self.expr(0)?;
                    self.close_paren()?;
                    Ok(Expr::Call(func, Box::new(arg)))
                } else {
                    Ok(Expr::Var(name))
                }
            }
            Token::Op(c) => self.error(format!("unexpected operator `{c}`")),
            Token::RParen => self.error("unexpected `)`"),
        }
    }

    fn close_paren(&mut self) -> Result<()> {
        if self.peek() == Some(&Token::RParen) {
            self.pos += 1;
            Ok(())
        } else {
            self.error("expected `)`")
        }
    }
}

/// A parsed expression together with its source text.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    source: String,
    root: Expr,
}

impl Expression {
    pub fn parse(source: &str) -> Result<Self> {
        let tokens = tokenize(source)?;
        let mut parser = Parser {
            tokens: &tokens,
            pos: 0,
            end: source.len(),
        };
        let root = parser.expr(0)?;
        if parser.pos < tokens.len() {
            return parser.error("unexpected trailing input");
        }
        Ok(Self {
            source: source.to_string(),
            root,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn root(&self) -> &Expr {
        &self.root
    }

    /// Every variable name the expression reads.
    pub fn free_variables(&self) -> BTreeSet<String> {
        fn walk(e: &Expr, out: &mut BTreeSet<String>) {
            match e {
                Expr::Num(_) => {}
                Expr::Var(n) => {
                    out.insert(n.clone());
                }
                Expr::Neg(a) | Expr::Call(_, a) => walk(a, out),
                Expr::Binary(_, a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
            }
        }
        let mut out = BTreeSet::new();
        walk(&self.root, &mut out);
        out
    }

    pub fn depends_on(&self, name: &str) -> bool {
        self.free_variables().contains(name)
    }

    /// Evaluates with every name looked up in `bindings`.
    pub fn eval(&self, bindings: &HashMap<String, f64>) -> Result<f64> {
        let compiled = self.compile(bindings, &[])?;
        Ok(compiled.eval(&[]))
    }

    /// Resolves names: those in `slots` become positional arguments to
    /// [`Compiled::eval`]; everything else must appear in `constants`.
    pub fn compile(&self, constants: &HashMap<String, f64>, slots: &[&str]) -> Result<Compiled> {
        fn build(e: &Expr, c: &HashMap<String, f64>, slots: &[&str]) -> Result<Node> {
            Ok(match e {
                Expr::Num(v) => Node::Const(*v),
                Expr::Var(n) => {
                    if let Some(i) = slots.iter().position(|s| s == n) {
                        Node::Slot(i)
                    } else if let Some(v) = c.get(n) {
                        Node::Const(*v)
                    } else if n == "pi" {
                        Node::Const(std::f64::consts::PI)
                    } else {
                        return Err(Error::UnboundVariable(n.clone()));
                    }
                }
                Expr::Neg(a) => Node::Neg(Box::new(build(a, c, slots)?)),
                Expr::Call(f, a) => Node::Call(*f, Box::new(build(a, c, slots)?)),
                Expr::Binary(op, a, b) => Node::Binary(
                    *op,
                    Box::new(build(a, c, slots)?),
                    Box::new(build(b, c, slots)?),
                ),
            })
        }
        Ok(Compiled {
            root: build(&self.root, constants, slots)?,
            slots: slots.len(),
        })
    }

    /// Samples the expression on `grid` at time `t`. Coordinates bind `x`,
    /// `y`, `z` (unused axes read 0) and `t` is bound to the given time.
    pub fn sample(&self, grid: &Grid, bindings: &HashMap<String, f64>, t: f64) -> Result<ScalarField> {
        let compiled = self.compile(bindings, &["x", "y", "z", "t"])?;
        compiled.sample(grid, t)
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}

#[derive(Debug, Clone)]
enum Node {
    Const(f64),
    Slot(usize),
    Neg(Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

impl Node {
    fn eval(&self, args: &[f64]) -> f64 {
        match self {
            Node::Const(v) => *v,
            Node::Slot(i) => args[*i],
            Node::Neg(a) => -a.eval(args),
            Node::Binary(op, a, b) => op.apply(a.eval(args), b.eval(args)),
            Node::Call(f, a) => f.apply(a.eval(args)),
        }
    }
}

/// An expression with all names resolved to constants or argument slots.
#[derive(Debug, Clone)]
pub struct Compiled {
    root: Node,
    slots: usize,
}

impl Compiled {
    pub fn eval(&self, args: &[f64]) -> f64 {
        assert_eq!(args.len(), self.slots, "wrong argument count");
        self.root.eval(args)
    }

    /// Samples on a grid; slots must be `[x, y, z, t]`.
    pub fn sample(&self, grid: &Grid, t: f64) -> Result<ScalarField> {
        assert_eq!(self.slots, 4, "sampling needs x, y, z, t slots");
        let mut data = Vec::with_capacity(grid.len());
        for i in 0..grid.len() {
            let [x, y, z] = grid.coordinates(i);
            let v = self.root.eval(&[x, y, z, t]);
            if !v.is_finite() {
                return Err(Error::NonFiniteSample { x, y, z, t });
            }
            data.push(v);
        }
        ScalarField::new(grid.clone(), data)
    }
}
