//! Expression grammar for potentials and perturbation symbols.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?            exponent must be constant
//! atom    := number | 'x' | 't' | 'xi' | 'i' | 'pi' | 'chi'
//!          | func '(' expr ')' | '(' expr ')' | '|' expr '|'
//! func    := 'cos' | 'sin' | 'exp' | 'sqrt'
//! ```
//!
//! `chi` is the cutoff `chi(xi)`. Values and first derivatives in `t`, `x`
//! and `xi` are computed together by forward-mode differentiation.

use std::sync::Arc;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::pdo_calculus::Symbol;
use crate::torus_fourier::{chi, chi_derivative};

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    I,
    X,
    T,
    Xi,
    Chi,
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, f64),
    Abs(Box<Node>),
    Func(Func, Box<Node>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Cos,
    Sin,
    Exp,
    Sqrt,
}

/// Value with first partials in `(t, x, xi)`.
#[derive(Debug, Clone, Copy)]
pub struct Jet {
    pub v: C64,
    pub dt: C64,
    pub dx: C64,
    pub dxi: C64,
}

impl Jet {
    fn constant(v: C64) -> Self {
        let z = C64::new(0.0, 0.0);
        Self { v, dt: z, dx: z, dxi: z }
    }

    fn chain(self, v: C64, dv: C64) -> Self {
        Self {
            v,
            dt: dv * self.dt,
            dx: dv * self.dx,
            dxi: dv * self.dxi,
        }
    }
}

/// Parsed expression.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    root: Node,
    source: String,
}

impl Expr {
    pub fn parse(text: &str) -> Result<Self> {
        let tokens = tokenize(text)?;
        let mut p = Parser { tokens, pos: 0 };
        let root = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(syntax(p.tokens[p.pos].1, "unexpected trailing input"));
        }
        Ok(Self {
            root,
            source: text.trim().to_string(),
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, t: f64, x: f64, xi: f64) -> Jet {
        eval(&self.root, t, x, xi)
    }

    pub fn depends_on_xi(&self) -> bool {
        depends(&self.root, &|n| matches!(n, Node::Xi | Node::Chi))
    }

    pub fn depends_on_t(&self) -> bool {
        depends(&self.root, &|n| matches!(n, Node::T))
    }

    pub fn contains_imaginary_unit(&self) -> bool {
        depends(&self.root, &|n| matches!(n, Node::I))
    }

    /// Homogeneity degree in `xi` (`-inf` for the zero expression).
    pub fn xi_degree(&self) -> Result<f64> {
        degree(&self.root)
    }

    /// Symbol with analytic first derivatives in `xi` and `x`.
    pub fn to_symbol(&self, order: Option<f64>) -> Result<Symbol> {
        let order = match order {
            Some(o) => o,
            None => self.xi_degree()?,
        };
        let e = Arc::new(self.clone());
        let (e1, e2) = (e.clone(), e.clone());
        Ok(Symbol::new(self.source.clone(), order, move |t, x, xi| e.eval(t, x, xi).v)
            .with_xi_derivative(move |t, x, xi| e1.eval(t, x, xi).dxi)
            .with_x_derivative(move |t, x, xi| e2.eval(t, x, xi).dx))
    }
}

fn syntax(col: usize, msg: &str) -> Error {
    Error::Config {
        line: 1,
        col,
        msg: msg.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>> {
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
            let s: String = chars[start..i].iter().collect();
            let v: f64 = s.parse().map_err(|_| syntax(col, "malformed number"))?;
            out.push((Tok::Num(v), col));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), col));
        } else if "+-*/^()|".contains(c) {
            out.push((Tok::Op(c), col));
            i += 1;
        } else if c == '\u{2212}' {
            // typographic minus sign
            out.push((Tok::Op('-'), col));
            i += 1;
        } else {
            return Err(syntax(col, &format!("unexpected character '{c}'")));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.0)
    }

    fn col(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map(|t| t.1)
            .or_else(|| self.tokens.last().map(|t| t.1 + 1))
            .unwrap_or(1)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Op(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(syntax(self.col(), &format!("expected '{c}'")))
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat('-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.eat('^') {
            let col = self.col();
            let exp = self.unary()?;
            let p = constant_value(&exp)
                .ok_or_else(|| syntax(col, "exponent must be a real constant"))?;
            return Ok(Node::Pow(Box::new(base), p));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        let col = self.col();
        let tok = self
            .tokens
            .get(self.pos)
            .map(|t| t.0.clone())
            .ok_or_else(|| syntax(col, "unexpected end of expression"))?;
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Node::Num(v)),
            Tok::Op('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Op('|') => {
                let e = self.expr()?;
                self.expect('|')?;
                Ok(Node::Abs(Box::new(e)))
            }
            Tok::Ident(name) => match name.as_str() {
                "x" => Ok(Node::X),
                "t" => Ok(Node::T),
                "xi" => Ok(Node::Xi),
                "i" => Ok(Node::I),
                "pi" => Ok(Node::Num(std::f64::consts::PI)),
                "chi" => Ok(Node::Chi),
                "cos" | "sin" | "exp" | "sqrt" => {
                    let f = match name.as_str() {
                        "cos" => Func::Cos,
                        "sin" => Func::Sin,
                        "exp" => Func::Exp,
                        _ => Func::Sqrt,
                    };
                    self.expect('(')?;
                    let e = self.expr()?;
                    self.expect(')')?;
                    Ok(Node::Func(f, Box::new(e)))
                }
                other => Err(syntax(col, &format!("unknown identifier '{other}'"))),
            },
            Tok::Op(c) => Err(syntax(col, &format!("unexpected '{c}'"))),
        }
    }
}

fn constant_value(n: &Node) -> Option<f64> {
    match n {
        Node::Num(v) => Some(*v),
        Node::Neg(a) => constant_value(a).map(|v| -v),
        Node::Add(a, b) => Some(constant_value(a)? + constant_value(b)?),
        Node::Sub(a, b) => Some(constant_value(a)? - constant_value(b)?),
        Node::Mul(a, b) => Some(constant_value(a)? * constant_value(b)?),
        Node::Div(a, b) => Some(constant_value(a)? / constant_value(b)?),
        Node::Pow(a, p) => Some(constant_value(a)?.powf(*p)),
        _ => None,
    }
}

fn depends(n: &Node, pred: &dyn Fn(&Node) -> bool) -> bool {
    if pred(n) {
        return true;
    }
    match n {
        Node::Neg(a) | Node::Pow(a, _) | Node::Abs(a) | Node::Func(_, a) => depends(a, pred),
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
            depends(a, pred) || depends(b, pred)
        }
        _ => false,
    }
}

fn degree(n: &Node) -> Result<f64> {
    Ok(match n {
        Node::Num(v) if *v == 0.0 => f64::NEG_INFINITY,
        Node::Num(_) | Node::I | Node::X | Node::T | Node::Chi => 0.0,
        Node::Xi => 1.0,
        Node::Neg(a) | Node::Abs(a) => degree(a)?,
        Node::Add(a, b) | Node::Sub(a, b) => degree(a)?.max(degree(b)?),
        Node::Mul(a, b) => degree(a)? + degree(b)?,
        Node::Div(a, b) => degree(a)? - degree(b)?,
        Node::Pow(a, p) => {
            let d = degree(a)?;
            if d == f64::NEG_INFINITY {
                d
            } else {
                d * p
            }
        }
        Node::Func(f, a) => {
            let d = degree(a)?;
            if d > 0.0 {
                return Err(Error::Config {
                    line: 1,
                    col: 1,
                    msg: format!("{f:?} of a xi-dependent argument has no order; give it explicitly"),
                });
            }
            0.0
        }
    })
}

fn eval(n: &Node, t: f64, x: f64, xi: f64) -> Jet {
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    match n {
        Node::Num(v) => Jet::constant(C64::new(*v, 0.0)),
        Node::I => Jet::constant(C64::new(0.0, 1.0)),
        Node::X => Jet { v: C64::new(x, 0.0), dt: zero, dx: one, dxi: zero },
        Node::T => Jet { v: C64::new(t, 0.0), dt: one, dx: zero, dxi: zero },
        Node::Xi => Jet { v: C64::new(xi, 0.0), dt: zero, dx: zero, dxi: one },
        Node::Chi => Jet {
            v: C64::new(chi(xi), 0.0),
            dt: zero,
            dx: zero,
            dxi: C64::new(chi_derivative(xi), 0.0),
        },
        Node::Neg(a) => {
            let a = eval(a, t, x, xi);
            Jet { v: -a.v, dt: -a.dt, dx: -a.dx, dxi: -a.dxi }
        }
        Node::Add(a, b) | Node::Sub(a, b) => {
            let (a_, b_) = (eval(a, t, x, xi), eval(b, t, x, xi));
            let s = if matches!(n, Node::Add(..)) { 1.0 } else { -1.0 };
            Jet {
                v: a_.v + s * b_.v,
                dt: a_.dt + s * b_.dt,
                dx: a_.dx + s * b_.dx,
                dxi: a_.dxi + s * b_.dxi,
            }
        }
        Node::Mul(a, b) => {
            let (a, b) = (eval(a, t, x, xi), eval(b, t, x, xi));
            Jet {
                v: a.v * b.v,
                dt: a.dt * b.v + a.v * b.dt,
                dx: a.dx * b.v + a.v * b.dx,
                dxi: a.dxi * b.v + a.v * b.dxi,
            }
        }
        Node::Div(a, b) => {
            let (a, b) = (eval(a, t, x, xi), eval(b, t, x, xi));
            let b2 = b.v * b.v;
            Jet {
                v: a.v / b.v,
                dt: (a.dt * b.v - a.v * b.dt) / b2,
                dx: (a.dx * b.v - a.v * b.dx) / b2,
                dxi: (a.dxi * b.v - a.v * b.dxi) / b2,
            }
        }
        Node::Pow(a, p) => {
            let a = eval(a, t, x, xi);
            if a.v == zero {
                let v = if *p == 0.0 { one } else { zero };
                let dv = if *p == 1.0 { one } else { zero };
                return a.chain(v, dv);
            }
            let (v, dv) = if p.fract() == 0.0 && p.abs() < 64.0 {
                let k = *p as i32;
                (a.v.powi(k), a.v.powi(k - 1) * *p)
            } else {
                (a.v.powf(*p), a.v.powf(*p - 1.0) * *p)
            };
            a.chain(v, dv)
        }
        Node::Abs(a) => {
            let a = eval(a, t, x, xi);
            let s = a.v.re.signum() * if a.v.re == 0.0 { 0.0 } else { 1.0 };
            a.chain(C64::new(a.v.re.abs(), 0.0), C64::new(s, 0.0))
        }
        Node::Func(f, a) => {
            let a = eval(a, t, x, xi);
            match f {
                Func::Cos => a.chain(a.v.cos(), -a.v.sin()),
                Func::Sin => a.chain(a.v.sin(), a.v.cos()),
                Func::Exp => {
                    let e = a.v.exp();
                    a.chain(e, e)
                }
                Func::Sqrt => {
                    let s = a.v.sqrt();
                    a.chain(s, 0.5 / s)
                }
            }
        }
    }
}
