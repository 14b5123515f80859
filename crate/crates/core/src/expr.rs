//! Scalar expressions over chart coordinates.
//!
//! Expressions are closed-form functions of the coordinates `x1 .. xn` built
//! from real literals, `+ - * /`, integer powers `^`, unary minus, and the
//! functions `sin cos exp log sqrt tanh`. They are immutable values: parsing
//! and differentiation build new trees, evaluation never mutates. Every
//! evaluation either returns a finite `f64` or reports a domain error — a NaN
//! or infinity is never silently produced.
//!
//! The concrete grammar is documented in `docs/grammar.ebnf`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Unary functions admitted by the grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Tanh,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Tanh => "tanh",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "tanh" => Func::Tanh,
            _ => return None,
        })
    }

    #[inline]
    fn apply(self, v: f64) -> Result<f64, EvalError> {
        match self {
            Func::Sin => Ok(v.sin()),
            Func::Cos => Ok(v.cos()),
            Func::Exp => Ok(v.exp()),
            Func::Log => {
                if v <= 0.0 {
                    Err(EvalError::LogNonPositive(v))
                } else {
                    Ok(v.ln())
                }
            }
            Func::Sqrt => {
                if v < 0.0 {
                    Err(EvalError::SqrtNegative(v))
                } else {
                    Ok(v.sqrt())
                }
            }
            Func::Tanh => Ok(v.tanh()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Ast {
    Const(f64),
    /// Zero-based coordinate index; surface syntax `x1` is index 0.
    Var(usize),
    Neg(Box<Ast>),
    Add(Box<Ast>, Box<Ast>),
    Sub(Box<Ast>, Box<Ast>),
    Mul(Box<Ast>, Box<Ast>),
    Div(Box<Ast>, Box<Ast>),
    Pow(Box<Ast>, i32),
    Call(Func, Box<Ast>),
}

/// Errors produced when evaluating an expression at a point.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("point has {got} coordinates, expression expects {expected}")]
    WrongArity { expected: usize, got: usize },
    #[error("division by zero")]
    DivisionByZero,
    #[error("log of non-positive value {0}")]
    LogNonPositive(f64),
    #[error("sqrt of negative value {0}")]
    SqrtNegative(f64),
    #[error("evaluation produced a non-finite value")]
    NonFinite,
}

/// Parse failure with the byte offset of the offending token.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("parse error at byte {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

#[inline]
fn finite(v: f64) -> Result<f64, EvalError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::NonFinite)
    }
}

impl Ast {
    fn eval(&self, x: &[f64]) -> Result<f64, EvalError> {
        let v = match self {
            Ast::Const(c) => *c,
            Ast::Var(i) => x[*i],
            Ast::Neg(e) => -e.eval(x)?,
            Ast::Add(a, b) => a.eval(x)? + b.eval(x)?,
            Ast::Sub(a, b) => a.eval(x)? - b.eval(x)?,
            Ast::Mul(a, b) => a.eval(x)? * b.eval(x)?,
            Ast::Div(a, b) => {
                let d = b.eval(x)?;
                if d == 0.0 {
                    return Err(EvalError::DivisionByZero);
                }
                a.eval(x)? / d
            }
            Ast::Pow(e, n) => e.eval(x)?.powi(*n),
            Ast::Call(f, e) => f.apply(e.eval(x)?)?,
        };
        finite(v)
    }

    fn max_var(&self) -> Option<usize> {
        match self {
            Ast::Const(_) => None,
            Ast::Var(i) => Some(*i),
            Ast::Neg(e) | Ast::Pow(e, _) | Ast::Call(_, e) => e.max_var(),
            Ast::Add(a, b) | Ast::Sub(a, b) | Ast::Mul(a, b) | Ast::Div(a, b) => {
                match (a.max_var(), b.max_var()) {
                    (Some(i), Some(j)) => Some(i.max(j)),
                    (i, j) => i.or(j),
                }
            }
        }
    }
}

// Smart constructors. They fold literal zeros/ones and constant subtrees so
// that derivative and Christoffel trees stay small; folding is skipped
// whenever it could mask a runtime domain error (division) or produce a
// non-finite literal.
fn c_add(a: Ast, b: Ast) -> Ast {
    match (a, b) {
        (Ast::Const(x), Ast::Const(y)) if (x + y).is_finite() => Ast::Const(x + y),
        (Ast::Const(z), b) if z == 0.0 => b,
        (a, Ast::Const(z)) if z == 0.0 => a,
        (a, b) => Ast::Add(a.into(), b.into()),
    }
}

fn c_sub(a: Ast, b: Ast) -> Ast {
    match (a, b) {
        (Ast::Const(x), Ast::Const(y)) if (x - y).is_finite() => Ast::Const(x - y),
        (a, Ast::Const(z)) if z == 0.0 => a,
        (Ast::Const(z), b) if z == 0.0 => c_neg(b),
        (a, b) => Ast::Sub(a.into(), b.into()),
    }
}

fn c_mul(a: Ast, b: Ast) -> Ast {
    match (a, b) {
        (Ast::Const(x), Ast::Const(y)) if (x * y).is_finite() => Ast::Const(x * y),
        (Ast::Const(z), _) | (_, Ast::Const(z)) if z == 0.0 => Ast::Const(0.0),
        (Ast::Const(o), b) if o == 1.0 => b,
        (a, Ast::Const(o)) if o == 1.0 => a,
        (a, b) => Ast::Mul(a.into(), b.into()),
    }
}

fn c_div(a: Ast, b: Ast) -> Ast {
    match (a, b) {
        (Ast::Const(x), Ast::Const(y)) if y != 0.0 && (x / y).is_finite() => Ast::Const(x / y),
        (a, Ast::Const(o)) if o == 1.0 => a,
        (a, b) => Ast::Div(a.into(), b.into()),
    }
}

fn c_neg(a: Ast) -> Ast {
    match a {
        Ast::Const(x) => Ast::Const(-x),
        Ast::Neg(inner) => *inner,
        a => Ast::Neg(a.into()),
    }
}

fn c_pow(a: Ast, n: i32) -> Ast {
    match (a, n) {
        (_, 0) => Ast::Const(1.0),
        (a, 1) => a,
        (Ast::Const(x), n) if x.powi(n).is_finite() => Ast::Const(x.powi(n)),
        (a, n) => Ast::Pow(a.into(), n),
    }
}

fn d_ast(ast: &Ast, i: usize) -> Ast {
    match ast {
        Ast::Const(_) => Ast::Const(0.0),
        Ast::Var(j) => Ast::Const(if *j == i { 1.0 } else { 0.0 }),
        Ast::Neg(e) => c_neg(d_ast(e, i)),
        Ast::Add(a, b) => c_add(d_ast(a, i), d_ast(b, i)),
        Ast::Sub(a, b) => c_sub(d_ast(a, i), d_ast(b, i)),
        Ast::Mul(a, b) => c_add(
            c_mul(d_ast(a, i), (**b).clone()),
            c_mul((**a).clone(), d_ast(b, i)),
        ),
        Ast::Div(a, b) => c_div(
            c_sub(
                c_mul(d_ast(a, i), (**b).clone()),
                c_mul((**a).clone(), d_ast(b, i)),
            ),
            c_pow((**b).clone(), 2),
        ),
        Ast::Pow(e, n) => c_mul(
            c_mul(Ast::Const(f64::from(*n)), c_pow((**e).clone(), n - 1)),
            d_ast(e, i),
        ),
        Ast::Call(f, e) => {
            let inner = (**e).clone();
            let outer = match f {
                Func::Sin => Ast::Call(Func::Cos, inner.into()),
                Func::Cos => c_neg(Ast::Call(Func::Sin, inner.into())),
                Func::Exp => Ast::Call(Func::Exp, inner.into()),
                Func::Log => c_div(Ast::Const(1.0), inner),
                Func::Sqrt => c_div(
                    Ast::Const(1.0),
                    c_mul(Ast::Const(2.0), Ast::Call(Func::Sqrt, inner.into())),
                ),
                Func::Tanh => c_sub(
                    Ast::Const(1.0),
                    c_pow(Ast::Call(Func::Tanh, inner.into()), 2),
                ),
            };
            c_mul(outer, d_ast(e, i))
        }
    }
}

/// A scalar expression on an `n`-dimensional chart.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarExpr {
    ast: Ast,
    dim: usize,
}

impl ScalarExpr {
    /// Parses `src` as an expression in the coordinates `x1 .. x{dim}`.
    pub fn parse(src: &str, dim: usize) -> Result<ScalarExpr, ParseError> {
        let ast = Parser::new(src, dim).parse()?;
        Ok(ScalarExpr { ast, dim })
    }

    /// A literal constant. `value` must be finite.
    pub fn constant(value: f64, dim: usize) -> ScalarExpr {
        assert!(value.is_finite(), "constant expression must be finite");
        ScalarExpr {
            ast: Ast::Const(value),
            dim,
        }
    }

    pub fn zero(dim: usize) -> ScalarExpr {
        ScalarExpr::constant(0.0, dim)
    }

    pub fn one(dim: usize) -> ScalarExpr {
        ScalarExpr::constant(1.0, dim)
    }

    /// The coordinate function with zero-based `index` (surface syntax `x{index+1}`).
    pub fn coordinate(index: usize, dim: usize) -> ScalarExpr {
        assert!(index < dim, "coordinate index {index} out of range for dim {dim}");
        ScalarExpr {
            ast: Ast::Var(index),
            dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// True when the expression is the literal constant zero.
    pub fn is_zero(&self) -> bool {
        matches!(self.ast, Ast::Const(c) if c == 0.0)
    }

    /// Evaluates at `x`, which must have exactly `dim` coordinates.
    pub fn eval(&self, x: &[f64]) -> Result<f64, EvalError> {
        if x.len() != self.dim {
            return Err(EvalError::WrongArity {
                expected: self.dim,
                got: x.len(),
            });
        }
        self.ast.eval(x)
    }

    /// The partial derivative with respect to the zero-based coordinate `index`.
    ///
    /// Construction is purely syntactic apart from literal folding; no
    /// simplification pass runs on the result.
    pub fn differentiate(&self, index: usize) -> ScalarExpr {
        assert!(index < self.dim, "derivative index {index} out of range");
        ScalarExpr {
            ast: d_ast(&self.ast, index),
            dim: self.dim,
        }
    }

    /// Reinterprets the expression on a larger chart with the same leading
    /// coordinates (used to lift base expressions to the tangent bundle).
    pub fn extend_dim(&self, dim: usize) -> ScalarExpr {
        assert!(dim >= self.dim, "cannot shrink expression dimension");
        ScalarExpr {
            ast: self.ast.clone(),
            dim,
        }
    }

    pub fn add(&self, other: &ScalarExpr) -> ScalarExpr {
        self.combine(other, c_add)
    }

    pub fn sub(&self, other: &ScalarExpr) -> ScalarExpr {
        self.combine(other, c_sub)
    }

    pub fn mul(&self, other: &ScalarExpr) -> ScalarExpr {
        self.combine(other, c_mul)
    }

    pub fn div(&self, other: &ScalarExpr) -> ScalarExpr {
        self.combine(other, c_div)
    }

    pub fn neg(&self) -> ScalarExpr {
        ScalarExpr {
            ast: c_neg(self.ast.clone()),
            dim: self.dim,
        }
    }

    pub fn powi(&self, n: i32) -> ScalarExpr {
        ScalarExpr {
            ast: c_pow(self.ast.clone(), n),
            dim: self.dim,
        }
    }

    pub fn apply(&self, f: Func) -> ScalarExpr {
        ScalarExpr {
            ast: Ast::Call(f, self.ast.clone().into()),
            dim: self.dim,
        }
    }

    pub fn scale(&self, k: f64) -> ScalarExpr {
        assert!(k.is_finite());
        ScalarExpr {
            ast: c_mul(Ast::Const(k), self.ast.clone()),
            dim: self.dim,
        }
    }

    fn combine(&self, other: &ScalarExpr, op: fn(Ast, Ast) -> Ast) -> ScalarExpr {
        assert_eq!(
            self.dim, other.dim,
            "combining expressions of different dimensions"
        );
        ScalarExpr {
            ast: op(self.ast.clone(), other.ast.clone()),
            dim: self.dim,
        }
    }

    /// Flattens the tree into a postfix program for repeated evaluation.
    pub fn compile(&self) -> CompiledExpr {
        let mut ops = Vec::new();
        fn walk(ast: &Ast, ops: &mut Vec<Op>) {
            match ast {
                Ast::Const(c) => ops.push(Op::Const(*c)),
                Ast::Var(i) => ops.push(Op::Var(*i as u32)),
                Ast::Neg(e) => {
                    walk(e, ops);
                    ops.push(Op::Neg);
                }
                Ast::Add(a, b) => {
                    walk(a, ops);
                    walk(b, ops);
                    ops.push(Op::Add);
                }
                Ast::Sub(a, b) => {
                    walk(a, ops);
                    walk(b, ops);
                    ops.push(Op::Sub);
                }
                Ast::Mul(a, b) => {
                    walk(a, ops);
                    walk(b, ops);
                    ops.push(Op::Mul);
                }
                Ast::Div(a, b) => {
                    walk(a, ops);
                    walk(b, ops);
                    ops.push(Op::Div);
                }
                Ast::Pow(e, n) => {
                    walk(e, ops);
                    ops.push(Op::Powi(*n));
                }
                Ast::Call(f, e) => {
                    walk(e, ops);
                    ops.push(Op::Call(*f));
                }
            }
        }
        walk(&self.ast, &mut ops);
        let mut depth = 0usize;
        let mut max_depth = 0usize;
        for op in &ops {
            match op {
                Op::Const(_) | Op::Var(_) => depth += 1,
                Op::Add | Op::Sub | Op::Mul | Op::Div => depth -= 1,
                Op::Neg | Op::Powi(_) | Op::Call(_) => {}
            }
            max_depth = max_depth.max(depth);
        }
        CompiledExpr {
            ops,
            dim: self.dim,
            max_stack: max_depth,
        }
    }
}

impl fmt::Display for ScalarExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_ast(&self.ast, 0, f)
    }
}

// Precedence levels: additive 1, multiplicative 2, unary minus 3, power 4,
// atoms 5. A node is parenthesized when its level is below the context.
fn ast_prec(ast: &Ast) -> u8 {
    match ast {
        Ast::Add(..) | Ast::Sub(..) => 1,
        Ast::Mul(..) | Ast::Div(..) => 2,
        Ast::Neg(..) => 3,
        Ast::Const(c) if *c < 0.0 => 3,
        Ast::Pow(..) => 4,
        Ast::Const(_) | Ast::Var(_) | Ast::Call(..) => 5,
    }
}

fn fmt_ast(ast: &Ast, ctx: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let prec = ast_prec(ast);
    let parens = prec < ctx;
    if parens {
        write!(f, "(")?;
    }
    match ast {
        Ast::Const(c) => write!(f, "{c}")?,
        Ast::Var(i) => write!(f, "x{}", i + 1)?,
        Ast::Neg(e) => {
            write!(f, "-")?;
            fmt_ast(e, 4, f)?;
        }
        Ast::Add(a, b) => {
            fmt_ast(a, 1, f)?;
            write!(f, " + ")?;
            fmt_ast(b, 2, f)?;
        }
        Ast::Sub(a, b) => {
            fmt_ast(a, 1, f)?;
            write!(f, " - ")?;
            fmt_ast(b, 2, f)?;
        }
        Ast::Mul(a, b) => {
            fmt_ast(a, 2, f)?;
            write!(f, "*")?;
            fmt_ast(b, 3, f)?;
        }
        Ast::Div(a, b) => {
            fmt_ast(a, 2, f)?;
            write!(f, "/")?;
            fmt_ast(b, 3, f)?;
        }
        Ast::Pow(e, n) => {
            fmt_ast(e, 5, f)?;
            write!(f, "^{n}")?;
        }
        Ast::Call(func, e) => {
            write!(f, "{}(", func.name())?;
            fmt_ast(e, 0, f)?;
            write!(f, ")")?;
        }
    }
    if parens {
        write!(f, ")")?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Const(f64),
    Var(u32),
    Neg,
    Add,
    Sub,
    Mul,
    Div,
    Powi(i32),
    Call(Func),
}

/// Postfix form of a [`ScalarExpr`]; evaluation semantics match the tree
/// walker exactly, including domain errors and finiteness checks.
#[derive(Debug, Clone)]
pub struct CompiledExpr {
    ops: Vec<Op>,
    dim: usize,
    max_stack: usize,
}

impl CompiledExpr {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, EvalError> {
        let mut stack = Vec::with_capacity(self.max_stack);
        self.eval_with(x, &mut stack)
    }

    /// Evaluation with a caller-provided stack, for hot loops.
    pub fn eval_with(&self, x: &[f64], stack: &mut Vec<f64>) -> Result<f64, EvalError> {
        if x.len() != self.dim {
            return Err(EvalError::WrongArity {
                expected: self.dim,
                got: x.len(),
            });
        }
        stack.clear();
        stack.reserve(self.max_stack);
        for op in &self.ops {
            match op {
                Op::Const(c) => stack.push(*c),
                Op::Var(i) => stack.push(finite(x[*i as usize])?),
                Op::Neg => {
                    let a = stack.last_mut().expect("stack underflow");
                    *a = -*a;
                }
                Op::Add | Op::Sub | Op::Mul | Op::Div => {
                    let b = stack.pop().expect("stack underflow");
                    let a = stack.last_mut().expect("stack underflow");
                    *a = match op {
                        Op::Add => *a + b,
                        Op::Sub => *a - b,
                        Op::Mul => *a * b,
                        _ => {
                            if b == 0.0 {
                                return Err(EvalError::DivisionByZero);
                            }
                            *a / b
                        }
                    };
                    *a = finite(*a)?;
                }
                Op::Powi(n) => {
                    let a = stack.last_mut().expect("stack underflow");
                    *a = finite(a.powi(*n))?;
                }
                Op::Call(f) => {
                    let a = stack.last_mut().expect("stack underflow");
                    *a = f.apply(*a)?;
                }
            }
        }
        let v = stack.pop().expect("empty program");
        finite(v)
    }
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    dim: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str, dim: usize) -> Parser<'a> {
        Parser {
            src,
            bytes: src.as_bytes(),
            pos: 0,
            dim,
        }
    }

    fn parse(mut self) -> Result<Ast, ParseError> {
        let ast = self.expr()?;
        self.skip_ws();
        if self.pos < self.bytes.len() {
            return Err(self.err("unexpected trailing input"));
        }
        if let Some(i) = ast.max_var() {
            debug_assert!(i < self.dim);
        }
        Ok(ast)
    }

    fn err(&self, message: impl Into<String>) -> ParseError {
        ParseError {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Ast, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Ast::Add(lhs.into(), rhs.into());
                }
                Some(b'-') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Ast::Sub(lhs.into(), rhs.into());
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Ast, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    let rhs = self.factor()?;
                    lhs = Ast::Mul(lhs.into(), rhs.into());
                }
                Some(b'/') => {
                    self.pos += 1;
                    let rhs = self.factor()?;
                    lhs = Ast::Div(lhs.into(), rhs.into());
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Ast, ParseError> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            let inner = self.factor()?;
            return Ok(Ast::Neg(inner.into()));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Ast, ParseError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let n = self.exponent()?;
            return Ok(Ast::Pow(base.into(), n));
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<i32, ParseError> {
        self.skip_ws();
        let neg = if self.bytes.get(self.pos) == Some(&b'-') {
            self.pos += 1;
            true
        } else {
            false
        };
        let start = self.pos;
        let value = self.number()?;
        if value.fract() != 0.0 || value.abs() > f64::from(i32::MAX) {
            self.pos = start;
            return Err(self.err("exponent must be an integer literal"));
        }
        let n = value as i32;
        Ok(if neg { -n } else { n })
    }

    fn atom(&mut self) -> Result<Ast, ParseError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() == Some(b')') {
                    self.pos += 1;
                    Ok(inner)
                } else {
                    Err(self.err("expected ')'"))
                }
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let v = self.number()?;
                Ok(Ast::Const(v))
            }
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            Some(c) => Err(self.err(format!("unexpected character '{}'", c as char))),
            None => Err(self.err("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self
            .bytes
            .get(self.pos)
            .is_some_and(|b| b.is_ascii_digit())
        {
            self.pos += 1;
        }
        if self.bytes.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            while self
                .bytes
                .get(self.pos)
                .is_some_and(|b| b.is_ascii_digit())
            {
                self.pos += 1;
            }
        }
        if matches!(self.bytes.get(self.pos), Some(b'e') | Some(b'E')) {
            let mark = self.pos;
            self.pos += 1;
            if matches!(self.bytes.get(self.pos), Some(b'+') | Some(b'-')) {
                self.pos += 1;
            }
            if self
                .bytes
                .get(self.pos)
                .is_some_and(|b| b.is_ascii_digit())
            {
                while self
                    .bytes
                    .get(self.pos)
                    .is_some_and(|b| b.is_ascii_digit())
                {
                    self.pos += 1;
                }
            } else {
                // not an exponent suffix after all (e.g. "2e" followed by junk)
                self.pos = mark;
            }
        }
        if self.pos == start {
            return Err(self.err("expected a number"));
        }
        let text = &self.src[start..self.pos];
        match f64::from_str(text) {
            Ok(v) if v.is_finite() => Ok(v),
            _ => {
                self.pos = start;
                Err(self.err(format!("invalid numeric literal '{text}'")))
            }
        }
    }

    fn ident(&mut self) -> Result<Ast, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self
            .bytes
            .get(self.pos)
            .is_some_and(|b| b.is_ascii_alphanumeric())
        {
            self.pos += 1;
        }
        let name = &self.src[start..self.pos];
        if let Some(rest) = name.strip_prefix('x') {
            if !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()) {
                let idx: usize = rest.parse().map_err(|_| ParseError {
                    offset: start,
                    message: format!("coordinate index '{rest}' out of range"),
                })?;
                if idx == 0 {
                    return Err(ParseError {
                        offset: start,
                        message: "coordinate indices start at x1".into(),
                    });
                }
                if idx > self.dim {
                    return Err(ParseError {
                        offset: start,
                        message: format!(
                            "coordinate x{idx} exceeds chart dimension {}",
                            self.dim
                        ),
                    });
                }
                return Ok(Ast::Var(idx - 1));
            }
        }
        if let Some(f) = Func::from_name(name) {
            if self.peek() != Some(b'(') {
                return Err(self.err(format!("expected '(' after function '{name}'")));
            }
            self.pos += 1;
            let arg = self.expr()?;
            if self.peek() != Some(b')') {
                return Err(self.err("expected ')'"));
            }
            self.pos += 1;
            return Ok(Ast::Call(f, arg.into()));
        }
        Err(ParseError {
            offset: start,
            message: format!("unknown identifier '{name}'"),
        })
    }
}
