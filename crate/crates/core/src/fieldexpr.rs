//! Closed-form expressions for exponents, weights, and set predicates.
//!
//! Grammar (whitespace-insensitive, no implicit multiplication):
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := unary ('^' factor)?          // '^' right-associative
//! unary  := '-'? atom
//! atom   := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//! Identifiers: coordinates `x1..x3`, the radial distance `rho` = |x|, and the
//! functions `exp, log, abs, min, max, sin, cos` (log is natural). Note that
//! unary minus binds tighter than `^`, so `-2^2 = 4`.

use crate::grid::{Grid, GridSet, ScalarField};
use crate::scalar::Scalar;
use crate::{Error, Result};

/// Built-in functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Abs,
    Min,
    Max,
    Sin,
    Cos,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Abs => "abs",
            Func::Min => "min",
            Func::Max => "max",
            Func::Sin => "sin",
            Func::Cos => "cos",
        }
    }

    fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }

    fn lookup(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "abs" => Func::Abs,
            "min" => Func::Min,
            "max" => Func::Max,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            _ => return None,
        })
    }
}

/// Binary operators.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

/// Expression AST. Unary minus over a literal is folded into the constant.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    /// Coordinate variable, 0-based axis (x1 -> 0).
    Var(u8),
    /// Euclidean norm of the active coordinates.
    Rho,
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

/// Parses an expression per the module grammar.
pub fn parse_expr(text: &str) -> Result<Expr> {
    let mut p = Parser { bytes: text.as_bytes(), pos: 0 };
    p.skip_ws();
    if p.pos >= p.bytes.len() {
        return Err(Error::Expr { offset: 0, msg: "empty expression".into() });
    }
    let e = p.parse_expr()?;
    p.skip_ws();
    if p.pos < p.bytes.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, msg: &str) -> Error {
        Error::Expr { offset: self.pos, msg: msg.into() }
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

    fn eat(&mut self, b: u8) -> bool {
        if self.peek() == Some(b) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn parse_expr(&mut self) -> Result<Expr> {
        let mut lhs = self.parse_term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    let rhs = self.parse_term()?;
                    lhs = Expr::Bin(BinOp::Add, lhs.into(), rhs.into());
                }
                Some(b'-') => {
                    self.pos += 1;
                    let rhs = self.parse_term()?;
                    lhs = Expr::Bin(BinOp::Sub, lhs.into(), rhs.into());
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn parse_term(&mut self) -> Result<Expr> {
        let mut lhs = self.parse_factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    let rhs = self.parse_factor()?;
                    lhs = Expr::Bin(BinOp::Mul, lhs.into(), rhs.into());
                }
                Some(b'/') => {
                    self.pos += 1;
                    let rhs = self.parse_factor()?;
                    lhs = Expr::Bin(BinOp::Div, lhs.into(), rhs.into());
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn parse_factor(&mut self) -> Result<Expr> {
        let base = self.parse_unary()?;
        if self.eat(b'^') {
            let exp = self.parse_factor()?; // right-associative
            return Ok(Expr::Bin(BinOp::Pow, base.into(), exp.into()));
        }
        Ok(base)
    }

    fn parse_unary(&mut self) -> Result<Expr> {
        if self.eat(b'-') {
            let atom = self.parse_atom()?;
            // fold "-literal" into a constant so printing round-trips
            if let Expr::Const(c) = atom {
                return Ok(Expr::Const(-c));
            }
            return Ok(Expr::Neg(atom.into()));
        }
        self.parse_atom()
    }

    fn parse_atom(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.parse_expr()?;
                if !self.eat(b')') {
                    return Err(self.err("expected ')'"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.parse_number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.parse_ident(),
            _ => Err(self.err("expected number, identifier or '('")),
        }
    }

    fn parse_number(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos < self.bytes.len() && self.bytes[self.pos] == b'.' {
            self.pos += 1;
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
        }
        if self.pos < self.bytes.len() && (self.bytes[self.pos] | 32) == b'e' {
            let mark = self.pos;
            self.pos += 1;
            if self.pos < self.bytes.len() && matches!(self.bytes[self.pos], b'+' | b'-') {
                self.pos += 1;
            }
            if self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            } else {
                self.pos = mark; // 'e' belongs to something else; not our problem
            }
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Expr::Const(v)),
            _ => Err(Error::Expr { offset: start, msg: format!("bad number literal '{text}'") }),
        }
    }

    fn parse_ident(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.bytes.len()
            && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap().to_string();
        if self.peek() == Some(b'(') {
            let Some(f) = Func::lookup(&name) else {
                return Err(Error::Expr { offset: start, msg: format!("unknown function '{name}'") });
            };
            self.pos += 1; // '('
            let mut args = vec![self.parse_expr()?];
            while self.eat(b',') {
                args.push(self.parse_expr()?);
            }
            if !self.eat(b')') {
                return Err(self.err("expected ')' or ','"));
            }
            if args.len() != f.arity() {
                return Err(Error::Expr {
                    offset: start,
                    msg: format!("{} takes {} argument(s), got {}", f.name(), f.arity(), args.len()),
                });
            }
            return Ok(Expr::Call(f, args));
        }
        match name.as_str() {
            "x1" => Ok(Expr::Var(0)),
            "x2" => Ok(Expr::Var(1)),
            "x3" => Ok(Expr::Var(2)),
            "rho" => Ok(Expr::Rho),
            _ => Err(Error::Expr { offset: start, msg: format!("unknown identifier '{name}'") }),
        }
    }
}

// ── printing ─────────────────────────────────────────────────────────────

/// Syntactic level: 1 add/sub, 2 mul/div, 3 pow, 4 unary, 5 atom.
fn level(e: &Expr) -> u8 {
    match e {
        Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
        Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
        Expr::Bin(BinOp::Pow, ..) => 3,
        Expr::Neg(_) => 4,
        Expr::Const(c) if *c < 0.0 => 4, // prints with a leading '-'
        _ => 5,
    }
}

fn print_into(e: &Expr, min_level: u8, out: &mut String) {
    let wrap = level(e) < min_level;
    if wrap {
        out.push('(');
    }
    match e {
        Expr::Const(c) => {
            out.push_str(&format!("{c}"));
        }
        Expr::Var(k) => out.push_str(["x1", "x2", "x3"][*k as usize]),
        Expr::Rho => out.push_str("rho"),
        Expr::Neg(a) => {
            out.push('-');
            print_into(a, 5, out);
        }
        Expr::Bin(op, a, b) => {
            let (sym, la, lb) = match op {
                BinOp::Add => (" + ", 1, 2),
                BinOp::Sub => (" - ", 1, 2),
                BinOp::Mul => ("*", 2, 3),
                BinOp::Div => ("/", 2, 3),
                BinOp::Pow => ("^", 4, 3),
            };
            print_into(a, la, out);
            out.push_str(sym);
            print_into(b, lb, out);
        }
        Expr::Call(f, args) => {
            out.push_str(f.name());
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                print_into(a, 1, out);
            }
            out.push(')');
        }
    }
    if wrap {
        out.push(')');
    }
}

impl std::fmt::Display for Expr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut s = String::new();
        print_into(self, 1, &mut s);
        f.write_str(&s)
    }
}

// ── evaluation ───────────────────────────────────────────────────────────

impl Expr {
    /// Largest 1-based coordinate index used (0 if none).
    pub fn max_var(&self) -> usize {
        match self {
            Expr::Const(_) => 0,
            Expr::Var(k) => *k as usize + 1,
            Expr::Rho => 0,
            Expr::Neg(a) => a.max_var(),
            Expr::Bin(_, a, b) => a.max_var().max(b.max_var()),
            Expr::Call(_, args) => args.iter().map(|a| a.max_var()).max().unwrap_or(0),
        }
    }
}

fn pow_scalar<T: Scalar>(base: T, exp: T, strict: bool) -> Result<T> {
    let e_round = exp.round();
    if exp == e_round && e_round.abs() <= T::of(2_000_000_000.0) {
        // integer exponent: repeated multiplication up to 8, binary
        // exponentiation beyond — exact products either way
        let k = e_round.to_i64().unwrap();
        if base == T::zero() && k < 0 {
            if strict {
                return Err(Error::ExprEval("zero base with negative exponent".into()));
            }
            return Ok(T::infinity());
        }
        let a = k.unsigned_abs();
        let mut acc = if a <= 8 {
            let mut v = T::one();
            for _ in 0..a {
                v = v * base;
            }
            v
        } else {
            base.powi(a as i32)
        };
        if k < 0 {
            acc = T::one() / acc;
        }
        return Ok(acc);
    }
    // real power via exp/log
    if base < T::zero() {
        if strict {
            return Err(Error::ExprEval("negative base with non-integer exponent".into()));
        }
        return Ok(T::nan());
    }
    if base == T::zero() {
        if exp > T::zero() {
            return Ok(T::zero());
        }
        if strict {
            return Err(Error::ExprEval("zero base with non-positive exponent".into()));
        }
        return Ok(T::infinity());
    }
    Ok((exp * base.ln()).exp())
}

fn eval_impl<T: Scalar>(e: &Expr, x: &[T; 3], dim: usize, strict: bool) -> Result<T> {
    Ok(match e {
        Expr::Const(c) => T::of(*c),
        Expr::Var(k) => x[*k as usize],
        Expr::Rho => {
            let mut s = T::zero();
            for xk in x.iter().take(dim) {
                s = s + *xk * *xk;
            }
            s.sqrt()
        }
        Expr::Neg(a) => -eval_impl(a, x, dim, strict)?,
        Expr::Bin(op, a, b) => {
            let va = eval_impl(a, x, dim, strict)?;
            let vb = eval_impl(b, x, dim, strict)?;
            match op {
                BinOp::Add => va + vb,
                BinOp::Sub => va - vb,
                BinOp::Mul => va * vb,
                BinOp::Div => {
                    if vb == T::zero() && strict {
                        return Err(Error::ExprEval("division by zero".into()));
                    }
                    va / vb
                }
                BinOp::Pow => pow_scalar(va, vb, strict)?,
            }
        }
        Expr::Call(f, args) => {
            let v0 = eval_impl(&args[0], x, dim, strict)?;
            match f {
                Func::Exp => v0.exp(),
                Func::Log => {
                    if v0 <= T::zero() && strict {
                        return Err(Error::ExprEval("log of non-positive value".into()));
                    }
                    v0.ln()
                }
                Func::Abs => v0.abs(),
                Func::Sin => v0.sin(),
                Func::Cos => v0.cos(),
                Func::Min => v0.min(eval_impl(&args[1], x, dim, strict)?),
                Func::Max => v0.max(eval_impl(&args[1], x, dim, strict)?),
            }
        }
    })
}

/// Evaluates at a single point (strict: domain errors are reported).
pub fn eval_at<T: Scalar>(e: &Expr, x: &[T; 3], dim: usize) -> Result<T> {
    let v = eval_impl(e, x, dim, true)?;
    if !v.is_finite() {
        return Err(Error::ExprEval("non-finite result".into()));
    }
    Ok(v)
}

/// Evaluates at every grid node; the first offending node is named on error.
pub fn eval_field<T: Scalar>(e: &Expr, grid: &Grid<T>) -> Result<ScalarField<T>> {
    if e.max_var() > grid.dim() {
        return Err(Error::ExprEval(format!(
            "expression uses x{} but the grid has dimension {}",
            e.max_var(),
            grid.dim()
        )));
    }
    let mut values = Vec::with_capacity(grid.node_count());
    for id in 0..grid.node_count() {
        let x = grid.coords(id);
        match eval_at(e, &x, grid.dim()) {
            Ok(v) => values.push(v),
            Err(err) => {
                let c: Vec<String> =
                    (0..grid.dim()).map(|k| format!("{}", x[k].as_f64())).collect();
                return Err(Error::ExprEval(format!(
                    "{err} at node {id} ({})",
                    c.join(", ")
                )));
            }
        }
    }
    ScalarField::new(*grid, values)
}

/// Comparison operators usable in set predicates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cmp {
    Lt,
    Le,
    Gt,
    Ge,
}

impl Cmp {
    pub fn parse(s: &str) -> Option<Cmp> {
        Some(match s {
            "<" => Cmp::Lt,
            "<=" => Cmp::Le,
            ">" => Cmp::Gt,
            ">=" => Cmp::Ge,
            _ => return None,
        })
    }

    fn holds<T: Scalar>(self, a: T, b: T) -> bool {
        match self {
            Cmp::Lt => a < b,
            Cmp::Le => a <= b,
            Cmp::Gt => a > b,
            Cmp::Ge => a >= b,
        }
    }
}

/// Rasterizes the predicate `lhs <cmp> rhs` on a grid.
///
/// Predicate evaluation is lenient: IEEE infinities are allowed intermediate
/// values (e.g. `exp(-1/x2)` at `x2 = 0` cleanly yields 0), but a NaN on
/// either side is an error naming the first offending node.
pub fn eval_predicate<T: Scalar>(
    lhs: &Expr,
    cmp: Cmp,
    rhs: &Expr,
    grid: &Grid<T>,
) -> Result<GridSet<T>> {
    for e in [lhs, rhs] {
        if e.max_var() > grid.dim() {
            return Err(Error::ExprEval(format!(
                "predicate uses x{} but the grid has dimension {}",
                e.max_var(),
                grid.dim()
            )));
        }
    }
    let mut mask = Vec::with_capacity(grid.node_count());
    for id in 0..grid.node_count() {
        let x = grid.coords(id);
        let a = eval_impl(lhs, &x, grid.dim(), false)?;
        let b = eval_impl(rhs, &x, grid.dim(), false)?;
        if a.is_nan() || b.is_nan() {
            return Err(Error::ExprEval(format!("predicate is NaN at node {id}")));
        }
        mask.push(cmp.holds(a, b));
    }
    GridSet::new(*grid, mask)
}
