//! Coefficient-function DSL: parsing, evaluation and symbolic differentiation
//! of scalar functions of one variable.
//!
//! The grammar covers numbers, one free variable, `+ - * / ^`, unary minus,
//! parentheses, the functions `exp`, `log`, `abs`, `sqrt`, `sin`, `cos`,
//! `sign`, two-argument `pow`, and the constants `pi` and `e`. Precedence is
//! the usual one: `^` binds tightest and is right-associative, then unary
//! minus, then `* /`, then `+ -`. There is no implicit multiplication.
//!
//! Values are immutable after parsing and safe to evaluate concurrently.
//! Evaluation never produces a silent NaN: every indeterminate form or
//! domain violation is a signaled error, while overflow of an otherwise
//! well-defined value is reported as a signed infinity.
//!
//! ```
//! use blowup::expr::FunctionExpr;
//!
//! let b = FunctionExpr::parse("8*x^2 - 36*x + 48", "x").unwrap();
//! assert_eq!(b.eval(0.0).unwrap(), 48.0);
//! ```

use std::fmt;

use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Func {
    Exp,
    Log,
    Abs,
    Sqrt,
    Sin,
    Cos,
    Sign,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sign => "sign",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Ast {
    Num(f64),
    Var,
    Neg(Box<Ast>),
    Bin(BinOp, Box<Ast>, Box<Ast>),
    Fun(Func, Box<Ast>),
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
#[error("parse error at byte {offset}: {kind}")]
pub struct ParseError {
    pub offset: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum ParseErrorKind {
    #[error("unexpected character {0:?}")]
    UnexpectedChar(char),
    #[error("unexpected end of input")]
    UnexpectedEnd,
    #[error("expected {0}")]
    Expected(&'static str),
    #[error("unknown identifier {0:?}")]
    UnknownIdentifier(String),
    #[error("malformed number literal")]
    BadNumber,
    #[error("trailing input after expression")]
    TrailingInput,
    #[error("pow expects exactly two arguments")]
    PowArity,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum EvalError {
    #[error("logarithm of non-positive value {0}")]
    LogNonPositive(f64),
    #[error("square root of negative value {0}")]
    SqrtNegative(f64),
    #[error("zero raised to negative power {0}")]
    ZeroToNegative(f64),
    #[error("negative base {0} raised to non-integer power {1}")]
    NegativeBaseFractionalPower(f64, f64),
    #[error("division by zero")]
    DivisionByZero,
    #[error("indeterminate form (NaN) during evaluation")]
    Indeterminate,
    #[error("{0}")]
    Other(String),
}

/// A parsed symbolic expression in one free variable.
#[derive(Clone, Debug)]
pub struct FunctionExpr {
    ast: Ast,
    var_name: String,
    source_text: String,
}

impl FunctionExpr {
    pub fn parse(text: &str, var: &str) -> Result<Self, ParseError> {
        let ast = Parser::new(text, var).parse()?;
        Ok(FunctionExpr {
            ast,
            var_name: var.to_string(),
            source_text: text.to_string(),
        })
    }

    /// A constant function, convenient for `h == 1` style coefficients.
    pub fn constant(c: f64) -> Self {
        FunctionExpr {
            ast: Ast::Num(c),
            var_name: "x".to_string(),
            source_text: format!("{c}"),
        }
    }

    pub fn var_name(&self) -> &str {
        &self.var_name
    }

    pub fn source_text(&self) -> &str {
        &self.source_text
    }

    pub fn ast(&self) -> &Ast {
        &self.ast
    }

    /// Evaluates at `point`. Overflow of a well-defined value yields a
    /// signed infinity; domain violations and indeterminate forms are errors.
    pub fn eval(&self, point: f64) -> Result<f64, EvalError> {
        eval_ast(&self.ast, point)
    }

    /// Symbolic derivative. `abs` differentiates to `sign`, with
    /// `sign(0) = 0`; non-differentiable points surface at evaluation time.
    pub fn diff(&self) -> FunctionExpr {
        let d = diff_ast(&self.ast);
        let source_text = print_ast(&d, &self.var_name);
        FunctionExpr {
            ast: d,
            var_name: self.var_name.clone(),
            source_text,
        }
    }
}

impl fmt::Display for FunctionExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", print_ast(&self.ast, &self.var_name))
    }
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

fn check(v: f64) -> Result<f64, EvalError> {
    if v.is_nan() {
        Err(EvalError::Indeterminate)
    } else {
        Ok(v)
    }
}

fn eval_ast(ast: &Ast, x: f64) -> Result<f64, EvalError> {
    match ast {
        Ast::Num(c) => Ok(*c),
        Ast::Var => Ok(x),
        Ast::Neg(a) => Ok(-eval_ast(a, x)?),
        Ast::Bin(op, a, b) => {
            let u = eval_ast(a, x)?;
            let v = eval_ast(b, x)?;
            match op {
                BinOp::Add => check(u + v),
                BinOp::Sub => check(u - v),
                BinOp::Mul => check(u * v),
                BinOp::Div => {
                    if v == 0.0 {
                        Err(EvalError::DivisionByZero)
                    } else {
                        check(u / v)
                    }
                }
                BinOp::Pow => eval_pow(u, v),
            }
        }
        Ast::Fun(f, a) => {
            let u = eval_ast(a, x)?;
            match f {
                Func::Exp => check(u.exp()),
                Func::Log => {
                    if u <= 0.0 {
                        Err(EvalError::LogNonPositive(u))
                    } else {
                        check(u.ln())
                    }
                }
                Func::Abs => Ok(u.abs()),
                Func::Sqrt => {
                    if u < 0.0 {
                        Err(EvalError::SqrtNegative(u))
                    } else {
                        check(u.sqrt())
                    }
                }
                Func::Sin => check(u.sin()),
                Func::Cos => check(u.cos()),
                Func::Sign => Ok(if u == 0.0 { 0.0 } else { u.signum() }),
            }
        }
    }
}

fn eval_pow(u: f64, v: f64) -> Result<f64, EvalError> {
    if u == 0.0 && v < 0.0 {
        return Err(EvalError::ZeroToNegative(v));
    }
    if u < 0.0 {
        // Negative base: only integer exponents are defined.
        if v.fract() != 0.0 || !v.is_finite() {
            return Err(EvalError::NegativeBaseFractionalPower(u, v));
        }
    }
    check(u.powf(v))
}

// ---------------------------------------------------------------------------
// Differentiation
// ---------------------------------------------------------------------------

fn num(c: f64) -> Ast {
    Ast::Num(c)
}

fn bin(op: BinOp, a: Ast, b: Ast) -> Ast {
    Ast::Bin(op, Box::new(a), Box::new(b))
}

fn fun(f: Func, a: Ast) -> Ast {
    Ast::Fun(f, Box::new(a))
}

fn diff_ast(ast: &Ast) -> Ast {
    match ast {
        Ast::Num(_) => num(0.0),
        Ast::Var => num(1.0),
        Ast::Neg(a) => Ast::Neg(Box::new(diff_ast(a))),
        Ast::Bin(BinOp::Add, a, b) => bin(BinOp::Add, diff_ast(a), diff_ast(b)),
        Ast::Bin(BinOp::Sub, a, b) => bin(BinOp::Sub, diff_ast(a), diff_ast(b)),
        Ast::Bin(BinOp::Mul, a, b) => bin(
            BinOp::Add,
            bin(BinOp::Mul, diff_ast(a), (**b).clone()),
            bin(BinOp::Mul, (**a).clone(), diff_ast(b)),
        ),
        Ast::Bin(BinOp::Div, a, b) => bin(
            BinOp::Div,
            bin(
                BinOp::Sub,
                bin(BinOp::Mul, diff_ast(a), (**b).clone()),
                bin(BinOp::Mul, (**a).clone(), diff_ast(b)),
            ),
            bin(BinOp::Pow, (**b).clone(), num(2.0)),
        ),
        Ast::Bin(BinOp::Pow, a, b) => match &**b {
            // u^c -> c * u^(c-1) * u'
            Ast::Num(c) => bin(
                BinOp::Mul,
                bin(
                    BinOp::Mul,
                    num(*c),
                    bin(BinOp::Pow, (**a).clone(), num(c - 1.0)),
                ),
                diff_ast(a),
            ),
            // u^v -> u^v * (v' * log(u) + v * u' / u)
            _ => bin(
                BinOp::Mul,
                ast.clone(),
                bin(
                    BinOp::Add,
                    bin(BinOp::Mul, diff_ast(b), fun(Func::Log, (**a).clone())),
                    bin(
                        BinOp::Div,
                        bin(BinOp::Mul, (**b).clone(), diff_ast(a)),
                        (**a).clone(),
                    ),
                ),
            ),
        },
        Ast::Fun(f, a) => {
            let da = diff_ast(a);
            let outer = match f {
                Func::Exp => fun(Func::Exp, (**a).clone()),
                Func::Log => bin(BinOp::Div, num(1.0), (**a).clone()),
                Func::Abs => fun(Func::Sign, (**a).clone()),
                Func::Sqrt => bin(
                    BinOp::Div,
                    num(0.5),
                    fun(Func::Sqrt, (**a).clone()),
                ),
                Func::Sin => fun(Func::Cos, (**a).clone()),
                Func::Cos => Ast::Neg(Box::new(fun(Func::Sin, (**a).clone()))),
                Func::Sign => num(0.0),
            };
            bin(BinOp::Mul, outer, da)
        }
    }
}

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

fn precedence(ast: &Ast) -> u8 {
    match ast {
        Ast::Bin(BinOp::Add | BinOp::Sub, _, _) => 1,
        Ast::Bin(BinOp::Mul | BinOp::Div, _, _) => 2,
        Ast::Neg(_) => 3,
        Ast::Bin(BinOp::Pow, _, _) => 4,
        _ => 5,
    }
}

fn print_ast(ast: &Ast, var: &str) -> String {
    fn wrap(s: String, need: bool) -> String {
        if need {
            format!("({s})")
        } else {
            s
        }
    }
    fn go(ast: &Ast, var: &str) -> String {
        match ast {
            Ast::Num(c) => {
                if *c < 0.0 {
                    format!("({c})")
                } else {
                    format!("{c}")
                }
            }
            Ast::Var => var.to_string(),
            Ast::Neg(a) => {
                let inner = go(a, var);
                format!("-{}", wrap(inner, precedence(a) < 3))
            }
            Ast::Bin(op, a, b) => {
                let p = precedence(ast);
                let (sym, lp, rp) = match op {
                    BinOp::Add => ("+", p, p),
                    BinOp::Sub => ("-", p, p + 1),
                    BinOp::Mul => ("*", p, p),
                    BinOp::Div => ("/", p, p + 1),
                    // right-associative
                    BinOp::Pow => ("^", p + 1, p),
                };
                let l = wrap(go(a, var), precedence(a) < lp);
                let r = wrap(go(b, var), precedence(b) < rp);
                format!("{l} {sym} {r}")
            }
            Ast::Fun(f, a) => format!("{}({})", f.name(), go(a, var)),
        }
    }
    go(ast, var)
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
    var: &'a str,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str, var: &'a str) -> Self {
        Parser {
            bytes: text.as_bytes(),
            pos: 0,
            var,
        }
    }

    fn err(&self, kind: ParseErrorKind) -> ParseError {
        ParseError {
            offset: self.pos,
            kind,
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

    fn parse(mut self) -> Result<Ast, ParseError> {
        let ast = self.parse_expr()?;
        if self.peek().is_some() {
            return Err(self.err(ParseErrorKind::TrailingInput));
        }
        Ok(ast)
    }

    fn parse_expr(&mut self) -> Result<Ast, ParseError> {
        let mut lhs = self.parse_term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    let rhs = self.parse_term()?;
                    lhs = bin(BinOp::Add, lhs, rhs);
                }
                Some(b'-') => {
                    self.pos += 1;
                    let rhs = self.parse_term()?;
                    lhs = bin(BinOp::Sub, lhs, rhs);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn parse_term(&mut self) -> Result<Ast, ParseError> {
        let mut lhs = self.parse_unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    let rhs = self.parse_unary()?;
                    lhs = bin(BinOp::Mul, lhs, rhs);
                }
                Some(b'/') => {
                    self.pos += 1;
                    let rhs = self.parse_unary()?;
                    lhs = bin(BinOp::Div, lhs, rhs);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn parse_unary(&mut self) -> Result<Ast, ParseError> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            let inner = self.parse_unary()?;
            Ok(Ast::Neg(Box::new(inner)))
        } else {
            self.parse_power()
        }
    }

    fn parse_power(&mut self) -> Result<Ast, ParseError> {
        let base = self.parse_atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            // exponent may carry a unary minus: x^-2
            let exp = self.parse_unary()?;
            Ok(bin(BinOp::Pow, base, exp))
        } else {
            Ok(base)
        }
    }

    fn parse_atom(&mut self) -> Result<Ast, ParseError> {
        match self.peek() {
            None => Err(self.err(ParseErrorKind::UnexpectedEnd)),
            Some(b'(') => {
                self.pos += 1;
                let inner = self.parse_expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err(ParseErrorKind::Expected("closing parenthesis")));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.parse_number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.parse_ident(),
            Some(c) => Err(self.err(ParseErrorKind::UnexpectedChar(c as char))),
        }
    }

    fn parse_number(&mut self) -> Result<Ast, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len()
            && (self.bytes[self.pos].is_ascii_digit() || self.bytes[self.pos] == b'.')
        {
            self.pos += 1;
        }
        // scientific notation: 1e-3, 2.5E4
        if self.pos < self.bytes.len() && matches!(self.bytes[self.pos], b'e' | b'E') {
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
                // 'e' was the Euler constant following a number without '*':
                // reject as trailing input later by rewinding.
                self.pos = mark;
            }
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
        let v: f64 = text.parse().map_err(|_| ParseError {
            offset: start,
            kind: ParseErrorKind::BadNumber,
        })?;
        Ok(num(v))
    }

    fn parse_ident(&mut self) -> Result<Ast, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len()
            && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
        if name == self.var {
            return Ok(Ast::Var);
        }
        match name {
            "pi" => return Ok(num(std::f64::consts::PI)),
            "e" => return Ok(num(std::f64::consts::E)),
            _ => {}
        }
        let func = match name {
            "exp" => Some(Func::Exp),
            "log" => Some(Func::Log),
            "abs" => Some(Func::Abs),
            "sqrt" => Some(Func::Sqrt),
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "sign" => Some(Func::Sign),
            "pow" => None, // handled below
            _ => {
                return Err(ParseError {
                    offset: start,
                    kind: ParseErrorKind::UnknownIdentifier(name.to_string()),
                })
            }
        };
        if self.peek() != Some(b'(') {
            return Err(self.err(ParseErrorKind::Expected("opening parenthesis")));
        }
        self.pos += 1;
        let first = self.parse_expr()?;
        let ast = if name == "pow" {
            if self.peek() != Some(b',') {
                return Err(self.err(ParseErrorKind::PowArity));
            }
            self.pos += 1;
            let second = self.parse_expr()?;
            bin(BinOp::Pow, first, second)
        } else {
            fun(func.unwrap(), first)
        };
        if self.peek() != Some(b')') {
            return Err(self.err(ParseErrorKind::Expected("closing parenthesis")));
        }
        self.pos += 1;
        Ok(ast)
    }
}
