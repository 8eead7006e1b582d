//! Per-candidate metric vectors and the closed expression language used to
//! rank candidates. Lower scores are better.
//!
//! Grammar:
//!
//! ```text
//! expr    := term (("+" | "-") term)*
//! term    := unary (("*" | "/") unary)*
//! unary   := "-" unary | primary
//! primary := number | metric | function "(" expr ("," expr)* ")" | "(" expr ")"
//! metric  := w_d | t_d | b_d | n_d | s_p | s_d | g_d
//! function:= least | greatest | pow        (two arguments)
//!          | abs | sqrt | ln | exp         (one argument)
//! ```

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fuzzy_time::FuzzyPeriod;
use crate::gazetteer::ObjectView;
use crate::geometry::Geometry;
use crate::text::{self, TrigramSet};

/// Default ranking function, favouring string similarity.
pub const DEFAULT_EXPRESSION: &str = "100*w_d+0.1*t_d+10*n_d+0.1*s_p + 0.01*s_d+0.001*g_d";

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricVector {
    pub w_d: f64,
    pub t_d: f64,
    pub b_d: f64,
    pub s_p: f64,
    pub s_d: f64,
    pub g_d: f64,
    pub number_compared: bool,
    pub period_compared: bool,
    pub g_d_available: bool,
}

impl MetricVector {
    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Wd => self.w_d,
            Metric::Td => self.t_d,
            Metric::Bd | Metric::Nd => self.b_d,
            Metric::Sp => self.s_p,
            Metric::Sd => self.s_d,
            Metric::Gd => self.g_d,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    Wd,
    Td,
    Bd,
    Nd,
    Sp,
    Sd,
    Gd,
}

impl Metric {
    pub const ALL: [Metric; 7] = [Metric::Wd, Metric::Td, Metric::Bd, Metric::Nd, Metric::Sp, Metric::Sd, Metric::Gd];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Wd => "w_d",
            Metric::Td => "t_d",
            Metric::Bd => "b_d",
            Metric::Nd => "n_d",
            Metric::Sp => "s_p",
            Metric::Sd => "s_d",
            Metric::Gd => "g_d",
        }
    }

    fn lookup(name: &str) -> Option<Metric> {
        Metric::ALL.into_iter().find(|m| m.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Function {
    Least,
    Greatest,
    Abs,
    Sqrt,
    Ln,
    Exp,
    Pow,
}

impl Function {
    const ALL: [Function; 7] = [
        Function::Least,
        Function::Greatest,
        Function::Abs,
        Function::Sqrt,
        Function::Ln,
        Function::Exp,
        Function::Pow,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Function::Least => "least",
            Function::Greatest => "greatest",
            Function::Abs => "abs",
            Function::Sqrt => "sqrt",
            Function::Ln => "ln",
            Function::Exp => "exp",
            Function::Pow => "pow",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Function::Least | Function::Greatest | Function::Pow => 2,
            _ => 1,
        }
    }

    fn lookup(name: &str) -> Option<Function> {
        Function::ALL.into_iter().find(|f| f.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Number(f64),
    Metric(Metric),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Function, Vec<Expr>),
}

/// Printed fully parenthesized so that reparsing yields the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Number(v) => write!(f, "{v}"),
            Expr::Metric(m) => f.write_str(m.name()),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Binary(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
            Expr::Call(func, args) => {
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

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExpressionError {
    #[error("scoring expression is empty")]
    Empty,
    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown identifier {name:?} at position {position}")]
    UnknownIdentifier { name: String, position: usize },
    #[error("{function} expects {expected} argument(s), got {found} (position {position})")]
    Arity { function: String, expected: usize, found: usize, position: usize },
}

impl ExpressionError {
    /// Character offset of the error in the source text, when known.
    pub fn position(&self) -> Option<usize> {
        match self {
            ExpressionError::Empty => None,
            ExpressionError::Syntax { position, .. }
            | ExpressionError::UnknownIdentifier { position, .. }
            | ExpressionError::Arity { position, .. } => Some(*position),
        }
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("logarithm of nonpositive value {0}")]
    LogDomain(f64),
    #[error("square root of negative value {0}")]
    SqrtDomain(f64),
    #[error("non-finite result")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
}

fn tokenize(text: &str) -> Result<Vec<(usize, Token)>, ExpressionError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || c == '.' {
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let lexeme: String = chars[start..i].iter().collect();
            let value: f64 = lexeme.parse().map_err(|_| ExpressionError::Syntax {
                position: start,
                message: format!("malformed number {lexeme:?}"),
            })?;
            if !value.is_finite() {
                return Err(ExpressionError::Syntax {
                    position: start,
                    message: format!("number {lexeme:?} out of range"),
                });
            }
            out.push((start, Token::Number(value)));
        } else if c.is_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((start, Token::Ident(chars[start..i].iter().collect())));
        } else {
            let token = match c {
                '+' | '-' | '*' | '/' => Token::Op(c),
                '(' => Token::LParen,
                ')' => Token::RParen,
                ',' => Token::Comma,
                _ => {
                    return Err(ExpressionError::Syntax {
                        position: start,
                        message: format!("unexpected character {c:?}"),
                    })
                }
            };
            out.push((start, token));
            i += 1;
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |(p, _)| *p)
    }

    fn syntax<T>(&self, message: &str) -> Result<T, ExpressionError> {
        Err(ExpressionError::Syntax {
            position: self.offset(),
            message: message.to_string(),
        })
    }

    fn expr(&mut self) -> Result<Expr, ExpressionError> {
        let mut left = self.term()?;
        while let Some(Token::Op(c @ ('+' | '-'))) = self.peek() {
            let op = if *c == '+' { BinOp::Add } else { BinOp::Sub };
            self.pos += 1;
            let right = self.term()?;
            left = Expr::Binary(op, Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn term(&mut self) -> Result<Expr, ExpressionError> {
        let mut left = self.unary()?;
        while let Some(Token::Op(c @ ('*' | '/'))) = self.peek() {
            let op = if *c == '*' { BinOp::Mul } else { BinOp::Div };
            self.pos += 1;
            let right = self.unary()?;
            left = Expr::Binary(op, Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn unary(&mut self) -> Result<Expr, ExpressionError> {
        if let Some(Token::Op('-')) = self.peek() {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, ExpressionError> {
        let position = self.offset();
        match self.peek().cloned() {
            Some(Token::Number(v)) => {
                self.pos += 1;
                Ok(Expr::Number(v))
            }
            Some(Token::Ident(name)) => {
                self.pos += 1;
                if let Some(Token::LParen) = self.peek() {
                    let Some(function) = Function::lookup(&name) else {
                        return Err(ExpressionError::UnknownIdentifier { name, position });
                    };
                    self.pos += 1;
                    let mut args = vec![self.expr()?];
                    loop {
                        match self.peek() {
                            Some(Token::Comma) => {
                                self.pos += 1;
                                args.push(self.expr()?);
                            }
                            Some(Token::RParen) => {
                                self.pos += 1;
                                break;
                            }
                            _ => return self.syntax("expected ',' or ')'"),
                        }
                    }
                    if args.len() != function.arity() {
                        return Err(ExpressionError::Arity {
                            function: name,
                            expected: function.arity(),
                            found: args.len(),
                            position,
                        });
                    }
                    Ok(Expr::Call(function, args))
                } else {
                    Metric::lookup(&name)
                        .map(Expr::Metric)
                        .ok_or(ExpressionError::UnknownIdentifier { name, position })
                }
            }
            Some(Token::LParen) => {
                self.pos += 1;
                let inner = self.expr()?;
                match self.peek() {
                    Some(Token::RParen) => {
                        self.pos += 1;
                        Ok(inner)
                    }
                    _ => self.syntax("expected ')'"),
                }
            }
            Some(_) => self.syntax("expected a number, metric, function or '('"),
            None => self.syntax("unexpected end of expression"),
        }
    }
}

/// A parsed ranking function.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoringExpression {
    source: String,
    ast: Expr,
}

impl ScoringExpression {
    pub fn parse(text: &str) -> Result<Self, ExpressionError> {
        parse_expression(text)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn ast(&self) -> &Expr {
        &self.ast
    }

    pub fn evaluate(&self, m: &MetricVector) -> Result<f64, EvalError> {
        evaluate(self, m)
    }
}

impl Default for ScoringExpression {
    fn default() -> Self {
        parse_expression(DEFAULT_EXPRESSION).expect("default expression parses")
    }
}

impl fmt::Display for ScoringExpression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl FromStr for ScoringExpression {
    type Err = ExpressionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_expression(s)
    }
}

impl Serialize for ScoringExpression {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.source)
    }
}

impl<'de> Deserialize<'de> for ScoringExpression {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_expression(&text).map_err(serde::de::Error::custom)
    }
}

pub fn parse_expression(text: &str) -> Result<ScoringExpression, ExpressionError> {
    if text.trim().is_empty() {
        return Err(ExpressionError::Empty);
    }
    let tokens = tokenize(text)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        end: text.chars().count(),
    };
    let ast = parser.expr()?;
    if parser.pos != parser.tokens.len() {
        return parser.syntax("unexpected trailing input");
    }
    Ok(ScoringExpression {
        source: text.to_string(),
        ast,
    })
}

fn eval_node(e: &Expr, m: &MetricVector) -> Result<f64, EvalError> {
    let v = match e {
        Expr::Number(v) => *v,
        Expr::Metric(metric) => m.get(*metric),
        Expr::Neg(inner) => -eval_node(inner, m)?,
        Expr::Binary(op, l, r) => {
            let (a, b) = (eval_node(l, m)?, eval_node(r, m)?);
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => {
                    if b == 0.0 {
                        return Err(EvalError::DivisionByZero);
                    }
                    a / b
                }
            }
        }
        Expr::Call(func, args) => {
            let a = eval_node(&args[0], m)?;
            match func {
                Function::Least => a.min(eval_node(&args[1], m)?),
                Function::Greatest => a.max(eval_node(&args[1], m)?),
                Function::Pow => a.powf(eval_node(&args[1], m)?),
                Function::Abs => a.abs(),
                Function::Sqrt => {
                    if a < 0.0 {
                        return Err(EvalError::SqrtDomain(a));
                    }
                    a.sqrt()
                }
                Function::Ln => {
                    if a <= 0.0 {
                        return Err(EvalError::LogDomain(a));
                    }
                    a.ln()
                }
                Function::Exp => a.exp(),
            }
        }
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::NonFinite)
    }
}

pub fn evaluate(e: &ScoringExpression, m: &MetricVector) -> Result<f64, EvalError> {
    eval_node(&e.ast, m)
}

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum ScaleError {
    #[error("invalid scale range ({low}, {high})")]
    InvalidRange { low: f64, high: f64 },
    #[error("invalid precision {0}")]
    InvalidPrecision(f64),
}

/// Preferred level-of-detail range `[S_l, S_h]` in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleRange {
    pub low: f64,
    pub high: f64,
}

impl Default for ScaleRange {
    fn default() -> Self {
        Self { low: 0.0, high: 200.0 }
    }
}

impl ScaleRange {
    pub fn new(low: f64, high: f64) -> Result<Self, ScaleError> {
        if !(low.is_finite() && high.is_finite() && low <= high) {
            return Err(ScaleError::InvalidRange { low, high });
        }
        Ok(Self { low, high })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleDistanceMode {
    /// Distance to the nearer range bound, even inside the range.
    #[default]
    Literal,
    /// Zero when the extent lies inside the range.
    ZeroInside,
}

/// Scale distance for a precomputed extent `√area(buffer)`.
pub fn scale_distance_from_extent(extent: f64, range: ScaleRange, mode: ScaleDistanceMode) -> f64 {
    if mode == ScaleDistanceMode::ZeroInside && extent >= range.low && extent <= range.high {
        return 0.0;
    }
    (extent - range.low).abs().min((extent - range.high).abs())
}

/// `least(|√area(buffer(g, precision)) − S_l|, |√area(buffer(g, precision)) − S_h|)`.
pub fn scale_distance(g: &Geometry, precision: f64, s_l: f64, s_h: f64) -> Result<f64, ScaleError> {
    let range = ScaleRange::new(s_l, s_h)?;
    if !(precision.is_finite() && precision >= 0.0) {
        return Err(ScaleError::InvalidPrecision(precision));
    }
    let buffered = g.buffer(precision).map_err(|_| ScaleError::InvalidPrecision(precision))?;
    Ok(scale_distance_from_extent(buffered.area().sqrt(), range, ScaleDistanceMode::Literal))
}

/// Query-side inputs to metric computation, prepared once per query.
#[derive(Debug, Clone)]
pub struct PreparedQuery {
    pub normalized: String,
    pub trigrams: TrigramSet,
    pub building_number: Option<u32>,
    pub period: Option<FuzzyPeriod>,
    pub hint: Option<Geometry>,
    pub scale_range: ScaleRange,
    pub scale_mode: ScaleDistanceMode,
}

impl PreparedQuery {
    pub fn new(raw_address: &str) -> Self {
        let n = text::normalize(raw_address);
        Self {
            trigrams: text::trigram_set(&n.normalized),
            normalized: n.normalized,
            building_number: n.building_number,
            period: None,
            hint: None,
            scale_range: ScaleRange::default(),
            scale_mode: ScaleDistanceMode::default(),
        }
    }
}

/// Metrics for a candidate whose string distance is already known.
pub fn compute_metrics_with_string_distance(q: &PreparedQuery, c: &ObjectView<'_>, w_d: f64) -> MetricVector {
    let (t_d, period_compared) = match &q.period {
        Some(p) => (p.temporal_distance(&c.effective_period()), true),
        None => (0.0, false),
    };
    let (b_d, number_compared) = match (q.building_number, c.building_number()) {
        (Some(bi), Some(bd)) => (text::building_number_distance(bi, bd), true),
        _ => (0.0, false),
    };
    let (g_d, g_d_available) = match q.hint.as_ref().map(|h| h.distance(&c.object().geometry)) {
        Some(Ok(d)) => (d, true),
        _ => (0.0, false),
    };
    MetricVector {
        w_d,
        t_d,
        b_d,
        s_p: c.effective_accuracy(),
        s_d: scale_distance_from_extent(c.buffered_extent(), q.scale_range, q.scale_mode),
        g_d,
        number_compared,
        period_compared,
        g_d_available,
    }
}

pub fn compute_metrics(q: &PreparedQuery, c: &ObjectView<'_>) -> MetricVector {
    let w_d = text::string_distance(&q.normalized, &c.object().normalized_name);
    compute_metrics_with_string_distance(q, c, w_d)
}
