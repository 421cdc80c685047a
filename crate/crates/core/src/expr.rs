//! Arithmetic expressions for habitat coefficients.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := primary ('^' unary)?
//! primary := number | 'pi' | ident | func '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! `^` binds tighter than unary minus (`-2^2 == -4`) and is right-associative.
//! Bare identifiers other than `pi` are free variables; function names outside
//! `sin cos exp tanh abs min max` are rejected at parse time.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("non-finite result in `{subexpr}`")]
    NonFiniteResult { subexpr: String },
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
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Tanh,
    Abs,
    Min,
    Max,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "tanh" => Func::Tanh,
            "abs" => Func::Abs,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Tanh => "tanh",
            Func::Abs => "abs",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }
}

/// Expression tree. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Pi,
    Var(String),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

/// Variable and parameter bindings.
#[derive(Debug, Clone, Default)]
pub struct EvalContext {
    vars: HashMap<String, f64>,
}

impl EvalContext {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.set(name, value);
        self
    }

    pub fn set(&mut self, name: &str, value: f64) {
        if let Some(slot) = self.vars.get_mut(name) {
            *slot = value;
        } else {
            self.vars.insert(name.to_string(), value);
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.vars.get(name).copied()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.vars.contains_key(name)
    }
}

pub fn parse(text: &str) -> Result<Expr, ExprError> {
    let tokens = lex(text)?;
    if tokens.is_empty() {
        return Err(ExprError::Syntax {
            offset: 0,
            message: "empty expression".into(),
        });
    }
    let mut parser = Parser {
        tokens,
        pos: 0,
        end: text.len(),
    };
    let e = parser.expr()?;
    if let Some(tok) = parser.peek() {
        return Err(ExprError::Syntax {
            offset: tok.offset,
            message: format!("unexpected {}", tok.kind.describe()),
        });
    }
    Ok(e)
}

pub fn eval(e: &Expr, ctx: &EvalContext) -> Result<f64, ExprError> {
    e.eval(ctx)
}

pub fn free_vars(e: &Expr) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    e.collect_vars(&mut out);
    out
}

impl Expr {
    pub fn eval(&self, ctx: &EvalContext) -> Result<f64, ExprError> {
        let value = match self {
            Expr::Num(v) => *v,
            Expr::Pi => std::f64::consts::PI,
            Expr::Var(name) => ctx
                .get(name)
                .ok_or_else(|| ExprError::UnboundVariable(name.clone()))?,
            Expr::Neg(inner) => -inner.eval(ctx)?,
            Expr::Bin(op, lhs, rhs) => {
                let a = lhs.eval(ctx)?;
                let b = rhs.eval(ctx)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => {
                        if a < 0.0 && b.fract() != 0.0 {
                            return Err(self.non_finite());
                        }
                        a.powf(b)
                    }
                }
            }
            Expr::Call(f, args) => {
                let x = args[0].eval(ctx)?;
                match f {
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Exp => x.exp(),
                    Func::Tanh => x.tanh(),
                    Func::Abs => x.abs(),
                    Func::Min => x.min(args[1].eval(ctx)?),
                    Func::Max => x.max(args[1].eval(ctx)?),
                }
            }
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(self.non_finite())
        }
    }

    fn non_finite(&self) -> ExprError {
        ExprError::NonFiniteResult {
            subexpr: self.to_string(),
        }
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Num(_) | Expr::Pi => {}
            Expr::Var(name) => {
                out.insert(name.clone());
            }
            Expr::Neg(inner) => inner.collect_vars(out),
            Expr::Bin(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    /// True when the expression contains no free variables.
    pub fn is_constant(&self) -> bool {
        free_vars(self).is_empty()
    }
}

/// Fully parenthesized output; literals use the shortest round-tripping form.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) => {
                write!(f, "(-{})", -v)
            }
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Pi => write!(f, "pi"),
            Expr::Var(name) => write!(f, "{name}"),
            Expr::Neg(inner) => write!(f, "(-{inner})"),
            Expr::Bin(op, a, b) => write!(f, "({a}{}{b})", op.symbol()),
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TokKind {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
}

impl TokKind {
    fn describe(&self) -> String {
        match self {
            TokKind::Num(v) => format!("number {v}"),
            TokKind::Ident(s) => format!("identifier `{s}`"),
            TokKind::Op(c) => format!("operator `{c}`"),
            TokKind::LParen => "`(`".into(),
            TokKind::RParen => "`)`".into(),
            TokKind::Comma => "`,`".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokKind,
    offset: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, ExprError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let kind = match c {
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                i += 1;
                TokKind::Op(c as char)
            }
            b'(' => {
                i += 1;
                TokKind::LParen
            }
            b')' => {
                i += 1;
                TokKind::RParen
            }
            b',' => {
                i += 1;
                TokKind::Comma
            }
            b'0'..=b'9' | b'.' => {
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
                let lit = &text[start..i];
                let v: f64 = lit.parse().map_err(|_| ExprError::Syntax {
                    offset: start,
                    message: format!("malformed number `{lit}`"),
                })?;
                TokKind::Num(v)
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                TokKind::Ident(text[start..i].to_string())
            }
            _ => {
                let ch = text[start..].chars().next().unwrap_or('?');
                return Err(ExprError::Syntax {
                    offset: start,
                    message: format!("unexpected character `{ch}`"),
                });
            }
        };
        out.push(Token {
            kind,
            offset: start,
        });
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn here(&self) -> usize {
        self.peek().map_or(self.end, |t| t.offset)
    }

    fn eat_op(&mut self, ops: &[char]) -> Option<char> {
        match self.peek() {
            Some(Token {
                kind: TokKind::Op(c),
                ..
            }) if ops.contains(c) => {
                let c = *c;
                self.pos += 1;
                Some(c)
            }
            _ => None,
        }
    }

    fn expect(&mut self, want: TokKind) -> Result<(), ExprError> {
        let offset = self.here();
        match self.next() {
            Some(t) if t.kind == want => Ok(()),
            Some(t) => Err(ExprError::Syntax {
                offset,
                message: format!("expected {}, found {}", want.describe(), t.kind.describe()),
            }),
            None => Err(ExprError::Syntax {
                offset,
                message: format!("expected {}, found end of input", want.describe()),
            }),
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        while let Some(op) = self.eat_op(&['+', '-']) {
            let rhs = self.term()?;
            let op = if op == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.eat_op(&['*', '/']) {
            let rhs = self.unary()?;
            let op = if op == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        match self.eat_op(&['-', '+']) {
            Some('-') => Ok(Expr::Neg(Box::new(self.unary()?))),
            Some(_) => self.unary(),
            None => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.primary()?;
        if self.eat_op(&['^']).is_some() {
            let exponent = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        let offset = self.here();
        let tok = self.next().ok_or(ExprError::Syntax {
            offset,
            message: "unexpected end of input".into(),
        })?;
        match tok.kind {
            TokKind::Num(v) => Ok(Expr::Num(v)),
            TokKind::LParen => {
                let e = self.expr()?;
                self.expect(TokKind::RParen)?;
                Ok(e)
            }
            TokKind::Ident(name) => {
                let is_call = matches!(self.peek(), Some(Token { kind: TokKind::LParen, .. }));
                if is_call {
                    let func = Func::from_name(&name)
                        .ok_or(ExprError::UnknownIdentifier { name, offset })?;
                    self.pos += 1;
                    let mut args = vec![self.expr()?];
                    while matches!(self.peek(), Some(Token { kind: TokKind::Comma, .. })) {
                        self.pos += 1;
                        args.push(self.expr()?);
                    }
                    self.expect(TokKind::RParen)?;
                    if args.len() != func.arity() {
                        return Err(ExprError::Syntax {
                            offset,
                            message: format!(
                                "`{}` takes {} argument(s), got {}",
                                func.name(),
                                func.arity(),
                                args.len()
                            ),
                        });
                    }
                    Ok(Expr::Call(func, args))
                } else if name == "pi" {
                    Ok(Expr::Pi)
                } else if Func::from_name(&name).is_some() {
                    Err(ExprError::Syntax {
                        offset,
                        message: format!("function `{name}` used without arguments"),
                    })
                } else {
                    Ok(Expr::Var(name))
                }
            }
            other => Err(ExprError::Syntax {
                offset,
                message: format!("unexpected {}", other.describe()),
            }),
        }
    }
}

/// η(s) = (1 + tanh(s/2)) / 2, the front profile used for initial data and
/// super-solutions.
pub fn eta(s: f64) -> f64 {
    0.5 * (1.0 + (0.5 * s).tanh())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(text: &str, ctx: &EvalContext) -> f64 {
        parse(text).unwrap().eval(ctx).unwrap()
    }

    #[test]
    fn precedence_and_identities() {
        let ctx = EvalContext::new();
        assert_eq!(ev("2+3*4", &ctx), 14.0);
        assert!((ev("sin(pi/2)", &ctx) - 1.0).abs() < 1e-15);
        assert_eq!(ev("-2^2", &ctx), -4.0);
        assert_eq!(ev("2^3^2", &ctx), 512.0);
        assert_eq!(ev("2^-1", &ctx), 0.5);
        assert_eq!(ev("8/4/2", &ctx), 1.0);
        assert_eq!(ev("1-2-3", &ctx), -4.0);
        assert_eq!(ev("min(3, max(1, 2))", &ctx), 2.0);
        let eta_ctx = EvalContext::new().with("x", 0.0);
        assert_eq!(ev("0.5*(1+tanh(x/2))", &eta_ctx), 0.5);
    }

    #[test]
    fn eval_examples() {
        let ctx = EvalContext::new()
            .with("a0", 2.0)
            .with("eps", 0.5)
            .with("x", 0.0)
            .with("p", 1.0);
        assert_eq!(ev("a0 + eps*cos(2*pi*x/p)", &ctx), 2.5);
        assert_eq!(ev("t", &EvalContext::new().with("t", 3.0)), 3.0);
        let err = parse("1/x")
            .unwrap()
            .eval(&EvalContext::new().with("x", 0.0))
            .unwrap_err();
        assert!(matches!(err, ExprError::NonFiniteResult { ref subexpr } if subexpr == "(1/x)"));
    }

    #[test]
    fn free_variable_sets() {
        let names = |s: &str| free_vars(&parse(s).unwrap()).into_iter().collect::<Vec<_>>();
        assert!(names("2+2").is_empty());
        assert_eq!(names("sin(t)*cos(x)"), vec!["t", "x"]);
        assert_eq!(names("a0+t"), vec!["a0", "t"]);
        assert!(names("pi*2").is_empty());
    }

    #[test]
    fn errors_carry_offsets() {
        assert_eq!(
            parse("2 + * 3").unwrap_err(),
            ExprError::Syntax {
                offset: 4,
                message: "unexpected operator `*`".into()
            }
        );
        assert_eq!(
            parse("foo(1)").unwrap_err(),
            ExprError::UnknownIdentifier {
                name: "foo".into(),
                offset: 0
            }
        );
        assert!(matches!(parse("(1+2"), Err(ExprError::Syntax { offset: 4, .. })));
        assert!(matches!(parse("   "), Err(ExprError::Syntax { .. })));
        assert!(matches!(parse("min(1)"), Err(ExprError::Syntax { .. })));
        assert!(matches!(parse("1 $ 2"), Err(ExprError::Syntax { offset: 2, .. })));
        assert_eq!(
            parse("t+1").unwrap().eval(&EvalContext::new()),
            Err(ExprError::UnboundVariable("t".into()))
        );
    }

    #[test]
    fn negative_base_fractional_power_is_rejected() {
        let e = parse("(-8)^(1/3)").unwrap();
        assert!(matches!(e.eval(&EvalContext::new()), Err(ExprError::NonFiniteResult { .. })));
        assert_eq!(ev("(-2)^3", &EvalContext::new()), -8.0);
    }

    #[test]
    fn scientific_literals() {
        let ctx = EvalContext::new();
        assert_eq!(ev("1e-3*1000", &ctx), 1.0);
        assert_eq!(ev("2.5E+1", &ctx), 25.0);
        assert_eq!(ev(".5", &ctx), 0.5);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        fn tree() -> impl Strategy<Value = Expr> {
            let leaf = prop_oneof![
                (-1e3f64..1e3).prop_map(Expr::Num),
                Just(Expr::Pi),
                Just(Expr::Var("x".into())),
                Just(Expr::Var("t".into())),
            ];
            leaf.prop_recursive(5, 48, 3, |inner| {
                let op = prop_oneof![
                    Just(BinOp::Add),
                    Just(BinOp::Sub),
                    Just(BinOp::Mul),
                    Just(BinOp::Div),
                    Just(BinOp::Pow),
                ];
                let unary = prop_oneof![
                    Just(Func::Sin),
                    Just(Func::Cos),
                    Just(Func::Exp),
                    Just(Func::Tanh),
                    Just(Func::Abs),
                ];
                let binary = prop_oneof![Just(Func::Min), Just(Func::Max)];
                prop_oneof![
                    inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
                    (op, inner.clone(), inner.clone()).prop_map(|(o, a, b)| Expr::Bin(o, Box::new(a), Box::new(b))),
                    (unary, inner.clone()).prop_map(|(f, a)| Expr::Call(f, vec![a])),
                    (binary, inner.clone(), inner).prop_map(|(f, a, b)| Expr::Call(f, vec![a, b])),
                ]
            })
        }

        proptest! {
            #[test]
            fn print_parse_round_trip(e in tree(), x in -5.0f64..5.0, t in -5.0f64..5.0) {
                let ctx = EvalContext::new().with("x", x).with("t", t);
                let back = parse(&e.to_string()).unwrap();
                let (a, b) = (e.eval(&ctx), back.eval(&ctx));
                prop_assert_eq!(a.is_ok(), b.is_ok());
                if let (Ok(a), Ok(b)) = (a, b) {
                    prop_assert_eq!(a.to_bits(), b.to_bits());
                }
            }
        }

        #[test]
        fn eta_derivative_identity() {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
            let h = 1e-6;
            for _ in 0..1000 {
                let s: f64 = rng.gen_range(-20.0..20.0);
                let fd = (eta(s + h) - eta(s - h)) / (2.0 * h);
                let exact = eta(s) * (1.0 - eta(s));
                assert!((fd - exact).abs() < 1e-7, "s = {s}");
            }
        }
    }
}
