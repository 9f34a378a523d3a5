//! Expression language for bindings.
//!
//! ```text
//! expr    = sum ;
//! sum     = product { ("+" | "-") product } ;
//! product = unary { ("*" | "/") unary } ;
//! unary   = "-" unary | power ;
//! power   = primary [ "^" unary ] ;          (* right-associative *)
//! primary = number | "t" | ident "." ident | ident "(" args ")" | "(" expr ")" ;
//! args    = expr { "," expr } ;
//! number  = digit { digit } [ "." digit { digit } ] [ ("e" | "E") [ "+" | "-" ] digit { digit } ] ;
//! ident   = ( letter | "_" ) { letter | digit | "_" } ;
//! ```
//!
//! A dotted pair names either an equipment variable (`motor1.speed`) or a
//! column of a data table (`run_data.speed_rpm`); which one is decided when
//! the reference is resolved against a scenario.

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExprError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown function `{name}` at offset {offset}")]
    UnknownFunction { name: String, offset: usize },
}

impl ExprError {
    pub fn offset(&self) -> usize {
        match self {
            ExprError::Syntax { offset, .. } | ExprError::UnknownFunction { offset, .. } => *offset,
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
    pub fn symbol(self) -> &'static str {
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
    Min,
    Max,
    Abs,
    Sin,
    Cos,
    Exp,
    Log,
    Clamp,
}

impl Func {
    pub const ALL: [Func; 8] = [
        Func::Min,
        Func::Max,
        Func::Abs,
        Func::Sin,
        Func::Cos,
        Func::Exp,
        Func::Log,
        Func::Clamp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Min => "min",
            Func::Max => "max",
            Func::Abs => "abs",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Clamp => "clamp",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    /// Accepted argument counts (inclusive). `min`/`max` are variadic.
    pub fn arity(self) -> (usize, usize) {
        match self {
            Func::Min | Func::Max => (1, usize::MAX),
            Func::Clamp => (3, 3),
            _ => (1, 1),
        }
    }
}

/// `scope.name`: an equipment variable or a table column.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Ref {
    pub scope: String,
    pub name: String,
}

impl fmt::Display for Ref {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.scope, self.name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Number(f64),
    /// Seconds since session start.
    Clock,
    Ref(Ref),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

impl Expr {
    /// Every dotted reference, in source order (duplicates kept).
    pub fn refs(&self) -> Vec<&Ref> {
        let mut out = Vec::new();
        self.collect_refs(&mut out);
        out
    }

    fn collect_refs<'a>(&'a self, out: &mut Vec<&'a Ref>) {
        match self {
            Expr::Number(_) | Expr::Clock => {}
            Expr::Ref(r) => out.push(r),
            Expr::Neg(e) => e.collect_refs(out),
            Expr::Binary(_, a, b) => {
                a.collect_refs(out);
                b.collect_refs(out);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.collect_refs(out)),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Expr::Number(_) | Expr::Clock | Expr::Ref(_) => 1,
            Expr::Neg(e) => 1 + e.depth(),
            Expr::Binary(_, a, b) => 1 + a.depth().max(b.depth()),
            Expr::Call(_, args) => 1 + args.iter().map(Expr::depth).max().unwrap_or(0),
        }
    }
}

/// Fully parenthesized rendering that parses back to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Number(v) => {
                if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) {
                    // Not produced by the parser; rendered as a negation.
                    write!(f, "(-{})", -v)
                } else {
                    write!(f, "{v}")
                }
            }
            Expr::Clock => f.write_str("t"),
            Expr::Ref(r) => write!(f, "{r}"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
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

/// Parsed expression together with its source text. Serialized as the
/// source string.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    source: String,
    ast: Expr,
}

impl Expression {
    pub fn parse(text: &str) -> Result<Self, ExprError> {
        parse_expression(text)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn ast(&self) -> &Expr {
        &self.ast
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl Serialize for Expression {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.source)
    }
}

impl<'de> Deserialize<'de> for Expression {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_expression(&text).map_err(serde::de::Error::custom)
    }
}

pub fn parse_expression(text: &str) -> Result<Expression, ExprError> {
    let tokens = lex(text)?;
    let mut p = Parser { tokens, pos: 0 };
    let ast = p.sum()?;
    let tok = p.peek();
    if tok.kind != Tok::Eof {
        return Err(syntax(tok.offset, "unexpected trailing input"));
    }
    Ok(Expression {
        source: text.to_string(),
        ast,
    })
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    Dot,
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    kind: Tok,
    offset: usize,
}

fn syntax(offset: usize, message: &str) -> ExprError {
    ExprError::Syntax {
        offset,
        message: message.to_string(),
    }
}

fn lex(text: &str) -> Result<Vec<Token>, ExprError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let kind = match c {
            b' ' | b'\t' | b'\r' | b'\n' => {
                i += 1;
                continue;
            }
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b',' => Tok::Comma,
            b'.' => Tok::Dot,
            b'0'..=b'9' => {
                i = scan_number(bytes, i).ok_or_else(|| syntax(start, "malformed number"))?;
                let v: f64 = text[start..i]
                    .parse()
                    .map_err(|_| syntax(start, "malformed number"))?;
                if !v.is_finite() {
                    return Err(syntax(start, "number out of range"));
                }
                out.push(Token {
                    kind: Tok::Num(v),
                    offset: start,
                });
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push(Token {
                    kind: Tok::Ident(text[start..i].to_string()),
                    offset: start,
                });
                continue;
            }
            _ => return Err(syntax(start, "unexpected character")),
        };
        out.push(Token {
            kind,
            offset: start,
        });
        i += 1;
    }
    out.push(Token {
        kind: Tok::Eof,
        offset: text.len(),
    });
    Ok(out)
}

/// End offset of the number starting at `i`, if well-formed.
fn scan_number(bytes: &[u8], mut i: usize) -> Option<usize> {
    let digits = |i: &mut usize| {
        let s = *i;
        while *i < bytes.len() && bytes[*i].is_ascii_digit() {
            *i += 1;
        }
        *i > s
    };
    digits(&mut i);
    if i < bytes.len() && bytes[i] == b'.' {
        i += 1;
        if !digits(&mut i) {
            return None;
        }
    }
    if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
        i += 1;
        if i < bytes.len() && (bytes[i] == b'+' || bytes[i] == b'-') {
            i += 1;
        }
        if !digits(&mut i) {
            return None;
        }
    }
    if i < bytes.len() && (bytes[i].is_ascii_alphabetic() || bytes[i] == b'_') {
        return None;
    }
    Some(i)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if t.kind != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, kind: Tok, what: &str) -> Result<Token, ExprError> {
        let t = self.bump();
        if t.kind == kind {
            Ok(t)
        } else {
            Err(syntax(t.offset, what))
        }
    }

    fn sum(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.peek().kind {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.product()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn product(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().kind {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.peek().kind == Tok::Minus {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.primary()?;
        if self.peek().kind == Tok::Caret {
            self.bump();
            let exponent = self.unary()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        let tok = self.bump();
        match tok.kind {
            Tok::Num(v) => Ok(Expr::Number(v)),
            Tok::LParen => {
                let e = self.sum()?;
                self.expect(Tok::RParen, "expected `)`")?;
                Ok(e)
            }
            Tok::Ident(name) => match self.peek().kind {
                Tok::Dot => {
                    self.bump();
                    let field = self.bump();
                    match field.kind {
                        Tok::Ident(field_name) => Ok(Expr::Ref(Ref {
                            scope: name,
                            name: field_name,
                        })),
                        _ => Err(syntax(field.offset, "expected a name after `.`")),
                    }
                }
                Tok::LParen => self.call(name, tok.offset),
                _ if name == "t" => Ok(Expr::Clock),
                _ => Err(syntax(
                    tok.offset,
                    "bare name; references must be `instance.var`, `table.column` or `t`",
                )),
            },
            Tok::Eof => Err(syntax(tok.offset, "unexpected end of input")),
            _ => Err(syntax(
                tok.offset,
                "expected a number, reference, call or `(`",
            )),
        }
    }

    fn call(&mut self, name: String, offset: usize) -> Result<Expr, ExprError> {
        let func = Func::from_name(&name).ok_or(ExprError::UnknownFunction { name, offset })?;
        self.expect(Tok::LParen, "expected `(`")?;
        let mut args = Vec::new();
        if self.peek().kind != Tok::RParen {
            loop {
                args.push(self.sum()?);
                if self.peek().kind == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, "expected `,` or `)`")?;
        let (lo, hi) = func.arity();
        if args.len() < lo || args.len() > hi {
            return Err(syntax(
                offset,
                &alloc::format!(
                    "`{}` takes {} argument(s), got {}",
                    func.name(),
                    arity_text(lo, hi),
                    args.len()
                ),
            ));
        }
        Ok(Expr::Call(func, args))
    }
}

fn arity_text(lo: usize, hi: usize) -> String {
    if lo == hi {
        alloc::format!("{lo}")
    } else {
        alloc::format!("at least {lo}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;

    fn ast(text: &str) -> Expr {
        parse_expression(text).unwrap().ast
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(format!("{}", ast("2*3+1")), "((2 * 3) + 1)");
        assert_eq!(format!("{}", ast("1-2-3")), "((1 - 2) - 3)");
        assert_eq!(format!("{}", ast("2^3^2")), "(2 ^ (3 ^ 2))");
        assert_eq!(format!("{}", ast("-2^2")), "(-(2 ^ 2))");
        assert_eq!(format!("{}", ast("2^-1")), "(2 ^ (-1))");
        assert_eq!(format!("{}", ast("-a.b*c.d")), "((-a.b) * c.d)");
    }

    #[test]
    fn dotted_reference() {
        let e = ast("motor1.speed / 60");
        let refs = e.refs();
        assert_eq!(refs.len(), 1);
        assert_eq!(refs[0].scope, "motor1");
        assert_eq!(refs[0].name, "speed");
    }

    #[test]
    fn clock_and_calls() {
        assert_eq!(ast("t"), Expr::Clock);
        assert!(matches!(ast("clamp(t, 0, 1)"), Expr::Call(Func::Clamp, ref a) if a.len() == 3));
        assert!(matches!(ast("max(1, 2, 3)"), Expr::Call(Func::Max, ref a) if a.len() == 3));
    }

    #[test]
    fn syntax_error_offsets() {
        assert_eq!(parse_expression("1 +").unwrap_err().offset(), 3);
        assert_eq!(parse_expression("(1").unwrap_err().offset(), 2);
        assert_eq!(parse_expression("1 2").unwrap_err().offset(), 2);
        assert_eq!(parse_expression("speed").unwrap_err().offset(), 0);
        assert_eq!(parse_expression("1.").unwrap_err().offset(), 0);
        assert!(matches!(
            parse_expression("2 # 3"),
            Err(ExprError::Syntax { offset: 2, .. })
        ));
    }

    #[test]
    fn unknown_function_and_arity() {
        assert_eq!(
            parse_expression("1 + sqrt(4)"),
            Err(ExprError::UnknownFunction {
                name: "sqrt".into(),
                offset: 4
            })
        );
        assert!(matches!(
            parse_expression("clamp(1, 2)"),
            Err(ExprError::Syntax { offset: 0, .. })
        ));
        assert!(matches!(
            parse_expression("abs()"),
            Err(ExprError::Syntax { .. })
        ));
    }

    #[test]
    fn numbers_with_exponents() {
        assert_eq!(ast("1.5e3"), Expr::Number(1500.0));
        assert_eq!(ast("2E-2"), Expr::Number(0.02));
        assert!(parse_expression("1e").is_err());
        assert!(parse_expression("1e999").is_err());
    }
}
