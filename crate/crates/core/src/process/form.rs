//! Line-oriented structured forms (`*.proc.txt`).
//!
//! ```text
//! PROCEDURE <id> "<title>" ORDERED|UNORDERED
//!   INSTRUCTION <id> "<text>"
//!     EQUIPMENT <instance-id> [<instance-id> ...]
//!     WHEN <condition>
//!   PROCEDURE ...
//! ```
//!
//! Nesting is by two-space indentation. `#` starts a comment outside
//! quotes. Conditions:
//!
//! ```text
//! state(<inst>.<var>) == <value>
//! state(<inst>.<var>) in [<lo>, <hi>]
//! connected(<inst>.<socket>, <inst>.<socket>)
//! placed(<inst>, <zone>, <tolerance-m>)
//! wait(<seconds>)
//! all(<cond>, ...) | any(<cond>, ...)
//! ```

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use thiserror::Error;

use super::{Condition, Instruction, Procedure, ProcessModel, SocketRef, Step};
use crate::scenario::Value;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct FormError {
    pub line: usize,
    pub message: String,
}

fn err(line: usize, message: impl Into<String>) -> FormError {
    FormError {
        line,
        message: message.into(),
    }
}

struct Line<'a> {
    number: usize,
    level: usize,
    text: &'a str,
}

pub fn parse_form(text: &str) -> Result<ProcessModel, FormError> {
    let mut lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let number = i + 1;
        let body = strip_comment(raw).trim_end();
        if body.trim().is_empty() {
            continue;
        }
        let indent = body.len() - body.trim_start_matches(' ').len();
        if body[indent..].starts_with('\t') {
            return Err(err(number, "tabs are not allowed for indentation"));
        }
        if !indent.is_multiple_of(2) {
            return Err(err(number, "indentation must be a multiple of two spaces"));
        }
        lines.push(Line {
            number,
            level: indent / 2,
            text: body[indent..].trim_end(),
        });
    }

    let first = lines.first().ok_or_else(|| err(1, "form is empty"))?;
    if first.level != 0 {
        return Err(err(first.number, "the root PROCEDURE must not be indented"));
    }
    let mut pos = 0;
    let root = parse_procedure(&lines, &mut pos)?;
    if let Some(extra) = lines.get(pos) {
        return Err(err(extra.number, "a form holds exactly one root PROCEDURE"));
    }
    Ok(ProcessModel::new(root))
}

fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    let mut escaped = false;
    for (i, c) in line.char_indices() {
        match c {
            _ if escaped => escaped = false,
            '\\' if quoted => escaped = true,
            '"' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

fn keyword(text: &str) -> (&str, &str) {
    match text.find(' ') {
        Some(i) => (&text[..i], text[i..].trim_start()),
        None => (text, ""),
    }
}

fn parse_procedure(lines: &[Line<'_>], pos: &mut usize) -> Result<Procedure, FormError> {
    let header = &lines[*pos];
    let (kw, rest) = keyword(header.text);
    if kw != "PROCEDURE" {
        return Err(err(
            header.number,
            alloc::format!("expected PROCEDURE, found `{kw}`"),
        ));
    }
    let (id, rest) = take_id(rest).ok_or_else(|| err(header.number, "PROCEDURE needs an id"))?;
    let (title, rest) = take_quoted(rest).map_err(|m| err(header.number, m))?;
    let ordered = match rest.trim() {
        "ORDERED" => true,
        "UNORDERED" => false,
        other => {
            return Err(err(
                header.number,
                alloc::format!("expected ORDERED or UNORDERED, found `{other}`"),
            ))
        }
    };
    *pos += 1;

    let mut steps = Vec::new();
    while let Some(line) = lines.get(*pos) {
        if line.level <= header.level {
            break;
        }
        if line.level > header.level + 1 {
            return Err(err(line.number, "unexpected indentation"));
        }
        let (kw, _) = keyword(line.text);
        match kw {
            "PROCEDURE" => steps.push(Step::Procedure(parse_procedure(lines, pos)?)),
            "INSTRUCTION" => steps.push(Step::Instruction(parse_instruction(lines, pos)?)),
            other => {
                return Err(err(
                    line.number,
                    alloc::format!("unknown keyword `{other}`"),
                ))
            }
        }
    }
    Ok(Procedure {
        id: id.to_string(),
        title,
        ordered,
        steps,
    })
}

fn parse_instruction(lines: &[Line<'_>], pos: &mut usize) -> Result<Instruction, FormError> {
    let header = &lines[*pos];
    let (_, rest) = keyword(header.text);
    let (id, rest) = take_id(rest).ok_or_else(|| err(header.number, "INSTRUCTION needs an id"))?;
    let (text, rest) = take_quoted(rest).map_err(|m| err(header.number, m))?;
    if !rest.trim().is_empty() {
        return Err(err(
            header.number,
            "unexpected text after the instruction text",
        ));
    }
    *pos += 1;

    let mut equipment: Option<Vec<String>> = None;
    let mut condition: Option<Condition> = None;
    while let Some(line) = lines.get(*pos) {
        if line.level <= header.level {
            break;
        }
        if line.level > header.level + 1 {
            return Err(err(line.number, "unexpected indentation"));
        }
        let (kw, rest) = keyword(line.text);
        match kw {
            "EQUIPMENT" if equipment.is_none() => {
                let ids: Vec<String> = rest.split_whitespace().map(ToString::to_string).collect();
                if ids.is_empty() {
                    return Err(err(line.number, "EQUIPMENT needs at least one instance id"));
                }
                equipment = Some(ids);
            }
            "WHEN" if condition.is_none() => {
                condition = Some(parse_condition(rest).map_err(|m| err(line.number, m))?);
            }
            "EQUIPMENT" | "WHEN" => return Err(err(line.number, alloc::format!("duplicate {kw}"))),
            other => {
                return Err(err(
                    line.number,
                    alloc::format!("unknown keyword `{other}`"),
                ))
            }
        }
        *pos += 1;
    }
    let condition =
        condition.ok_or_else(|| err(header.number, "INSTRUCTION has no WHEN condition"))?;
    Ok(Instruction {
        id: id.to_string(),
        text,
        equipment_refs: equipment.unwrap_or_default(),
        condition,
    })
}

fn is_id_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-'
}

fn take_id(text: &str) -> Option<(&str, &str)> {
    let end = text.find(|c: char| !is_id_char(c)).unwrap_or(text.len());
    (end > 0).then(|| (&text[..end], text[end..].trim_start()))
}

fn take_quoted(text: &str) -> Result<(String, &str), String> {
    let body = text
        .strip_prefix('"')
        .ok_or_else(|| String::from("expected a quoted string"))?;
    let mut out = String::new();
    let mut chars = body.char_indices();
    while let Some((i, c)) = chars.next() {
        match c {
            '"' => return Ok((out, body[i + 1..].trim_start())),
            '\\' => match chars.next() {
                Some((_, e @ ('"' | '\\'))) => out.push(e),
                _ => return Err(String::from("invalid escape in quoted string")),
            },
            c => out.push(c),
        }
    }
    Err(String::from("unterminated quoted string"))
}

#[derive(Debug, Clone, PartialEq)]
enum CTok {
    Ident(String),
    Num(f64),
    Str(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Dot,
    EqEq,
}

fn lex_condition(text: &str) -> Result<Vec<CTok>, String> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            ' ' => i += 1,
            '(' | ')' | '[' | ']' | ',' | '.' => {
                out.push(match c {
                    '(' => CTok::LParen,
                    ')' => CTok::RParen,
                    '[' => CTok::LBracket,
                    ']' => CTok::RBracket,
                    ',' => CTok::Comma,
                    _ => CTok::Dot,
                });
                i += 1;
            }
            '=' if chars.get(i + 1) == Some(&'=') => {
                out.push(CTok::EqEq);
                i += 2;
            }
            '"' => {
                let rest: String = chars[i..].iter().collect();
                let (s, tail) = take_quoted(&rest)?;
                let consumed = rest.chars().count() - tail.chars().count();
                out.push(CTok::Str(s));
                i += consumed;
            }
            c if c.is_ascii_digit()
                || ((c == '-' || c == '+')
                    && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit())) =>
            {
                let start = i;
                i += 1;
                let digits = |i: &mut usize| {
                    while *i < chars.len() && chars[*i].is_ascii_digit() {
                        *i += 1;
                    }
                };
                digits(&mut i);
                if chars.get(i) == Some(&'.')
                    && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit())
                {
                    i += 1;
                    digits(&mut i);
                }
                if matches!(chars.get(i), Some('e' | 'E')) {
                    i += 1;
                    if matches!(chars.get(i), Some('+' | '-')) {
                        i += 1;
                    }
                    digits(&mut i);
                }
                let s: String = chars[start..i].iter().collect();
                let v: f64 = s
                    .parse()
                    .map_err(|_| alloc::format!("malformed number `{s}`"))?;
                out.push(CTok::Num(v));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && is_id_char(chars[i]) {
                    i += 1;
                }
                out.push(CTok::Ident(chars[start..i].iter().collect()));
            }
            other => {
                return Err(alloc::format!(
                    "unexpected character `{other}` in condition"
                ))
            }
        }
    }
    Ok(out)
}

struct CondParser {
    toks: Vec<CTok>,
    pos: usize,
}

pub(crate) fn parse_condition(text: &str) -> Result<Condition, String> {
    let mut p = CondParser {
        toks: lex_condition(text)?,
        pos: 0,
    };
    let c = p.condition()?;
    if p.pos != p.toks.len() {
        return Err(String::from("unexpected text after condition"));
    }
    Ok(c)
}

impl CondParser {
    fn next(&mut self) -> Option<CTok> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn peek(&self) -> Option<&CTok> {
        self.toks.get(self.pos)
    }

    fn expect(&mut self, tok: CTok, what: &str) -> Result<(), String> {
        match self.next() {
            Some(t) if t == tok => Ok(()),
            _ => Err(alloc::format!("expected {what}")),
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, String> {
        match self.next() {
            Some(CTok::Ident(s)) => Ok(s),
            _ => Err(alloc::format!("expected {what}")),
        }
    }

    fn number(&mut self, what: &str) -> Result<f64, String> {
        match self.next() {
            Some(CTok::Num(v)) => Ok(v),
            _ => Err(alloc::format!("expected {what}")),
        }
    }

    fn dotted(&mut self, what: &str) -> Result<(String, String), String> {
        let a = self.ident(what)?;
        self.expect(CTok::Dot, "`.`")?;
        let b = self.ident(what)?;
        Ok((a, b))
    }

    fn condition(&mut self) -> Result<Condition, String> {
        let name = self.ident("a condition")?;
        self.expect(CTok::LParen, "`(`")?;
        let cond = match name.as_str() {
            "state" => {
                let (instance, var) = self.dotted("instance.var")?;
                self.expect(CTok::RParen, "`)`")?;
                match self.next() {
                    Some(CTok::EqEq) => {
                        let value = match self.next() {
                            Some(CTok::Num(v)) => Value::Scalar(v),
                            Some(CTok::Ident(s)) if s == "true" => Value::Bool(true),
                            Some(CTok::Ident(s)) if s == "false" => Value::Bool(false),
                            Some(CTok::Ident(s)) | Some(CTok::Str(s)) => Value::Enum(s),
                            _ => return Err(String::from("expected a value after `==`")),
                        };
                        return Ok(Condition::StateEquals {
                            instance,
                            var,
                            value,
                        });
                    }
                    Some(CTok::Ident(kw)) if kw == "in" => {
                        self.expect(CTok::LBracket, "`[`")?;
                        let lo = self.number("a lower bound")?;
                        self.expect(CTok::Comma, "`,`")?;
                        let hi = self.number("an upper bound")?;
                        self.expect(CTok::RBracket, "`]`")?;
                        return Ok(Condition::StateInRange {
                            instance,
                            var,
                            lo,
                            hi,
                        });
                    }
                    _ => return Err(String::from("expected `==` or `in` after state(...)")),
                }
            }
            "connected" => {
                let (ai, asock) = self.dotted("instance.socket")?;
                self.expect(CTok::Comma, "`,`")?;
                let (bi, bsock) = self.dotted("instance.socket")?;
                Condition::Connected {
                    a: SocketRef::new(ai, asock),
                    b: SocketRef::new(bi, bsock),
                }
            }
            "placed" => {
                let instance = self.ident("an instance id")?;
                self.expect(CTok::Comma, "`,`")?;
                let zone = self.ident("a zone id")?;
                self.expect(CTok::Comma, "`,`")?;
                let tolerance = self.number("a tolerance")?;
                Condition::Placed {
                    instance,
                    zone,
                    tolerance,
                }
            }
            "wait" => Condition::Wait {
                seconds: self.number("seconds")?,
            },
            "all" | "any" => {
                let mut conditions = Vec::new();
                if self.peek() != Some(&CTok::RParen) {
                    loop {
                        conditions.push(self.condition()?);
                        if self.peek() == Some(&CTok::Comma) {
                            self.pos += 1;
                        } else {
                            break;
                        }
                    }
                }
                if name == "all" {
                    Condition::All { conditions }
                } else {
                    Condition::Any { conditions }
                }
            }
            other => return Err(alloc::format!("unknown condition `{other}`")),
        };
        self.expect(CTok::RParen, "`)`")?;
        Ok(cond)
    }
}

/// Renders a model back into form syntax; `parse_form` of the result gives
/// the same model.
pub fn to_form(model: &ProcessModel) -> String {
    let mut out = String::new();
    write_procedure(&mut out, &model.root, 0);
    out
}

fn quote(s: &str) -> String {
    let mut out = String::from("\"");
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

fn write_procedure(out: &mut String, p: &Procedure, level: usize) {
    let pad = "  ".repeat(level);
    let mode = if p.ordered { "ORDERED" } else { "UNORDERED" };
    let _ = writeln!(out, "{pad}PROCEDURE {} {} {mode}", p.id, quote(&p.title));
    for step in &p.steps {
        match step {
            Step::Procedure(c) => write_procedure(out, c, level + 1),
            Step::Instruction(i) => {
                let _ = writeln!(out, "{pad}  INSTRUCTION {} {}", i.id, quote(&i.text));
                if !i.equipment_refs.is_empty() {
                    let _ = writeln!(out, "{pad}    EQUIPMENT {}", i.equipment_refs.join(" "));
                }
                let _ = writeln!(out, "{pad}    WHEN {}", condition_text(&i.condition));
            }
        }
    }
}

pub(crate) fn condition_text(c: &Condition) -> String {
    match c {
        Condition::StateEquals {
            instance,
            var,
            value,
        } => {
            let v = match value {
                Value::Enum(s) => quote(s),
                other => other.to_string(),
            };
            alloc::format!("state({instance}.{var}) == {v}")
        }
        Condition::StateInRange {
            instance,
            var,
            lo,
            hi,
        } => alloc::format!("state({instance}.{var}) in [{lo}, {hi}]"),
        Condition::Connected { a, b } => alloc::format!("connected({a}, {b})"),
        Condition::Placed {
            instance,
            zone,
            tolerance,
        } => alloc::format!("placed({instance}, {zone}, {tolerance})"),
        Condition::Wait { seconds } => alloc::format!("wait({seconds})"),
        Condition::All { conditions } | Condition::Any { conditions } => {
            let name = if matches!(c, Condition::All { .. }) {
                "all"
            } else {
                "any"
            };
            let inner: Vec<String> = conditions.iter().map(condition_text).collect();
            alloc::format!("{name}({})", inner.join(", "))
        }
    }
}
