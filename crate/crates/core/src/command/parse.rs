//! Recursive-descent parser for `name(arg, ..., key=value, ...)`.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Value {
    Str(String),
    Num(f64),
    Array(Vec<Value>),
    Map(BTreeMap<String, String>),
}

impl Value {
    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_num(&self) -> Option<f64> {
        match self {
            Value::Num(n) => Some(*n),
            _ => None,
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Str(_) => "string",
            Value::Num(_) => "number",
            Value::Array(_) => "array",
            Value::Map(_) => "map",
        }
    }
}

fn quote(out: &mut String, s: &str) {
    out.push('\'');
    for c in s.chars() {
        if c == '\'' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('\'');
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        match self {
            Value::Str(s) => quote(&mut out, s),
            Value::Num(n) => write!(out, "{n}")?,
            Value::Array(items) => {
                out.push('[');
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    write!(out, "{v}")?;
                }
                out.push(']');
            }
            Value::Map(map) => {
                out.push('{');
                for (i, (k, v)) in map.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    quote(&mut out, k);
                    out.push_str(": ");
                    quote(&mut out, v);
                }
                out.push('}');
            }
        }
        f.write_str(&out)
    }
}

/// A parsed call. Equality ignores `raw`.
#[derive(Debug, Clone, Serialize)]
pub struct Command {
    pub name: String,
    pub positional: Vec<Value>,
    pub keyword: BTreeMap<String, Value>,
    /// The input text, verbatim.
    pub raw: String,
}

impl PartialEq for Command {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.positional == other.positional && self.keyword == other.keyword
    }
}

impl Command {
    /// Canonical text: positional arguments, then keywords in name order.
    pub fn render(&self) -> String {
        let mut args: Vec<String> = self.positional.iter().map(Value::to_string).collect();
        args.extend(self.keyword.iter().map(|(k, v)| format!("{k}={v}")));
        format!("{}({})", self.name, args.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: expected {}", .expected.join(" or "))]
    Syntax { offset: usize, expected: Vec<String> },
    #[error("positional argument at offset {offset} follows a keyword argument")]
    Ordering { offset: usize },
    #[error("keyword `{name}` given twice (offset {offset})")]
    DuplicateKeyword { offset: usize, name: String },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. }
            | ParseError::Ordering { offset }
            | ParseError::DuplicateKeyword { offset, .. } => *offset,
        }
    }

    /// The input line with a caret under the error position.
    pub fn annotate(&self, text: &str) -> String {
        let col = text[..self.offset().min(text.len())].chars().count();
        format!("{text}\n{}^ {self}", " ".repeat(col))
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

fn expected(offset: usize, what: &[&str]) -> ParseError {
    ParseError::Syntax {
        offset,
        expected: what.iter().map(|s| (*s).to_owned()).collect(),
    }
}

const VALUE: [&str; 4] = ["string", "number", "'['", "'{'"];

impl<'a> Parser<'a> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char, also: &[&str]) -> Result<(), ParseError> {
        if self.eat(c) {
            return Ok(());
        }
        let quoted = format!("'{c}'");
        let mut want: Vec<&str> = also.to_vec();
        want.push(&quoted);
        Err(expected(self.pos, &want))
    }

    fn ident(&mut self) -> Option<&'a str> {
        self.skip_ws();
        let rest = self.rest();
        let mut chars = rest.char_indices();
        match chars.next() {
            Some((_, c)) if c.is_ascii_alphabetic() || c == '_' => {}
            _ => return None,
        }
        let end = chars
            .find(|(_, c)| !(c.is_ascii_alphanumeric() || *c == '_'))
            .map_or(rest.len(), |(i, _)| i);
        self.pos += end;
        Some(&rest[..end])
    }

    fn string(&mut self) -> Result<String, ParseError> {
        self.skip_ws();
        let start = self.pos;
        let quote = match self.peek() {
            Some(q @ ('\'' | '"')) => q,
            _ => return Err(expected(start, &["string"])),
        };
        self.pos += 1;
        let mut out = String::new();
        let mut chars = self.rest().char_indices();
        while let Some((i, c)) = chars.next() {
            match c {
                '\\' => match chars.next() {
                    Some((_, e)) => out.push(e),
                    None => break,
                },
                c if c == quote => {
                    self.pos += i + 1;
                    return Ok(out);
                }
                c => out.push(c),
            }
        }
        Err(expected(self.src.len(), &[if quote == '\'' { "\"'\"" } else { "'\"'" }]))
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        self.skip_ws();
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let mut i = start;
        let digits = |i: &mut usize| {
            let s = *i;
            while *i < bytes.len() && bytes[*i].is_ascii_digit() {
                *i += 1;
            }
            *i > s
        };
        if i < bytes.len() && (bytes[i] == b'-' || bytes[i] == b'+') {
            i += 1;
        }
        let int = digits(&mut i);
        let mut frac = false;
        if i < bytes.len() && bytes[i] == b'.' {
            i += 1;
            frac = digits(&mut i);
        }
        if !int && !frac {
            return Err(expected(start, &VALUE));
        }
        if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
            let mut j = i + 1;
            if j < bytes.len() && (bytes[j] == b'-' || bytes[j] == b'+') {
                j += 1;
            }
            if !digits(&mut j) {
                return Err(expected(j, &["exponent digits"]));
            }
            i = j;
        }
        let value: f64 = self.src[start..i].parse().map_err(|_| expected(start, &["number"]))?;
        if !value.is_finite() {
            return Err(expected(start, &["finite number"]));
        }
        self.pos = i;
        Ok(value)
    }

    fn value(&mut self) -> Result<Value, ParseError> {
        self.skip_ws();
        match self.peek() {
            Some('\'' | '"') => Ok(Value::Str(self.string()?)),
            Some('[') => {
                self.pos += 1;
                let mut items = Vec::new();
                if !self.eat(']') {
                    loop {
                        items.push(self.value()?);
                        if self.eat(']') {
                            break;
                        }
                        self.expect(',', &["']'"])?;
                    }
                }
                Ok(Value::Array(items))
            }
            Some('{') => {
                self.pos += 1;
                let mut map = BTreeMap::new();
                if !self.eat('}') {
                    loop {
                        let key = self.string()?;
                        self.expect(':', &[])?;
                        let value = self.string()?;
                        map.insert(key, value);
                        if self.eat('}') {
                            break;
                        }
                        self.expect(',', &["'}'"])?;
                    }
                }
                Ok(Value::Map(map))
            }
            _ => Ok(Value::Num(self.number()?)),
        }
    }

    fn command(&mut self) -> Result<Command, ParseError> {
        let name = self.ident().ok_or_else(|| expected(self.pos, &["command name"]))?.to_owned();
        self.expect('(', &[])?;
        let mut positional = Vec::new();
        let mut keyword = BTreeMap::new();
        if !self.eat(')') {
            loop {
                self.skip_ws();
                let arg_start = self.pos;
                if let Some(key) = self.ident() {
                    self.expect('=', &[])?;
                    let v = self.value()?;
                    if keyword.insert(key.to_owned(), v).is_some() {
                        return Err(ParseError::DuplicateKeyword {
                            offset: arg_start,
                            name: key.to_owned(),
                        });
                    }
                } else {
                    let v = self.value().map_err(|e| match e {
                        ParseError::Syntax { offset, .. } if offset == arg_start => {
                            let mut want = vec!["identifier"];
                            want.extend(VALUE);
                            if positional.is_empty() && keyword.is_empty() {
                                want.push("')'");
                            }
                            expected(offset, &want)
                        }
                        e => e,
                    })?;
                    if !keyword.is_empty() {
                        return Err(ParseError::Ordering { offset: arg_start });
                    }
                    positional.push(v);
                }
                if self.eat(')') {
                    break;
                }
                self.expect(',', &["')'"])?;
            }
        }
        self.skip_ws();
        if self.pos != self.src.len() {
            return Err(expected(self.pos, &["end of input"]));
        }
        Ok(Command {
            name,
            positional,
            keyword,
            raw: self.src.to_owned(),
        })
    }
}

pub fn parse(text: &str) -> Result<Command, ParseError> {
    Parser { src: text, pos: 0 }.command()
}
