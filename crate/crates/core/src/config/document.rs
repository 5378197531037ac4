//! The SynthConf document grammar.
//!
//! Line oriented. `key: value` pairs, nesting by exactly two spaces, list items
//! as `- value`, `#` comments to end of line. Scalars are typed as int
//! (`-?[0-9]+`), float (decimal or scientific), bool (`true`/`false`), and
//! string otherwise; a value wrapped in double quotes is always a string.
//! List items are scalars. Tabs are rejected anywhere in the text.

use std::sync::LazyLock;

use regex::Regex;

use super::ConfigError;

static INT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^-?[0-9]+$").unwrap());
static FLOAT: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^-?(([0-9]+\.[0-9]*|\.[0-9]+)([eE][+-]?[0-9]+)?|[0-9]+[eE][+-]?[0-9]+)$").unwrap()
});
static KEY: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[A-Za-z0-9_.\-]+$").unwrap());

#[derive(Debug, Clone, PartialEq)]
pub enum Scalar {
    Int(i128),
    Float(f64),
    Bool(bool),
    Str(String),
}

impl Scalar {
    pub fn type_name(&self) -> &'static str {
        match self {
            Scalar::Int(_) => "integer",
            Scalar::Float(_) => "float",
            Scalar::Bool(_) => "bool",
            Scalar::Str(_) => "string",
        }
    }

    fn parse(text: &str, line: usize, column: usize) -> Result<Scalar, ConfigError> {
        if text.len() >= 2 && text.starts_with('"') && text.ends_with('"') {
            return Ok(Scalar::Str(text[1..text.len() - 1].to_string()));
        }
        match text {
            "true" => return Ok(Scalar::Bool(true)),
            "false" => return Ok(Scalar::Bool(false)),
            _ => {}
        }
        if INT.is_match(text) {
            return text
                .parse()
                .map(Scalar::Int)
                .map_err(|_| ConfigError::new(line, column, format!("integer '{text}' is out of range")));
        }
        if FLOAT.is_match(text) {
            let v: f64 = text
                .parse()
                .map_err(|_| ConfigError::new(line, column, format!("malformed float '{text}'")))?;
            if !v.is_finite() {
                return Err(ConfigError::new(line, column, format!("float '{text}' is out of range")));
            }
            return Ok(Scalar::Float(v));
        }
        Ok(Scalar::Str(text.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub line: usize,
    pub column: usize,
    pub value: Node,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Map(Vec<Entry>),
    List(Vec<Node>),
    Scalar(Scalar),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub kind: NodeKind,
    pub line: usize,
    pub column: usize,
}

impl Node {
    pub fn as_map(&self) -> Option<&[Entry]> {
        match &self.kind {
            NodeKind::Map(entries) => Some(entries),
            _ => None,
        }
    }

    pub fn get(&self, key: &str) -> Option<&Node> {
        self.as_map()?.iter().find(|e| e.key == key).map(|e| &e.value)
    }

    pub fn kind_name(&self) -> &'static str {
        match &self.kind {
            NodeKind::Map(_) => "map",
            NodeKind::List(_) => "list",
            NodeKind::Scalar(s) => s.type_name(),
        }
    }
}

/// Parsed configuration text; the root is always a map.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigDocument {
    pub root: Node,
}

struct Line<'a> {
    number: usize,
    indent: usize,
    content: &'a str,
    raw: &'a str,
}

impl Line<'_> {
    fn column_of(&self, sub: &str) -> usize {
        let offset = sub.as_ptr() as usize - self.raw.as_ptr() as usize;
        self.raw[..offset].chars().count() + 1
    }

    fn error(&self, column: usize, message: impl Into<String>) -> ConfigError {
        ConfigError::new(self.number, column, message)
    }

    fn is_list_item(&self) -> bool {
        self.content == "-" || self.content.starts_with("- ")
    }
}

fn strip_comment(raw: &str) -> &str {
    let mut quoted = false;
    for (i, c) in raw.char_indices() {
        match c {
            '"' => quoted = !quoted,
            '#' if !quoted => return &raw[..i],
            _ => {}
        }
    }
    raw
}

fn lex(text: &str) -> Result<Vec<Line<'_>>, ConfigError> {
    let mut lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let number = i + 1;
        if let Some(pos) = raw.find('\t') {
            return Err(ConfigError::new(number, raw[..pos].chars().count() + 1, "tab character not allowed"));
        }
        let body = strip_comment(raw).trim_end();
        let trimmed = body.trim_start_matches(' ');
        if trimmed.is_empty() {
            continue;
        }
        let indent = body.len() - trimmed.len();
        if !indent.is_multiple_of(2) {
            return Err(ConfigError::new(
                number,
                indent + 1,
                format!("indentation of {indent} spaces is not a multiple of 2"),
            ));
        }
        lines.push(Line { number, indent, content: trimmed, raw });
    }
    Ok(lines)
}

struct Parser<'a> {
    lines: Vec<Line<'a>>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek_indent(&self) -> Option<usize> {
        self.lines.get(self.pos).map(|l| l.indent)
    }

    fn reject_deeper(&self, indent: usize) -> Result<(), ConfigError> {
        match self.lines.get(self.pos) {
            Some(l) if l.indent > indent => {
                Err(l.error(l.indent + 1, "unexpected indentation (inconsistent with the enclosing block)"))
            }
            _ => Ok(()),
        }
    }

    fn block(&mut self, indent: usize) -> Result<Node, ConfigError> {
        let first = &self.lines[self.pos];
        let (line, column) = (first.number, first.indent + 1);
        if first.is_list_item() {
            self.list(indent, line, column)
        } else {
            self.map(indent, line, column)
        }
    }

    fn list(&mut self, indent: usize, line: usize, column: usize) -> Result<Node, ConfigError> {
        let mut items = Vec::new();
        while self.peek_indent() == Some(indent) {
            let l = &self.lines[self.pos];
            if !l.is_list_item() {
                return Err(l.error(l.indent + 1, "expected '- value' list item inside a list"));
            }
            let value = l.content[1..].trim_start();
            if value.is_empty() {
                return Err(l.error(l.indent + 1, "empty list item"));
            }
            let col = l.column_of(value);
            items.push(Node { kind: NodeKind::Scalar(Scalar::parse(value, l.number, col)?), line: l.number, column: col });
            self.pos += 1;
            self.reject_deeper(indent)?;
        }
        Ok(Node { kind: NodeKind::List(items), line, column })
    }

    fn map(&mut self, indent: usize, line: usize, column: usize) -> Result<Node, ConfigError> {
        let mut entries: Vec<Entry> = Vec::new();
        while self.peek_indent() == Some(indent) {
            let l = &self.lines[self.pos];
            if l.is_list_item() {
                return Err(l.error(l.indent + 1, "expected 'key: value', found a list item"));
            }
            let (key, rest) = split_entry(l.content).ok_or_else(|| l.error(l.indent + 1, "expected 'key: value'"))?;
            let key_col = l.indent + 1;
            if !KEY.is_match(key) {
                return Err(l.error(key_col, format!("invalid key '{key}'")));
            }
            if let Some(prev) = entries.iter().find(|e| e.key == key) {
                return Err(l.error(key_col, format!("duplicate key '{key}' (first defined on line {})", prev.line)));
            }
            let number = l.number;
            let value = if rest.is_empty() {
                self.pos += 1;
                match self.peek_indent() {
                    Some(child) if child == indent + 2 => self.block(child)?,
                    Some(child) if child > indent + 2 => {
                        let c = &self.lines[self.pos];
                        return Err(c.error(child + 1, format!("expected indentation of {} spaces", indent + 2)));
                    }
                    _ => return Err(ConfigError::new(number, key_col, format!("key '{key}' has no value"))),
                }
            } else {
                let col = l.column_of(rest);
                let scalar = Scalar::parse(rest, number, col)?;
                self.pos += 1;
                self.reject_deeper(indent)?;
                Node { kind: NodeKind::Scalar(scalar), line: number, column: col }
            };
            entries.push(Entry { key: key.to_string(), line: number, column: key_col, value });
        }
        Ok(Node { kind: NodeKind::Map(entries), line, column })
    }
}

fn split_entry(content: &str) -> Option<(&str, &str)> {
    if let Some(key) = content.strip_suffix(':') {
        if !key.contains(": ") {
            return Some((key, ""));
        }
    }
    let idx = content.find(": ")?;
    Some((&content[..idx], content[idx + 2..].trim()))
}

/// Parses configuration text into a located document tree.
pub fn parse_document(text: &str) -> Result<ConfigDocument, ConfigError> {
    let lines = lex(text)?;
    let mut parser = Parser { lines, pos: 0 };
    let root = match parser.lines.first() {
        None => Node { kind: NodeKind::Map(Vec::new()), line: 1, column: 1 },
        Some(l) if l.indent > 0 => return Err(l.error(l.indent + 1, "document must start at column 1")),
        Some(l) if l.is_list_item() => return Err(l.error(1, "top level must be a map of 'key: value' pairs")),
        Some(_) => parser.block(0)?,
    };
    debug_assert!(parser.pos == parser.lines.len());
    Ok(ConfigDocument { root })
}

/// Byte-level entry point: invalid UTF-8 is a parse error.
pub fn parse_document_bytes(bytes: &[u8]) -> Result<ConfigDocument, ConfigError> {
    let text = std::str::from_utf8(bytes).map_err(|e| {
        let line = bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count() + 1;
        ConfigError::new(line, 1, "text is not valid UTF-8")
    })?;
    parse_document(text)
}
