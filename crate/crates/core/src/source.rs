//! Source positions, the shared tokenizer and a small cursor used by the
//! recursive-descent front ends.

use std::fmt;

use crate::diag::{Diagnostic, Diagnostics};

/// 1-based line/column of a syntax node.
///
/// Positions never participate in structural equality: two ASTs that differ
/// only in where they came from compare equal. Inspect `line`/`col` directly
/// when a test cares about them.
#[derive(Debug, Clone, Copy, Default)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl Pos {
    pub fn new(line: u32, col: u32) -> Self {
        Pos { line, col }
    }
}

impl PartialEq for Pos {
    fn eq(&self, _other: &Self) -> bool {
        true
    }
}

impl Eq for Pos {}

impl std::hash::Hash for Pos {
    fn hash<H: std::hash::Hasher>(&self, _state: &mut H) {}
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Ident(String),
    Str(String),
    Number(String),
    Punct(char),
    Eof,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Ident(s) => write!(f, "`{s}`"),
            TokenKind::Str(s) => write!(f, "string {s:?}"),
            TokenKind::Number(s) => write!(f, "number `{s}`"),
            TokenKind::Punct(c) => write!(f, "`{c}`"),
            TokenKind::Eof => f.write_str("end of file"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub kind: TokenKind,
    pub pos: Pos,
    /// Byte range in the source text.
    pub start: usize,
    pub end: usize,
}

const PUNCT: &str = "{}()<>[],;=:.-";

/// Splits `text` into tokens. `//` and `/* */` comments and whitespace are
/// discarded. Numbers are unsigned; a leading `-` is a separate token.
pub fn tokenize(text: &str, origin: &str) -> Result<Vec<Token>, Diagnostics> {
    let bytes: Vec<(usize, char)> = text.char_indices().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    let mut line = 1u32;
    let mut col = 1u32;

    let advance = |i: &mut usize, line: &mut u32, col: &mut u32| {
        if bytes[*i].1 == '\n' {
            *line += 1;
            *col = 1;
        } else {
            *col += 1;
        }
        *i += 1;
    };
    let offset = |i: usize| bytes.get(i).map_or(text.len(), |(o, _)| *o);
    let peek = |i: usize| bytes.get(i).map(|(_, c)| *c);

    while i < bytes.len() {
        let c = bytes[i].1;
        let pos = Pos::new(line, col);
        let start = offset(i);

        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col);
            continue;
        }
        if c == '/' && peek(i + 1) == Some('/') {
            while i < bytes.len() && bytes[i].1 != '\n' {
                advance(&mut i, &mut line, &mut col);
            }
            continue;
        }
        if c == '/' && peek(i + 1) == Some('*') {
            advance(&mut i, &mut line, &mut col);
            advance(&mut i, &mut line, &mut col);
            loop {
                match peek(i) {
                    None => {
                        return Err(Diagnostic::error("syntax", "unterminated block comment")
                            .at(origin, pos)
                            .into())
                    }
                    Some('*') if peek(i + 1) == Some('/') => {
                        advance(&mut i, &mut line, &mut col);
                        advance(&mut i, &mut line, &mut col);
                        break;
                    }
                    Some(_) => advance(&mut i, &mut line, &mut col),
                }
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let mut s = String::new();
            while let Some(ch) = peek(i) {
                if ch.is_ascii_alphanumeric() || ch == '_' {
                    s.push(ch);
                    advance(&mut i, &mut line, &mut col);
                } else {
                    break;
                }
            }
            tokens.push(Token { kind: TokenKind::Ident(s), pos, start, end: offset(i) });
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && peek(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let mut s = String::new();
            loop {
                match peek(i) {
                    Some(ch) if ch.is_ascii_digit() => {
                        s.push(ch);
                        advance(&mut i, &mut line, &mut col);
                    }
                    Some('.') if peek(i + 1).is_some_and(|d| d.is_ascii_digit()) => {
                        s.push('.');
                        advance(&mut i, &mut line, &mut col);
                    }
                    _ => break,
                }
            }
            if matches!(peek(i), Some('e' | 'E')) {
                let sign = matches!(peek(i + 1), Some('+' | '-'));
                let digit_at = if sign { i + 2 } else { i + 1 };
                if peek(digit_at).is_some_and(|d| d.is_ascii_digit()) {
                    while i < digit_at {
                        s.push(bytes[i].1);
                        advance(&mut i, &mut line, &mut col);
                    }
                    while let Some(ch) = peek(i).filter(char::is_ascii_digit) {
                        s.push(ch);
                        advance(&mut i, &mut line, &mut col);
                    }
                }
            }
            tokens.push(Token { kind: TokenKind::Number(s), pos, start, end: offset(i) });
            continue;
        }
        if c == '"' {
            advance(&mut i, &mut line, &mut col);
            let mut s = String::new();
            loop {
                match peek(i) {
                    None | Some('\n') => {
                        return Err(Diagnostic::error("syntax", "unterminated string literal")
                            .at(origin, pos)
                            .into())
                    }
                    Some('"') => {
                        advance(&mut i, &mut line, &mut col);
                        break;
                    }
                    Some('\\') => {
                        let esc_pos = Pos::new(line, col);
                        advance(&mut i, &mut line, &mut col);
                        let translated = match peek(i) {
                            Some('n') => '\n',
                            Some('t') => '\t',
                            Some('\\') => '\\',
                            Some('"') => '"',
                            other => {
                                let shown = other.map_or("end of input".to_string(), |c| format!("`\\{c}`"));
                                return Err(Diagnostic::error(
                                    "syntax",
                                    format!("invalid escape sequence {shown}"),
                                )
                                .at(origin, esc_pos)
                                .into());
                            }
                        };
                        s.push(translated);
                        advance(&mut i, &mut line, &mut col);
                    }
                    Some(ch) => {
                        s.push(ch);
                        advance(&mut i, &mut line, &mut col);
                    }
                }
            }
            tokens.push(Token { kind: TokenKind::Str(s), pos, start, end: offset(i) });
            continue;
        }
        if PUNCT.contains(c) {
            advance(&mut i, &mut line, &mut col);
            tokens.push(Token { kind: TokenKind::Punct(c), pos, start, end: offset(i) });
            continue;
        }
        return Err(Diagnostic::error("syntax", format!("unexpected character `{c}`"))
            .at(origin, pos)
            .into());
    }

    tokens.push(Token {
        kind: TokenKind::Eof,
        pos: Pos::new(line, col),
        start: text.len(),
        end: text.len(),
    });
    Ok(tokens)
}

/// Quotes `s` using the escapes the tokenizer understands.
pub fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Token cursor with the helpers every grammar in this crate needs.
pub(crate) struct Cursor<'a> {
    tokens: Vec<Token>,
    idx: usize,
    pub origin: &'a str,
    pub text: &'a str,
}

impl<'a> Cursor<'a> {
    pub fn new(text: &'a str, origin: &'a str) -> Result<Self, Diagnostics> {
        Ok(Cursor { tokens: tokenize(text, origin)?, idx: 0, origin, text })
    }

    pub fn peek(&self) -> &Token {
        &self.tokens[self.idx]
    }

    pub fn pos(&self) -> Pos {
        self.peek().pos
    }

    pub fn bump(&mut self) -> Token {
        let tok = self.tokens[self.idx].clone();
        if self.idx < self.tokens.len() - 1 {
            self.idx += 1;
        }
        tok
    }

    pub fn at_eof(&self) -> bool {
        matches!(self.peek().kind, TokenKind::Eof)
    }

    pub fn is_punct(&self, c: char) -> bool {
        self.peek().kind == TokenKind::Punct(c)
    }

    pub fn is_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().kind, TokenKind::Ident(s) if s == kw)
    }

    pub fn eat_punct(&mut self, c: char) -> bool {
        if self.is_punct(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.is_keyword(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    /// Syntax error at the current token listing what would have been accepted.
    pub fn unexpected(&self, expected: &[&str]) -> Diagnostics {
        let tok = self.peek();
        let message = match expected {
            [] => format!("unexpected {}", tok.kind),
            [one] => format!("expected {one}, found {}", tok.kind),
            many => format!("expected one of {}, found {}", many.join(", "), tok.kind),
        };
        let mut d = Diagnostic::error("syntax", message).at(self.origin, tok.pos);
        d.expected = expected.iter().map(|s| s.to_string()).collect();
        d.into()
    }

    pub fn expect_punct(&mut self, c: char) -> Result<Pos, Diagnostics> {
        let pos = self.pos();
        if self.eat_punct(c) {
            Ok(pos)
        } else {
            Err(self.unexpected(&[&format!("`{c}`")]))
        }
    }

    pub fn expect_keyword(&mut self, kw: &str) -> Result<Pos, Diagnostics> {
        let pos = self.pos();
        if self.eat_keyword(kw) {
            Ok(pos)
        } else {
            Err(self.unexpected(&[&format!("`{kw}`")]))
        }
    }

    pub fn expect_ident(&mut self) -> Result<(String, Pos), Diagnostics> {
        match &self.peek().kind {
            TokenKind::Ident(s) => {
                let s = s.clone();
                let pos = self.bump().pos;
                Ok((s, pos))
            }
            _ => Err(self.unexpected(&["identifier"])),
        }
    }

    pub fn expect_string(&mut self) -> Result<(String, Pos), Diagnostics> {
        match &self.peek().kind {
            TokenKind::Str(s) => {
                let s = s.clone();
                let pos = self.bump().pos;
                Ok((s, pos))
            }
            _ => Err(self.unexpected(&["string literal"])),
        }
    }

    pub fn expect_eof(&mut self) -> Result<(), Diagnostics> {
        if self.at_eof() {
            Ok(())
        } else {
            Err(self.unexpected(&["end of file"]))
        }
    }

    /// Source text of tokens glued together without intervening whitespace,
    /// starting at the current token and stopping before `stop`.
    pub fn adjacent_run(&mut self, stop: char) -> Option<(String, Pos)> {
        let first = self.peek().clone();
        if matches!(first.kind, TokenKind::Eof) || first.kind == TokenKind::Punct(stop) {
            return None;
        }
        let mut end = first.end;
        self.bump();
        loop {
            let tok = self.peek();
            if tok.start != end || tok.kind == TokenKind::Punct(stop) || matches!(tok.kind, TokenKind::Eof) {
                break;
            }
            end = tok.end;
            self.bump();
        }
        Some((self.text[first.start..end].to_string(), first.pos))
    }

    pub fn error_at(&self, code: &str, message: impl Into<String>, pos: Pos) -> Diagnostic {
        Diagnostic::error(code, message).at(self.origin, pos)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(text: &str) -> Vec<TokenKind> {
        tokenize(text, "t").unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn comments_are_skipped() {
        let k = kinds("a // line\n/* block\n */ b");
        assert_eq!(
            k,
            vec![TokenKind::Ident("a".into()), TokenKind::Ident("b".into()), TokenKind::Eof]
        );
    }

    #[test]
    fn positions_are_one_based() {
        let toks = tokenize("x\n  y", "t").unwrap();
        assert_eq!((toks[0].pos.line, toks[0].pos.col), (1, 1));
        assert_eq!((toks[1].pos.line, toks[1].pos.col), (2, 3));
    }

    #[test]
    fn numbers_and_dotted_quads() {
        assert_eq!(kinds(".9")[0], TokenKind::Number(".9".into()));
        assert_eq!(kinds("127.0.0.1")[0], TokenKind::Number("127.0.0.1".into()));
        assert_eq!(kinds("1e-3")[0], TokenKind::Number("1e-3".into()));
        assert_eq!(
            kinds("-3.14"),
            vec![TokenKind::Punct('-'), TokenKind::Number("3.14".into()), TokenKind::Eof]
        );
    }

    #[test]
    fn string_escapes_roundtrip_through_quote() {
        let raw = "a \"q\" \\ b\n";
        let toks = tokenize(&quote(raw), "t").unwrap();
        assert_eq!(toks[0].kind, TokenKind::Str(raw.into()));
    }

    #[test]
    fn unterminated_comment_is_reported() {
        let err = tokenize("a /* b", "f.idsl").unwrap_err();
        assert_eq!(err.0[0].line, Some(1));
        assert_eq!(err.0[0].column, Some(3));
    }

    #[test]
    fn stray_character_is_reported() {
        let err = tokenize("a\n @", "f").unwrap_err();
        assert_eq!((err.0[0].line, err.0[0].column), (Some(2), Some(2)));
    }
}
