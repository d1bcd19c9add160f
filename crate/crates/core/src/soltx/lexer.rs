//! Lossless Solidity lexer.
//!
//! Every byte of the input lands in exactly one token, so concatenating the
//! token texts reproduces the source. Transforms work by copying tokens and
//! splicing replacement text at chosen spans.

use std::ops::Range;

use super::SolTxError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    LineComment,
    BlockComment,
    StringLiteral,
    HexAddressLiteral,
    NumberLiteral,
    Identifier,
    Keyword,
    Punct,
    Whitespace,
}

impl TokenKind {
    pub fn is_trivia(self) -> bool {
        matches!(
            self,
            TokenKind::Whitespace | TokenKind::LineComment | TokenKind::BlockComment
        )
    }

    pub fn is_comment(self) -> bool {
        matches!(self, TokenKind::LineComment | TokenKind::BlockComment)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token<'a> {
    pub kind: TokenKind,
    pub text: &'a str,
    pub span: (usize, usize),
}

impl<'a> Token<'a> {
    pub fn range(&self) -> Range<usize> {
        self.span.0..self.span.1
    }

    pub fn is(&self, kind: TokenKind, text: &str) -> bool {
        self.kind == kind && self.text == text
    }

    pub fn is_punct(&self, text: &str) -> bool {
        self.is(TokenKind::Punct, text)
    }

    pub fn is_keyword(&self, text: &str) -> bool {
        self.is(TokenKind::Keyword, text)
    }
}

#[derive(Debug, Clone)]
pub struct TokenStream<'a> {
    pub tokens: Vec<Token<'a>>,
    pub source_len: usize,
}

impl<'a> TokenStream<'a> {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Token<'a>> {
        self.tokens.iter()
    }

    /// Index of the next non-trivia token at or after `from`.
    pub fn next_code(&self, from: usize) -> Option<usize> {
        (from..self.tokens.len()).find(|&i| !self.tokens[i].kind.is_trivia())
    }

    /// Index of the closest non-trivia token strictly before `before`.
    pub fn prev_code(&self, before: usize) -> Option<usize> {
        (0..before).rev().find(|&i| !self.tokens[i].kind.is_trivia())
    }

    /// Index of the token closing the bracket group opened at `open`.
    pub fn matching_close(&self, open: usize) -> Option<usize> {
        let (o, c) = match self.tokens[open].text {
            "{" => ("{", "}"),
            "(" => ("(", ")"),
            "[" => ("[", "]"),
            _ => return None,
        };
        let mut depth = 0usize;
        for (i, t) in self.tokens.iter().enumerate().skip(open) {
            if t.kind != TokenKind::Punct {
                continue;
            }
            if t.text == o {
                depth += 1;
            } else if t.text == c {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
        }
        None
    }

    /// Index of the token opening the bracket group closed at `close`.
    pub fn matching_open(&self, close: usize) -> Option<usize> {
        let (o, c) = match self.tokens[close].text {
            "}" => ("{", "}"),
            ")" => ("(", ")"),
            "]" => ("[", "]"),
            _ => return None,
        };
        let mut depth = 0usize;
        for i in (0..=close).rev() {
            let t = &self.tokens[i];
            if t.kind != TokenKind::Punct {
                continue;
            }
            if t.text == c {
                depth += 1;
            } else if t.text == o {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
        }
        None
    }

    /// Brace depth before each token (the `{` itself sits at the outer depth).
    pub fn brace_depths(&self) -> Vec<usize> {
        let mut depth = 0usize;
        self.tokens
            .iter()
            .map(|t| {
                let before = depth;
                if t.is_punct("{") {
                    depth += 1;
                } else if t.is_punct("}") {
                    depth = depth.saturating_sub(1);
                }
                before
            })
            .collect()
    }

    pub fn is_brace_balanced(&self) -> bool {
        let mut depth = 0i64;
        for t in &self.tokens {
            if t.is_punct("{") {
                depth += 1;
            } else if t.is_punct("}") {
                depth -= 1;
                if depth < 0 {
                    return false;
                }
            }
        }
        depth == 0
    }
}

const KEYWORDS: &[&str] = &[
    "abstract", "address", "anonymous", "as", "assembly", "bool", "break", "byte", "bytes",
    "calldata", "catch", "constant", "constructor", "continue", "contract", "delete", "do",
    "else", "emit", "enum", "error", "ether", "event", "external", "fallback", "false", "fixed",
    "for", "function", "gwei", "hex", "if", "immutable", "import", "indexed", "interface",
    "internal", "is", "library", "mapping", "memory", "modifier", "new", "override", "payable",
    "pragma", "private", "public", "pure", "receive", "return", "returns", "revert", "seconds",
    "minutes", "hours", "days", "weeks", "storage", "string", "struct", "super", "this", "throw",
    "true", "try", "type", "ufixed", "unchecked", "unicode", "using", "var", "view", "virtual",
    "wei", "while", "int", "uint",
];

/// Whether `word` is reserved: a keyword or an elementary type name.
pub fn is_keyword(word: &str) -> bool {
    if KEYWORDS.contains(&word) {
        return true;
    }
    sized_type(word, "uint", 8, 256)
        || sized_type(word, "int", 8, 256)
        || sized_type(word, "bytes", 1, 32)
}

fn sized_type(word: &str, prefix: &str, min: u32, max: u32) -> bool {
    let Some(rest) = word.strip_prefix(prefix) else {
        return false;
    };
    if rest.is_empty() || rest.starts_with('0') {
        return false;
    }
    match rest.parse::<u32>() {
        Ok(n) if prefix == "bytes" => (min..=max).contains(&n),
        Ok(n) => (min..=max).contains(&n) && n % 8 == 0,
        Err(_) => false,
    }
}

pub fn is_identifier(word: &str) -> bool {
    let mut chars = word.chars();
    match chars.next() {
        Some(c) if is_ident_start(c) => chars.all(is_ident_continue),
        _ => false,
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_' || c == '$'
}

fn is_ident_continue(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '$'
}

// Longest first so that greedy matching picks the longest operator.
const PUNCTS: &[&str] = &[
    ">>>=", ">>>", "**=", "<<=", ">>=", "**", "&&", "||", "==", "!=", "<=", ">=", "++", "--",
    "+=", "-=", "*=", "/=", "%=", "|=", "&=", "^=", "=>", "->", "<<", ">>", ":=",
];

pub fn lex(source: &str) -> Result<TokenStream<'_>, SolTxError> {
    let bytes = source.as_bytes();
    let mut tokens = Vec::new();
    let mut pos = 0usize;

    while pos < bytes.len() {
        let start = pos;
        let b = bytes[pos];
        let kind = if b.is_ascii_whitespace() {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            TokenKind::Whitespace
        } else if source[pos..].starts_with("//") {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            TokenKind::LineComment
        } else if source[pos..].starts_with("/*") {
            match source[pos + 2..].find("*/") {
                Some(off) => pos += 2 + off + 2,
                None => {
                    return Err(SolTxError::UnterminatedComment {
                        span: (start, bytes.len()),
                    })
                }
            }
            TokenKind::BlockComment
        } else if b == b'"' || b == b'\'' {
            pos = scan_string(bytes, pos)?;
            TokenKind::StringLiteral
        } else if b.is_ascii_digit() {
            let (end, is_addr) = scan_number(bytes, pos);
            pos = end;
            if is_addr {
                TokenKind::HexAddressLiteral
            } else {
                TokenKind::NumberLiteral
            }
        } else if is_ident_start(b as char) {
            while pos < bytes.len() && is_ident_continue(bytes[pos] as char) {
                pos += 1;
            }
            let word = &source[start..pos];
            // hex"..." and unicode"..." are single string literals.
            if (word == "hex" || word == "unicode")
                && pos < bytes.len()
                && (bytes[pos] == b'"' || bytes[pos] == b'\'')
            {
                pos = scan_string(bytes, pos)?;
                TokenKind::StringLiteral
            } else if is_keyword(word) {
                TokenKind::Keyword
            } else {
                TokenKind::Identifier
            }
        } else {
            let rest = &source[pos..];
            match PUNCTS.iter().find(|p| rest.starts_with(**p)) {
                Some(p) => pos += p.len(),
                None => {
                    let ch = rest.chars().next().expect("non-empty remainder");
                    pos += ch.len_utf8();
                }
            }
            TokenKind::Punct
        };
        tokens.push(Token {
            kind,
            text: &source[start..pos],
            span: (start, pos),
        });
    }

    Ok(TokenStream {
        tokens,
        source_len: source.len(),
    })
}

fn scan_string(bytes: &[u8], open: usize) -> Result<usize, SolTxError> {
    let quote = bytes[open];
    let mut pos = open + 1;
    while pos < bytes.len() {
        match bytes[pos] {
            b'\\' => pos += 2,
            b'\n' => break,
            c if c == quote => return Ok(pos + 1),
            _ => pos += 1,
        }
    }
    Err(SolTxError::UnterminatedString {
        span: (open, pos.min(bytes.len())),
    })
}

/// Returns the end offset and whether the literal is a 40-digit hex address.
fn scan_number(bytes: &[u8], start: usize) -> (usize, bool) {
    let mut pos = start;
    if bytes[pos] == b'0' && matches!(bytes.get(pos + 1), Some(b'x' | b'X')) {
        pos += 2;
        let digits_start = pos;
        while pos < bytes.len() && (bytes[pos].is_ascii_hexdigit() || bytes[pos] == b'_') {
            pos += 1;
        }
        let digits = &bytes[digits_start..pos];
        let is_addr = digits.len() == 40 && digits.iter().all(u8::is_ascii_hexdigit);
        return (pos, is_addr);
    }

    while pos < bytes.len() && (bytes[pos].is_ascii_digit() || bytes[pos] == b'_') {
        pos += 1;
    }
    if pos + 1 < bytes.len() && bytes[pos] == b'.' && bytes[pos + 1].is_ascii_digit() {
        pos += 1;
        while pos < bytes.len() && (bytes[pos].is_ascii_digit() || bytes[pos] == b'_') {
            pos += 1;
        }
    }
    if pos < bytes.len() && matches!(bytes[pos], b'e' | b'E') {
        let mut exp = pos + 1;
        if exp < bytes.len() && bytes[exp] == b'-' {
            exp += 1;
        }
        if exp < bytes.len() && bytes[exp].is_ascii_digit() {
            pos = exp;
            while pos < bytes.len() && bytes[pos].is_ascii_digit() {
                pos += 1;
            }
        }
    }
    (pos, false)
}
