//! Line-oriented tokenizer.

use super::ast::Pos;
use super::error::DslError;

/// Reserved words. Identifiers may not use any of these.
pub const KEYWORDS: [&str; 14] = [
    "workflow",
    "uid",
    "engine",
    "description",
    "service",
    "port",
    "input",
    "output",
    "forward",
    "to",
    "is",
    "int",
    "string",
    "any",
];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(&word)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    /// Run of ASCII letters, digits and underscores.
    Word(String),
    /// `scheme://...` up to the next whitespace.
    Url(String),
    Dot,
    Comma,
    Colon,
    Arrow,
    Newline,
    Eof,
}

impl TokenKind {
    pub fn describe(&self) -> String {
        match self {
            TokenKind::Word(w) if is_keyword(w) => format!("keyword `{w}`"),
            TokenKind::Word(w) => format!("`{w}`"),
            TokenKind::Url(u) => format!("url `{u}`"),
            TokenKind::Dot => "`.`".into(),
            TokenKind::Comma => "`,`".into(),
            TokenKind::Colon => "`:`".into(),
            TokenKind::Arrow => "`->`".into(),
            TokenKind::Newline => "end of line".into(),
            TokenKind::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub pos: Pos,
    /// Column one past the last character of the token.
    pub end_col: u32,
}

fn is_word_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

pub fn tokenize(text: &str) -> Result<Vec<Token>, DslError> {
    let mut tokens = Vec::new();
    let mut line = 1u32;
    for raw_line in text.split('\n') {
        let chars: Vec<char> = raw_line.chars().collect();
        let mut i = 0usize;
        while i < chars.len() {
            let c = chars[i];
            let pos = Pos::new(line, i as u32 + 1);
            if c == ' ' || c == '\t' || c == '\r' {
                i += 1;
                continue;
            }
            let start = i;
            let kind = if is_word_char(c) {
                while i < chars.len() && is_word_char(chars[i]) {
                    i += 1;
                }
                let rest: String = chars[i..].iter().take(3).collect();
                if rest == "://" {
                    while i < chars.len() && !chars[i].is_whitespace() {
                        i += 1;
                    }
                    TokenKind::Url(chars[start..i].iter().collect())
                } else {
                    TokenKind::Word(chars[start..i].iter().collect())
                }
            } else {
                i += 1;
                match c {
                    '.' => TokenKind::Dot,
                    ',' => TokenKind::Comma,
                    ':' => TokenKind::Colon,
                    '-' if chars.get(i) == Some(&'>') => {
                        i += 1;
                        TokenKind::Arrow
                    }
                    other => return Err(DslError::Lex { pos, found: other }),
                }
            };
            tokens.push(Token {
                kind,
                pos,
                end_col: i as u32 + 1,
            });
        }
        tokens.push(Token {
            kind: TokenKind::Newline,
            pos: Pos::new(line, chars.len() as u32 + 1),
            end_col: chars.len() as u32 + 1,
        });
        line += 1;
    }
    let last = tokens.last().map(|t| t.pos).unwrap_or(Pos::new(1, 1));
    tokens.push(Token {
        kind: TokenKind::Eof,
        pos: last,
        end_col: last.col,
    });
    Ok(tokens)
}
