use super::{DiagnosticCode, ParseDiagnostic};
use crate::span::SourceSpan;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Int(u32),
    Str(String),
    LBrace,
    RBrace,
    Semi,
    Comma,
    Dot,
    Arrow,
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(n) => format!("`{n}`"),
            Tok::Str(_) => "string literal".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub span: SourceSpan,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_continue(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// Splits `text` into tokens. Lexical errors are collected and the
/// offending characters skipped, so the token stream always ends in `Eof`.
pub(crate) fn tokenize(file: &str, text: &str) -> (Vec<Token>, Vec<ParseDiagnostic>) {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut diags = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    // position of the last non-whitespace character, for the Eof span
    let mut last = (1u32, 1u32);

    let span = |line: u32, col: u32, len: usize| SourceSpan::new(file, line, col, len as u32);

    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
                col += 1;
            }
            continue;
        }
        let (start_line, start_col) = (line, col);
        let single = match c {
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            ';' => Some(Tok::Semi),
            ',' => Some(Tok::Comma),
            '.' => Some(Tok::Dot),
            _ => None,
        };
        if let Some(tok) = single {
            tokens.push(Token {
                tok,
                span: span(line, col, 1),
            });
            last = (line, col);
            i += 1;
            col += 1;
            continue;
        }
        if c == '-' && chars.get(i + 1) == Some(&'>') {
            tokens.push(Token {
                tok: Tok::Arrow,
                span: span(line, col, 2),
            });
            last = (line, col + 1);
            i += 2;
            col += 2;
            continue;
        }
        if is_ident_start(c) {
            let start = i;
            while i < chars.len()
                && (is_ident_continue(chars[i])
                    || (chars[i] == '-'
                        && chars.get(i + 1).is_some_and(|n| is_ident_continue(*n))))
            {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            let len = i - start;
            tokens.push(Token {
                tok: Tok::Ident(word),
                span: span(start_line, start_col, len),
            });
            col += len as u32;
            last = (line, col - 1);
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let digits: String = chars[start..i].iter().collect();
            let len = i - start;
            match digits.parse::<u32>() {
                Ok(n) => tokens.push(Token {
                    tok: Tok::Int(n),
                    span: span(start_line, start_col, len),
                }),
                Err(_) => diags.push(ParseDiagnostic::new(
                    DiagnosticCode::IntegerRange,
                    span(start_line, start_col, len),
                    format!("integer `{digits}` out of range"),
                )),
            }
            col += len as u32;
            last = (line, col - 1);
            continue;
        }
        if c == '"' {
            let mut value = String::new();
            let mut j = i + 1;
            let mut closed = false;
            while j < chars.len() && chars[j] != '\n' {
                match chars[j] {
                    '"' => {
                        closed = true;
                        break;
                    }
                    '\\' if j + 1 < chars.len() && chars[j + 1] != '\n' => {
                        value.push(chars[j + 1]);
                        j += 2;
                    }
                    other => {
                        value.push(other);
                        j += 1;
                    }
                }
            }
            if closed {
                let len = j + 1 - i;
                tokens.push(Token {
                    tok: Tok::Str(value),
                    span: span(start_line, start_col, len),
                });
                col += len as u32;
                last = (line, col - 1);
                i = j + 1;
            } else {
                let len = j - i;
                diags.push(ParseDiagnostic::new(
                    DiagnosticCode::UnterminatedString,
                    span(start_line, start_col, len),
                    "unterminated string literal",
                ));
                col += len as u32;
                last = (line, col - 1);
                i = j;
            }
            continue;
        }
        diags.push(ParseDiagnostic::new(
            DiagnosticCode::InvalidCharacter,
            span(line, col, 1),
            format!("invalid character {c:?}"),
        ));
        last = (line, col);
        i += 1;
        col += 1;
    }
    tokens.push(Token {
        tok: Tok::Eof,
        span: span(last.0, last.1, 0),
    });
    (tokens, diags)
}
