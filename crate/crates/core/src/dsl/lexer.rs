use crate::error::{Error, Result};

use super::Span;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub span: Span,
    pub text: String,
}

pub(crate) fn syntax(span: Span, message: impl Into<String>) -> Error {
    Error::Syntax {
        line: span.line,
        column: span.column,
        message: message.into(),
    }
}

pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<(usize, char)> = src.char_indices().collect();
    let mut out = Vec::new();
    let (mut line, mut col) = (1, 1);
    let mut i = 0;
    while i < chars.len() {
        let (start, c) = chars[i];
        let span_at = |end: usize| Span {
            start,
            end,
            line,
            column: col,
        };
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            col += 1;
            i += 1;
            continue;
        }
        let mut j = i;
        let tok = if c.is_ascii_digit() || c == '.' {
            while j < chars.len() && (chars[j].1.is_ascii_digit() || chars[j].1 == '.') {
                j += 1;
            }
            if j < chars.len() && matches!(chars[j].1, 'e' | 'E') {
                let mut k = j + 1;
                if k < chars.len() && matches!(chars[k].1, '+' | '-') {
                    k += 1;
                }
                if k < chars.len() && chars[k].1.is_ascii_digit() {
                    while k < chars.len() && chars[k].1.is_ascii_digit() {
                        k += 1;
                    }
                    j = k;
                }
            }
            let end = chars.get(j).map_or(src.len(), |p| p.0);
            let text = &src[start..end];
            let v: f64 = text
                .parse()
                .map_err(|_| syntax(span_at(end), format!("malformed number `{text}`")))?;
            Tok::Num(v)
        } else if c.is_ascii_alphabetic() || c == '_' {
            while j < chars.len() && (chars[j].1.is_ascii_alphanumeric() || chars[j].1 == '_') {
                j += 1;
            }
            let end = chars.get(j).map_or(src.len(), |p| p.0);
            Tok::Ident(src[start..end].to_string())
        } else {
            j += 1;
            match c {
                '+' => Tok::Plus,
                '-' => Tok::Minus,
                '*' => Tok::Star,
                '/' => Tok::Slash,
                '^' => Tok::Caret,
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                _ => {
                    return Err(syntax(
                        span_at(start + c.len_utf8()),
                        format!("unexpected character `{c}`"),
                    ))
                }
            }
        };
        let end = chars.get(j).map_or(src.len(), |p| p.0);
        out.push(Token {
            tok,
            span: span_at(end),
            text: src[start..end].to_string(),
        });
        col += j - i;
        i = j;
    }
    out.push(Token {
        tok: Tok::End,
        span: Span {
            start: src.len(),
            end: src.len(),
            line,
            column: col,
        },
        text: String::new(),
    });
    Ok(out)
}
