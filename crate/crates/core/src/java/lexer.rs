use crate::ast::Span;
use crate::error::{ParseDiagnostic, ParseError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Keyword(&'static str),
    Int(String),
    HexInt(String),
    Float(String),
    Str(String),
    Char(String),
    Punct(&'static str),
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Keyword(k) => format!("keyword `{k}`"),
            Tok::Int(s) | Tok::HexInt(s) | Tok::Float(s) => format!("number `{s}`"),
            Tok::Str(_) => "string literal".to_owned(),
            Tok::Char(_) => "character literal".to_owned(),
            Tok::Punct(p) => format!("'{p}'"),
            Tok::Eof => "end of input".to_owned(),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub span: Span,
    pub line: usize,
    pub column: usize,
}

const KEYWORDS: &[&str] = &[
    "abstract", "boolean", "break", "byte", "char", "class", "continue", "double", "else",
    "false", "final", "float", "for", "if", "int", "long", "new", "null", "private",
    "protected", "public", "return", "short", "static", "this", "true", "void", "while",
];

// Longest first so that greedy matching picks `&&` over `&`.
const PUNCTUATION: &[&str] = &[
    "&&", "||", "==", "!=", "<=", ">=", "++", "--", "+=", "-=", "*=", "/=", "%=", "{", "}",
    "(", ")", "[", "]", ";", ",", ".", "=", "<", ">", "!", "+", "-", "*", "/", "%", "?", ":",
    "&", "|", "^", "~",
];

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
    column: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.src[self.pos..].chars().nth(n)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn error(&self, line: usize, column: usize, message: impl Into<String>) -> ParseError {
        ParseError {
            diagnostic: ParseDiagnostic {
                line,
                column,
                message: message.into(),
            },
        }
    }
}

pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut cur = Cursor {
        src,
        pos: 0,
        line: 1,
        column: 1,
    };
    let mut out = Vec::new();

    loop {
        skip_trivia(&mut cur)?;
        let (start, line, column) = (cur.pos, cur.line, cur.column);
        let Some(c) = cur.peek() else {
            out.push(Token {
                tok: Tok::Eof,
                span: Span::new(start, start),
                line,
                column,
            });
            return Ok(out);
        };

        let tok = if c.is_alphabetic() || c == '_' || c == '$' {
            while matches!(cur.peek(), Some(c) if c.is_alphanumeric() || c == '_' || c == '$') {
                cur.bump();
            }
            let word = &src[start..cur.pos];
            match KEYWORDS.iter().find(|k| **k == word) {
                Some(k) => Tok::Keyword(k),
                None => Tok::Ident(word.to_owned()),
            }
        } else if c.is_ascii_digit() || (c == '.' && matches!(cur.peek_at(1), Some(d) if d.is_ascii_digit())) {
            lex_number(&mut cur)
        } else if c == '"' {
            Tok::Str(lex_quoted(&mut cur, '"', line, column)?)
        } else if c == '\'' {
            Tok::Char(lex_quoted(&mut cur, '\'', line, column)?)
        } else {
            let rest = &src[cur.pos..];
            let Some(p) = PUNCTUATION.iter().find(|p| rest.starts_with(**p)) else {
                return Err(cur.error(line, column, format!("unexpected character {c:?}")));
            };
            for _ in 0..p.len() {
                cur.bump();
            }
            Tok::Punct(p)
        };

        out.push(Token {
            tok,
            span: Span::new(start, cur.pos),
            line,
            column,
        });
    }
}

fn skip_trivia(cur: &mut Cursor<'_>) -> Result<(), ParseError> {
    loop {
        match (cur.peek(), cur.peek_at(1)) {
            (Some(c), _) if c.is_whitespace() => {
                cur.bump();
            }
            (Some('/'), Some('/')) => {
                while !matches!(cur.peek(), None | Some('\n')) {
                    cur.bump();
                }
            }
            (Some('/'), Some('*')) => {
                let (line, column) = (cur.line, cur.column);
                cur.bump();
                cur.bump();
                loop {
                    match cur.peek() {
                        None => return Err(cur.error(line, column, "unterminated comment")),
                        Some('*') if cur.peek_at(1) == Some('/') => {
                            cur.bump();
                            cur.bump();
                            break;
                        }
                        _ => {
                            cur.bump();
                        }
                    }
                }
            }
            _ => return Ok(()),
        }
    }
}

fn lex_number(cur: &mut Cursor<'_>) -> Tok {
    let start = cur.pos;
    if cur.peek() == Some('0') && matches!(cur.peek_at(1), Some('x' | 'X')) {
        cur.bump();
        cur.bump();
        while matches!(cur.peek(), Some(c) if c.is_ascii_hexdigit() || c == '_') {
            cur.bump();
        }
        if matches!(cur.peek(), Some('l' | 'L')) {
            cur.bump();
        }
        return Tok::HexInt(cur.src[start..cur.pos].to_owned());
    }

    let mut float = false;
    let digits = |cur: &mut Cursor<'_>| {
        while matches!(cur.peek(), Some(c) if c.is_ascii_digit() || c == '_') {
            cur.bump();
        }
    };
    digits(cur);
    if cur.peek() == Some('.') && matches!(cur.peek_at(1), Some(d) if d.is_ascii_digit()) {
        float = true;
        cur.bump();
        digits(cur);
    }
    if matches!(cur.peek(), Some('e' | 'E')) {
        let sign = matches!(cur.peek_at(1), Some('+' | '-'));
        let digit_at = if sign { 2 } else { 1 };
        if matches!(cur.peek_at(digit_at), Some(d) if d.is_ascii_digit()) {
            float = true;
            for _ in 0..digit_at {
                cur.bump();
            }
            digits(cur);
        }
    }
    match cur.peek() {
        Some('f' | 'F' | 'd' | 'D') => {
            float = true;
            cur.bump();
        }
        Some('l' | 'L') if !float => {
            cur.bump();
        }
        _ => {}
    }
    let text = cur.src[start..cur.pos].to_owned();
    if float {
        Tok::Float(text)
    } else {
        Tok::Int(text)
    }
}

/// Returns the raw text between the quotes, escape sequences untouched.
fn lex_quoted(
    cur: &mut Cursor<'_>,
    quote: char,
    line: usize,
    column: usize,
) -> Result<String, ParseError> {
    cur.bump();
    let start = cur.pos;
    loop {
        match cur.peek() {
            None | Some('\n') => {
                return Err(cur.error(line, column, "unterminated literal"));
            }
            Some('\\') => {
                cur.bump();
                if cur.bump().is_none() {
                    return Err(cur.error(line, column, "unterminated literal"));
                }
            }
            Some(c) if c == quote => {
                let text = cur.src[start..cur.pos].to_owned();
                cur.bump();
                return Ok(text);
            }
            Some(_) => {
                cur.bump();
            }
        }
    }
}
