use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Keyword {
    Select,
    From,
    Where,
    And,
    Or,
    Between,
    Group,
    By,
    Order,
    Asc,
    Desc,
    Limit,
    As,
    Count,
    Distinct,
    True,
    False,
}

const KEYWORDS: [(&str, Keyword); 17] = [
    ("SELECT", Keyword::Select),
    ("FROM", Keyword::From),
    ("WHERE", Keyword::Where),
    ("AND", Keyword::And),
    ("OR", Keyword::Or),
    ("BETWEEN", Keyword::Between),
    ("GROUP", Keyword::Group),
    ("BY", Keyword::By),
    ("ORDER", Keyword::Order),
    ("ASC", Keyword::Asc),
    ("DESC", Keyword::Desc),
    ("LIMIT", Keyword::Limit),
    ("AS", Keyword::As),
    ("COUNT", Keyword::Count),
    ("DISTINCT", Keyword::Distinct),
    ("TRUE", Keyword::True),
    ("FALSE", Keyword::False),
];

impl Keyword {
    pub fn lookup(word: &str) -> Option<Keyword> {
        KEYWORDS
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(word))
            .map(|&(_, kw)| kw)
    }

    pub fn as_str(self) -> &'static str {
        KEYWORDS
            .iter()
            .find(|&&(_, kw)| kw == self)
            .map(|&(k, _)| k)
            .expect("every keyword is listed")
    }
}

impl fmt::Display for Keyword {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Keyword(Keyword),
    Identifier,
    Number,
    StringLiteral,
    Symbol,
    Parameter,
}

/// A lexeme with its exact source text and byte offset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub offset: usize,
}

impl Token {
    pub fn is_keyword(&self, kw: Keyword) -> bool {
        self.kind == TokenKind::Keyword(kw)
    }

    pub fn is_symbol(&self, sym: &str) -> bool {
        self.kind == TokenKind::Symbol && self.text == sym
    }

    /// Decoded contents of a string literal (quotes stripped, `''` collapsed).
    pub fn string_value(&self) -> Option<String> {
        if self.kind != TokenKind::StringLiteral {
            return None;
        }
        let inner = &self.text[1..self.text.len() - 1];
        Some(inner.replace("''", "'"))
    }

    /// Placeholder name without the leading colon.
    pub fn param_name(&self) -> Option<&str> {
        (self.kind == TokenKind::Parameter).then(|| &self.text[1..])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LexError {
    #[error("unterminated string literal starting at offset {offset}")]
    UnterminatedString { offset: usize },
    #[error("illegal character {ch:?} at offset {offset}")]
    IllegalChar { offset: usize, ch: char },
    #[error("number at offset {offset} does not fit in 64 bits")]
    NumberRange { offset: usize },
}

impl LexError {
    pub fn offset(&self) -> usize {
        match self {
            LexError::UnterminatedString { offset }
            | LexError::IllegalChar { offset, .. }
            | LexError::NumberRange { offset } => *offset,
        }
    }
}

fn ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn ident_continue(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

pub fn tokenize(text: &str) -> Result<Vec<Token>, LexError> {
    let mut tokens = Vec::new();
    let mut chars = text.char_indices().peekable();
    let push = |tokens: &mut Vec<Token>, kind, start: usize, end: usize| {
        tokens.push(Token {
            kind,
            text: text[start..end].to_string(),
            offset: start,
        })
    };

    while let Some(&(start, c)) = chars.peek() {
        if c.is_ascii_whitespace() {
            chars.next();
            continue;
        }
        if ident_start(c) {
            let mut end = start;
            while let Some(&(i, c)) = chars.peek() {
                if !ident_continue(c) {
                    break;
                }
                end = i + c.len_utf8();
                chars.next();
            }
            let kind = match Keyword::lookup(&text[start..end]) {
                Some(kw) => TokenKind::Keyword(kw),
                None => TokenKind::Identifier,
            };
            push(&mut tokens, kind, start, end);
            continue;
        }
        if c.is_ascii_digit() {
            let mut end = start;
            while let Some(&(i, c)) = chars.peek() {
                if !c.is_ascii_digit() {
                    break;
                }
                end = i + 1;
                chars.next();
            }
            if text[start..end].parse::<i64>().is_err() {
                return Err(LexError::NumberRange { offset: start });
            }
            push(&mut tokens, TokenKind::Number, start, end);
            continue;
        }
        match c {
            '\'' => {
                chars.next();
                let mut end = None;
                while let Some((i, c)) = chars.next() {
                    if c == '\'' {
                        if matches!(chars.peek(), Some(&(_, '\''))) {
                            chars.next();
                        } else {
                            end = Some(i + 1);
                            break;
                        }
                    }
                }
                match end {
                    Some(end) => push(&mut tokens, TokenKind::StringLiteral, start, end),
                    None => return Err(LexError::UnterminatedString { offset: start }),
                }
            }
            ':' => {
                chars.next();
                match chars.peek() {
                    Some(&(_, c)) if ident_start(c) => {
                        let mut end = start + 1;
                        while let Some(&(i, c)) = chars.peek() {
                            if !ident_continue(c) {
                                break;
                            }
                            end = i + 1;
                            chars.next();
                        }
                        push(&mut tokens, TokenKind::Parameter, start, end);
                    }
                    _ => {
                        return Err(LexError::IllegalChar {
                            offset: start,
                            ch: ':',
                        })
                    }
                }
            }
            '<' | '>' => {
                chars.next();
                let two = match (c, chars.peek()) {
                    ('<', Some(&(_, '='))) | ('<', Some(&(_, '>'))) | ('>', Some(&(_, '='))) => {
                        chars.next();
                        true
                    }
                    _ => false,
                };
                push(&mut tokens, TokenKind::Symbol, start, start + 1 + two as usize);
            }
            ',' | '(' | ')' | '.' | '*' | '=' => {
                chars.next();
                push(&mut tokens, TokenKind::Symbol, start, start + 1);
            }
            other => {
                return Err(LexError::IllegalChar {
                    offset: start,
                    ch: other,
                })
            }
        }
    }
    Ok(tokens)
}
