//! Rule-file parser.
//!
//! ```text
//! rule    := [FLOAT ':'] literal '<-' [literal ('&' literal)*]
//! literal := ['!'] IDENT
//! ```
//!
//! One rule per line, `#` starts a comment, blank lines are ignored.

use super::{IfThenRule, KnowledgeBase, Literal, SymbolTable};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(f64),
    Ident(String),
    Colon,
    Arrow,
    And,
    Not,
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    src: &'a str,
    line: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str, line: usize) -> Self {
        Self {
            chars: src.char_indices().peekable(),
            src,
            line,
        }
    }

    fn column(&self, byte: usize) -> usize {
        self.src[..byte].chars().count() + 1
    }

    fn err(&self, byte: usize, message: impl Into<String>) -> Error {
        Error::Syntax {
            line: self.line,
            column: self.column(byte),
            message: message.into(),
        }
    }

    fn tokens(mut self) -> Result<Vec<(usize, Token)>> {
        let mut out = Vec::new();
        while let Some(&(start, ch)) = self.chars.peek() {
            match ch {
                c if c.is_whitespace() => {
                    self.chars.next();
                }
                ':' => {
                    self.chars.next();
                    out.push((start, Token::Colon));
                }
                '&' => {
                    self.chars.next();
                    out.push((start, Token::And));
                }
                '!' => {
                    self.chars.next();
                    out.push((start, Token::Not));
                }
                '<' => {
                    self.chars.next();
                    match self.chars.next() {
                        Some((_, '-')) => out.push((start, Token::Arrow)),
                        _ => return Err(self.err(start, "expected `<-`")),
                    }
                }
                c if c.is_ascii_digit() || c == '.' || c == '-' || c == '+' => {
                    let end = self.scan(|c, prev| {
                        c.is_ascii_alphanumeric()
                            || c == '.'
                            || ((c == '-' || c == '+') && matches!(prev, None | Some('e' | 'E')))
                    });
                    let text = &self.src[start..end];
                    let value: f64 = text
                        .parse()
                        .map_err(|_| self.err(start, format!("invalid number `{text}`")))?;
                    out.push((start, Token::Number(value)));
                }
                c if c.is_alphabetic() || c == '_' => {
                    let end = self.scan(|c, _| c.is_alphanumeric() || c == '_' || c == '=');
                    out.push((start, Token::Ident(self.src[start..end].to_string())));
                }
                other => return Err(self.err(start, format!("unexpected character `{other}`"))),
            }
        }
        Ok(out)
    }

    fn scan(&mut self, accept: impl Fn(char, Option<char>) -> bool) -> usize {
        let mut prev = None;
        while let Some(&(i, c)) = self.chars.peek() {
            if !accept(c, prev) {
                return i;
            }
            prev = Some(c);
            self.chars.next();
        }
        self.src.len()
    }
}

/// A rule before symbol interning.
struct RawRule {
    confidence: f64,
    head: (bool, String),
    body: Vec<(bool, String)>,
}

fn parse_line(src: &str, line: usize) -> Result<RawRule> {
    let lexer = Lexer::new(src, line);
    let column_of = |byte: usize| src[..byte].chars().count() + 1;
    let tokens = lexer.tokens()?;
    let end = src.len();
    let mut pos = 0;
    let syntax = |byte: usize, message: String| Error::Syntax {
        line,
        column: column_of(byte),
        message,
    };
    let at = |pos: usize| tokens.get(pos).map(|(b, _)| *b).unwrap_or(end);

    let mut confidence = 1.0;
    if let Some((_, Token::Number(value))) = tokens.first() {
        if !matches!(tokens.get(1), Some((_, Token::Colon))) {
            return Err(syntax(at(1), "expected `:` after confidence".into()));
        }
        if *value < 0.0 || value.is_nan() {
            return Err(Error::NegativeConfidence {
                line,
                value: *value,
            });
        }
        confidence = *value;
        pos = 2;
    }

    let literal = |pos: &mut usize| -> Result<(bool, String)> {
        let negated = matches!(tokens.get(*pos), Some((_, Token::Not)));
        if negated {
            *pos += 1;
        }
        match tokens.get(*pos) {
            Some((_, Token::Ident(name))) => {
                *pos += 1;
                Ok((negated, name.clone()))
            }
            _ => Err(syntax(at(*pos), "expected identifier".into())),
        }
    };

    let head = literal(&mut pos)?;
    match tokens.get(pos) {
        Some((_, Token::Arrow)) => pos += 1,
        _ => return Err(syntax(at(pos), "expected `<-`".into())),
    }
    let mut body = Vec::new();
    if pos < tokens.len() {
        body.push(literal(&mut pos)?);
        while pos < tokens.len() {
            match tokens.get(pos) {
                Some((_, Token::And)) => pos += 1,
                _ => return Err(syntax(at(pos), "expected `&` or end of line".into())),
            }
            body.push(literal(&mut pos)?);
        }
    }

    let mut seen = std::collections::HashSet::new();
    for (_, name) in std::iter::once(&head).chain(&body) {
        if !seen.insert(name.as_str()) {
            return Err(Error::DuplicateSymbol {
                symbol: name.clone(),
            });
        }
    }
    Ok(RawRule {
        confidence,
        head,
        body,
    })
}

/// Parses a rule file. Symbols are interned in first-appearance order.
pub fn parse_rules(text: &str) -> Result<KnowledgeBase> {
    let mut symbols = SymbolTable::new();
    let mut rules = Vec::new();
    for (i, raw_line) in text.lines().enumerate() {
        let content = match raw_line.find('#') {
            Some(cut) => &raw_line[..cut],
            None => raw_line,
        };
        if content.trim().is_empty() {
            continue;
        }
        let raw = parse_line(content, i + 1)?;
        let mut intern = |(negated, name): &(bool, String)| Literal {
            symbol: symbols.intern(name),
            negated: *negated,
        };
        let head = intern(&raw.head);
        let body = raw.body.iter().map(&mut intern).collect();
        rules.push(IfThenRule {
            confidence: raw.confidence,
            head,
            body,
        });
    }
    Ok(KnowledgeBase { symbols, rules })
}
