//! Formula grammar:
//!
//! ```text
//! formula  := ident '~' terms ( '|' terms )?
//! terms    := term ( '+' term )*
//! term     := ident | '1'
//! ident    := [A-Za-z._] [A-Za-z0-9._]*
//! ```
//!
//! The intercept is always present, so a `1` term only marks an otherwise
//! empty side. Interactions and transformations are not part of the grammar.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parsed model formula. An empty `precision_terms` means a common precision.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormulaSpec {
    pub response: String,
    pub mean_terms: Vec<String>,
    pub precision_terms: Vec<String>,
}

impl FormulaSpec {
    pub fn has_common_precision(&self) -> bool {
        self.precision_terms.is_empty()
    }
}

impl std::fmt::Display for FormulaSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let side = |terms: &[String]| {
            if terms.is_empty() {
                "1".to_string()
            } else {
                terms.join(" + ")
            }
        };
        write!(
            f,
            "{} ~ {} | {}",
            self.response,
            side(&self.mean_terms),
            side(&self.precision_terms)
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    One,
    Tilde,
    Plus,
    Bar,
}

fn tokenize(text: &str) -> Result<Vec<(usize, Token)>> {
    let mut out = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some(&(pos, ch)) = chars.peek() {
        match ch {
            c if c.is_whitespace() => {
                chars.next();
            }
            '~' => {
                out.push((pos, Token::Tilde));
                chars.next();
            }
            '+' => {
                out.push((pos, Token::Plus));
                chars.next();
            }
            '|' => {
                out.push((pos, Token::Bar));
                chars.next();
            }
            c if c.is_ascii_alphanumeric() || c == '.' || c == '_' => {
                let mut word = String::new();
                while let Some(&(_, c)) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '.' || c == '_' {
                        word.push(c);
                        chars.next();
                    } else {
                        break;
                    }
                }
                if word == "1" {
                    out.push((pos, Token::One));
                } else if word.starts_with(|c: char| c.is_ascii_digit()) {
                    return Err(Error::Syntax {
                        pos,
                        message: format!("`{word}` is not a valid term"),
                    });
                } else {
                    out.push((pos, Token::Ident(word)));
                }
            }
            other => {
                return Err(Error::Syntax {
                    pos,
                    message: format!("unexpected character `{other}`"),
                })
            }
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    at: usize,
    end: usize,
}

impl Parser {
    fn pos(&self) -> usize {
        self.tokens.get(self.at).map_or(self.end, |t| t.0)
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.at).map(|t| &t.1)
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Syntax {
            pos: self.pos(),
            message: message.into(),
        })
    }

    fn terms(&mut self) -> Result<Vec<String>> {
        let mut terms: Vec<String> = Vec::new();
        loop {
            let pos = self.pos();
            match self.peek().cloned() {
                Some(Token::Ident(name)) => {
                    if terms.contains(&name) {
                        return Err(Error::Syntax {
                            pos,
                            message: format!("duplicate term `{name}`"),
                        });
                    }
                    terms.push(name);
                }
                Some(Token::One) => {}
                _ => return self.error("expected a term"),
            }
            self.at += 1;
            if self.peek() == Some(&Token::Plus) {
                self.at += 1;
            } else {
                return Ok(terms);
            }
        }
    }
}

/// Parse `response ~ mean terms [| precision terms]`.
pub fn parse_formula(text: &str) -> Result<FormulaSpec> {
    let mut p = Parser {
        tokens: tokenize(text)?,
        at: 0,
        end: text.len(),
    };
    let response = match p.peek().cloned() {
        Some(Token::Ident(name)) => name,
        _ => return p.error("expected a response name"),
    };
    p.at += 1;
    if p.peek() != Some(&Token::Tilde) {
        return p.error("expected `~`");
    }
    p.at += 1;
    let mean_terms = p.terms()?;
    let precision_terms = if p.peek() == Some(&Token::Bar) {
        p.at += 1;
        p.terms()?
    } else {
        Vec::new()
    };
    if p.peek().is_some() {
        return p.error("unexpected trailing input");
    }
    Ok(FormulaSpec {
        response,
        mean_terms,
        precision_terms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fitting_call_formula() {
        let f = parse_formula("Smp ~ Disease | 1").unwrap();
        assert_eq!(f.response, "Smp");
        assert_eq!(f.mean_terms, vec!["Disease"]);
        assert!(f.has_common_precision());
        // Dotted names as in R-style abbreviations.
        let f = parse_formula("Smp~Dis.|1").unwrap();
        assert_eq!(f.mean_terms, vec!["Dis."]);
    }

    #[test]
    fn intercept_only() {
        let f = parse_formula("Y ~ 1").unwrap();
        assert!(f.mean_terms.is_empty());
        assert!(f.has_common_precision());
    }

    #[test]
    fn varying_precision() {
        let f = parse_formula("  Y ~ a+b   |a ").unwrap();
        assert_eq!(f.mean_terms, vec!["a", "b"]);
        assert_eq!(f.precision_terms, vec!["a"]);
        assert_eq!(f.to_string(), "Y ~ a + b | a");
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let cases = [
            ("~ a", 0),
            ("Y a", 2),
            ("Y ~", 3),
            ("Y ~ a +", 7),
            ("Y ~ a | ", 8),
            ("Y ~ a * b", 6),
            ("Y ~ a + a", 8),
            ("Y ~ a | b | c", 10),
            ("Y ~ 2x", 4),
        ];
        for (text, want) in cases {
            match parse_formula(text) {
                Err(Error::Syntax { pos, .. }) => assert_eq!(pos, want, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }
}
