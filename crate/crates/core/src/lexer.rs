//! Scanner for `.ol` and `.iol` sources.
//!
//! The lexer is a plain function of its input. Comments (`//` and `/* */`)
//! and whitespace produce no tokens; every token records the line and column
//! of its first character.

use std::fmt;

use thiserror::Error;

/// Words reserved by the language. Anything else made of identifier
/// characters is an [`TokenKind::Identifier`].
pub const KEYWORDS: &[&str] = &[
    "type",
    "interface",
    "inputPort",
    "outputPort",
    "include",
    "execution",
    "main",
    "init",
    "define",
    "RequestResponse",
    "OneWay",
    "Location",
    "Protocol",
    "Interfaces",
    "if",
    "else",
    "match",
    "undefined",
    "int",
    "long",
    "double",
    "string",
    "raw",
    "void",
    "any",
    "concurrent",
    "single",
    "sequential",
];

const TWO_CHAR_PUNCT: &[&str] = &["==", "!=", "<=", ">=", "&&", "||"];
const ONE_CHAR_PUNCT: &str = "{}()[]:;,.|@=+-*/<>!?%";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Identifier,
    IntegerLiteral,
    DoubleLiteral,
    StringLiteral,
    Keyword,
    Punctuation,
    EndOfInput,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            TokenKind::Identifier => "identifier",
            TokenKind::IntegerLiteral => "integer literal",
            TokenKind::DoubleLiteral => "double literal",
            TokenKind::StringLiteral => "string literal",
            TokenKind::Keyword => "keyword",
            TokenKind::Punctuation => "punctuation",
            TokenKind::EndOfInput => "end of input",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    /// Source text of the token. String literals hold their unescaped
    /// content without the surrounding quotes.
    pub text: String,
    pub line: u32,
    pub column: u32,
}

impl Token {
    pub fn is_punct(&self, p: &str) -> bool {
        self.kind == TokenKind::Punctuation && self.text == p
    }

    pub fn is_keyword(&self, k: &str) -> bool {
        self.kind == TokenKind::Keyword && self.text == k
    }

    pub fn is_eof(&self) -> bool {
        self.kind == TokenKind::EndOfInput
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            TokenKind::EndOfInput => f.write_str("end of input"),
            TokenKind::StringLiteral => write!(f, "string literal {:?}", self.text),
            kind => write!(f, "{kind} `{}`", self.text),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LexError {
    #[error("{line}:{column}: unterminated string literal")]
    UnterminatedString { line: u32, column: u32 },
    #[error("{line}:{column}: unterminated block comment")]
    UnterminatedComment { line: u32, column: u32 },
    #[error("{line}:{column}: illegal character {ch:?}")]
    IllegalCharacter { ch: char, line: u32, column: u32 },
    #[error("{line}:{column}: unknown escape sequence \\{ch}")]
    BadEscape { ch: char, line: u32, column: u32 },
}

impl LexError {
    pub fn position(&self) -> (u32, u32) {
        match *self {
            LexError::UnterminatedString { line, column }
            | LexError::UnterminatedComment { line, column }
            | LexError::IllegalCharacter { line, column, .. }
            | LexError::BadEscape { line, column, .. } => (line, column),
        }
    }
}

pub fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

pub fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// True when `s` lexes as a single identifier or keyword.
pub fn is_identifier(s: &str) -> bool {
    let chars: Vec<char> = s.chars().collect();
    match chars.first() {
        Some(&c) if is_ident_start(c) => {}
        _ => return false,
    }
    chars.iter().enumerate().all(|(i, &c)| {
        is_ident_char(c)
            || (c == '-'
                && i + 1 < chars.len()
                && is_ident_char(chars[i - 1])
                && is_ident_char(chars[i + 1]))
    })
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: u32,
    column: u32,
}

impl Cursor<'_> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn peek2(&self) -> Option<char> {
        let mut it = self.chars.clone();
        it.next();
        it.next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }
}

/// Splits `source` into tokens, terminated by a single end-of-input token.
pub fn tokenize(source: &str) -> Result<Vec<Token>, LexError> {
    let mut cur = Cursor {
        chars: source.chars().peekable(),
        line: 1,
        column: 1,
    };
    let mut tokens = Vec::new();

    while let Some(c) = cur.peek() {
        let (line, column) = (cur.line, cur.column);

        if c.is_whitespace() {
            cur.bump();
            continue;
        }

        if c == '/' && cur.peek2() == Some('/') {
            while let Some(c) = cur.peek() {
                if c == '\n' {
                    break;
                }
                cur.bump();
            }
            continue;
        }

        if c == '/' && cur.peek2() == Some('*') {
            cur.bump();
            cur.bump();
            let mut closed = false;
            while let Some(c) = cur.bump() {
                if c == '*' && cur.peek() == Some('/') {
                    cur.bump();
                    closed = true;
                    break;
                }
            }
            if !closed {
                return Err(LexError::UnterminatedComment { line, column });
            }
            continue;
        }

        let push = |tokens: &mut Vec<Token>, kind, text: String| {
            tokens.push(Token {
                kind,
                text,
                line,
                column,
            })
        };

        if is_ident_start(c) {
            let mut text = String::new();
            while let Some(c) = cur.peek() {
                if is_ident_char(c) {
                    text.push(c);
                    cur.bump();
                } else if c == '-' && cur.peek2().is_some_and(is_ident_char) {
                    // the preceding char is always an identifier char here
                    text.push(c);
                    cur.bump();
                } else {
                    break;
                }
            }
            let kind = if KEYWORDS.contains(&text.as_str()) {
                TokenKind::Keyword
            } else {
                TokenKind::Identifier
            };
            push(&mut tokens, kind, text);
            continue;
        }

        if c.is_ascii_digit() {
            let mut text = String::new();
            let mut kind = TokenKind::IntegerLiteral;
            while let Some(c) = cur.peek().filter(char::is_ascii_digit) {
                text.push(c);
                cur.bump();
            }
            if cur.peek() == Some('.') && cur.peek2().is_some_and(|c| c.is_ascii_digit()) {
                kind = TokenKind::DoubleLiteral;
                text.push('.');
                cur.bump();
                while let Some(c) = cur.peek().filter(char::is_ascii_digit) {
                    text.push(c);
                    cur.bump();
                }
            }
            if matches!(cur.peek(), Some('e' | 'E')) {
                let mut look = cur.chars.clone();
                let mut exp = String::new();
                exp.extend(look.next());
                if let Some(sign @ ('+' | '-')) = look.peek().copied() {
                    exp.push(sign);
                    look.next();
                }
                if look.peek().is_some_and(|c| c.is_ascii_digit()) {
                    kind = TokenKind::DoubleLiteral;
                    for _ in 0..exp.len() {
                        cur.bump();
                    }
                    text.push_str(&exp);
                    while let Some(c) = cur.peek().filter(char::is_ascii_digit) {
                        text.push(c);
                        cur.bump();
                    }
                }
            }
            if kind == TokenKind::IntegerLiteral && matches!(cur.peek(), Some('L' | 'l')) {
                text.extend(cur.bump());
            }
            if cur.peek().is_some_and(is_ident_start) {
                let ch = cur.peek().unwrap_or_default();
                return Err(LexError::IllegalCharacter {
                    ch,
                    line: cur.line,
                    column: cur.column,
                });
            }
            push(&mut tokens, kind, text);
            continue;
        }

        if c == '"' {
            cur.bump();
            let mut text = String::new();
            loop {
                match cur.bump() {
                    None | Some('\n') => {
                        return Err(LexError::UnterminatedString { line, column });
                    }
                    Some('"') => break,
                    Some('\\') => {
                        let (el, ec) = (cur.line, cur.column);
                        match cur.bump() {
                            Some('"') => text.push('"'),
                            Some('\\') => text.push('\\'),
                            Some('n') => text.push('\n'),
                            Some('t') => text.push('\t'),
                            Some(ch) => {
                                return Err(LexError::BadEscape {
                                    ch,
                                    line: el,
                                    column: ec,
                                })
                            }
                            None => return Err(LexError::UnterminatedString { line, column }),
                        }
                    }
                    Some(ch) => text.push(ch),
                }
            }
            push(&mut tokens, TokenKind::StringLiteral, text);
            continue;
        }

        if let Some(next) = cur.peek2() {
            let pair: String = [c, next].iter().collect();
            if TWO_CHAR_PUNCT.contains(&pair.as_str()) {
                cur.bump();
                cur.bump();
                push(&mut tokens, TokenKind::Punctuation, pair);
                continue;
            }
        }

        if ONE_CHAR_PUNCT.contains(c) {
            cur.bump();
            push(&mut tokens, TokenKind::Punctuation, c.to_string());
            continue;
        }

        return Err(LexError::IllegalCharacter { ch: c, line, column });
    }

    tokens.push(Token {
        kind: TokenKind::EndOfInput,
        text: String::new(),
        line: cur.line,
        column: cur.column,
    });
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds_and_text(src: &str) -> Vec<(TokenKind, String)> {
        tokenize(src)
            .unwrap()
            .into_iter()
            .map(|t| (t.kind, t.text))
            .collect()
    }

    #[test]
    fn choice_type_declaration() {
        use TokenKind::*;
        let toks = kinds_and_text("type animal: cat | dog");
        let expected = [
            (Keyword, "type"),
            (Identifier, "animal"),
            (Punctuation, ":"),
            (Identifier, "cat"),
            (Punctuation, "|"),
            (Identifier, "dog"),
            (EndOfInput, ""),
        ];
        assert_eq!(toks.len(), expected.len());
        for ((k, t), (ek, et)) in toks.iter().zip(expected) {
            assert_eq!((*k, t.as_str()), (ek, et));
        }
    }

    #[test]
    fn empty_source_is_just_eof() {
        let toks = tokenize("").unwrap();
        assert_eq!(toks.len(), 1);
        assert!(toks[0].is_eof());
    }

    #[test]
    fn pipe_is_the_same_token_in_both_contexts() {
        let ty = tokenize("type animal: cat | dog").unwrap();
        let par = tokenize("x = 1 | y = 2").unwrap();
        let ty_pipe = ty.iter().find(|t| t.text == "|").unwrap();
        let par_pipe = par.iter().find(|t| t.text == "|").unwrap();
        assert_eq!(ty_pipe.kind, par_pipe.kind);
        assert_eq!(ty_pipe.text, par_pipe.text);
    }

    #[test]
    fn positions_point_at_first_char() {
        let toks = tokenize("main {\n  x = \"hi\"\n}").unwrap();
        let x = &toks[2];
        assert_eq!((x.text.as_str(), x.line, x.column), ("x", 2, 3));
        let s = &toks[4];
        assert_eq!((s.kind, s.line, s.column), (TokenKind::StringLiteral, 2, 7));
        assert_eq!(s.text, "hi");
    }

    #[test]
    fn hyphenated_identifiers() {
        let toks = kinds_and_text("type Old-Software-Corp: void");
        assert_eq!(toks[1], (TokenKind::Identifier, "Old-Software-Corp".into()));
        // a hyphen that is not surrounded by identifier characters is minus
        let toks = kinds_and_text("a - b");
        assert_eq!(toks[1], (TokenKind::Punctuation, "-".into()));
        let toks = kinds_and_text("a -1");
        assert_eq!(toks[1], (TokenKind::Punctuation, "-".into()));
        let toks = kinds_and_text("a- b");
        assert_eq!(toks[0], (TokenKind::Identifier, "a".into()));
        assert_eq!(toks[1], (TokenKind::Punctuation, "-".into()));
    }

    #[test]
    fn comments_are_skipped() {
        let toks = kinds_and_text("// hi\nx /* block\n comment */ y");
        assert_eq!(toks.len(), 3);
        assert_eq!(toks[1].1, "y");
    }

    #[test]
    fn numbers() {
        use TokenKind::*;
        let toks = kinds_and_text("32 4.5 7L 1e3 2.5E-2");
        assert_eq!(toks[0], (IntegerLiteral, "32".into()));
        assert_eq!(toks[1], (DoubleLiteral, "4.5".into()));
        assert_eq!(toks[2], (IntegerLiteral, "7L".into()));
        assert_eq!(toks[3], (DoubleLiteral, "1e3".into()));
        assert_eq!(toks[4], (DoubleLiteral, "2.5E-2".into()));
    }

    #[test]
    fn string_escapes() {
        let toks = tokenize(r#""a\"b\\c\nd\te""#).unwrap();
        assert_eq!(toks[0].text, "a\"b\\c\nd\te");
    }

    #[test]
    fn two_char_operators() {
        let toks = kinds_and_text("a == b != c <= d >= e && f || g");
        let ops: Vec<_> = toks
            .iter()
            .filter(|(k, _)| *k == TokenKind::Punctuation)
            .map(|(_, t)| t.as_str())
            .collect();
        assert_eq!(ops, ["==", "!=", "<=", ">=", "&&", "||"]);
    }

    #[test]
    fn errors_carry_positions() {
        assert_eq!(
            tokenize("x = \"abc").unwrap_err(),
            LexError::UnterminatedString { line: 1, column: 5 }
        );
        assert_eq!(
            tokenize("a\n  #").unwrap_err(),
            LexError::IllegalCharacter {
                ch: '#',
                line: 2,
                column: 3
            }
        );
        assert!(matches!(
            tokenize("/* never closed").unwrap_err(),
            LexError::UnterminatedComment { .. }
        ));
    }

    #[test]
    fn identifier_predicate() {
        assert!(is_identifier("Old-Software-Corp"));
        assert!(is_identifier("a_1"));
        assert!(!is_identifier("1a"));
        assert!(!is_identifier("a-"));
        assert!(!is_identifier(""));
    }
}
