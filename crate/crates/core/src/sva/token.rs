//! Tokenizer for the assertion subset.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Ident,
    Keyword,
    /// `$rose`, `$error`, ...
    SystemName,
    Number,
    Str,
    Operator,
    Punct,
    /// Unterminated comment/string or a stray character.
    Error,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TokenKind::Ident => "ident",
            TokenKind::Keyword => "kw",
            TokenKind::SystemName => "sys",
            TokenKind::Number => "num",
            TokenKind::Str => "str",
            TokenKind::Operator => "op",
            TokenKind::Punct => "punct",
            TokenKind::Error => "error",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub lexeme: String,
    /// 1-based.
    pub line: u32,
    /// 1-based, in characters.
    pub column: u32,
    /// Byte range in the source.
    pub start: usize,
    pub end: usize,
}

impl Token {
    pub fn is(&self, kind: TokenKind, lexeme: &str) -> bool {
        self.kind == kind && self.lexeme == lexeme
    }

    pub fn is_kw(&self, kw: &str) -> bool {
        self.is(TokenKind::Keyword, kw)
    }

    pub fn is_op(&self, op: &str) -> bool {
        self.is(TokenKind::Operator, op)
    }

    pub fn is_punct(&self, p: &str) -> bool {
        self.is(TokenKind::Punct, p)
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{} {}]", self.kind, self.lexeme)
    }
}

pub const KEYWORDS: &[&str] = &[
    "property", "endproperty", "sequence", "endsequence", "assert", "assume", "cover",
    "disable", "iff", "posedge", "negedge", "edge", "not", "and", "or", "intersect",
    "within", "throughout", "else", "begin", "end", "if", "module", "endmodule",
];

/// Longest first so that maximal munch works by linear scan.
const OPERATORS: &[&str] = &[
    "<<<", ">>>", "===", "!==", "|->", "|=>", "##", "==", "!=", "<=", ">=", "&&", "||",
    "<<", ">>", "~&", "~|", "~^", "^~", "->", "!", "~", "&", "|", "^", "+", "-", "*",
    "/", "%", "<", ">", "?", "=",
];

const PUNCT: &[char] = &['(', ')', '[', ']', '{', '}', ';', ':', ',', '.', '@', '$', '#'];

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    line: u32,
    col: u32,
}

impl<'a> Lexer<'a> {
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
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn bump_while(&mut self, f: impl Fn(char) -> bool) {
        while self.peek().is_some_and(&f) {
            self.bump();
        }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '$'
}

fn is_based_digit(c: char) -> bool {
    c.is_ascii_hexdigit() || matches!(c, 'x' | 'X' | 'z' | 'Z' | '?' | '_')
}

/// Splits `source` into tokens. Comments and whitespace are dropped; lexical
/// problems surface as `TokenKind::Error` tokens rather than failures.
pub fn tokenize(source: &str) -> Vec<Token> {
    let mut lx = Lexer { src: source, pos: 0, line: 1, col: 1 };
    let mut out = Vec::new();
    loop {
        lx.bump_while(char::is_whitespace);
        let Some(c) = lx.peek() else { break };
        let (start, line, column) = (lx.pos, lx.line, lx.col);
        let kind = if c == '/' && lx.peek_at(1) == Some('/') {
            lx.bump_while(|c| c != '\n');
            continue;
        } else if c == '/' && lx.peek_at(1) == Some('*') {
            match lx.rest()[2..].find("*/") {
                Some(off) => {
                    let stop = lx.pos + 2 + off + 2;
                    while lx.pos < stop {
                        lx.bump();
                    }
                    continue;
                }
                None => {
                    while lx.bump().is_some() {}
                    TokenKind::Error
                }
            }
        } else if is_ident_start(c) {
            lx.bump_while(is_ident_char);
            if KEYWORDS.contains(&&source[start..lx.pos]) {
                TokenKind::Keyword
            } else {
                TokenKind::Ident
            }
        } else if c == '$' && lx.peek_at(1).is_some_and(is_ident_start) {
            lx.bump();
            lx.bump_while(is_ident_char);
            TokenKind::SystemName
        } else if c.is_ascii_digit() {
            lx.bump_while(|c| c.is_ascii_digit() || c == '_');
            if lx.peek() == Some('.') && lx.peek_at(1).is_some_and(|c| c.is_ascii_digit()) {
                lx.bump();
                lx.bump_while(|c| c.is_ascii_digit() || c == '_');
            } else if lx.peek() == Some('\'') {
                lex_based_tail(&mut lx);
            }
            TokenKind::Number
        } else if c == '\'' {
            if lex_based_tail(&mut lx) {
                TokenKind::Number
            } else {
                lx.bump();
                TokenKind::Error
            }
        } else if c == '"' {
            lx.bump();
            let mut closed = false;
            while let Some(c) = lx.peek() {
                if c == '\n' {
                    break;
                }
                lx.bump();
                if c == '\\' {
                    lx.bump();
                } else if c == '"' {
                    closed = true;
                    break;
                }
            }
            if closed {
                TokenKind::Str
            } else {
                TokenKind::Error
            }
        } else if let Some(op) = OPERATORS.iter().find(|op| lx.rest().starts_with(**op)) {
            for _ in 0..op.len() {
                lx.bump();
            }
            TokenKind::Operator
        } else if PUNCT.contains(&c) {
            lx.bump();
            TokenKind::Punct
        } else {
            lx.bump();
            TokenKind::Error
        };
        out.push(Token {
            kind,
            lexeme: source[start..lx.pos].to_string(),
            line,
            column,
            start,
            end: lx.pos,
        });
    }
    out
}

/// Consumes `'[s]<base><digits>` or an unbased unsized `'0 '1 'x 'z`.
/// Returns `false` (consuming nothing) when the apostrophe starts neither.
fn lex_based_tail(lx: &mut Lexer<'_>) -> bool {
    debug_assert_eq!(lx.peek(), Some('\''));
    let mut n = 1;
    if matches!(lx.peek_at(n), Some('s' | 'S')) {
        n += 1;
    }
    match lx.peek_at(n) {
        Some('b' | 'B' | 'o' | 'O' | 'd' | 'D' | 'h' | 'H')
            if lx.peek_at(n + 1).is_some_and(is_based_digit) =>
        {
            for _ in 0..=n {
                lx.bump();
            }
            lx.bump_while(is_based_digit);
            true
        }
        Some('0' | '1' | 'x' | 'X' | 'z' | 'Z') if n == 1 => {
            lx.bump();
            lx.bump();
            true
        }
        _ => false,
    }
}

/// `(kind, lexeme)` pairs, the position-free view used for round-trip checks.
pub fn token_stream(source: &str) -> Vec<(TokenKind, String)> {
    tokenize(source).into_iter().map(|t| (t.kind, t.lexeme)).collect()
}
