//! Tokenizer for `.spa` sources.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    /// `?x`
    Var(String),
    /// Digit string, usable as a name or a count.
    Int(String),
    Sym(char),
    Eof,
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

const SYMBOLS: &str = "(){}[],;:.~/*";

fn ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '\''
}

pub fn lex(src: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
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
        if c == '#' || (c == '/' && chars.get(i + 1) == Some(&'/')) {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c == '?' {
            let start = i + 1;
            let mut j = start;
            while j < chars.len() && ident_char(chars[j]) {
                j += 1;
            }
            if j == start {
                return Err(Error::Parse { line, col, msg: "syntax error: expected a variable name after `?`".into() });
            }
            out.push(Token { tok: Tok::Var(chars[start..j].iter().collect()), line: l0, col: c0 });
            col += j - i;
            i = j;
            continue;
        }
        if ident_char(c) {
            let mut j = i;
            while j < chars.len() && ident_char(chars[j]) {
                j += 1;
            }
            let s: String = chars[i..j].iter().collect();
            let tok = if s.chars().all(|c| c.is_ascii_digit()) { Tok::Int(s) } else { Tok::Ident(s) };
            out.push(Token { tok, line: l0, col: c0 });
            col += j - i;
            i = j;
            continue;
        }
        if SYMBOLS.contains(c) {
            out.push(Token { tok: Tok::Sym(c), line: l0, col: c0 });
            i += 1;
            col += 1;
            continue;
        }
        return Err(Error::Parse { line, col, msg: format!("syntax error: unexpected character {c:?}") });
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positions_and_kinds() {
        let t = lex("recv {?x}k; # note\n  send 0;").unwrap();
        assert_eq!(t[0].tok, Tok::Ident("recv".into()));
        assert_eq!(t[2].tok, Tok::Var("x".into()));
        let send = t.iter().find(|t| t.tok == Tok::Ident("send".into())).unwrap();
        assert_eq!((send.line, send.col), (2, 3));
        assert!(t.iter().any(|t| t.tok == Tok::Int("0".into())));
    }

    #[test]
    fn bad_character() {
        let e = lex("a $").unwrap_err();
        assert_eq!(e, Error::Parse { line: 1, col: 3, msg: "syntax error: unexpected character '$'".into() });
    }
}
