use num_bigint::BigInt;

use crate::probcore::Rational;

use super::LangError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(BigInt),
    /// Exact value of a literal such as `0.25`.
    Dec(Rational),
    Kw(&'static str),
    Punct(&'static str),
    Eof,
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

const KEYWORDS: &[&str] = &[
    "vis", "hid", "skip", "if", "then", "else", "fi", "reveal", "atomic", "local", "in", "uniform",
    "div", "mod", "and", "or", "xor", "not", "true", "false",
];

// Longest first so that prefixes do not shadow.
const PUNCTS: &[&str] = &[
    ":=", "<-", "..", "<=", ">=", "!=", "==", ";", "[", "]", "{", "}", "(", ")", ",", "@", ":", "+",
    "-", "*", "/", "=", "<", ">",
];

pub fn lex(src: &str) -> Result<Vec<Token>, LangError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
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
            }
            continue;
        }
        let (tl, tc) = (line, col);
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let whole: String = chars[start..i].iter().collect();
            let tok = if chars.get(i) == Some(&'.') && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()) {
                let fstart = i + 1;
                i = fstart;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let frac: String = chars[fstart..i].iter().collect();
                let numer: BigInt = format!("{whole}{frac}").parse().unwrap();
                Tok::Dec(Rational::new(numer, num_traits::pow(BigInt::from(10), frac.len())))
            } else {
                Tok::Int(whole.parse().unwrap())
            };
            col += i - start;
            out.push(Token { tok, line: tl, col: tc });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '\'') {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            col += i - start;
            let tok = match KEYWORDS.iter().find(|k| **k == text) {
                Some(k) => Tok::Kw(k),
                None => Tok::Ident(text),
            };
            out.push(Token { tok, line: tl, col: tc });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match PUNCTS.iter().find(|p| rest.starts_with(**p)) {
            Some(p) => {
                let p: &'static str = if *p == "==" { "=" } else { p };
                let len = if p == "=" && rest.starts_with("==") { 2 } else { p.len() };
                i += len;
                col += len;
                out.push(Token { tok: Tok::Punct(p), line: tl, col: tc });
            }
            None => {
                return Err(LangError::Syntax {
                    line: tl,
                    col: tc,
                    msg: format!("unexpected character '{c}'"),
                })
            }
        }
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexes_statement() {
        let toks = lex("h <- uniform{0..2}; // c\nv := h mod 2").unwrap();
        let kinds: Vec<Tok> = toks.into_iter().map(|t| t.tok).collect();
        assert_eq!(kinds[0], Tok::Ident("h".into()));
        assert_eq!(kinds[1], Tok::Punct("<-"));
        assert_eq!(kinds[2], Tok::Kw("uniform"));
        assert_eq!(kinds[5], Tok::Punct(".."));
        assert_eq!(kinds[8], Tok::Punct(";"));
        assert_eq!(*kinds.last().unwrap(), Tok::Eof);
    }

    #[test]
    fn decimals_are_exact() {
        let toks = lex("0.25 1..2").unwrap();
        assert_eq!(toks[0].tok, Tok::Dec(Rational::new(1.into(), 4.into())));
        assert_eq!(toks[1].tok, Tok::Int(1.into()));
        assert_eq!(toks[2].tok, Tok::Punct(".."));
    }

    #[test]
    fn reports_position() {
        match lex("skip;\n  $") {
            Err(LangError::Syntax { line, col, .. }) => assert_eq!((line, col), (2, 3)),
            other => panic!("{other:?}"),
        }
    }
}
