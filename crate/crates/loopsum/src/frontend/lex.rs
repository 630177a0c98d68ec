//! Tokenizer. Comments are skipped except `// input ...` and
//! `// bitwidth ...` pragmas, which are collected for the parser.

use super::ast::{InputDecl, Span};
use super::diag::{Diagnostic, ParseError, RejectTag};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Int(i128),
    Ident(String),
    KwProc,
    KwWhile,
    KwIf,
    KwElse,
    KwAssert,
    KwBreak,
    KwNondet,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Semi,
    Assign,
    PlusAssign,
    MinusAssign,
    StarAssign,
    SlashAssign,
    PercentAssign,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    Lt,
    Le,
    Gt,
    Ge,
    EqEq,
    Ne,
    AndAnd,
    OrOr,
    Bang,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Int(v) => format!("integer `{v}`"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Eof => "end of file".to_string(),
            t => format!("`{}`", t.text()),
        }
    }

    fn text(&self) -> &'static str {
        match self {
            Tok::KwProc => "proc",
            Tok::KwWhile => "while",
            Tok::KwIf => "if",
            Tok::KwElse => "else",
            Tok::KwAssert => "assert",
            Tok::KwBreak => "break",
            Tok::KwNondet => "nondet",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::Semi => ";",
            Tok::Assign => "=",
            Tok::PlusAssign => "+=",
            Tok::MinusAssign => "-=",
            Tok::StarAssign => "*=",
            Tok::SlashAssign => "/=",
            Tok::PercentAssign => "%=",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Slash => "/",
            Tok::Percent => "%",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::EqEq => "==",
            Tok::Ne => "!=",
            Tok::AndAnd => "&&",
            Tok::OrOr => "||",
            Tok::Bang => "!",
            Tok::Int(_) | Tok::Ident(_) | Tok::Eof => unreachable!(),
        }
    }
}

#[derive(Debug)]
pub struct Lexed {
    pub tokens: Vec<(Tok, Span)>,
    pub inputs: Vec<InputDecl>,
    pub bitwidth: Option<u32>,
}

struct Cursor<'a> {
    src: &'a [u8],
    pos: usize,
    line: u32,
    col: u32,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn peek2(&self) -> Option<u8> {
        self.src.get(self.pos + 1).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn span_from(&self, start: (usize, u32, u32)) -> Span {
        Span {
            start: start.0,
            end: self.pos,
            line: start.1,
            col: start.2,
        }
    }

    fn mark(&self) -> (usize, u32, u32) {
        (self.pos, self.line, self.col)
    }
}

pub fn lex(src: &str) -> Result<Lexed, ParseError> {
    let mut cur = Cursor {
        src: src.as_bytes(),
        pos: 0,
        line: 1,
        col: 1,
    };
    let mut tokens = Vec::new();
    let mut inputs = Vec::new();
    let mut bitwidth = None;

    loop {
        let mark = cur.mark();
        let Some(c) = cur.peek() else {
            tokens.push((Tok::Eof, cur.span_from(mark)));
            break;
        };
        match c {
            b' ' | b'\t' | b'\r' | b'\n' => {
                cur.bump();
            }
            b'/' if cur.peek2() == Some(b'/') => {
                let start = cur.pos;
                while cur.peek().is_some_and(|c| c != b'\n') {
                    cur.bump();
                }
                let comment = &src[start + 2..cur.pos];
                parse_pragma(
                    comment,
                    cur.span_from(mark),
                    &mut inputs,
                    &mut bitwidth,
                )?;
            }
            b'0'..=b'9' => {
                let start = cur.pos;
                while cur.peek().is_some_and(|c| c.is_ascii_digit()) {
                    cur.bump();
                }
                if cur.peek() == Some(b'.') {
                    return Err(ParseError::one(Diagnostic::tagged(
                        cur.span_from(mark),
                        RejectTag::RealType,
                        "floating-point literals are not supported; only integers",
                    )));
                }
                let text = &src[start..cur.pos];
                let value: i128 = text.parse().map_err(|_| {
                    ParseError::one(Diagnostic::error(
                        cur.span_from(mark),
                        format!("integer literal `{text}` out of range"),
                    ))
                })?;
                tokens.push((Tok::Int(value), cur.span_from(mark)));
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let start = cur.pos;
                while cur
                    .peek()
                    .is_some_and(|c| c.is_ascii_alphanumeric() || c == b'_')
                {
                    cur.bump();
                }
                let word = &src[start..cur.pos];
                let span = cur.span_from(mark);
                let tok = match word {
                    "proc" => Tok::KwProc,
                    "while" => Tok::KwWhile,
                    "if" => Tok::KwIf,
                    "else" => Tok::KwElse,
                    "assert" => Tok::KwAssert,
                    "break" => Tok::KwBreak,
                    "nondet" => Tok::KwNondet,
                    "float" | "double" => {
                        return Err(ParseError::one(Diagnostic::tagged(
                            span,
                            RejectTag::RealType,
                            format!("real-typed declarations (`{word}`) are not supported"),
                        )))
                    }
                    _ if word.starts_with("__") => {
                        return Err(ParseError::one(Diagnostic::error(
                            span,
                            format!("identifier `{word}` uses the reserved `__` prefix"),
                        )))
                    }
                    _ => Tok::Ident(word.to_string()),
                };
                tokens.push((tok, span));
            }
            b'[' | b']' => {
                return Err(ParseError::one(Diagnostic::tagged(
                    cur.span_from(mark),
                    RejectTag::MemoryOp,
                    "array indexing is a memory operation outside the fragment",
                )));
            }
            b'&' if cur.peek2() == Some(b'&') => {
                cur.bump();
                cur.bump();
                tokens.push((Tok::AndAnd, cur.span_from(mark)));
            }
            b'&' => {
                return Err(ParseError::one(Diagnostic::tagged(
                    cur.span_from(mark),
                    RejectTag::MemoryOp,
                    "address-of is a memory operation outside the fragment",
                )));
            }
            b'|' if cur.peek2() == Some(b'|') => {
                cur.bump();
                cur.bump();
                tokens.push((Tok::OrOr, cur.span_from(mark)));
            }
            _ => {
                let two = |a: &mut Cursor, t: Tok, toks: &mut Vec<(Tok, Span)>| {
                    a.bump();
                    a.bump();
                    toks.push((t, a.span_from(mark)));
                };
                let one = |a: &mut Cursor, t: Tok, toks: &mut Vec<(Tok, Span)>| {
                    a.bump();
                    toks.push((t, a.span_from(mark)));
                };
                match (c, cur.peek2()) {
                    (b'+', Some(b'=')) => two(&mut cur, Tok::PlusAssign, &mut tokens),
                    (b'-', Some(b'=')) => two(&mut cur, Tok::MinusAssign, &mut tokens),
                    (b'*', Some(b'=')) => two(&mut cur, Tok::StarAssign, &mut tokens),
                    (b'/', Some(b'=')) => two(&mut cur, Tok::SlashAssign, &mut tokens),
                    (b'%', Some(b'=')) => two(&mut cur, Tok::PercentAssign, &mut tokens),
                    (b'<', Some(b'=')) => two(&mut cur, Tok::Le, &mut tokens),
                    (b'>', Some(b'=')) => two(&mut cur, Tok::Ge, &mut tokens),
                    (b'=', Some(b'=')) => two(&mut cur, Tok::EqEq, &mut tokens),
                    (b'!', Some(b'=')) => two(&mut cur, Tok::Ne, &mut tokens),
                    (b'+', _) => one(&mut cur, Tok::Plus, &mut tokens),
                    (b'-', _) => one(&mut cur, Tok::Minus, &mut tokens),
                    (b'*', _) => one(&mut cur, Tok::Star, &mut tokens),
                    (b'/', _) => one(&mut cur, Tok::Slash, &mut tokens),
                    (b'%', _) => one(&mut cur, Tok::Percent, &mut tokens),
                    (b'<', _) => one(&mut cur, Tok::Lt, &mut tokens),
                    (b'>', _) => one(&mut cur, Tok::Gt, &mut tokens),
                    (b'!', _) => one(&mut cur, Tok::Bang, &mut tokens),
                    (b'(', _) => one(&mut cur, Tok::LParen, &mut tokens),
                    (b')', _) => one(&mut cur, Tok::RParen, &mut tokens),
                    (b'{', _) => one(&mut cur, Tok::LBrace, &mut tokens),
                    (b'}', _) => one(&mut cur, Tok::RBrace, &mut tokens),
                    (b';', _) => one(&mut cur, Tok::Semi, &mut tokens),
                    (b'=', _) => one(&mut cur, Tok::Assign, &mut tokens),
                    (b'.', _) => {
                        return Err(ParseError::one(Diagnostic::tagged(
                            cur.span_from(mark),
                            RejectTag::RealType,
                            "`.` only occurs in floating-point syntax, which is not supported",
                        )))
                    }
                    _ => {
                        return Err(ParseError::one(Diagnostic::error(
                            cur.span_from(mark),
                            format!("unexpected character `{}`", c as char),
                        )))
                    }
                }
            }
        }
    }
    Ok(Lexed {
        tokens,
        inputs,
        bitwidth,
    })
}

/// `// input x`, `// input x in [lo, hi]`, `// bitwidth 8`. Any other
/// comment is ignored. A malformed input pragma is an error: silently
/// dropping it would change which variables count as externally chosen.
fn parse_pragma(
    comment: &str,
    span: Span,
    inputs: &mut Vec<InputDecl>,
    bitwidth: &mut Option<u32>,
) -> Result<(), ParseError> {
    let words: Vec<&str> = comment.split_whitespace().collect();
    match words.first() {
        Some(&"input") => {}
        Some(&"bitwidth") => {
            let w: u32 = words
                .get(1)
                .and_then(|s| s.parse().ok())
                .filter(|w| (1..=64).contains(w))
                .ok_or_else(|| {
                    ParseError::one(Diagnostic::error(
                        span,
                        "bitwidth pragma expects `// bitwidth w` with 1 <= w <= 64",
                    ))
                })?;
            *bitwidth = Some(w);
            return Ok(());
        }
        _ => return Ok(()),
    }
    let bad = || {
        ParseError::one(Diagnostic::error(
            span,
            "input pragma expects `// input x` or `// input x in [lo, hi]`",
        ))
    };
    let name = words.get(1).ok_or_else(bad)?;
    if !name
        .chars()
        .all(|c| c.is_ascii_alphanumeric() || c == '_')
        || name.starts_with(|c: char| c.is_ascii_digit())
        || name.starts_with("__")
    {
        return Err(bad());
    }
    let domain = match words.get(2) {
        None => None,
        Some(&"in") => {
            // Re-join so `[lo, hi]`, `[lo,hi]` and `[ lo , hi ]` all parse.
            let rest: String = words[3..].concat();
            let inner = rest
                .strip_prefix('[')
                .and_then(|r| r.strip_suffix(']'))
                .ok_or_else(bad)?;
            let (lo, hi) = inner.split_once(',').ok_or_else(bad)?;
            let lo: i128 = lo.trim().parse().map_err(|_| bad())?;
            let hi: i128 = hi.trim().parse().map_err(|_| bad())?;
            if lo > hi {
                return Err(bad());
            }
            Some((lo, hi))
        }
        Some(_) => return Err(bad()),
    };
    inputs.push(InputDecl {
        name: name.to_string(),
        domain,
        span,
    });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_tokens() {
        let lexed = lex("while (x <= 10) { x += 1; }").unwrap();
        let kinds: Vec<Tok> = lexed.tokens.into_iter().map(|(t, _)| t).collect();
        assert_eq!(
            kinds,
            vec![
                Tok::KwWhile,
                Tok::LParen,
                Tok::Ident("x".into()),
                Tok::Le,
                Tok::Int(10),
                Tok::RParen,
                Tok::LBrace,
                Tok::Ident("x".into()),
                Tok::PlusAssign,
                Tok::Int(1),
                Tok::Semi,
                Tok::RBrace,
                Tok::Eof,
            ]
        );
    }

    #[test]
    fn pragmas_collected() {
        let lexed = lex("// input x in [-5, 5]\n// input n\n// a plain comment\nproc p { }").unwrap();
        assert_eq!(lexed.inputs.len(), 2);
        assert_eq!(lexed.inputs[0].name, "x");
        assert_eq!(lexed.inputs[0].domain, Some((-5, 5)));
        assert_eq!(lexed.inputs[1].domain, None);
    }

    #[test]
    fn float_literal_rejected_with_tag() {
        let err = lex("x = 1.5;").unwrap_err();
        assert_eq!(err.tag(), Some(RejectTag::RealType));
    }

    #[test]
    fn array_rejected_with_tag() {
        let err = lex("a[0] = 1;").unwrap_err();
        assert_eq!(err.tag(), Some(RejectTag::MemoryOp));
    }

    #[test]
    fn reserved_prefix_rejected() {
        assert!(lex("__tmp = 1;").is_err());
    }
}
