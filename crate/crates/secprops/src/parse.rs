// SPDX-License-Identifier: Apache-2.0

//! Lexer and recursive-descent parser for the property language.
//!
//! ```text
//! ift   := expr [ "when" "(" cond ")" ] "=/=>" expr [ "unless" "(" cond ")" ]
//! trace := cond [ "unless" "(" cond ")" ]
//! cond  := cmp { "&&" cmp }
//! cmp   := atom [ ("==" | "!=") atom ]
//! atom  := signal | `placeholder` | literal | "(" cond ")"
//! ```

use crate::ast::{Expr, PropertyAst, Radix};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseErrorKind {
    #[error("unexpected {found}, expected {expected}")]
    Unexpected { found: String, expected: String },
    #[error("unknown operator `{0}`")]
    UnknownOperator(String),
    #[error("malformed sized literal `{0}`")]
    MalformedLiteral(String),
    #[error("unterminated placeholder")]
    UnterminatedPlaceholder,
    #[error("unexpected character `{0}`")]
    BadChar(char),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{col}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Placeholder(String),
    Lit(Expr),
    EqEq,
    NotEq,
    AndAnd,
    LParen,
    RParen,
    When,
    Unless,
    NoFlow,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Placeholder(s) => format!("`{s}`"),
            Tok::Lit(e) => format!("literal {e}"),
            Tok::EqEq => "`==`".into(),
            Tok::NotEq => "`!=`".into(),
            Tok::AndAnd => "`&&`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::When => "`when`".into(),
            Tok::Unless => "`unless`".into(),
            Tok::NoFlow => "`=/=>`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

const OP_CHARS: &str = "=!<>|&+-*/^~%:?";

struct Lexer {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    col: usize,
}

impl Lexer {
    fn new(src: &str, line: usize, col: usize) -> Self {
        Self { chars: src.chars().collect(), pos: 0, line, col }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn err(&self, line: usize, col: usize, kind: ParseErrorKind) -> ParseError {
        ParseError { line, col, kind }
    }

    fn tokens(mut self) -> Result<Vec<Spanned>, ParseError> {
        let mut out = Vec::new();
        loop {
            while self.peek().is_some_and(char::is_whitespace) {
                self.bump();
            }
            let (line, col) = (self.line, self.col);
            let Some(c) = self.peek() else {
                out.push(Spanned { tok: Tok::Eof, line, col });
                return Ok(out);
            };
            let tok = if c == '(' {
                self.bump();
                Tok::LParen
            } else if c == ')' {
                self.bump();
                Tok::RParen
            } else if c == '`' {
                self.bump();
                let mut name = String::new();
                loop {
                    match self.bump() {
                        Some('`') => break,
                        Some('\n') | None => return Err(self.err(line, col, ParseErrorKind::UnterminatedPlaceholder)),
                        Some(ch) => name.push(ch),
                    }
                }
                Tok::Placeholder(name)
            } else if c.is_ascii_digit() || c == '\'' {
                self.literal(line, col)?
            } else if c.is_ascii_alphabetic() || c == '_' {
                let mut s = String::new();
                while let Some(ch) = self.peek() {
                    if ch.is_ascii_alphanumeric() || ch == '_' || ch == '.' || ch == '$' {
                        s.push(ch);
                        self.bump();
                    } else if ch == '[' {
                        while let Some(b) = self.bump() {
                            s.push(b);
                            if b == ']' {
                                break;
                            }
                        }
                    } else {
                        break;
                    }
                }
                match s.as_str() {
                    "when" => Tok::When,
                    "unless" => Tok::Unless,
                    _ => Tok::Ident(s),
                }
            } else if OP_CHARS.contains(c) {
                let mut op = String::new();
                while let Some(ch) = self.peek().filter(|&ch| OP_CHARS.contains(ch)) {
                    op.push(ch);
                    self.bump();
                }
                match op.as_str() {
                    "==" => Tok::EqEq,
                    "!=" => Tok::NotEq,
                    "&&" => Tok::AndAnd,
                    "=/=>" => Tok::NoFlow,
                    _ => return Err(self.err(line, col, ParseErrorKind::UnknownOperator(op))),
                }
            } else {
                return Err(self.err(line, col, ParseErrorKind::BadChar(c)));
            };
            out.push(Spanned { tok, line, col });
        }
    }

    fn literal(&mut self, line: usize, col: usize) -> Result<Tok, ParseError> {
        let mut text = String::new();
        while let Some(ch) = self.peek().filter(|ch| ch.is_ascii_alphanumeric() || *ch == '\'' || *ch == '_') {
            text.push(ch);
            self.bump();
        }
        let bad = || ParseError { line, col, kind: ParseErrorKind::MalformedLiteral(text.clone()) };
        let Some((w, rest)) = text.split_once('\'') else {
            let v = text.replace('_', "").parse::<u64>().map_err(|_| bad())?;
            return Ok(Tok::Lit(Expr::dec(v)));
        };
        let width = if w.is_empty() {
            None
        } else {
            match w.parse::<u8>() {
                Ok(n) if (1..=64).contains(&n) => Some(n),
                _ => return Err(bad()),
            }
        };
        let mut it = rest.chars();
        let (radix, base) = match it.next() {
            Some('b' | 'B') => (Radix::Bin, 2),
            Some('d' | 'D') => (Radix::Dec, 10),
            _ => return Err(bad()),
        };
        let digits: String = it.filter(|&c| c != '_').collect();
        if digits.is_empty() {
            return Err(bad());
        }
        let value = u64::from_str_radix(&digits, base).map_err(|_| bad())?;
        if let Some(n) = width {
            if n < 64 && value >> n != 0 {
                return Err(bad());
            }
        }
        if width.is_none() && radix == Radix::Dec {
            return Err(bad());
        }
        Ok(Tok::Lit(Expr::Lit { value, width, radix }))
    }
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn next(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, expected: &str) -> ParseError {
        let t = &self.toks[self.pos];
        ParseError {
            line: t.line,
            col: t.col,
            kind: ParseErrorKind::Unexpected { found: t.tok.describe(), expected: expected.into() },
        }
    }

    fn expect(&mut self, tok: Tok, expected: &str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.next();
            Ok(())
        } else {
            Err(self.unexpected(expected))
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.next();
                Ok(Expr::Signal(s))
            }
            Tok::Placeholder(p) => {
                self.next();
                Ok(Expr::Placeholder(p))
            }
            Tok::Lit(e) => {
                self.next();
                Ok(e)
            }
            Tok::LParen => {
                self.next();
                let e = self.cond()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            _ => Err(self.unexpected("a signal, placeholder, literal or `(`")),
        }
    }

    fn cmp(&mut self) -> Result<Expr, ParseError> {
        let a = self.atom()?;
        match self.peek() {
            Tok::EqEq => {
                self.next();
                Ok(Expr::eq(a, self.atom()?))
            }
            Tok::NotEq => {
                self.next();
                Ok(Expr::ne(a, self.atom()?))
            }
            _ => Ok(a),
        }
    }

    fn cond(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.cmp()?;
        while *self.peek() == Tok::AndAnd {
            self.next();
            e = Expr::and(e, self.cmp()?);
        }
        Ok(e)
    }

    fn clause(&mut self, kw: Tok) -> Result<Option<Expr>, ParseError> {
        if *self.peek() != kw {
            return Ok(None);
        }
        self.next();
        self.expect(Tok::LParen, "`(`")?;
        let c = self.cond()?;
        self.expect(Tok::RParen, "`)`")?;
        Ok(Some(c))
    }

    fn property(&mut self) -> Result<PropertyAst, ParseError> {
        let head = self.cond()?;
        let ast = if matches!(self.peek(), Tok::When | Tok::NoFlow) {
            let tag_cond = self.clause(Tok::When)?;
            self.expect(Tok::NoFlow, "`=/=>`")?;
            let dest = self.cond()?;
            let unless_cond = self.clause(Tok::Unless)?;
            PropertyAst::Ift { source: head, tag_cond, dest, unless_cond }
        } else {
            let unless_cond = self.clause(Tok::Unless)?;
            PropertyAst::Trace { assertion: head, unless_cond }
        };
        if *self.peek() != Tok::Eof {
            return Err(self.unexpected("end of property"));
        }
        Ok(ast)
    }
}

pub fn parse_property(text: &str) -> Result<PropertyAst, ParseError> {
    parse_property_at(text, 1, 1)
}

/// Parses `text` with positions offset to where it starts in a larger file.
pub fn parse_property_at(text: &str, line: usize, col: usize) -> Result<PropertyAst, ParseError> {
    let toks = Lexer::new(text, line, col).tokens()?;
    Parser { toks, pos: 0 }.property()
}

/// Parses a single operand, as used for binding values.
pub fn parse_atom(text: &str) -> Result<Expr, ParseError> {
    let toks = Lexer::new(text, 1, 1).tokens()?;
    let mut p = Parser { toks, pos: 0 };
    let e = p.atom()?;
    if *p.peek() != Tok::Eof {
        return Err(p.unexpected("end of value"));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reset_flow_template() {
        let p = parse_property("`signal_from_C` when (ARESETN == 0) =/=> `signal_to_P`").unwrap();
        assert_eq!(
            p,
            PropertyAst::Ift {
                source: Expr::placeholder("signal_from_C"),
                tag_cond: Some(Expr::eq(Expr::signal("ARESETN"), Expr::dec(0))),
                dest: Expr::placeholder("signal_to_P"),
                unless_cond: None,
            }
        );
    }

    #[test]
    fn interrupt_trace_template() {
        let p = parse_property("`INTR_LINE_W` == 1 unless (`acw_w_state` != 2'b10)").unwrap();
        assert_eq!(
            p,
            PropertyAst::Trace {
                assertion: Expr::eq(Expr::placeholder("INTR_LINE_W"), Expr::dec(1)),
                unless_cond: Some(Expr::ne(Expr::placeholder("acw_w_state"), Expr::bin(2, 2))),
            }
        );
    }

    #[test]
    fn always_tagged_source() {
        let p = parse_property("`sig_from_C` =/=> `unauthorized`").unwrap();
        assert!(matches!(p, PropertyAst::Ift { tag_cond: None, unless_cond: None, .. }));
    }

    #[test]
    fn slash_in_placeholder_and_conjunction() {
        let p = parse_property("`reg` == `dflt` unless (ARESETN != 0 && `acw_w/r_state` != 2'b00)").unwrap();
        let PropertyAst::Trace { unless_cond: Some(Expr::And(_, b)), .. } = p else { panic!() };
        assert_eq!(*b, Expr::ne(Expr::placeholder("acw_w/r_state"), Expr::bin(2, 0)));
    }

    #[test]
    fn indexed_signal_names() {
        let p = parse_property("c1.m.WDATA =/=> p3.word[0x3010]").unwrap();
        assert_eq!(p.signals().into_iter().collect::<Vec<_>>(), ["c1.m.WDATA", "p3.word[0x3010]"]);
    }

    #[test]
    fn errors_carry_positions() {
        let e = parse_property("a ||\n b").unwrap_err();
        assert_eq!((e.line, e.col), (1, 3));
        assert_eq!(e.kind, ParseErrorKind::UnknownOperator("||".into()));

        let e = parse_property("x == 2'b102").unwrap_err();
        assert_eq!((e.line, e.col), (1, 6));
        assert!(matches!(e.kind, ParseErrorKind::MalformedLiteral(_)));

        let e = parse_property("x == 2'b111").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::MalformedLiteral(_)));

        let e = parse_property("a =/=> b\n  unless (c ==)").unwrap_err();
        assert_eq!((e.line, e.col), (2, 15));

        assert!(matches!(parse_property("a => b").unwrap_err().kind, ParseErrorKind::UnknownOperator(_)));
        assert!(matches!(parse_property("x == 0'b0").unwrap_err().kind, ParseErrorKind::MalformedLiteral(_)));
        assert!(matches!(parse_property("`open").unwrap_err().kind, ParseErrorKind::UnterminatedPlaceholder));
        assert!(parse_property("a when (b) c").is_err());
        assert!(parse_property("a b").is_err());
        assert!(parse_property("").is_err());
    }

    #[test]
    fn printed_form() {
        let src = "`s` when (ARESETN == 0 && (a == b) != c) =/=> `d` unless (x != 2'b01)";
        let p = parse_property(src).unwrap();
        assert_eq!(p.to_string(), src);
        assert_eq!(parse_property("x == 4'd9").unwrap().to_string(), "x == 4'd9");
        assert_eq!(parse_property("x == 2'b0").unwrap().to_string(), "x == 2'b00");
    }
}
