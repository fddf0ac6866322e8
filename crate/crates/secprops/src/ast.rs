// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

/// How a literal was written. Only affects printing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Radix {
    Bin,
    Dec,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Expr {
    Signal(String),
    Placeholder(String),
    /// `width` is set for sized literals such as `2'b00`.
    Lit {
        value: u64,
        width: Option<u8>,
        radix: Radix,
    },
    Eq(Box<Expr>, Box<Expr>),
    Ne(Box<Expr>, Box<Expr>),
    And(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn signal(name: impl Into<String>) -> Self {
        Expr::Signal(name.into())
    }

    pub fn placeholder(name: impl Into<String>) -> Self {
        Expr::Placeholder(name.into())
    }

    pub fn dec(value: u64) -> Self {
        Expr::Lit { value, width: None, radix: Radix::Dec }
    }

    pub fn bin(width: u8, value: u64) -> Self {
        Expr::Lit { value, width: Some(width), radix: Radix::Bin }
    }

    pub fn eq(a: Expr, b: Expr) -> Self {
        Expr::Eq(Box::new(a), Box::new(b))
    }

    pub fn ne(a: Expr, b: Expr) -> Self {
        Expr::Ne(Box::new(a), Box::new(b))
    }

    pub fn and(a: Expr, b: Expr) -> Self {
        Expr::And(Box::new(a), Box::new(b))
    }

    fn is_atom(&self) -> bool {
        matches!(self, Expr::Signal(_) | Expr::Placeholder(_) | Expr::Lit { .. })
    }

    fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Eq(a, b) | Expr::Ne(a, b) | Expr::And(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            _ => {}
        }
    }

    pub fn placeholders(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |e| {
            if let Expr::Placeholder(p) = e {
                out.insert(p.clone());
            }
        });
        out
    }

    pub fn signals(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |e| {
            if let Expr::Signal(s) = e {
                out.insert(s.clone());
            }
        });
        out
    }

    /// Replaces placeholders via `f`; unmapped ones are kept.
    pub fn substitute(&self, f: &impl Fn(&str) -> Option<Expr>) -> Expr {
        match self {
            Expr::Placeholder(p) => f(p).unwrap_or_else(|| self.clone()),
            Expr::Eq(a, b) => Expr::eq(a.substitute(f), b.substitute(f)),
            Expr::Ne(a, b) => Expr::ne(a.substitute(f), b.substitute(f)),
            Expr::And(a, b) => Expr::and(a.substitute(f), b.substitute(f)),
            _ => self.clone(),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let wrap = |f: &mut fmt::Formatter<'_>, e: &Expr, bare: bool| {
            if bare {
                write!(f, "{e}")
            } else {
                write!(f, "({e})")
            }
        };
        match self {
            Expr::Signal(s) => write!(f, "{s}"),
            Expr::Placeholder(p) => write!(f, "`{p}`"),
            Expr::Lit { value, width: Some(w), radix: Radix::Bin } => {
                write!(f, "{w}'b{value:0width$b}", width = *w as usize)
            }
            Expr::Lit { value, width: Some(w), radix: Radix::Dec } => write!(f, "{w}'d{value}"),
            Expr::Lit { value, width: None, radix: Radix::Dec } => write!(f, "{value}"),
            Expr::Lit { value, width: None, radix: Radix::Bin } => write!(f, "'b{value:b}"),
            Expr::Eq(a, b) | Expr::Ne(a, b) => {
                let op = if matches!(self, Expr::Eq(..)) { "==" } else { "!=" };
                wrap(f, a, a.is_atom())?;
                write!(f, " {op} ")?;
                wrap(f, b, b.is_atom())
            }
            Expr::And(a, b) => {
                write!(f, "{a} && ")?;
                wrap(f, b, !matches!(**b, Expr::And(..)))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum PropertyAst {
    Ift { source: Expr, tag_cond: Option<Expr>, dest: Expr, unless_cond: Option<Expr> },
    Trace { assertion: Expr, unless_cond: Option<Expr> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Ift,
    Trace,
}

impl PropertyAst {
    pub fn kind(&self) -> Kind {
        match self {
            PropertyAst::Ift { .. } => Kind::Ift,
            PropertyAst::Trace { .. } => Kind::Trace,
        }
    }

    fn exprs(&self) -> Vec<&Expr> {
        match self {
            PropertyAst::Ift { source, tag_cond, dest, unless_cond } => {
                let mut v = vec![source, dest];
                v.extend(tag_cond.iter());
                v.extend(unless_cond.iter());
                v
            }
            PropertyAst::Trace { assertion, unless_cond } => {
                let mut v = vec![assertion];
                v.extend(unless_cond.iter());
                v
            }
        }
    }

    pub fn placeholders(&self) -> BTreeSet<String> {
        self.exprs().into_iter().flat_map(|e| e.placeholders()).collect()
    }

    pub fn signals(&self) -> BTreeSet<String> {
        self.exprs().into_iter().flat_map(|e| e.signals()).collect()
    }

    pub fn substitute(&self, f: &impl Fn(&str) -> Option<Expr>) -> PropertyAst {
        let opt = |e: &Option<Expr>| e.as_ref().map(|e| e.substitute(f));
        match self {
            PropertyAst::Ift { source, tag_cond, dest, unless_cond } => PropertyAst::Ift {
                source: source.substitute(f),
                tag_cond: opt(tag_cond),
                dest: dest.substitute(f),
                unless_cond: opt(unless_cond),
            },
            PropertyAst::Trace { assertion, unless_cond } => {
                PropertyAst::Trace { assertion: assertion.substitute(f), unless_cond: opt(unless_cond) }
            }
        }
    }
}

impl fmt::Display for PropertyAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PropertyAst::Ift { source, tag_cond, dest, unless_cond } => {
                write!(f, "{source}")?;
                if let Some(c) = tag_cond {
                    write!(f, " when ({c})")?;
                }
                write!(f, " =/=> {dest}")?;
                if let Some(c) = unless_cond {
                    write!(f, " unless ({c})")?;
                }
                Ok(())
            }
            PropertyAst::Trace { assertion, unless_cond } => {
                write!(f, "{assertion}")?;
                if let Some(c) = unless_cond {
                    write!(f, " unless ({c})")?;
                }
                Ok(())
            }
        }
    }
}
