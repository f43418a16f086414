//! Prefix (S-expression) text form of representing functions.
//!
//! ```text
//! repfn := "(" "fn" DIM expr+ ")"
//! expr  := "x" INDEX                              coordinate
//!        | COMPLEX                                constant: 1.5, -2, 0.5+1.2i, 2i
//!        | "(" ("add"|"sub"|"mul"|"div") expr expr ")"
//!        | "(" ("neg"|"exp"|"log") expr ")"
//!        | "(" "pow" expr COMPLEX ")"
//!        | "(" "ind" INDEX ("eq"|"ne"|"le"|"gt") REAL ")"
//!        | "(" "compose" expr expr+ ")"          outer, then inner functions
//! ```
//!
//! `le`/`gt` test `|x_i| ≤ r` / `|x_i| > r`. Inside `compose`, the outer
//! expression refers to the inner outputs as `x0, x1, …`.

use std::fmt;
use std::sync::Arc;

use super::{Expr, Node, Predicate, RepFn};
use crate::complex::{format_complex, parse_complex};
use crate::error::{Error, Result};

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Coord(i) => write!(f, "x{i}"),
            Node::Const(c) => write!(f, "{}", format_complex(*c)),
            Node::Add(a, b) => write!(f, "(add {a} {b})"),
            Node::Sub(a, b) => write!(f, "(sub {a} {b})"),
            Node::Mul(a, b) => write!(f, "(mul {a} {b})"),
            Node::Div(a, b) => write!(f, "(div {a} {b})"),
            Node::Neg(a) => write!(f, "(neg {a})"),
            Node::Exp(a) => write!(f, "(exp {a})"),
            Node::Log(a) => write!(f, "(log {a})"),
            Node::Pow(a, p) => write!(f, "(pow {a} {})", format_complex(*p)),
            Node::Indicator { coord, pred } => {
                let (op, level) = match pred {
                    Predicate::Eq(a) => ("eq", a),
                    Predicate::Ne(a) => ("ne", a),
                    Predicate::AbsLe(r) => ("le", r),
                    Predicate::AbsGt(r) => ("gt", r),
                };
                write!(f, "(ind {coord} {op} {level:?})")
            }
            Node::Compose { outer, inner } => {
                write!(f, "(compose {outer}")?;
                for e in inner.iter() {
                    write!(f, " {e}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl fmt::Display for RepFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(fn {}", self.input_dim())?;
        for e in self.outputs() {
            write!(f, " {e}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok<'a> {
    Open,
    Close,
    Atom(&'a str),
}

struct Parser<'a> {
    toks: Vec<(usize, Tok<'a>)>,
    pos: usize,
    len: usize,
}

fn tokenize(s: &str) -> Vec<(usize, Tok<'_>)> {
    let mut out = Vec::new();
    let bytes = s.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'(' => {
                out.push((i, Tok::Open));
                i += 1;
            }
            b')' => {
                out.push((i, Tok::Close));
                i += 1;
            }
            c if c.is_ascii_whitespace() => i += 1,
            _ => {
                let start = i;
                while i < bytes.len() && !bytes[i].is_ascii_whitespace() && bytes[i] != b'(' && bytes[i] != b')' {
                    i += 1;
                }
                out.push((start, Tok::Atom(&s[start..i])));
            }
        }
    }
    out
}

impl<'a> Parser<'a> {
    fn new(s: &'a str) -> Self {
        Parser {
            toks: tokenize(s),
            pos: 0,
            len: s.len(),
        }
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.len, |t| t.0)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            offset: self.offset(),
            message: message.into(),
        })
    }

    fn next(&mut self) -> Result<Tok<'a>> {
        match self.toks.get(self.pos) {
            Some((_, t)) => {
                self.pos += 1;
                Ok(t.clone())
            }
            None => self.err("unexpected end of input"),
        }
    }

    fn peek(&self) -> Option<&Tok<'a>> {
        self.toks.get(self.pos).map(|t| &t.1)
    }

    fn expect_close(&mut self) -> Result<()> {
        match self.peek() {
            Some(Tok::Close) => {
                self.pos += 1;
                Ok(())
            }
            _ => self.err("expected ')'"),
        }
    }

    fn atom(&mut self) -> Result<&'a str> {
        match self.peek() {
            Some(Tok::Atom(a)) => {
                let a = *a;
                self.pos += 1;
                Ok(a)
            }
            _ => self.err("expected an atom"),
        }
    }

    fn usize_atom(&mut self) -> Result<usize> {
        let a = self.atom()?;
        a.parse().or_else(|_| {
            self.pos -= 1;
            self.err(format!("expected a non-negative integer, got {a:?}"))
        })
    }

    fn expr(&mut self) -> Result<Expr> {
        let at = self.pos;
        match self.next()? {
            Tok::Close => {
                self.pos = at;
                self.err("unexpected ')'")
            }
            Tok::Atom(a) => {
                if let Some(idx) = a.strip_prefix('x') {
                    return idx.parse::<usize>().map(Expr::coord).or_else(|_| {
                        self.pos = at;
                        self.err(format!("bad coordinate {a:?}"))
                    });
                }
                parse_complex(a).map(Expr::constant).or_else(|_| {
                    self.pos = at;
                    self.err(format!("bad constant {a:?}"))
                })
            }
            Tok::Open => {
                let op = self.atom()?;
                let e = match op {
                    "add" | "sub" | "mul" | "div" => {
                        let a = self.expr()?;
                        let b = self.expr()?;
                        Expr::new(match op {
                            "add" => Node::Add(a, b),
                            "sub" => Node::Sub(a, b),
                            "mul" => Node::Mul(a, b),
                            _ => Node::Div(a, b),
                        })
                    }
                    "neg" => Expr::new(Node::Neg(self.expr()?)),
                    "exp" => Expr::new(Node::Exp(self.expr()?)),
                    "log" => Expr::new(Node::Log(self.expr()?)),
                    "pow" => {
                        let base = self.expr()?;
                        let a = self.atom()?;
                        let p = parse_complex(a).or_else(|_| self.err(format!("bad exponent {a:?}")))?;
                        Expr::new(Node::Pow(base, p))
                    }
                    "ind" => {
                        let coord = self.usize_atom()?;
                        let kind = self.atom()?;
                        let lv = self.atom()?;
                        let level: f64 = lv
                            .parse()
                            .or_else(|_| self.err(format!("bad indicator level {lv:?}")))?;
                        let pred = match kind {
                            "eq" => Predicate::Eq(level),
                            "ne" => Predicate::Ne(level),
                            "le" => Predicate::AbsLe(level),
                            "gt" => Predicate::AbsGt(level),
                            other => return self.err(format!("unknown predicate {other:?}")),
                        };
                        Expr::indicator(coord, pred)
                    }
                    "compose" => {
                        let outer = self.expr()?;
                        let mut inner = vec![self.expr()?];
                        while !matches!(self.peek(), Some(Tok::Close) | None) {
                            inner.push(self.expr()?);
                        }
                        Expr::new(Node::Compose {
                            outer,
                            inner: Arc::from(inner),
                        })
                    }
                    other => {
                        self.pos -= 1;
                        return self.err(format!("unknown operator {other:?}"));
                    }
                };
                self.expect_close()?;
                Ok(e)
            }
        }
    }

    fn finish(&self) -> Result<()> {
        if self.pos == self.toks.len() {
            Ok(())
        } else {
            self.err("trailing input")
        }
    }
}

/// Parses a single expression.
pub fn parse_expr(s: &str) -> Result<Expr> {
    let mut p = Parser::new(s);
    let e = p.expr()?;
    p.finish()?;
    Ok(e)
}

/// Parses a `(fn DIM expr…)` form and validates it.
pub fn parse_repfn(s: &str) -> Result<RepFn> {
    let mut p = Parser::new(s);
    match p.next()? {
        Tok::Open => {}
        _ => return p.err("expected '(fn'"),
    }
    if p.atom()? != "fn" {
        p.pos -= 1;
        return p.err("expected 'fn'");
    }
    let dim = p.usize_atom()?;
    let mut outputs = Vec::new();
    while !matches!(p.peek(), Some(Tok::Close) | None) {
        outputs.push(p.expr()?);
    }
    p.expect_close()?;
    p.finish()?;
    RepFn::new(dim, outputs)
}
