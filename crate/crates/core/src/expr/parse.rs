//! Tokenizer and recursive-descent parser.
//!
//! Grammar, loosest to tightest:
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?
//! atom    := number | identifier | function '(' sum ')' | '(' sum ')'
//! ```
//!
//! `^` binds tighter than unary minus, so `-x^2` is `-(x^2)`, and its right
//! operand is a `unary`, which makes `2^-1` legal and `^` right-associative.

use std::sync::Arc;

use super::chart::Chart;
use super::eval::{BinOp, Func, Node};
use super::ExprError;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number `{v}`"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Op(c) => format!("`{c}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        match c {
            '+' | '-' | '*' | '/' | '^' => {
                out.push((Tok::Op(c), start));
                i += 1;
            }
            '(' => {
                out.push((Tok::LParen, start));
                i += 1;
            }
            ')' => {
                out.push((Tok::RParen, start));
                i += 1;
            }
            '0'..='9' | '.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text = &src[start..i];
                let value: f64 = text.parse().map_err(|_| ExprError::Syntax {
                    pos: start,
                    message: format!("malformed number `{text}`"),
                })?;
                out.push((Tok::Num(value), start));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(src[start..i].to_string()), start));
            }
            other => {
                return Err(ExprError::Syntax {
                    pos: start,
                    message: format!("unexpected character `{other}`"),
                })
            }
        }
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    at: usize,
    chart: &'a Chart,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn unexpected(&self, wanted: &str) -> ExprError {
        ExprError::Syntax {
            pos: self.pos(),
            message: format!("expected {wanted}, found {}", self.peek().describe()),
        }
    }

    fn sum(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.product()?;
        while let Tok::Op(c @ ('+' | '-')) = *self.peek() {
            self.bump();
            let rhs = self.product()?;
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Node::Binary(op, Arc::new(lhs), Arc::new(rhs));
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        while let Tok::Op(c @ ('*' | '/')) = *self.peek() {
            self.bump();
            let rhs = self.unary()?;
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Node::Binary(op, Arc::new(lhs), Arc::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        if *self.peek() == Tok::Op('-') {
            self.bump();
            let inner = self.unary()?;
            return Ok(Node::Neg(Arc::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.atom()?;
        if *self.peek() == Tok::Op('^') {
            self.bump();
            let exponent = self.unary()?;
            return Ok(Node::Binary(BinOp::Pow, Arc::new(base), Arc::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Node::Const(v))
            }
            Tok::Ident(name) => {
                self.bump();
                if let Some(func) = Func::from_name(&name) {
                    if *self.peek() != Tok::LParen {
                        return Err(self.unexpected(&format!("`(` after `{name}`")));
                    }
                    self.bump();
                    let arg = self.sum()?;
                    self.expect_rparen()?;
                    return Ok(Node::Call(func, Arc::new(arg)));
                }
                match self.chart.slot(&name) {
                    Some(slot) => Ok(Node::Var(slot)),
                    None => Err(ExprError::UnknownIdentifier { name, pos }),
                }
            }
            Tok::LParen => {
                self.bump();
                let inner = self.sum()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            _ => Err(self.unexpected("a number, name or `(`")),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ExprError> {
        if *self.peek() == Tok::RParen {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected("`)`"))
        }
    }
}

pub(crate) fn parse_node(src: &str, chart: &Chart) -> Result<Node, ExprError> {
    if src.trim().is_empty() {
        return Err(ExprError::Syntax {
            pos: 0,
            message: "empty expression".into(),
        });
    }
    let toks = tokenize(src)?;
    let mut parser = Parser { toks, at: 0, chart };
    let node = parser.sum()?;
    if *parser.peek() != Tok::End {
        return Err(parser.unexpected("an operator or end of input"));
    }
    Ok(node)
}
