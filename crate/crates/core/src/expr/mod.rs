//! Scalar expressions over a Darboux chart.
//!
//! An [`Expression`] is parsed against a [`Chart`], which fixes the names it
//! may mention, and is evaluated at a [`Bindings`] point. First partials are
//! exact: the tree is evaluated over dual numbers. Trees built by the
//! geometric operators may also contain partial-derivative and composition
//! nodes; those evaluate through nested duals, up to second order overall.

mod chart;
mod dual;
mod eval;
mod parse;

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub use chart::{momentum_name, Chart, ACTION};
use dual::Scalar;
use eval::{eval_node, BinOp, Node};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at position {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("unknown identifier `{name}` at position {pos}")]
    UnknownIdentifier { name: String, pos: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("no binding for `{0}`")]
    MissingBinding(String),
    #[error("invalid chart: {0}")]
    InvalidChart(String),
    #[error("expression and bindings belong to different charts")]
    ChartMismatch,
    #[error("derivatives beyond second order are not supported")]
    DerivativeOrder,
}

/// Values for the names of a chart. Evaluating an expression that mentions an
/// unbound name is an error.
#[derive(Debug, Clone, PartialEq)]
pub struct Bindings {
    chart: Arc<Chart>,
    values: Vec<f64>,
    bound: Vec<bool>,
}

impl Bindings {
    pub fn new(chart: Arc<Chart>) -> Self {
        let n = chart.slot_count();
        Bindings {
            chart,
            values: vec![0.0; n],
            bound: vec![false; n],
        }
    }

    /// Fully bound point from values in slot order.
    pub fn from_slots(chart: Arc<Chart>, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), chart.slot_count(), "slot vector has wrong length");
        let bound = vec![true; values.len()];
        Bindings { chart, values, bound }
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<&mut Self, ExprError> {
        let slot = self.chart.slot(name).ok_or_else(|| ExprError::UnknownIdentifier {
            name: name.to_string(),
            pos: 0,
        })?;
        self.set_slot(slot, value);
        Ok(self)
    }

    pub fn with(mut self, name: &str, value: f64) -> Result<Self, ExprError> {
        self.set(name, value)?;
        Ok(self)
    }

    pub fn set_slot(&mut self, slot: usize, value: f64) {
        self.values[slot] = value;
        self.bound[slot] = true;
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        let slot = self.chart.slot(name)?;
        self.bound[slot].then(|| self.values[slot])
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Immutable scalar field on a chart.
#[derive(Clone)]
pub struct Expression {
    root: Arc<Node>,
    chart: Arc<Chart>,
    slots: Arc<[usize]>,
}

impl fmt::Debug for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expression({self})")
    }
}

impl Expression {
    /// Parse `source`, resolving every identifier against `chart`.
    pub fn parse(source: &str, chart: &Arc<Chart>) -> Result<Self, ExprError> {
        let node = parse::parse_node(source, chart)?;
        Ok(Self::from_node(node, chart.clone()))
    }

    fn from_node(node: Node, chart: Arc<Chart>) -> Self {
        let mut slots = Vec::new();
        node.visit_slots(&mut slots);
        let slots: BTreeSet<usize> = slots.into_iter().collect();
        Expression {
            root: Arc::new(node),
            chart,
            slots: slots.into_iter().collect(),
        }
    }

    pub fn constant(chart: &Arc<Chart>, value: f64) -> Self {
        Self::from_node(Node::Const(value), chart.clone())
    }

    pub fn zero(chart: &Arc<Chart>) -> Self {
        Self::constant(chart, 0.0)
    }

    pub fn slot(chart: &Arc<Chart>, slot: usize) -> Self {
        assert!(slot < chart.slot_count(), "slot {slot} out of range");
        Self::from_node(Node::Var(slot), chart.clone())
    }

    pub fn variable(chart: &Arc<Chart>, name: &str) -> Result<Self, ExprError> {
        let slot = chart.slot(name).ok_or_else(|| ExprError::UnknownIdentifier {
            name: name.to_string(),
            pos: 0,
        })?;
        Ok(Self::slot(chart, slot))
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    /// Names this expression reads from its bindings.
    pub fn referenced_names(&self) -> Vec<&str> {
        self.slots.iter().map(|&k| self.chart.name(k)).collect()
    }

    pub fn depends_on_slot(&self, slot: usize) -> bool {
        self.slots.binary_search(&slot).is_ok()
    }

    pub fn as_constant(&self) -> Option<f64> {
        match *self.root {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    fn check(&self, b: &Bindings) -> Result<(), ExprError> {
        if !Arc::ptr_eq(&self.chart, &b.chart) && *self.chart != *b.chart {
            return Err(ExprError::ChartMismatch);
        }
        for &k in self.slots.iter() {
            if !b.bound[k] {
                return Err(ExprError::MissingBinding(self.chart.name(k).to_string()));
            }
        }
        Ok(())
    }

    pub fn evaluate(&self, b: &Bindings) -> Result<f64, ExprError> {
        self.check(b)?;
        eval_node(&self.root, &b.values)
    }

    /// Exact partial derivative with respect to a named variable.
    pub fn differentiate(&self, var: &str, b: &Bindings) -> Result<f64, ExprError> {
        let slot = self.chart.slot(var).ok_or_else(|| ExprError::UnknownIdentifier {
            name: var.to_string(),
            pos: 0,
        })?;
        if !b.bound[slot] {
            return Err(ExprError::MissingBinding(var.to_string()));
        }
        self.differentiate_slot(slot, b)
    }

    pub fn differentiate_slot(&self, slot: usize, b: &Bindings) -> Result<f64, ExprError> {
        self.check(b)?;
        if !self.depends_on_slot(slot) {
            return Ok(0.0);
        }
        f64::partial(&self.root, &b.values, slot)
    }

    /// Value and partials with respect to the `2n + 1` chart coordinates.
    pub fn value_and_gradient(&self, b: &Bindings) -> Result<(f64, Vec<f64>), ExprError> {
        let value = self.evaluate(b)?;
        let grad = (0..self.chart.manifold_dim())
            .map(|k| {
                if self.depends_on_slot(k) {
                    f64::partial(&self.root, &b.values, k)
                } else {
                    Ok(0.0)
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok((value, grad))
    }

    fn same_chart(&self, other: &Expression) {
        assert!(
            Arc::ptr_eq(&self.chart, &other.chart) || *self.chart == *other.chart,
            "expressions from different charts cannot be combined"
        );
    }

    fn binary(&self, op: BinOp, other: &Expression) -> Expression {
        self.same_chart(other);
        let (a, b) = (self.as_constant(), other.as_constant());
        if let (Some(x), Some(y)) = (a, b) {
            let folded = match op {
                BinOp::Add => Some(x + y),
                BinOp::Sub => Some(x - y),
                BinOp::Mul => Some(x * y),
                BinOp::Div if y != 0.0 => Some(x / y),
                _ => None,
            };
            if let Some(v) = folded.filter(|v| v.is_finite()) {
                return Expression::constant(&self.chart, v);
            }
        }
        match (op, a, b) {
            (BinOp::Add, Some(0.0), _) => return other.clone(),
            (BinOp::Add | BinOp::Sub, _, Some(0.0)) => return self.clone(),
            (BinOp::Sub, Some(0.0), _) => return other.neg(),
            (BinOp::Mul, Some(z), _) | (BinOp::Mul, _, Some(z)) if z == 0.0 => {
                return Expression::zero(&self.chart)
            }
            (BinOp::Mul, Some(1.0), _) => return other.clone(),
            (BinOp::Mul | BinOp::Div, _, Some(1.0)) => return self.clone(),
            _ => {}
        }
        if let (BinOp::Add | BinOp::Sub, Node::Neg(inner)) = (op, &*other.root) {
            let flipped = if op == BinOp::Add { BinOp::Sub } else { BinOp::Add };
            return Expression::from_node(
                Node::Binary(flipped, self.root.clone(), inner.clone()),
                self.chart.clone(),
            );
        }
        Expression::from_node(
            Node::Binary(op, self.root.clone(), other.root.clone()),
            self.chart.clone(),
        )
    }

    pub fn add(&self, other: &Expression) -> Expression {
        self.binary(BinOp::Add, other)
    }

    pub fn sub(&self, other: &Expression) -> Expression {
        self.binary(BinOp::Sub, other)
    }

    pub fn mul(&self, other: &Expression) -> Expression {
        self.binary(BinOp::Mul, other)
    }

    pub fn div(&self, other: &Expression) -> Expression {
        self.binary(BinOp::Div, other)
    }

    pub fn pow(&self, other: &Expression) -> Expression {
        self.binary(BinOp::Pow, other)
    }

    pub fn neg(&self) -> Expression {
        match &*self.root {
            Node::Const(c) => Expression::constant(&self.chart, 0.0 - c),
            Node::Neg(inner) => Expression::from_node((**inner).clone(), self.chart.clone()),
            _ => Expression::from_node(Node::Neg(self.root.clone()), self.chart.clone()),
        }
    }

    /// The partial derivative with respect to `slot`, as an expression.
    pub fn partial(&self, slot: usize) -> Expression {
        assert!(slot < self.chart.slot_count(), "slot {slot} out of range");
        if !self.depends_on_slot(slot) {
            return Expression::zero(&self.chart);
        }
        if let Node::Var(k) = *self.root {
            return Expression::constant(&self.chart, if k == slot { 1.0 } else { 0.0 });
        }
        Expression::from_node(Node::Partial(self.root.clone(), slot), self.chart.clone())
    }

    /// `self ∘ Φ`, where `map` gives one expression per chart coordinate.
    pub fn compose(&self, map: &[Expression]) -> Expression {
        assert_eq!(map.len(), self.chart.manifold_dim(), "map needs one component per coordinate");
        for m in map {
            self.same_chart(m);
        }
        if !self.root.has_derived_nodes() {
            let subs: Vec<&Arc<Node>> = map.iter().map(|m| &m.root).collect();
            let node = substitute(&self.root, &subs);
            return Expression::from_node(node, self.chart.clone());
        }
        let subs: Arc<[Arc<Node>]> = map.iter().map(|m| m.root.clone()).collect();
        Expression::from_node(Node::Compose(self.root.clone(), subs), self.chart.clone())
    }
}

fn substitute(node: &Node, subs: &[&Arc<Node>]) -> Node {
    match node {
        Node::Var(k) if *k < subs.len() => (**subs[*k]).clone(),
        Node::Const(_) | Node::Var(_) => node.clone(),
        Node::Neg(a) => Node::Neg(Arc::new(substitute(a, subs))),
        Node::Call(f, a) => Node::Call(*f, Arc::new(substitute(a, subs))),
        Node::Binary(op, a, b) => Node::Binary(
            *op,
            Arc::new(substitute(a, subs)),
            Arc::new(substitute(b, subs)),
        ),
        Node::Partial(..) | Node::Compose(..) => unreachable!("derived nodes are composed lazily"),
    }
}

const PREC_SUM: u8 = 1;
const PREC_PRODUCT: u8 = 2;
const PREC_UNARY: u8 = 3;
const PREC_POWER: u8 = 4;
const PREC_ATOM: u8 = 5;

fn precedence(node: &Node) -> u8 {
    match node {
        Node::Const(c) if c.is_sign_negative() => PREC_UNARY,
        Node::Binary(BinOp::Add | BinOp::Sub, ..) => PREC_SUM,
        Node::Binary(BinOp::Mul | BinOp::Div, ..) => PREC_PRODUCT,
        Node::Binary(BinOp::Pow, ..) => PREC_POWER,
        Node::Neg(_) => PREC_UNARY,
        _ => PREC_ATOM,
    }
}

struct Printer<'a> {
    node: &'a Node,
    chart: &'a Chart,
}

impl Printer<'_> {
    fn child<'b>(&'b self, node: &'b Node) -> Printer<'b> {
        Printer {
            node,
            chart: self.chart,
        }
    }

    fn wrapped(&self, f: &mut fmt::Formatter<'_>, node: &Node, parens: bool) -> fmt::Result {
        if parens {
            write!(f, "({})", self.child(node))
        } else {
            write!(f, "{}", self.child(node))
        }
    }
}

impl fmt::Display for Printer<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node {
            // Both forms are the shortest text that parses back to the same
            // value.
            Node::Const(c) if c.fract() == 0.0 && c.abs() < 1e15 && !(*c == 0.0 && c.is_sign_negative()) => {
                write!(f, "{c}")
            }
            Node::Const(c) => write!(f, "{c:?}"),
            Node::Var(k) => f.write_str(self.chart.name(*k)),
            Node::Neg(a) => {
                f.write_str("-")?;
                self.wrapped(f, a, precedence(a) < PREC_UNARY)
            }
            Node::Binary(op, a, b) => {
                let p = precedence(self.node);
                let (left_parens, right_parens) = if *op == BinOp::Pow {
                    (precedence(a) <= PREC_POWER, precedence(b) < PREC_POWER)
                } else {
                    (precedence(a) < p, precedence(b) <= p)
                };
                self.wrapped(f, a, left_parens)?;
                match op {
                    BinOp::Add | BinOp::Sub => write!(f, " {} ", op.symbol())?,
                    _ => write!(f, "{}", op.symbol())?,
                }
                self.wrapped(f, b, right_parens)
            }
            Node::Call(func, a) => write!(f, "{}({})", func.name(), self.child(a)),
            Node::Partial(a, slot) => write!(f, "D[{}]({})", self.chart.name(*slot), self.child(a)),
            Node::Compose(a, subs) => {
                write!(f, "({})[", self.child(a))?;
                for (k, sub) in subs.iter().enumerate() {
                    if k > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{} := {}", self.chart.name(k), self.child(sub))?;
                }
                f.write_str("]")
            }
        }
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        Printer {
            node: &self.root,
            chart: &self.chart,
        }
        .fmt(f)
    }
}
