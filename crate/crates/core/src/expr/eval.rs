use std::sync::Arc;

use super::dual::Scalar;
use super::ExprError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    pub(crate) fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    pub(crate) fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    pub(crate) fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }
}

/// Syntax tree node. Variables are resolved to chart slots at construction.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Var(usize),
    Neg(Arc<Node>),
    Binary(BinOp, Arc<Node>, Arc<Node>),
    Call(Func, Arc<Node>),
    /// Partial derivative of the inner tree with respect to a slot.
    Partial(Arc<Node>, usize),
    /// Inner tree evaluated at the point given by one tree per chart slot;
    /// parameter slots pass through unchanged.
    Compose(Arc<Node>, Arc<[Arc<Node>]>),
}

impl Node {
    pub(crate) fn visit_slots(&self, out: &mut Vec<usize>) {
        match self {
            Node::Const(_) => {}
            Node::Var(k) => out.push(*k),
            Node::Neg(a) | Node::Call(_, a) | Node::Partial(a, _) => a.visit_slots(out),
            Node::Binary(_, a, b) => {
                a.visit_slots(out);
                b.visit_slots(out);
            }
            Node::Compose(inner, subs) => {
                // Parameters referenced by the inner tree still come from the
                // caller's bindings.
                let mut inner_slots = Vec::new();
                inner.visit_slots(&mut inner_slots);
                out.extend(inner_slots.into_iter().filter(|&k| k >= subs.len()));
                for sub in subs.iter() {
                    sub.visit_slots(out);
                }
            }
        }
    }

    pub(crate) fn has_derived_nodes(&self) -> bool {
        match self {
            Node::Const(_) | Node::Var(_) => false,
            Node::Partial(..) | Node::Compose(..) => true,
            Node::Neg(a) | Node::Call(_, a) => a.has_derived_nodes(),
            Node::Binary(_, a, b) => a.has_derived_nodes() || b.has_derived_nodes(),
        }
    }
}

fn domain(msg: String) -> ExprError {
    ExprError::Domain(msg)
}

pub(crate) fn eval_node<T: Scalar>(node: &Node, vals: &[T]) -> Result<T, ExprError> {
    Ok(match node {
        Node::Const(c) => T::constant(*c),
        Node::Var(k) => vals[*k],
        Node::Neg(a) => -eval_node(a, vals)?,
        Node::Binary(op, a, b) => {
            let x = eval_node(a, vals)?;
            let y = eval_node(b, vals)?;
            match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div => {
                    if y.re() == 0.0 {
                        return Err(domain("division by zero".into()));
                    }
                    x / y
                }
                BinOp::Pow => {
                    let (base, exponent) = (x.re(), y.re());
                    if base < 0.0 && exponent.fract() != 0.0 {
                        return Err(domain(format!(
                            "negative base {base} raised to fractional power {exponent}"
                        )));
                    }
                    if base == 0.0 && exponent < 0.0 {
                        return Err(domain("division by zero (0 to a negative power)".into()));
                    }
                    x.pow(y)
                }
            }
        }
        Node::Call(f, a) => {
            let x = eval_node(a, vals)?;
            match f {
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Exp => x.exp(),
                Func::Log => {
                    if x.re() <= 0.0 {
                        return Err(domain(format!("log of non-positive value {}", x.re())));
                    }
                    x.ln()
                }
                Func::Sqrt => {
                    if x.re() < 0.0 {
                        return Err(domain(format!("sqrt of negative value {}", x.re())));
                    }
                    x.sqrt()
                }
                Func::Abs => x.abs(),
            }
        }
        Node::Partial(inner, slot) => T::partial(inner, vals, *slot)?,
        Node::Compose(inner, subs) => {
            let mut point = vals.to_vec();
            for (k, sub) in subs.iter().enumerate() {
                point[k] = eval_node(sub, vals)?;
            }
            eval_node(inner, &point)?
        }
    })
}
