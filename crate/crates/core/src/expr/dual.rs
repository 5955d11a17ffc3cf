//! Forward-mode dual numbers.
//!
//! `Dual<T>` carries a value and one directional derivative. Nesting
//! (`Dual<Dual<f64>>`) yields mixed second derivatives, which is how partial
//! derivatives of expressions that already contain a partial are evaluated.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use super::eval::{eval_node, Node};
use super::ExprError;

/// Arithmetic needed to evaluate an expression tree.
pub trait Scalar:
    Copy
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn constant(v: f64) -> Self;
    /// Primal real part, used for domain checks.
    fn re(self) -> f64;
    fn is_zero(self) -> bool;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    fn pow(self, exponent: Self) -> Self;

    /// Partial of `node` with respect to `slot`, evaluated at `vals`.
    fn partial(node: &Node, vals: &[Self], slot: usize) -> Result<Self, ExprError>;
}

impl Scalar for f64 {
    fn constant(v: f64) -> Self {
        v
    }
    fn re(self) -> f64 {
        self
    }
    fn is_zero(self) -> bool {
        self == 0.0
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn pow(self, exponent: Self) -> Self {
        if exponent.fract() == 0.0 && exponent.abs() <= i32::MAX as f64 {
            self.powi(exponent as i32)
        } else {
            self.powf(exponent)
        }
    }
    fn partial(node: &Node, vals: &[Self], slot: usize) -> Result<Self, ExprError> {
        let lifted: Vec<Dual<f64>> = vals
            .iter()
            .enumerate()
            .map(|(k, &v)| Dual::new(v, if k == slot { 1.0 } else { 0.0 }))
            .collect();
        Ok(eval_node(node, &lifted)?.eps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual<T> {
    pub re: T,
    pub eps: T,
}

impl<T> Dual<T> {
    pub fn new(re: T, eps: T) -> Self {
        Dual { re, eps }
    }
}

impl<T: Scalar> Add for Dual<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Dual::new(self.re + o.re, self.eps + o.eps)
    }
}

impl<T: Scalar> Sub for Dual<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Dual::new(self.re - o.re, self.eps - o.eps)
    }
}

impl<T: Scalar> Mul for Dual<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Dual::new(self.re * o.re, self.re * o.eps + self.eps * o.re)
    }
}

impl<T: Scalar> Div for Dual<T> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let re = self.re / o.re;
        Dual::new(re, (self.eps - re * o.eps) / o.re)
    }
}

impl<T: Scalar> Neg for Dual<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Dual::new(-self.re, -self.eps)
    }
}

/// Scale a derivative by a chain-rule factor, skipping the product when the
/// derivative vanishes so infinite factors do not turn exact zeros into NaN.
fn chain<T: Scalar>(factor: T, eps: T) -> T {
    if eps.is_zero() {
        eps
    } else {
        factor * eps
    }
}

impl<T: Scalar> Scalar for Dual<T> {
    fn constant(v: f64) -> Self {
        Dual::new(T::constant(v), T::constant(0.0))
    }
    fn re(self) -> f64 {
        self.re.re()
    }
    fn is_zero(self) -> bool {
        self.re.is_zero() && self.eps.is_zero()
    }
    fn sin(self) -> Self {
        Dual::new(self.re.sin(), chain(self.re.cos(), self.eps))
    }
    fn cos(self) -> Self {
        Dual::new(self.re.cos(), chain(-self.re.sin(), self.eps))
    }
    fn exp(self) -> Self {
        let e = self.re.exp();
        Dual::new(e, chain(e, self.eps))
    }
    fn ln(self) -> Self {
        Dual::new(self.re.ln(), chain(T::constant(1.0) / self.re, self.eps))
    }
    fn sqrt(self) -> Self {
        let r = self.re.sqrt();
        Dual::new(r, chain(T::constant(0.5) / r, self.eps))
    }
    fn abs(self) -> Self {
        let sign = if self.re() > 0.0 {
            1.0
        } else if self.re() < 0.0 {
            -1.0
        } else {
            0.0
        };
        Dual::new(self.re.abs(), chain(T::constant(sign), self.eps))
    }
    fn pow(self, exponent: Self) -> Self {
        let value = self.re.pow(exponent.re);
        // d(a^b) = b a^(b-1) da + a^b ln(a) db
        let mut eps = chain(
            exponent.re * self.re.pow(exponent.re - T::constant(1.0)),
            self.eps,
        );
        if !exponent.eps.is_zero() && self.re() != 0.0 {
            eps = eps + chain(value * self.re.ln(), exponent.eps);
        }
        Dual::new(value, eps)
    }
    fn partial(node: &Node, vals: &[Self], slot: usize) -> Result<Self, ExprError> {
        // One more nesting level would be Dual<Dual<Dual<f64>>>; the engine
        // stops at mixed second derivatives.
        let lifted: Vec<Dual<Dual<T>>> = vals
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                let seed = if k == slot { 1.0 } else { 0.0 };
                Dual::new(v, Dual::constant(seed))
            })
            .collect();
        Ok(eval_node_nested(node, &lifted)?.eps)
    }
}

/// Evaluation one level deeper than `Dual<T>`: any `Partial` reached here
/// would need a third derivative.
fn eval_node_nested<T: Scalar>(node: &Node, vals: &[Dual<Dual<T>>]) -> Result<Dual<Dual<T>>, ExprError> {
    let wrapped: Vec<Deep<T>> = vals.iter().map(|&v| Deep(v)).collect();
    eval_node(node, &wrapped).map(|d| d.0)
}

/// Newtype around `Dual<Dual<T>>` whose `partial` refuses to go deeper.
#[derive(Debug, Clone, Copy)]
struct Deep<T>(Dual<Dual<T>>);

macro_rules! deep_binop {
    ($tr:ident, $m:ident) => {
        impl<T: Scalar> $tr for Deep<T> {
            type Output = Self;
            fn $m(self, o: Self) -> Self {
                Deep($tr::$m(self.0, o.0))
            }
        }
    };
}
deep_binop!(Add, add);
deep_binop!(Sub, sub);
deep_binop!(Mul, mul);
deep_binop!(Div, div);

impl<T: Scalar> Neg for Deep<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Deep(-self.0)
    }
}

impl<T: Scalar> Scalar for Deep<T> {
    fn constant(v: f64) -> Self {
        Deep(Dual::constant(v))
    }
    fn re(self) -> f64 {
        self.0.re()
    }
    fn is_zero(self) -> bool {
        self.0.is_zero()
    }
    fn sin(self) -> Self {
        Deep(self.0.sin())
    }
    fn cos(self) -> Self {
        Deep(self.0.cos())
    }
    fn exp(self) -> Self {
        Deep(self.0.exp())
    }
    fn ln(self) -> Self {
        Deep(self.0.ln())
    }
    fn sqrt(self) -> Self {
        Deep(self.0.sqrt())
    }
    fn abs(self) -> Self {
        Deep(self.0.abs())
    }
    fn pow(self, exponent: Self) -> Self {
        Deep(self.0.pow(exponent.0))
    }
    fn partial(_node: &Node, _vals: &[Self], _slot: usize) -> Result<Self, ExprError> {
        Err(ExprError::DerivativeOrder)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule() {
        let x = Dual::new(3.0, 1.0);
        let y = Dual::new(2.0, 0.0);
        let z = x * x * y;
        assert_eq!(z.re, 18.0);
        assert_eq!(z.eps, 12.0);
    }

    #[test]
    fn nested_gives_second_derivative() {
        // f(x) = x^3, f''(2) = 12
        let x: Dual<Dual<f64>> = Dual::new(Dual::new(2.0, 1.0), Dual::new(1.0, 0.0));
        let f = x.pow(Dual::constant(3.0));
        assert_eq!(f.re.re, 8.0);
        assert_eq!(f.eps.re, 12.0);
        assert_eq!(f.eps.eps, 12.0);
    }

    #[test]
    fn pow_with_constant_exponent_accepts_negative_base() {
        let x = Dual::new(-2.0, 1.0);
        let f = x.pow(Dual::constant(2.0));
        assert_eq!(f.re, 4.0);
        assert_eq!(f.eps, -4.0);
    }

    #[test]
    fn abs_at_zero_has_zero_slope() {
        let f = Dual::new(0.0, 1.0).abs();
        assert_eq!(f.eps, 0.0);
    }
}
