//! Scalar expression language over the chart coordinates `x1..x4`.
//!
//! Metric and 2-form components are given as closed-form expressions in four
//! real variables. The module provides parsing (see [`parse`]), evaluation at
//! a point, and symbolic differentiation; derivatives are exact ASTs so that
//! downstream curvature formulas see no truncation error.

mod parser;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub use parser::{parse, ParseError};

/// Built-in unary functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Atan,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Atan => "atan",
        }
    }

    fn apply(self, x: f64) -> Result<f64, DomainError> {
        if !x.is_finite() {
            return Err(DomainError::NonFinite);
        }
        match self {
            Func::Sin => Ok(x.sin()),
            Func::Cos => Ok(x.cos()),
            Func::Exp => Ok(x.exp()),
            Func::Log => {
                if x <= 0.0 {
                    Err(DomainError::LogNonPositive(x))
                } else {
                    Ok(x.ln())
                }
            }
            Func::Sqrt => {
                if x < 0.0 {
                    Err(DomainError::SqrtNegative(x))
                } else {
                    Ok(x.sqrt())
                }
            }
            Func::Atan => Ok(x.atan()),
        }
    }
}

#[derive(Debug)]
enum Node {
    Num(f64),
    /// Coordinate variable, 0-based (`Var(0)` is `x1`).
    Var(usize),
    Neg(Expression),
    Add(Expression, Expression),
    Sub(Expression, Expression),
    Mul(Expression, Expression),
    Div(Expression, Expression),
    Pow(Expression, Expression),
    Call(Func, Expression),
}

/// Evaluation failure at a specific point.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum DomainError {
    #[error("log of non-positive value {0}")]
    LogNonPositive(f64),
    #[error("square root of negative value {0}")]
    SqrtNegative(f64),
    #[error("division by zero")]
    DivisionByZero,
    #[error("power with no finite real value")]
    PowDomain,
    #[error("intermediate value is not finite")]
    NonFinite,
}

/// Immutable expression tree; cheap to clone (shared subtrees).
#[derive(Clone)]
pub struct Expression(Arc<Node>);

impl fmt::Debug for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expression({})", self)
    }
}

fn node(n: Node) -> Expression {
    Expression(Arc::new(n))
}

impl Expression {
    pub fn constant(c: f64) -> Expression {
        node(Node::Num(c))
    }

    /// Coordinate variable by 0-based axis (0..=3 for x1..x4).
    pub fn var(axis: usize) -> Expression {
        assert!(axis < 4, "axis out of range");
        node(Node::Var(axis))
    }

    pub fn zero() -> Expression {
        Expression::constant(0.0)
    }

    pub fn one() -> Expression {
        Expression::constant(1.0)
    }

    fn as_num(&self) -> Option<f64> {
        match *self.0 {
            Node::Num(c) => Some(c),
            _ => None,
        }
    }

    fn is_zero(&self) -> bool {
        self.as_num() == Some(0.0)
    }

    fn is_one(&self) -> bool {
        self.as_num() == Some(1.0)
    }

    /// Sum with light structural simplification (used heavily when building
    /// derivative trees; correctness-only, no canonical form).
    pub fn add(a: Expression, b: Expression) -> Expression {
        if a.is_zero() {
            return b;
        }
        if b.is_zero() {
            return a;
        }
        if let (Some(x), Some(y)) = (a.as_num(), b.as_num()) {
            if (x + y).is_finite() {
                return Expression::constant(x + y);
            }
        }
        node(Node::Add(a, b))
    }

    pub fn sub(a: Expression, b: Expression) -> Expression {
        if b.is_zero() {
            return a;
        }
        if a.is_zero() {
            return Expression::neg(b);
        }
        if let (Some(x), Some(y)) = (a.as_num(), b.as_num()) {
            if (x - y).is_finite() {
                return Expression::constant(x - y);
            }
        }
        node(Node::Sub(a, b))
    }

    pub fn mul(a: Expression, b: Expression) -> Expression {
        if a.is_zero() || b.is_zero() {
            return Expression::zero();
        }
        if a.is_one() {
            return b;
        }
        if b.is_one() {
            return a;
        }
        if let (Some(x), Some(y)) = (a.as_num(), b.as_num()) {
            if (x * y).is_finite() {
                return Expression::constant(x * y);
            }
        }
        node(Node::Mul(a, b))
    }

    pub fn div(a: Expression, b: Expression) -> Expression {
        if b.is_one() {
            return a;
        }
        if a.is_zero() {
            return Expression::zero();
        }
        if let (Some(x), Some(y)) = (a.as_num(), b.as_num()) {
            if y != 0.0 && (x / y).is_finite() {
                return Expression::constant(x / y);
            }
        }
        node(Node::Div(a, b))
    }

    pub fn neg(a: Expression) -> Expression {
        if let Some(x) = a.as_num() {
            return Expression::constant(-x);
        }
        if let Node::Neg(inner) = &*a.0 {
            return inner.clone();
        }
        node(Node::Neg(a))
    }

    pub fn pow(base: Expression, exponent: Expression) -> Expression {
        if exponent.is_one() {
            return base;
        }
        if exponent.is_zero() {
            return Expression::one();
        }
        if let (Some(x), Some(y)) = (base.as_num(), exponent.as_num()) {
            let v = x.powf(y);
            if v.is_finite() {
                return Expression::constant(v);
            }
        }
        node(Node::Pow(base, exponent))
    }

    pub fn powi(base: Expression, n: i32) -> Expression {
        Expression::pow(base, Expression::constant(f64::from(n)))
    }

    pub fn call(f: Func, arg: Expression) -> Expression {
        node(Node::Call(f, arg))
    }

    pub fn sin(self) -> Expression {
        Expression::call(Func::Sin, self)
    }

    pub fn cos(self) -> Expression {
        Expression::call(Func::Cos, self)
    }

    pub fn exp(self) -> Expression {
        Expression::call(Func::Exp, self)
    }

    pub fn log(self) -> Expression {
        Expression::call(Func::Log, self)
    }

    pub fn sqrt(self) -> Expression {
        Expression::call(Func::Sqrt, self)
    }

    pub fn atan(self) -> Expression {
        Expression::call(Func::Atan, self)
    }

    /// Evaluates at a point. Every intermediate must stay finite; violations
    /// surface as [`DomainError`] rather than NaN/inf leaking out.
    pub fn eval(&self, p: &[f64; 4]) -> Result<f64, DomainError> {
        let v = self.eval_inner(p)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(DomainError::NonFinite)
        }
    }

    fn eval_inner(&self, p: &[f64; 4]) -> Result<f64, DomainError> {
        match &*self.0 {
            Node::Num(c) => Ok(*c),
            Node::Var(i) => Ok(p[*i]),
            Node::Neg(a) => Ok(-a.eval_inner(p)?),
            Node::Add(a, b) => Ok(a.eval_inner(p)? + b.eval_inner(p)?),
            Node::Sub(a, b) => Ok(a.eval_inner(p)? - b.eval_inner(p)?),
            Node::Mul(a, b) => Ok(a.eval_inner(p)? * b.eval_inner(p)?),
            Node::Div(a, b) => {
                let num = a.eval_inner(p)?;
                let den = b.eval_inner(p)?;
                if den == 0.0 {
                    return Err(DomainError::DivisionByZero);
                }
                if !num.is_finite() || !den.is_finite() {
                    return Err(DomainError::NonFinite);
                }
                Ok(num / den)
            }
            Node::Pow(a, b) => {
                let base = a.eval_inner(p)?;
                let exponent = b.eval_inner(p)?;
                let v = base.powf(exponent);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(DomainError::PowDomain)
                }
            }
            Node::Call(f, a) => f.apply(a.eval_inner(p)?),
        }
    }

    /// Exact partial derivative with respect to the 0-based `axis`.
    pub fn differentiate(&self, axis: usize) -> Expression {
        assert!(axis < 4, "axis out of range");
        match &*self.0 {
            Node::Num(_) => Expression::zero(),
            Node::Var(i) => {
                if *i == axis {
                    Expression::one()
                } else {
                    Expression::zero()
                }
            }
            Node::Neg(a) => Expression::neg(a.differentiate(axis)),
            Node::Add(a, b) => Expression::add(a.differentiate(axis), b.differentiate(axis)),
            Node::Sub(a, b) => Expression::sub(a.differentiate(axis), b.differentiate(axis)),
            Node::Mul(a, b) => {
                let da = a.differentiate(axis);
                let db = b.differentiate(axis);
                Expression::add(
                    Expression::mul(da, b.clone()),
                    Expression::mul(a.clone(), db),
                )
            }
            Node::Div(a, b) => {
                let da = a.differentiate(axis);
                let db = b.differentiate(axis);
                Expression::div(
                    Expression::sub(
                        Expression::mul(da, b.clone()),
                        Expression::mul(a.clone(), db),
                    ),
                    Expression::mul(b.clone(), b.clone()),
                )
            }
            Node::Pow(base, exponent) => {
                let db = base.differentiate(axis);
                if let Some(n) = exponent.as_num() {
                    // d(f^n) = n f^(n-1) f'
                    return Expression::mul(
                        Expression::mul(
                            Expression::constant(n),
                            Expression::pow(base.clone(), Expression::constant(n - 1.0)),
                        ),
                        db,
                    );
                }
                // d(f^g) = f^g (g' log f + g f'/f)
                let de = exponent.differentiate(axis);
                let term1 = Expression::mul(de, base.clone().log());
                let term2 = Expression::mul(exponent.clone(), Expression::div(db, base.clone()));
                Expression::mul(self.clone(), Expression::add(term1, term2))
            }
            Node::Call(f, a) => {
                let da = a.differentiate(axis);
                match f {
                    Func::Sin => Expression::mul(a.clone().cos(), da),
                    Func::Cos => Expression::neg(Expression::mul(a.clone().sin(), da)),
                    Func::Exp => Expression::mul(self.clone(), da),
                    Func::Log => Expression::div(da, a.clone()),
                    Func::Sqrt => Expression::div(
                        da,
                        Expression::mul(Expression::constant(2.0), self.clone()),
                    ),
                    Func::Atan => Expression::div(
                        da,
                        Expression::add(Expression::one(), Expression::mul(a.clone(), a.clone())),
                    ),
                }
            }
        }
    }

    /// Number of AST nodes (diagnostics and test-size bounds).
    pub fn node_count(&self) -> usize {
        match &*self.0 {
            Node::Num(_) | Node::Var(_) => 1,
            Node::Neg(a) | Node::Call(_, a) => 1 + a.node_count(),
            Node::Add(a, b)
            | Node::Sub(a, b)
            | Node::Mul(a, b)
            | Node::Div(a, b)
            | Node::Pow(a, b) => 1 + a.node_count() + b.node_count(),
        }
    }
}

// Precedence levels used by the printer: 1 +/-, 2 */÷, 3 unary minus, 4 ^,
// 5 atoms. `^` binds tighter than unary minus, matching the parser.
fn precedence(e: &Expression) -> u8 {
    match &*e.0 {
        Node::Add(..) | Node::Sub(..) => 1,
        Node::Mul(..) | Node::Div(..) => 2,
        Node::Neg(..) => 3,
        Node::Num(c) if *c < 0.0 => 3,
        Node::Pow(..) => 4,
        _ => 5,
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, e: &Expression, min: u8) -> fmt::Result {
    if precedence(e) < min {
        write!(f, "({})", e)
    } else {
        write!(f, "{}", e)
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &*self.0 {
            Node::Num(c) => write!(f, "{}", c),
            Node::Var(i) => write!(f, "x{}", i + 1),
            Node::Neg(a) => {
                write!(f, "-")?;
                write_child(f, a, 3)
            }
            Node::Add(a, b) => {
                write_child(f, a, 1)?;
                write!(f, " + ")?;
                write_child(f, b, 2)
            }
            Node::Sub(a, b) => {
                write_child(f, a, 1)?;
                write!(f, " - ")?;
                write_child(f, b, 2)
            }
            Node::Mul(a, b) => {
                write_child(f, a, 2)?;
                write!(f, "*")?;
                write_child(f, b, 3)
            }
            Node::Div(a, b) => {
                write_child(f, a, 2)?;
                write!(f, "/")?;
                write_child(f, b, 3)
            }
            Node::Pow(a, b) => {
                write_child(f, a, 5)?;
                write!(f, "^")?;
                write_child(f, b, 3)
            }
            Node::Call(func, a) => write!(f, "{}({})", func.name(), a),
        }
    }
}

impl std::ops::Add for Expression {
    type Output = Expression;
    fn add(self, rhs: Expression) -> Expression {
        Expression::add(self, rhs)
    }
}

impl std::ops::Sub for Expression {
    type Output = Expression;
    fn sub(self, rhs: Expression) -> Expression {
        Expression::sub(self, rhs)
    }
}

impl std::ops::Mul for Expression {
    type Output = Expression;
    fn mul(self, rhs: Expression) -> Expression {
        Expression::mul(self, rhs)
    }
}

impl std::ops::Div for Expression {
    type Output = Expression;
    fn div(self, rhs: Expression) -> Expression {
        Expression::div(self, rhs)
    }
}

impl std::ops::Neg for Expression {
    type Output = Expression;
    fn neg(self) -> Expression {
        Expression::neg(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, p: [f64; 4]) -> f64 {
        parse(src).unwrap().eval(&p).unwrap()
    }

    #[test]
    fn polynomial_eval() {
        assert_eq!(ev("x1^2 + x2*x3", [1.0, 2.0, 3.0, 0.0]), 7.0);
    }

    #[test]
    fn rational_eval_at_origin() {
        assert_eq!(ev("4/(1 + x1^2 + x2^2 + x3^2 + x4^2)^2", [0.0; 4]), 4.0);
    }

    #[test]
    fn library_identities() {
        assert_eq!(ev("exp(0)", [3.0, 1.0, 4.0, 1.0]), 1.0);
        let v = ev("atan(x1)", [1.0, 0.0, 0.0, 0.0]);
        assert!((v - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
    }

    #[test]
    fn division_by_zero_is_domain_error() {
        let e = parse("x1/x2").unwrap();
        assert_eq!(
            e.eval(&[1.0, 0.0, 0.0, 0.0]),
            Err(DomainError::DivisionByZero)
        );
    }

    #[test]
    fn sqrt_and_log_domain_errors() {
        let e = parse("sqrt(x1)").unwrap();
        assert!(matches!(
            e.eval(&[-1.0, 0.0, 0.0, 0.0]),
            Err(DomainError::SqrtNegative(_))
        ));
        let e = parse("log(x1)").unwrap();
        assert!(matches!(
            e.eval(&[0.0, 0.0, 0.0, 0.0]),
            Err(DomainError::LogNonPositive(_))
        ));
    }

    #[test]
    fn simple_derivatives() {
        let e = parse("x1^2").unwrap().differentiate(0);
        assert_eq!(e.eval(&[3.0, 0.0, 0.0, 0.0]).unwrap(), 6.0);

        // chain rule: d/dx2 sin(x1*x2) = cos(x1*x2) * x1
        let e = parse("sin(x1*x2)").unwrap().differentiate(1);
        let v = e.eval(&[1.0, std::f64::consts::PI, 0.0, 0.0]).unwrap();
        assert!((v + 1.0).abs() < 1e-15);
    }

    #[test]
    fn power_binds_tighter_than_unary_minus() {
        assert_eq!(ev("-x1^2", [3.0, 0.0, 0.0, 0.0]), -9.0);
        assert_eq!(ev("2^-2", [0.0; 4]), 0.25);
        // right-associative
        assert_eq!(ev("2^3^2", [0.0; 4]), 512.0);
    }

    #[test]
    fn mixed_partials_commute() {
        let e = parse("exp(x1*x2) + sin(x2*x3)/(1 + x4^2)").unwrap();
        let d12 = e.differentiate(0).differentiate(1);
        let d21 = e.differentiate(1).differentiate(0);
        let p = [0.3, -0.7, 1.1, 0.4];
        let a = d12.eval(&p).unwrap();
        let b = d21.eval(&p).unwrap();
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }
}
