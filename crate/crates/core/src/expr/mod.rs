//! Analytic expressions over the phase variables `(t, x1..xn, u)` and the
//! first-integral image variables `y1..ym`.
//!
//! Expressions are immutable trees. [`Expr::eval`] is pure, [`Expr::diff`]
//! returns an exact symbolic derivative with constant subtrees folded, and the
//! `Display` impl emits text that [`parse`] reads back to the same tree.

mod diff;
mod parse;

use std::fmt;

use thiserror::Error;

use crate::scalar::Scalar;

pub use parse::{parse, parse_image, parse_in, ParseError, Scope};

/// A variable slot.
///
/// `X` and `Y` carry zero-based indices; they print one-based (`x1`, `y1`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    T,
    X(usize),
    U,
    Y(usize),
}

impl Var {
    /// Position of a phase variable in the state layout `[t, x1..xn, u]`.
    pub fn phase_index(self, n: usize) -> Option<usize> {
        match self {
            Var::T => Some(0),
            Var::X(k) if k < n => Some(1 + k),
            Var::U => Some(n + 1),
            _ => None,
        }
    }

    /// Inverse of [`Var::phase_index`].
    pub fn from_phase_index(i: usize, n: usize) -> Var {
        match i {
            0 => Var::T,
            i if i <= n => Var::X(i - 1),
            _ => Var::U,
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::T => f.write_str("t"),
            Var::X(k) => write!(f, "x{}", k + 1),
            Var::U => f.write_str("u"),
            Var::Y(k) => write!(f, "y{}", k + 1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Neg(Box<Expr>),
    Call(Func, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

/// Supplies variable values to [`Expr::eval`].
pub trait Binding<T> {
    fn value(&self, var: Var) -> Option<T>;
    fn describe(&self) -> String;
}

/// Phase-space point in state layout `[t, x1..xn, u]`.
#[derive(Clone, Copy, Debug)]
pub struct Phase<'a, T>(pub &'a [T]);

impl<T: Scalar> Binding<T> for Phase<'_, T> {
    #[inline]
    fn value(&self, var: Var) -> Option<T> {
        let n = self.0.len().checked_sub(2)?;
        var.phase_index(n).map(|i| self.0[i])
    }

    fn describe(&self) -> String {
        let n = self.0.len().saturating_sub(2);
        (0..self.0.len())
            .map(|i| format!("{}={}", Var::from_phase_index(i, n), self.0[i]))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

/// Values of the image variables `y1..ym`.
#[derive(Clone, Copy, Debug)]
pub struct Image<'a, T>(pub &'a [T]);

impl<T: Scalar> Binding<T> for Image<'_, T> {
    #[inline]
    fn value(&self, var: Var) -> Option<T> {
        match var {
            Var::Y(k) => self.0.get(k).copied(),
            _ => None,
        }
    }

    fn describe(&self) -> String {
        self.0
            .iter()
            .enumerate()
            .map(|(k, v)| format!("{}={}", Var::Y(k), v))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("domain violation in `{subexpr}`: {reason} at ({binding})")]
    Domain {
        subexpr: String,
        reason: &'static str,
        binding: String,
    },
    #[error("variable `{var}` is not bound at ({binding})")]
    Unbound { var: Var, binding: String },
}

impl Expr {
    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn var(v: Var) -> Expr {
        Expr::Var(v)
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    /// Visit every variable occurrence.
    pub fn for_each_var(&self, f: &mut impl FnMut(Var)) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => f(*v),
            Expr::Neg(a) | Expr::Call(_, a) => a.for_each_var(f),
            Expr::Binary(_, a, b) => {
                a.for_each_var(f);
                b.for_each_var(f);
            }
        }
    }

    /// Sorted, deduplicated list of variables occurring in the expression.
    pub fn variables(&self) -> Vec<Var> {
        let mut out = Vec::new();
        self.for_each_var(&mut |v| out.push(v));
        out.sort();
        out.dedup();
        out
    }

    pub fn mentions(&self, var: Var) -> bool {
        let mut hit = false;
        self.for_each_var(&mut |v| hit |= v == var);
        hit
    }

    pub fn is_constant(&self) -> bool {
        let mut any = false;
        self.for_each_var(&mut |_| any = true);
        !any
    }

    /// Replace variables by expressions. Variables for which `map` returns
    /// `None` are kept.
    pub fn substitute(&self, map: &impl Fn(Var) -> Option<Expr>) -> Expr {
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Var(v) => map(*v).unwrap_or(Expr::Var(*v)),
            Expr::Neg(a) => Expr::Neg(Box::new(a.substitute(map))),
            Expr::Call(func, a) => Expr::Call(*func, Box::new(a.substitute(map))),
            Expr::Binary(op, a, b) => Expr::Binary(*op, Box::new(a.substitute(map)), Box::new(b.substitute(map))),
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Neg(a) | Expr::Call(_, a) => 1 + a.size(),
            Expr::Binary(_, a, b) => 1 + a.size() + b.size(),
        }
    }

    pub fn eval<T: Scalar, B: Binding<T>>(&self, env: &B) -> Result<T, EvalError> {
        match self {
            Expr::Const(c) => Ok(T::lit(*c)),
            Expr::Var(v) => env.value(*v).ok_or_else(|| EvalError::Unbound {
                var: *v,
                binding: env.describe(),
            }),
            Expr::Neg(a) => Ok(-a.eval(env)?),
            Expr::Call(func, a) => {
                let x = a.eval(env)?;
                let y = match func {
                    Func::Exp => x.exp(),
                    Func::Log => {
                        if !(x > T::zero()) {
                            return Err(self.domain("logarithm of a non-positive value", env));
                        }
                        x.ln()
                    }
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Sqrt => {
                        if x < T::zero() || x.is_nan() {
                            return Err(self.domain("square root of a negative value", env));
                        }
                        x.sqrt()
                    }
                };
                self.finite(y, env)
            }
            Expr::Binary(op, a, b) => {
                let x = a.eval(env)?;
                let y = b.eval(env)?;
                let r = match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => {
                        if y == T::zero() {
                            return Err(self.domain("division by zero", env));
                        }
                        x / y
                    }
                    BinOp::Pow => return self.eval_pow(x, y, env),
                };
                self.finite(r, env)
            }
        }
    }

    fn eval_pow<T: Scalar, B: Binding<T>>(&self, base: T, exp: T, env: &B) -> Result<T, EvalError> {
        let integral = exp.fract() == T::zero();
        if base == T::zero() && exp < T::zero() {
            return Err(self.domain("division by zero", env));
        }
        let r = if integral && exp.abs() <= T::lit(64.0) {
            base.powi(exp.to_i32().expect("small integral exponent"))
        } else {
            if base < T::zero() {
                return Err(self.domain("negative base with non-integer exponent", env));
            }
            base.powf(exp)
        };
        self.finite(r, env)
    }

    fn finite<T: Scalar, B: Binding<T>>(&self, v: T, env: &B) -> Result<T, EvalError> {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.domain("non-finite result", env))
        }
    }

    fn domain<T: Scalar, B: Binding<T>>(&self, reason: &'static str, env: &B) -> EvalError {
        EvalError::Domain {
            subexpr: self.to_string(),
            reason,
            binding: env.describe(),
        }
    }

    /// Convenience wrapper: evaluate at a phase point `[t, x.., u]`.
    #[inline]
    pub fn at<T: Scalar>(&self, state: &[T]) -> Result<T, EvalError> {
        self.eval(&Phase(state))
    }
}

// Smart constructors. They fold constants and drop additive/multiplicative
// identities; nothing else is rewritten.
#[allow(clippy::should_implement_trait)]
impl Expr {
    pub fn neg(a: Expr) -> Expr {
        match a {
            Expr::Const(c) => Expr::Const(-c),
            Expr::Neg(inner) => *inner,
            other => Expr::Neg(Box::new(other)),
        }
    }

    pub fn call(func: Func, a: Expr) -> Expr {
        if let Expr::Const(c) = a {
            let v = match func {
                Func::Exp => c.exp(),
                Func::Log if c > 0.0 => c.ln(),
                Func::Sin => c.sin(),
                Func::Cos => c.cos(),
                Func::Sqrt if c >= 0.0 => c.sqrt(),
                _ => f64::NAN,
            };
            if v.is_finite() {
                return Expr::Const(v);
            }
        }
        Expr::Call(func, Box::new(a))
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        match (a, b) {
            (Expr::Const(x), Expr::Const(y)) => Expr::Const(x + y),
            (Expr::Const(z), e) | (e, Expr::Const(z)) if z == 0.0 => e,
            (a, Expr::Neg(b)) => Expr::Binary(BinOp::Sub, Box::new(a), b),
            (a, b) => Expr::Binary(BinOp::Add, Box::new(a), Box::new(b)),
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        match (a, b) {
            (Expr::Const(x), Expr::Const(y)) => Expr::Const(x - y),
            (e, Expr::Const(0.0)) => e,
            (Expr::Const(0.0), e) => Expr::neg(e),
            (a, Expr::Neg(b)) => Expr::Binary(BinOp::Add, Box::new(a), b),
            (a, b) => Expr::Binary(BinOp::Sub, Box::new(a), Box::new(b)),
        }
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        match (a, b) {
            (Expr::Const(x), Expr::Const(y)) => Expr::Const(x * y),
            (Expr::Const(z), _) | (_, Expr::Const(z)) if z == 0.0 => Expr::Const(0.0),
            (Expr::Const(o), e) | (e, Expr::Const(o)) if o == 1.0 => e,
            (Expr::Const(m), e) | (e, Expr::Const(m)) if m == -1.0 => Expr::neg(e),
            (a, b) => Expr::Binary(BinOp::Mul, Box::new(a), Box::new(b)),
        }
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        match (a, b) {
            (Expr::Const(x), Expr::Const(y)) if y != 0.0 => Expr::Const(x / y),
            (Expr::Const(z), b) if z == 0.0 && !matches!(b, Expr::Const(_)) => Expr::Const(0.0),
            (e, Expr::Const(1.0)) => e,
            (a, b) => Expr::Binary(BinOp::Div, Box::new(a), Box::new(b)),
        }
    }

    pub fn pow(a: Expr, b: Expr) -> Expr {
        match (a, b) {
            (Expr::Const(x), Expr::Const(y)) if (x > 0.0 || y.fract() == 0.0) && x.powf(y).is_finite() => {
                Expr::Const(x.powf(y))
            }
            (_, Expr::Const(0.0)) => Expr::Const(1.0),
            (e, Expr::Const(1.0)) => e,
            (a, b) => Expr::Binary(BinOp::Pow, Box::new(a), Box::new(b)),
        }
    }
}

impl fmt::Display for Expr {
    /// Fully parenthesised output; every binary node is wrapped so the text
    /// re-parses to the same tree regardless of precedence rules.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) if c.is_sign_negative() => write!(f, "(-{:?})", -c),
            Expr::Const(c) => write!(f, "{c:?}"),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(a) => write!(f, "(-({a}))"),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(text: &str, n: usize) -> Expr {
        parse(text, n).unwrap()
    }

    #[test]
    fn ode_implicit_solution_vanishes_at_initial_point() {
        let e = p("t + 1/u - 1", 0);
        assert_eq!(e.at(&[0.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn cap_surface_vanishes_on_initial_graph() {
        let e = p("t^2 + u^2 - 1 + x^3", 1);
        for &x in &[-0.05f64, -0.01, 0.0, 0.02, 0.07] {
            let u = (1.0 - x.powi(3)).sqrt();
            assert!(e.at(&[0.0, x, u]).unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn division_by_zero_is_reported() {
        let e = p("1/u", 0);
        match e.at(&[0.0, 0.0]) {
            Err(EvalError::Domain { reason, subexpr, .. }) => {
                assert_eq!(reason, "division by zero");
                assert_eq!(subexpr, "(1.0 / u)");
            }
            other => panic!("expected domain error, got {other:?}"),
        }
    }

    #[test]
    fn log_and_sqrt_domains() {
        assert!(p("log(u)", 0).at(&[0.0, -1.0]).is_err());
        assert!(p("log(u)", 0).at(&[0.0, 0.0]).is_err());
        assert!(p("sqrt(u)", 0).at(&[0.0, -1e-300]).is_err());
        assert_eq!(p("sqrt(u)", 0).at(&[0.0, 4.0]).unwrap(), 2.0);
        assert!(p("u^0.5", 0).at(&[0.0, -4.0]).is_err());
        assert_eq!(p("u^3", 0).at(&[0.0, -2.0]).unwrap(), -8.0);
    }

    #[test]
    fn burgers_minus_branch_is_a_root() {
        let e = p("u - 1/(x - u*t + 1)", 1);
        let (t, x) = (0.5, 1.0);
        let u = (x + 1.0 - ((x + 1.0f64).powi(2) - 4.0 * t).sqrt()) / (2.0 * t);
        assert!((u - (2.0 - 2f64.sqrt())).abs() < 1e-15);
        assert!(e.at(&[t, x, u]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn eval_in_f32() {
        let e = p("t^2 + u^2 - 1 + x^3", 1);
        let v: f32 = e.at(&[0.5f32, 0.5, 0.5]).unwrap();
        assert!((v - (0.25 + 0.25 - 1.0 + 0.125)).abs() < 1e-6);
    }

    #[test]
    fn unbound_variable() {
        let e = Expr::add(Expr::Var(Var::Y(0)), Expr::Const(1.0));
        assert!(matches!(e.at(&[0.0f64, 1.0]), Err(EvalError::Unbound { .. })));
        let v: f64 = parse_image("y1 - 1/(y2 + 1)", 2)
            .unwrap()
            .eval(&Image(&[0.5, 1.0]))
            .unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn substitution_composes() {
        let f = parse_image("y2 - 1 + y1^3", 2).unwrap();
        let rho = [p("x", 1), p("t^2 + u^2", 1)];
        let composed = f.substitute(&|v| match v {
            Var::Y(k) => Some(rho[k].clone()),
            _ => None,
        });
        assert_eq!(composed, p("t^2 + u^2 - 1 + x^3", 1));
    }

    #[test]
    fn printing_negative_constant_reparses_to_value() {
        let e = Expr::Const(-2.5);
        assert_eq!(parse(&e.to_string(), 0).unwrap(), e);
        let neg = Expr::Neg(Box::new(Expr::Const(2.0)));
        assert_eq!(parse(&neg.to_string(), 0).unwrap(), neg);
    }
}
