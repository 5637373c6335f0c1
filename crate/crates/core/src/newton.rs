//! Damped Newton iterations: scalar root in `u` and small square systems.
//! Armijo backtracking halves the step until the residual norm decreases
//! sufficiently.

use thiserror::Error;

use crate::expr::{EvalError, Expr};
use crate::linalg;
use crate::scalar::Scalar;

pub const MAX_ITERATIONS: usize = 50;
pub const RESIDUAL_TOL: f64 = 1e-12;
const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 40;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NewtonError {
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("singular Jacobian at iteration {iteration}")]
    Singular { iteration: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Root<T> {
    pub u: T,
    /// `F_u` at the root.
    pub f_u: T,
    pub residual: T,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct NewtonOptions<T> {
    pub tol: T,
    pub max_iterations: usize,
}

impl<T: Scalar> Default for NewtonOptions<T> {
    fn default() -> Self {
        NewtonOptions {
            tol: T::lit(RESIDUAL_TOL),
            max_iterations: MAX_ITERATIONS,
        }
    }
}

/// Solve `F(t, x, u) = 0` for `u` starting from `seed`. `base` holds
/// `(t, x1..xn)`.
pub fn solve_u<T: Scalar>(
    f: &Expr,
    f_u: &Expr,
    base: &[T],
    seed: T,
    opts: NewtonOptions<T>,
) -> Result<Root<T>, NewtonError> {
    let mut state: Vec<T> = base.to_vec();
    state.push(seed);
    let last = state.len() - 1;
    let mut value = f.at(&state)?;
    for it in 0..=opts.max_iterations {
        if value.abs() <= opts.tol {
            let f_u = f_u.at(&state)?;
            return Ok(Root {
                u: state[last],
                f_u,
                residual: value.abs(),
                iterations: it,
            });
        }
        if it == opts.max_iterations {
            break;
        }
        let slope = f_u.at(&state)?;
        if slope == T::zero() || !slope.is_finite() {
            return Err(NewtonError::Singular { iteration: it });
        }
        let step = -value / slope;
        let u0 = state[last];
        let mut lambda = T::one();
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            state[last] = u0 + lambda * step;
            if let Ok(v) = f.at(&state) {
                if v.abs() <= (T::one() - T::lit(ARMIJO) * lambda) * value.abs() {
                    value = v;
                    accepted = true;
                    break;
                }
            }
            lambda = lambda * T::lit(0.5);
        }
        if !accepted {
            state[last] = u0;
            break;
        }
    }
    Err(NewtonError::NoConvergence {
        iterations: opts.max_iterations,
        residual: value.abs().to_f64_lossy(),
    })
}

/// Damped Newton for a square system `r(x) = 0` with Jacobian `jac`.
/// Converges when `‖r‖∞ ≤ tol`.
pub fn solve_system<T, R, J>(
    residual: R,
    jac: J,
    x0: &[T],
    opts: NewtonOptions<T>,
) -> Result<(Vec<T>, usize), NewtonError>
where
    T: Scalar,
    R: Fn(&[T]) -> Result<Vec<T>, EvalError>,
    J: Fn(&[T]) -> Result<Vec<Vec<T>>, EvalError>,
{
    let sup = |r: &[T]| r.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let mut x = x0.to_vec();
    let mut r = residual(&x)?;
    for it in 0..=opts.max_iterations {
        if sup(&r) <= opts.tol {
            return Ok((x, it));
        }
        if it == opts.max_iterations {
            break;
        }
        let a = jac(&x)?;
        let rhs: Vec<T> = r.iter().map(|v| -*v).collect();
        let step = linalg::solve(a, rhs).ok_or(NewtonError::Singular { iteration: it })?;
        let merit = linalg::norm(&r);
        let mut lambda = T::one();
        let mut accepted = false;
        let mut trial = x.clone();
        for _ in 0..MAX_HALVINGS {
            for i in 0..x.len() {
                trial[i] = x[i] + lambda * step[i];
            }
            if let Ok(rt) = residual(&trial) {
                if linalg::norm(&rt) <= (T::one() - T::lit(ARMIJO) * lambda) * merit {
                    x.copy_from_slice(&trial);
                    r = rt;
                    accepted = true;
                    break;
                }
            }
            lambda = lambda * T::lit(0.5);
        }
        if !accepted {
            break;
        }
    }
    Err(NewtonError::NoConvergence {
        iterations: opts.max_iterations,
        residual: sup(&r).to_f64_lossy(),
    })
}
