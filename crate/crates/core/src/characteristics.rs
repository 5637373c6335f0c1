//! Integral curves of the characteristic field: `ṫ = α`, `ẋ_k = a_k`,
//! `u̇ = b`, integrated in the ODE parameter τ with an embedded
//! Dormand–Prince 5(4) pair.

use std::io::{self, Write};

use rayon::prelude::*;
use thiserror::Error;

use crate::expr::EvalError;
use crate::problem::{PhaseBox, VectorField};
use crate::scalar::Scalar;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const MAX_STEPS: usize = 1_000_000;
/// Share of `tol` allowed as local error per step.
const LOCAL_FRACTION: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    SpanEnd,
    LeftBox,
    /// Step budget exhausted before either of the above.
    StepFailure,
}

#[derive(Clone, Debug)]
pub struct CharacteristicCurve<T> {
    pub seed: Vec<T>,
    /// `(τ, state)` pairs; the first state is the seed.
    pub samples: Vec<(T, Vec<T>)>,
    pub termination: Termination,
    pub tol: T,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CharacteristicError {
    #[error("seed {seed:?} lies outside the box")]
    SeedOutsideBox { seed: Vec<f64> },
    #[error("tolerance {tol} outside [1e-13, 1e-3]")]
    InvalidTolerance { tol: f64 },
    #[error("step size underflow at tau = {tau}, last state {state:?}")]
    StepUnderflow { tau: f64, state: Vec<f64> },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

// Dormand–Prince 5(4) tableau.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// Fifth-order minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct Stepper<'a, T> {
    field: &'a VectorField,
    k: Vec<Vec<T>>,
    tmp: Vec<T>,
}

impl<'a, T: Scalar> Stepper<'a, T> {
    fn new(field: &'a VectorField, dim: usize) -> Self {
        Stepper {
            field,
            k: vec![vec![T::zero(); dim]; 7],
            tmp: vec![T::zero(); dim],
        }
    }

    /// One trial step from `y` (with `k[0] = f(y)` already set). Writes the
    /// fifth-order solution to `out` and returns the scaled error norm.
    fn attempt(&mut self, y: &[T], h: T, tol: T, out: &mut [T]) -> Result<T, EvalError> {
        let dim = y.len();
        for s in 1..7 {
            for i in 0..dim {
                let mut acc = T::zero();
                for j in 0..s {
                    acc = acc + T::lit(A[s][j]) * self.k[j][i];
                }
                self.tmp[i] = y[i] + h * acc;
            }
            self.field.eval_into(&self.tmp, &mut self.k[s])?;
        }
        // Stage 7 is evaluated at the fifth-order solution (FSAL).
        out.copy_from_slice(&self.tmp);
        let mut sum = T::zero();
        for i in 0..dim {
            let mut err = T::zero();
            for s in 0..7 {
                err = err + T::lit(E[s]) * self.k[s][i];
            }
            let scale = T::lit(LOCAL_FRACTION) * tol * (T::one() + y[i].abs().max(out[i].abs()));
            let r = h * err / scale;
            sum = sum + r * r;
        }
        Ok((sum / T::lit(dim as f64)).sqrt())
    }
}

fn hermite<T: Scalar>(y0: &[T], f0: &[T], y1: &[T], f1: &[T], h: T, theta: T, out: &mut [T]) {
    let one = T::one();
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    let t2 = theta * theta;
    let t3 = t2 * theta;
    let h00 = two * t3 - three * t2 + one;
    let h10 = t3 - two * t2 + theta;
    let h01 = three * t2 - two * t3;
    let h11 = t3 - t2;
    for i in 0..y0.len() {
        out[i] = h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i];
    }
}

fn to_f64<T: Scalar>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.to_f64_lossy()).collect()
}

/// Integrate the characteristic through `seed` over `τ ∈ [span.0, span.1]`
/// (either direction), stopping where the curve leaves `window`.
pub fn integrate_characteristic<T: Scalar>(
    field: &VectorField,
    window: &PhaseBox,
    seed: &[T],
    span: (T, T),
    tol: T,
) -> Result<CharacteristicCurve<T>, CharacteristicError> {
    let tol_f = tol.to_f64_lossy();
    if !(1e-13..=1e-3).contains(&tol_f) {
        return Err(CharacteristicError::InvalidTolerance { tol: tol_f });
    }
    if !window.contains(seed) {
        return Err(CharacteristicError::SeedOutsideBox { seed: to_f64(seed) });
    }
    let dim = seed.len();
    let (tau0, tau1) = span;
    let mut curve = CharacteristicCurve {
        seed: seed.to_vec(),
        samples: vec![(tau0, seed.to_vec())],
        termination: Termination::SpanEnd,
        tol,
    };
    let length = (tau1 - tau0).abs();
    if length == T::zero() {
        return Ok(curve);
    }
    let dir = (tau1 - tau0).signum();

    let mut stepper = Stepper::new(field, dim);
    let mut y = seed.to_vec();
    let mut f0 = vec![T::zero(); dim];
    field.eval_into(&y, &mut f0)?;
    let mut y_new = vec![T::zero(); dim];
    let mut probe = vec![T::zero(); dim];
    let mut tau = tau0;
    let mut h = (length * T::lit(1e-3)).min(T::lit(1e-2)).max(length * T::lit(1e-8));
    let eps = T::epsilon();

    for _ in 0..MAX_STEPS {
        let remaining = (tau1 - tau).abs();
        if remaining <= eps * (T::one() + tau1.abs()) {
            return Ok(curve);
        }
        if h >= remaining {
            h = remaining;
        }
        if h < T::lit(1e-14) * T::one().max(tau.abs()) {
            return Err(CharacteristicError::StepUnderflow {
                tau: tau.to_f64_lossy(),
                state: to_f64(&y),
            });
        }
        stepper.k[0].copy_from_slice(&f0);
        let err = stepper.attempt(&y, dir * h, tol, &mut y_new);
        let err = match err {
            Ok(e) if e.is_finite() => e,
            // Stages can stray into an undefined region on an oversized step.
            Ok(_) | Err(_) if h > length * T::lit(1e-12) => {
                h = h * T::lit(0.25);
                continue;
            }
            Ok(_) => T::infinity(),
            Err(e) => return Err(e.into()),
        };
        if err <= T::one() {
            let f1 = stepper.k[6].clone();
            let h_taken = dir * h;
            let tau_next = if h == remaining { tau1 } else { tau + h_taken };
            if !window.contains(&y_new) {
                // Bisect the Hermite interpolant for the first exit.
                let (mut lo, mut hi) = (T::zero(), T::one());
                for _ in 0..60 {
                    let mid = T::lit(0.5) * (lo + hi);
                    hermite(&y, &f0, &y_new, &f1, h_taken, mid, &mut probe);
                    if window.contains(&probe) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                stepper.k[0].copy_from_slice(&f0);
                match stepper.attempt(&y, lo * h_taken, tol, &mut probe) {
                    Ok(e) if e.is_finite() => {}
                    _ => hermite(&y, &f0, &y_new, &f1, h_taken, lo, &mut probe),
                }
                for (v, axis) in probe.iter_mut().zip(window.axes()) {
                    *v = v.max(T::lit(axis.lo)).min(T::lit(axis.hi));
                }
                curve.samples.push((tau + lo * h_taken, probe.clone()));
                curve.termination = Termination::LeftBox;
                return Ok(curve);
            }
            tau = tau_next;
            std::mem::swap(&mut y, &mut y_new);
            f0 = f1;
            curve.samples.push((tau, y.clone()));
        }
        let factor = if err == T::zero() {
            T::lit(5.0)
        } else {
            (T::lit(0.9) * err.powf(T::lit(-0.2))).max(T::lit(0.2)).min(T::lit(5.0))
        };
        h = h * factor;
    }
    curve.termination = Termination::StepFailure;
    Ok(curve)
}

/// One curve per seed, in seed order. Failures are returned per seed.
pub fn characteristic_strip<T: Scalar>(
    field: &VectorField,
    window: &PhaseBox,
    seeds: &[Vec<T>],
    span: (T, T),
    tol: T,
) -> Vec<Result<CharacteristicCurve<T>, CharacteristicError>> {
    seeds
        .par_iter()
        .map(|seed| integrate_characteristic(field, window, seed, span, tol))
        .collect()
}

impl<T: Scalar> CharacteristicCurve<T> {
    pub fn last_state(&self) -> &[T] {
        &self.samples.last().expect("curve has its seed").1
    }

    pub fn n(&self) -> usize {
        self.seed.len() - 2
    }

    /// CSV with header `tau,t,x1..xn,u`.
    pub fn write_csv(&self, mut w: impl Write) -> io::Result<()> {
        let n = self.n();
        let mut header = vec!["tau".to_string(), "t".to_string()];
        header.extend((1..=n).map(|k| format!("x{k}")));
        header.push("u".into());
        writeln!(w, "{}", header.join(","))?;
        for (tau, state) in &self.samples {
            write!(w, "{}", tau.to_f64_lossy())?;
            for v in state {
                write!(w, ",{}", v.to_f64_lossy())?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}
