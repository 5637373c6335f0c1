//! Closed-form analysis of `u_t + a(u) u_x = 0`.
//!
//! Characteristics are the lines `x = s + g(s) t` with `g = a∘h`. Neighbouring
//! lines meet at `t*(s) = −1/g′(s)` whenever `g′(s) < 0`; these points trace
//! the envelope whose earliest time is the blow-up time.

use std::io::{self, Write};

use thiserror::Error;

use crate::expr::{EvalError, Expr, Var};
use crate::problem::Interval;
use crate::scalar::Scalar;

pub const COARSE_SAMPLES: usize = 10_000;
pub const REFINE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConsLawError {
    #[error("characteristic speed must depend on u only")]
    SpeedNotInU,
    #[error("initial data must depend on x only")]
    DataNotInX,
    #[error("no singular time at s = {s}: g'(s) >= 0")]
    NoSingularTime { s: f64 },
    #[error("vertical tangent of the envelope at s = {s}{}", if *degenerate { " (envelope degenerates to a point)" } else { "" })]
    VerticalTangent { s: f64, degenerate: bool },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Scalar conservation law in one space dimension. Functions of the
/// parameter `s` are stored as expressions in `x1`.
#[derive(Clone, Debug)]
pub struct ConservationLaw {
    pub a: Expr,
    pub h: Expr,
    pub g: Expr,
    pub g_prime: Expr,
    t_star: Expr,
    x_star: Expr,
    dt_star: Expr,
    dx_star: Expr,
    d2t_star: Expr,
    d2x_star: Expr,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CharacteristicLine<T> {
    pub s: T,
    /// `dx/dt = g(s)`.
    pub speed: T,
    pub u: T,
}

impl<T: Scalar> CharacteristicLine<T> {
    pub fn x_at(&self, t: T) -> T {
        self.s + self.speed * t
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnvelopePoint<T> {
    pub s: T,
    pub t: T,
    pub x: T,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BlowUp<T> {
    At { t: T, s: T },
    Never,
}

impl<T: Scalar> BlowUp<T> {
    pub fn time(&self) -> Option<T> {
        match self {
            BlowUp::At { t, .. } => Some(*t),
            BlowUp::Never => None,
        }
    }
}

const S: Var = Var::X(0);

impl ConservationLaw {
    pub fn new(a: Expr, h: Expr) -> Result<Self, ConsLawError> {
        if a.variables().iter().any(|v| *v != Var::U) {
            return Err(ConsLawError::SpeedNotInU);
        }
        if h.variables().iter().any(|v| *v != S) {
            return Err(ConsLawError::DataNotInX);
        }
        let g = a.substitute(&|v| (v == Var::U).then(|| h.clone()));
        let g_prime = g.diff(S);
        let t_star = Expr::div(Expr::Const(-1.0), g_prime.clone());
        let x_star = Expr::add(Expr::Var(S), Expr::mul(g.clone(), t_star.clone()));
        let dt_star = t_star.diff(S);
        let dx_star = x_star.diff(S);
        let d2t_star = dt_star.diff(S);
        let d2x_star = dx_star.diff(S);
        Ok(ConservationLaw {
            a,
            h,
            g,
            g_prime,
            t_star,
            x_star,
            dt_star,
            dx_star,
            d2t_star,
            d2x_star,
        })
    }

    fn at<T: Scalar>(e: &Expr, s: T) -> Result<T, EvalError> {
        e.at(&[T::zero(), s, T::zero()])
    }

    pub fn characteristic_line<T: Scalar>(&self, s: T) -> Result<CharacteristicLine<T>, ConsLawError> {
        Ok(CharacteristicLine {
            s,
            speed: Self::at(&self.g, s)?,
            u: Self::at(&self.h, s)?,
        })
    }

    /// `t*(s) = −1/g′(s)` when `g′(s) < 0`.
    pub fn singular_time<T: Scalar>(&self, s: T) -> Result<Option<T>, ConsLawError> {
        let gp: T = Self::at(&self.g_prime, s)?;
        Ok((gp < T::zero()).then(|| -T::one() / gp))
    }

    pub fn envelope_point<T: Scalar>(&self, s: T) -> Result<Option<EnvelopePoint<T>>, ConsLawError> {
        let Some(t) = self.singular_time(s)? else {
            return Ok(None);
        };
        let g: T = Self::at(&self.g, s)?;
        Ok(Some(EnvelopePoint { s, t, x: s + g * t }))
    }

    /// Envelope points for `samples` uniform values of `s`, keeping those
    /// where `t*` exists.
    pub fn envelope<T: Scalar>(
        &self,
        s_range: Interval,
        samples: usize,
    ) -> Result<Vec<EnvelopePoint<T>>, ConsLawError> {
        let mut out = Vec::new();
        for k in 0..samples {
            let s = T::lit(s_range.lattice(k, samples));
            if let Some(p) = self.envelope_point(s)? {
                out.push(p);
            }
        }
        Ok(out)
    }

    fn t_star_or_inf<T: Scalar>(&self, s: T) -> T {
        match self.singular_time(s) {
            Ok(Some(t)) => t,
            _ => T::infinity(),
        }
    }

    /// Infimum of `t*` over `s_range`: coarse scan, then golden-section
    /// search around the best sample.
    pub fn blowup_time<T: Scalar>(&self, s_range: Interval) -> BlowUp<T> {
        let n = COARSE_SAMPLES;
        let mut best = (T::infinity(), 0usize);
        for k in 0..n {
            let t = self.t_star_or_inf(T::lit(s_range.lattice(k, n)));
            if t < best.0 {
                best = (t, k);
            }
        }
        if !best.0.is_finite() {
            return BlowUp::Never;
        }
        let k = best.1;
        let mut lo = T::lit(s_range.lattice(k.saturating_sub(1), n));
        let mut hi = T::lit(s_range.lattice((k + 1).min(n - 1), n));
        let mut result = (best.0, T::lit(s_range.lattice(k, n)));

        let inv_phi = T::lit((5f64.sqrt() - 1.0) / 2.0);
        let mut c = hi - inv_phi * (hi - lo);
        let mut d = lo + inv_phi * (hi - lo);
        let mut fc = self.t_star_or_inf(c);
        let mut fd = self.t_star_or_inf(d);
        let tol = T::lit(REFINE_TOL).max(T::epsilon());
        while (hi - lo).abs() > tol {
            if fc < fd {
                hi = d;
                d = c;
                fd = fc;
                c = hi - inv_phi * (hi - lo);
                fc = self.t_star_or_inf(c);
            } else {
                lo = c;
                c = d;
                fc = fd;
                d = lo + inv_phi * (hi - lo);
                fd = self.t_star_or_inf(d);
            }
        }
        for s in [lo, hi, T::lit(0.5) * (lo + hi)] {
            let t = self.t_star_or_inf(s);
            if t < result.0 {
                result = (t, s);
            }
        }
        BlowUp::At {
            t: result.0,
            s: result.1,
        }
    }

    /// `dx*/dt*` along the envelope. Where `dt*/ds = 0` the ratio of second
    /// derivatives is used; if that is also `0/0` the envelope is a point.
    pub fn propagation_speed<T: Scalar>(&self, s: T) -> Result<T, ConsLawError> {
        if self.singular_time(s)?.is_none() {
            return Err(ConsLawError::NoSingularTime { s: s.to_f64_lossy() });
        }
        let t_star: T = Self::at(&self.t_star, s)?;
        let x_star: T = Self::at(&self.x_star, s)?;
        let dt: T = Self::at(&self.dt_star, s)?;
        let dx: T = Self::at(&self.dx_star, s)?;
        let eps = T::lit(1e-10);
        let small = |v: T, scale: T| v.abs() <= eps * (T::one() + scale.abs());
        if !small(dt, t_star) {
            return Ok(dx / dt);
        }
        let s_f = s.to_f64_lossy();
        if !small(dx, x_star) {
            return Err(ConsLawError::VerticalTangent {
                s: s_f,
                degenerate: false,
            });
        }
        let d2t: T = Self::at(&self.d2t_star, s)?;
        let d2x: T = Self::at(&self.d2x_star, s)?;
        if !small(d2t, t_star) {
            return Ok(d2x / d2t);
        }
        Err(ConsLawError::VerticalTangent {
            s: s_f,
            degenerate: small(d2x, x_star),
        })
    }

    /// CSV with header `s,t,x,speed`; `speed` is empty where undefined.
    pub fn write_envelope_csv<T: Scalar>(&self, points: &[EnvelopePoint<T>], mut w: impl Write) -> io::Result<()> {
        writeln!(w, "s,t,x,speed")?;
        for p in points {
            let speed = match self.propagation_speed(p.s) {
                Ok(v) => v.to_f64_lossy().to_string(),
                Err(_) => String::new(),
            };
            writeln!(
                w,
                "{},{},{},{}",
                p.s.to_f64_lossy(),
                p.t.to_f64_lossy(),
                p.x.to_f64_lossy(),
                speed
            )?;
        }
        Ok(())
    }
}
