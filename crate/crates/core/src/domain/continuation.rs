//! Point queries by continuation of `u` along a path in the `(t, x)` face,
//! starting on the initial set.

use std::fmt;

use crate::expr::EvalError;
use crate::integrals::ImplicitSolution;
use crate::linalg;
use crate::newton::{solve_u, NewtonOptions, RESIDUAL_TOL};
use crate::problem::{InitialData, PhaseBox};
use crate::scalar::Scalar;

use super::DomainError;

/// Relative threshold on `|F_u|` below which the implicit function theorem
/// is treated as failing.
pub const SINGULAR_TOL: f64 = 1e-6;
/// A stalled corrector counts as a fold when `|F_u|` is below this
/// relative level.
const STALL_TOL: f64 = 1e-3;
const CORRECTOR_ITERATIONS: usize = 12;
const MAX_STEPS: usize = 200_000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Verdict<T> {
    /// The point is in the domain; `u` is the continued solution value.
    Inside {
        u: T,
    },
    Outside,
    Boundary,
}

impl<T: Scalar> Verdict<T> {
    pub fn is_inside(&self) -> bool {
        matches!(self, Verdict::Inside { .. })
    }

    pub fn value(&self) -> Option<T> {
        match self {
            Verdict::Inside { u } => Some(*u),
            _ => None,
        }
    }
}

impl<T: Scalar> fmt::Display for Verdict<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Inside { u } => write!(f, "inside {}", u.to_f64_lossy()),
            Verdict::Outside => f.write_str("outside"),
            Verdict::Boundary => f.write_str("boundary"),
        }
    }
}

/// Everything a query needs: the implicit solution, the initial data that
/// anchors each path, and the window bounding the face.
#[derive(Clone, Copy)]
pub struct Continuation<'a> {
    pub sol: &'a ImplicitSolution,
    pub initial: &'a InitialData,
    pub window: &'a PhaseBox,
}

impl<'a> Continuation<'a> {
    pub fn new(sol: &'a ImplicitSolution, initial: &'a InitialData, window: &'a PhaseBox) -> Self {
        Continuation { sol, initial, window }
    }

    fn n(&self) -> usize {
        self.window.n()
    }

    pub fn singular_tol<T: Scalar>(&self, p: &[T]) -> Result<T, EvalError> {
        let g = self.sol.gradient(p)?;
        Ok(T::lit(SINGULAR_TOL) * (T::one() + linalg::norm(&g)))
    }

    /// Initial parameter nearest to `q`: each space coordinate clamped to
    /// the parameter range.
    pub fn nearest_base<T: Scalar>(&self, q: &[T]) -> Vec<T> {
        self.initial
            .s_range
            .iter()
            .zip(&q[1..])
            .map(|(r, x)| T::lit(r.clamp(x.to_f64_lossy())))
            .collect()
    }

    fn check_face<T: Scalar>(&self, q: &[T]) -> Result<(), DomainError> {
        let n = self.n();
        let inside = q.len() == n + 1
            && self.window.axes()[..=n]
                .iter()
                .zip(q)
                .all(|(a, v)| a.contains(v.to_f64_lossy()));
        if inside {
            Ok(())
        } else {
            Err(DomainError::QueryOutsideBox {
                point: q.iter().map(|v| v.to_f64_lossy()).collect(),
            })
        }
    }

    /// Continue from the initial point nearest to `q` along a straight
    /// segment.
    pub fn contains<T: Scalar>(&self, q: &[T]) -> Result<Verdict<T>, DomainError> {
        let s = self.nearest_base(q);
        self.contains_from(q, &s)
    }

    /// Continue from the initial point with parameter `s`.
    pub fn contains_from<T: Scalar>(&self, q: &[T], s: &[T]) -> Result<Verdict<T>, DomainError> {
        self.check_face(q)?;
        let g = self.initial.gamma_point(s)?;
        let n = self.n();
        self.along(&[g[..=n].to_vec(), q.to_vec()], g[n + 1])
    }

    /// Continue `u0` along the polyline `route`, whose first vertex must
    /// carry a root `F(route[0], u0) = 0`.
    pub fn along<T: Scalar>(&self, route: &[Vec<T>], u0: T) -> Result<Verdict<T>, DomainError> {
        let sol = self.sol;
        let lengths: Vec<T> = route
            .windows(2)
            .map(|w| linalg::norm(&w[1].iter().zip(&w[0]).map(|(b, a)| *b - *a).collect::<Vec<T>>()))
            .collect();
        let total = lengths.iter().fold(T::zero(), |s, v| s + *v);
        let face_diag = T::lit(
            self.window.axes()[..=self.n()]
                .iter()
                .map(|a| a.width() * a.width())
                .sum::<f64>()
                .sqrt(),
        );
        let max_step = face_diag / T::lit(32.0);
        let min_step = T::lit(1e-15) * (T::one() + total);
        let end_band = T::lit(1e-6) * (T::one() + total);
        let opts = NewtonOptions {
            tol: T::lit(RESIDUAL_TOL),
            max_iterations: CORRECTOR_ITERATIONS,
        };

        let state = |p: &[T], u: T| {
            let mut s = p.to_vec();
            s.push(u);
            s
        };
        let start = state(&route[0], u0);
        let fu0: T = sol.value_u(&start)?;
        if fu0.abs() < self.singular_tol(&start)? {
            return Err(DomainError::SingularStart);
        }
        let positive = fu0 > T::zero();

        let mut u = u0;
        let mut travelled = T::zero();
        let mut steps = 0usize;
        for (seg, len) in route.windows(2).zip(&lengths) {
            let (a, b) = (&seg[0], &seg[1]);
            if *len == T::zero() {
                continue;
            }
            let point = |lam: T| -> Vec<T> { a.iter().zip(b).map(|(x, y)| *x + lam * (*y - *x)).collect() };
            let dmax = (max_step / *len).min(T::one());
            let mut lam = T::zero();
            let mut dlam = dmax;
            while lam < T::one() {
                steps += 1;
                if steps > MAX_STEPS {
                    return Err(DomainError::PathLeftWindow {
                        point: point(lam).iter().map(|v| v.to_f64_lossy()).collect(),
                    });
                }
                let next = (lam + dlam).min(T::one());
                let p = point(next);
                let trial = solve_u(&sol.big_f, &sol.f_u, &p, u, opts).ok().filter(|r| {
                    (r.f_u > T::zero()) == positive
                        && r.u.is_finite()
                        && (r.u - u).abs() <= T::lit(0.5) * (T::one() + u.abs())
                });
                match trial {
                    Some(root) => {
                        let here = state(&p, root.u);
                        if root.f_u.abs() < self.singular_tol(&here)? {
                            let remaining = total - travelled - next * *len;
                            return Ok(if remaining <= end_band {
                                Verdict::Boundary
                            } else {
                                Verdict::Outside
                            });
                        }
                        lam = next;
                        u = root.u;
                        dlam = (dlam * T::lit(2.0)).min(dmax);
                    }
                    None => {
                        dlam = dlam * T::lit(0.5);
                        if dlam * *len < min_step {
                            let here = state(&point(lam), u);
                            let fu: T = sol.value_u(&here)?;
                            let scale = T::one() + linalg::norm(&sol.gradient(&here)?);
                            if fu.abs() < T::lit(STALL_TOL) * scale {
                                let remaining = total - travelled - lam * *len;
                                return Ok(if remaining <= end_band {
                                    Verdict::Boundary
                                } else {
                                    Verdict::Outside
                                });
                            }
                            return Err(DomainError::PathLeftWindow {
                                point: here.iter().map(|v| v.to_f64_lossy()).collect(),
                            });
                        }
                    }
                }
            }
            travelled = travelled + *len;
        }
        Ok(Verdict::Inside { u })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, parse_image};
    use crate::problem::Interval;

    fn setup(
        f: &str,
        n: usize,
        h: &str,
        s_range: Vec<Interval>,
        w: PhaseBox,
    ) -> (ImplicitSolution, InitialData, PhaseBox) {
        let sol = ImplicitSolution::from_expr(n, parse_image("y1", n + 1).unwrap(), parse(f, n).unwrap());
        let initial = InitialData {
            h: parse(h, n).unwrap(),
            s_range,
        };
        (sol, initial, w)
    }

    #[test]
    fn ode_blowup() {
        let (sol, init, w) = setup(
            "t + 1/u - 1",
            0,
            "1",
            vec![],
            PhaseBox::new(Interval::new(-5.0, 2.0), vec![], Interval::new(-10.0, 10.0)),
        );
        let c = Continuation::new(&sol, &init, &w);
        let v = c.contains(&[0.9f64]).unwrap();
        assert!((v.value().unwrap() - 10.0).abs() <= 1e-8);
        assert_eq!(c.contains(&[1.1f64]).unwrap(), Verdict::Outside);
        let v = c.contains(&[-4.0f64]).unwrap();
        assert!((v.value().unwrap() - 0.2).abs() <= 1e-12);
        assert!(matches!(
            c.contains(&[3.0f64]),
            Err(DomainError::QueryOutsideBox { .. })
        ));
    }

    #[test]
    fn cap_queries() {
        let (sol, init, w) = setup(
            "t^2 + u^2 - 1 + x^3",
            1,
            "sqrt(1 - x^3)",
            vec![Interval::new(-0.5, 0.5)],
            PhaseBox::new(
                Interval::new(-1.5, 1.5),
                vec![Interval::new(-1.0, 1.2)],
                Interval::new(-0.35, 1.55),
            ),
        );
        let c = Continuation::new(&sol, &init, &w);
        let v = c.contains(&[0.5f64, 0.5]).unwrap();
        assert!((v.value().unwrap() - 0.625f64.sqrt()).abs() <= 1e-10);
        assert_eq!(c.contains(&[1.2f64, 0.5]).unwrap(), Verdict::Outside);
        assert_eq!(c.contains(&[0.0f64, 1.1]).unwrap(), Verdict::Outside);
        // Three base points agree.
        let q = [0.3, -0.4];
        let vals: Vec<f64> = [-0.4, 0.0, 0.4]
            .iter()
            .map(|&s| c.contains_from(&q, &[s]).unwrap().value().unwrap())
            .collect();
        assert!(vals.iter().all(|v| (v - vals[0]).abs() <= 1e-12));
    }

    #[test]
    fn burgers_reciprocal() {
        let (sol, init, w) = setup(
            "u - 1/(x - u*t + 1)",
            1,
            "1/(x + 1)",
            vec![Interval::new(-0.1, 0.1)],
            PhaseBox::new(
                Interval::new(-0.5, 2.5),
                vec![Interval::new(-0.5, 2.5)],
                Interval::new(0.2, 3.0),
            ),
        );
        let c = Continuation::new(&sol, &init, &w);
        let v = c.contains(&[0.5f64, 1.0]).unwrap();
        assert!((v.value().unwrap() - (2.0 - 2f64.sqrt())).abs() <= 1e-8);
        assert_eq!(c.contains(&[2.0f64, 1.0]).unwrap(), Verdict::Outside);
    }

    #[test]
    fn boundary_verdict_at_fold() {
        let (sol, init, w) = setup(
            "t - (u - 1)^2 + 0.3",
            0,
            "1 - sqrt(0.3)",
            vec![],
            PhaseBox::new(Interval::new(-1.0, 1.0), vec![], Interval::new(-0.2, 2.1)),
        );
        let c = Continuation::new(&sol, &init, &w);
        assert_eq!(c.contains(&[-0.3f64 + 1e-13]).unwrap(), Verdict::Boundary);
        assert_eq!(c.contains(&[-0.5f64]).unwrap(), Verdict::Outside);
        assert!(c.contains(&[-0.2f64]).unwrap().is_inside());
    }

    #[test]
    fn display() {
        assert_eq!(Verdict::Inside { u: 0.5f64 }.to_string(), "inside 0.5");
        assert_eq!(Verdict::<f64>::Outside.to_string(), "outside");
        assert_eq!(Verdict::<f64>::Boundary.to_string(), "boundary");
    }
}
