use std::collections::HashMap;

use rayon::prelude::*;

use super::{sign_changes, LevelSurface};
use crate::integrals::ImplicitSolution;
use crate::linalg;
use crate::newton::{solve_system, NewtonOptions, MAX_ITERATIONS, RESIDUAL_TOL};
use crate::problem::PhaseBox;
use crate::scalar::Scalar;

/// Residual bound that every reported σ point satisfies for `F` and `F_u`.
pub const SIGMA_RESIDUAL: f64 = 1e-10;
/// Relative bound on the smallest singular value of `[∇F; ∇F_u]` below
/// which a point is a higher-order fold.
pub const DEGENERACY_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug)]
pub struct SigmaOptions {
    pub newton_tol: f64,
    /// Continuation step as a fraction of the cell diagonal.
    pub step_fraction: f64,
}

impl Default for SigmaOptions {
    fn default() -> Self {
        SigmaOptions {
            newton_tol: RESIDUAL_TOL,
            step_fraction: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SigmaPoint<T> {
    pub point: Vec<T>,
    /// Unit tangent of the fold curve; absent for isolated points.
    pub tangent: Option<Vec<T>>,
    pub degenerate: bool,
}

/// Polished points of `{F = 0, F_u = 0}` inside the box.
#[derive(Clone, Debug)]
pub struct SingularLocus<T> {
    pub points: Vec<SigmaPoint<T>>,
    /// Index sequences into `points` following each traced curve.
    pub polylines: Vec<Vec<usize>>,
    /// Per crossing cell (by ordinal): does `F_u` change sign over it?
    pub fu_sign_change: Vec<bool>,
    pub seeds: usize,
    /// Seeds whose Newton polish failed or wandered off.
    pub dropped_seeds: usize,
    /// Seeds absorbed by an existing point within one cell diagonal.
    pub merged_seeds: usize,
}

impl<T: Scalar> SingularLocus<T> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

struct Fold<'a> {
    sol: &'a ImplicitSolution,
    dim: usize,
}

impl Fold<'_> {
    fn residual<T: Scalar>(&self, p: &[T]) -> Result<[T; 2], crate::expr::EvalError> {
        Ok([self.sol.value(p)?, self.sol.value_u(p)?])
    }

    fn jacobian<T: Scalar>(&self, p: &[T]) -> Result<Vec<Vec<T>>, crate::expr::EvalError> {
        Ok(vec![self.sol.gradient(p)?, self.sol.gradient_u(p)?])
    }

    fn is_degenerate<T: Scalar>(&self, jac: &[Vec<T>]) -> bool {
        let scale = T::one() + linalg::norm(&jac[0]) + linalg::norm(&jac[1]);
        linalg::min_singular_value(jac) < T::lit(DEGENERACY_TOL) * scale
    }

    fn tangent<T: Scalar>(&self, jac: &[Vec<T>]) -> Option<Vec<T>> {
        if self.dim != 3 {
            return None;
        }
        let c = linalg::cross(&jac[0], &jac[1]);
        let len = linalg::norm(&c);
        (len > T::zero() && len.is_finite()).then(|| c.iter().map(|v| *v / len).collect())
    }

    /// Newton on `(F, F_u)` in two of the coordinates, the rest frozen.
    fn polish<T: Scalar>(&self, start: &[T], free: [usize; 2], tol: T) -> Option<Vec<T>> {
        let embed = |z: &[T]| {
            let mut p = start.to_vec();
            p[free[0]] = z[0];
            p[free[1]] = z[1];
            p
        };
        let opts = NewtonOptions {
            tol,
            max_iterations: MAX_ITERATIONS,
        };
        let (z, _) = solve_system(
            |z: &[T]| self.residual(&embed(z)).map(|r| r.to_vec()),
            |z: &[T]| {
                let j = self.jacobian(&embed(z))?;
                Ok(j.iter().map(|row| vec![row[free[0]], row[free[1]]]).collect())
            },
            &[start[free[0]], start[free[1]]],
            opts,
        )
        .ok()?;
        Some(embed(&z))
    }

    /// Pseudo-arclength corrector: `(F, F_u)` plus orthogonality to the
    /// predictor direction.
    fn correct<T: Scalar>(&self, pred: &[T], dir: &[T], tol: T) -> Option<Vec<T>> {
        let opts = NewtonOptions {
            tol,
            max_iterations: 20,
        };
        let plane = |p: &[T]| {
            p.iter()
                .zip(pred)
                .zip(dir)
                .fold(T::zero(), |s, ((a, b), d)| s + (*a - *b) * *d)
        };
        solve_system(
            |p: &[T]| {
                let r = self.residual(p)?;
                Ok(vec![r[0], r[1], plane(p)])
            },
            |p: &[T]| {
                let mut j = self.jacobian(p)?;
                j.push(dir.to_vec());
                Ok(j)
            },
            pred,
            opts,
        )
        .ok()
        .map(|(p, _)| p)
    }
}

/// Spatial hash of accepted points, bucketed by grid cell.
struct PointIndex {
    step: Vec<f64>,
    lo: Vec<f64>,
    radius: f64,
    buckets: HashMap<Vec<i64>, Vec<Vec<f64>>>,
}

impl PointIndex {
    fn key(&self, p: &[f64]) -> Vec<i64> {
        p.iter()
            .zip(&self.lo)
            .zip(&self.step)
            .map(|((v, lo), h)| ((v - lo) / h).floor() as i64)
            .collect()
    }

    fn insert(&mut self, p: Vec<f64>) {
        self.buckets.entry(self.key(&p)).or_default().push(p);
    }

    fn near(&self, p: &[f64]) -> bool {
        let k = self.key(p);
        let d = k.len();
        let reach = 2i64;
        let span = (2 * reach + 1) as usize;
        (0..span.pow(d as u32)).any(|code| {
            let mut rest = code;
            let key: Vec<i64> = k
                .iter()
                .map(|&c| {
                    let off = (rest % span) as i64 - reach;
                    rest /= span;
                    c + off
                })
                .collect();
            self.buckets.get(&key).is_some_and(|list| {
                list.iter()
                    .any(|q| q.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() <= self.radius)
            })
        })
    }
}

/// Seeds are crossing cells over which `F_u` also changes sign. Each seed
/// is polished onto the fold; for a curve (`n = 1`) the first point found is
/// continued in both directions.
pub fn extract_singular_locus<T: Scalar>(
    sol: &ImplicitSolution,
    surface: &LevelSurface<T>,
    window: &PhaseBox,
    opts: SigmaOptions,
) -> SingularLocus<T> {
    let grid = surface.grid();
    let dim = grid.dim();
    let fold = Fold { sol, dim };
    let tol = T::lit(opts.newton_tol);

    let fu_sign_change: Vec<bool> = surface
        .cells()
        .par_iter()
        .map(|&cell| {
            let vals: Result<Vec<T>, _> = grid
                .cell_vertices(cell)
                .iter()
                .map(|&v| sol.value_u::<T>(&grid.vertex_point(v)))
                .collect();
            match vals {
                Ok(v) => sign_changes(v),
                Err(_) => true,
            }
        })
        .collect();

    let diag = grid.cell_diagonal();
    let seed_cells: Vec<usize> = (0..surface.len()).filter(|&k| fu_sign_change[k]).collect();
    let polished: Vec<Option<(Vec<T>, bool)>> = seed_cells
        .par_iter()
        .map(|&k| {
            let center = grid.cell_center::<T>(surface.cells()[k]);
            let free = choose_free(&fold, &center)?;
            let p = fold.polish(&center, free, tol)?;
            let r = fold.residual(&p).ok()?;
            let dist = linalg::norm(&p.iter().zip(&center).map(|(a, b)| *a - *b).collect::<Vec<T>>());
            let ok = r.iter().all(|v| v.abs() <= T::lit(SIGMA_RESIDUAL))
                && window.contains(&p)
                && dist.to_f64_lossy() <= 2.0 * diag;
            if !ok {
                return None;
            }
            let jac = fold.jacobian(&p).ok()?;
            Some((p, fold.is_degenerate(&jac)))
        })
        .collect();

    let mut index = PointIndex {
        step: (0..dim).map(|k| grid.step(k)).collect(),
        lo: grid.axes().iter().map(|a| a.lo).collect(),
        radius: diag,
        buckets: HashMap::new(),
    };
    let mut locus = SingularLocus {
        points: Vec::new(),
        polylines: Vec::new(),
        fu_sign_change,
        seeds: seed_cells.len(),
        dropped_seeds: 0,
        merged_seeds: 0,
    };
    let as_f64 = |p: &[T]| p.iter().map(|v| v.to_f64_lossy()).collect::<Vec<f64>>();

    for item in polished {
        let Some((p, degenerate)) = item else {
            locus.dropped_seeds += 1;
            continue;
        };
        if index.near(&as_f64(&p)) {
            locus.merged_seeds += 1;
            continue;
        }
        let jac = fold.jacobian(&p).expect("polished point evaluates");
        let tangent = if degenerate { None } else { fold.tangent(&jac) };
        let start = locus.points.len();
        index.insert(as_f64(&p));
        locus.points.push(SigmaPoint {
            point: p.clone(),
            tangent: tangent.clone(),
            degenerate,
        });
        let Some(tau) = tangent else {
            continue;
        };
        let h = T::lit(opts.step_fraction * diag);
        let max_steps = 16 * grid.res() * dim;
        let forward = trace(&fold, window, &p, &tau, h, tol, max_steps);
        let neg: Vec<T> = tau.iter().map(|v| -*v).collect();
        let closed = forward.closed;
        let backward = if closed {
            Trace {
                points: Vec::new(),
                closed: false,
            }
        } else {
            trace(&fold, window, &p, &neg, h, tol, max_steps)
        };
        let mut line: Vec<usize> = Vec::new();
        for q in backward.points.into_iter().rev() {
            index.insert(as_f64(&q.point));
            line.push(locus.points.len());
            locus.points.push(q);
        }
        line.push(start);
        for q in forward.points {
            index.insert(as_f64(&q.point));
            line.push(locus.points.len());
            locus.points.push(q);
        }
        if closed {
            line.push(start);
        }
        locus.polylines.push(line);
    }
    locus
}

/// Pick the two coordinates whose 2×2 minor of `[∇F; ∇F_u]` is largest.
fn choose_free<T: Scalar>(fold: &Fold, p: &[T]) -> Option<[usize; 2]> {
    let jac = fold.jacobian(p).ok()?;
    let d = fold.dim;
    let mut best: Option<([usize; 2], T)> = None;
    for i in 0..d {
        for j in i + 1..d {
            let det = (jac[0][i] * jac[1][j] - jac[0][j] * jac[1][i]).abs();
            if det.is_finite() && best.is_none_or(|(_, b)| det > b) {
                best = Some(([i, j], det));
            }
        }
    }
    best.map(|(f, _)| f)
}

struct Trace<T> {
    points: Vec<SigmaPoint<T>>,
    closed: bool,
}

fn trace<T: Scalar>(
    fold: &Fold,
    window: &PhaseBox,
    start: &[T],
    dir: &[T],
    h0: T,
    tol: T,
    max_steps: usize,
) -> Trace<T> {
    let mut out = Trace {
        points: Vec::new(),
        closed: false,
    };
    let mut p = start.to_vec();
    let mut tau = dir.to_vec();
    let mut h = h0;
    let h_min = h0 / T::lit(64.0);
    let dot = |a: &[T], b: &[T]| a.iter().zip(b).fold(T::zero(), |s, (x, y)| s + *x * *y);
    while out.points.len() < max_steps {
        let pred: Vec<T> = p.iter().zip(&tau).map(|(a, d)| *a + h * *d).collect();
        let Some(q) = fold.correct(&pred, &tau, tol) else {
            if h <= h_min {
                break;
            }
            h = h * T::lit(0.5);
            continue;
        };
        let step = linalg::norm(&q.iter().zip(&p).map(|(a, b)| *a - *b).collect::<Vec<T>>());
        if step > T::lit(3.0) * h || step == T::zero() {
            if h <= h_min {
                break;
            }
            h = h * T::lit(0.5);
            continue;
        }
        if !window.contains(&q) {
            break;
        }
        let Ok(jac) = fold.jacobian(&q) else {
            break;
        };
        if fold.is_degenerate(&jac) {
            out.points.push(SigmaPoint {
                point: q,
                tangent: None,
                degenerate: true,
            });
            break;
        }
        let Some(mut t) = fold.tangent(&jac) else {
            break;
        };
        if dot(&t, &tau) < T::zero() {
            t.iter_mut().for_each(|v| *v = -*v);
        }
        let back = linalg::norm(&q.iter().zip(start).map(|(a, b)| *a - *b).collect::<Vec<T>>());
        if out.points.len() >= 3 && back < h0 {
            out.closed = true;
            break;
        }
        out.points.push(SigmaPoint {
            point: q.clone(),
            tangent: Some(t.clone()),
            degenerate: false,
        });
        p = q;
        tau = t;
        h = (h * T::lit(2.0)).min(h0);
    }
    out
}
