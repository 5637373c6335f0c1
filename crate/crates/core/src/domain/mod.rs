//! Projection of the initial component of `{F = 0} \ σ` onto the `(t, x)`
//! face, and membership queries against it.

mod continuation;

use std::collections::VecDeque;

use serde_json::{json, Value};
use thiserror::Error;

use crate::expr::EvalError;
use crate::locus::{Component, Grid, LevelSurface, SingularLocus};
use crate::newton::{solve_u, NewtonOptions};
use crate::scalar::Scalar;

pub use continuation::{Continuation, Verdict, SINGULAR_TOL};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("empty component: nothing to project")]
    EmptyComponent,
    #[error("projection not injective over the cell at {cell:?}: u-cells {rows:?}")]
    NotInjective { cell: Vec<f64>, rows: Vec<usize> },
    #[error("mask is not facet-connected ({reached} of {total} cells reachable)")]
    Disconnected { reached: usize, total: usize },
    #[error("initial point {point:?} projects outside the mask")]
    GammaNotMasked { point: Vec<f64> },
    #[error("query point {point:?} lies outside the box face")]
    QueryOutsideBox { point: Vec<f64> },
    #[error("path left surface window near {point:?}")]
    PathLeftWindow { point: Vec<f64> },
    #[error("F_u vanishes at the start of the continuation path")]
    SingularStart,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryKind {
    /// Facet between a masked and an unmasked cell.
    Edge,
    /// Projection of a σ point adjacent to the component.
    Sigma,
    /// Facet of a masked cell on the border of the window.
    Box,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryPoint<T> {
    pub point: Vec<T>,
    pub kind: BoundaryKind,
}

/// Cell mask over the `(t, x)` face of the window.
#[derive(Clone, Debug)]
pub struct MaximalDomain<T> {
    face: Grid,
    mask: Vec<bool>,
    /// Cells added by continuing past the `u` limits of the window, with
    /// the continued value at the cell center.
    extended: Vec<Option<T>>,
    pub boundary: Vec<BoundaryPoint<T>>,
    pub sigma_points: usize,
}

impl<T: Scalar> MaximalDomain<T> {
    pub fn face(&self) -> &Grid {
        &self.face
    }

    pub fn resolution(&self) -> usize {
        self.face.res()
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn masked_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    pub fn extended_count(&self) -> usize {
        self.extended.iter().filter(|e| e.is_some()).count()
    }

    /// Length (`n = 0`) or area (`n = 1`) covered by the mask.
    pub fn area(&self) -> f64 {
        let cell: f64 = (0..self.face.dim()).map(|k| self.face.step(k)).product();
        self.masked_count() as f64 * cell
    }

    /// Whether the cell holding `q` is masked. Points on a facet count as
    /// masked if any adjacent cell is.
    pub fn is_masked<P: Scalar>(&self, q: &[P]) -> bool {
        self.face.locate(q).iter().any(|&c| self.mask[c])
    }

    pub fn boundary_of(&self, kind: BoundaryKind) -> impl Iterator<Item = &[T]> {
        self.boundary
            .iter()
            .filter(move |b| b.kind == kind)
            .map(|b| b.point.as_slice())
    }

    /// Query with a straight path; if that fails to reach a masked cell,
    /// retry along a staircase of cell centers through the mask.
    pub fn contains(&self, ctx: &Continuation, q: &[T]) -> Result<Verdict<T>, DomainError> {
        self.contains_from(ctx, q, &ctx.nearest_base(q))
    }

    /// As [`Self::contains`], starting from the initial point with
    /// parameter `s`.
    pub fn contains_from(&self, ctx: &Continuation, q: &[T], s: &[T]) -> Result<Verdict<T>, DomainError> {
        let first = ctx.contains_from(q, s);
        let retry = matches!(first, Ok(Verdict::Outside) | Err(DomainError::PathLeftWindow { .. }));
        if !retry || !self.is_masked(q) {
            return first;
        }
        let g = ctx.initial.gamma_point(s)?;
        let n = self.face.dim() - 1;
        let base = g[..=n].to_vec();
        let (Some(&from), Some(&to)) = (
            self.face.locate(&base).iter().find(|&&c| self.mask[c]),
            self.face.locate(q).iter().find(|&&c| self.mask[c]),
        ) else {
            return first;
        };
        let interior: Vec<bool> = (0..self.mask.len())
            .map(|c| self.mask[c] && face_neighbors(&self.face, c).all(|nb| self.mask[nb]))
            .collect();
        for allowed in [&interior, &self.mask] {
            let Some(cells) = self.mask_path(allowed, from, to) else {
                continue;
            };
            let mut route = vec![base.clone()];
            route.extend(cells.iter().map(|&c| self.face.cell_center::<T>(c)));
            route.push(q.to_vec());
            if let Ok(v) = ctx.along(&route, g[n + 1]) {
                if v != Verdict::Outside {
                    return Ok(v);
                }
            }
        }
        first
    }

    /// Breadth-first path of facet-adjacent cells from `from` to `to`
    /// through cells marked in `allowed`; the endpoints need not be.
    fn mask_path(&self, allowed: &[bool], from: usize, to: usize) -> Option<Vec<usize>> {
        let mut prev = vec![usize::MAX; self.mask.len()];
        prev[from] = from;
        let mut queue = VecDeque::from([from]);
        while let Some(c) = queue.pop_front() {
            if c == to {
                let mut path = vec![to];
                let mut cur = to;
                while cur != from {
                    cur = prev[cur];
                    path.push(cur);
                }
                path.reverse();
                return Some(path);
            }
            for nb in face_neighbors(&self.face, c) {
                if (allowed[nb] || nb == to) && prev[nb] == usize::MAX {
                    prev[nb] = c;
                    queue.push_back(nb);
                }
            }
        }
        None
    }

    /// `{n, resolution, t, x?, mask, boundary, box_edges}`. Each mask row
    /// fixes the `t` index and lists alternating run lengths, starting with
    /// unmasked cells.
    pub fn to_json(&self) -> Value {
        let res = self.face.res();
        let rows: Vec<Vec<usize>> = self.mask.chunks(res).map(run_lengths).collect();
        let pts = |kinds: &[BoundaryKind]| -> Vec<Vec<f64>> {
            self.boundary
                .iter()
                .filter(|b| kinds.contains(&b.kind))
                .map(|b| b.point.iter().map(|v| v.to_f64_lossy()).collect())
                .collect()
        };
        let axes = self.face.axes();
        let mut out = json!({
            "n": self.face.dim() - 1,
            "resolution": res,
            "t": [axes[0].lo, axes[0].hi],
            "mask": rows,
            "boundary": pts(&[BoundaryKind::Edge, BoundaryKind::Sigma]),
            "box_edges": pts(&[BoundaryKind::Box]),
        });
        if axes.len() > 1 {
            out["x"] = json!([axes[1].lo, axes[1].hi]);
        }
        out
    }

    pub fn summary_json(&self) -> Value {
        json!({
            "area_of_mask": self.area(),
            "boundary_point_count": self.boundary.iter().filter(|b| b.kind != BoundaryKind::Box).count(),
            "sigma_point_count": self.sigma_points,
        })
    }
}

fn run_lengths(row: &[bool]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut current = false;
    let mut count = 0;
    for &m in row {
        if m == current {
            count += 1;
        } else {
            out.push(count);
            current = m;
            count = 1;
        }
    }
    out.push(count);
    out
}

fn face_neighbors(face: &Grid, c: usize) -> impl Iterator<Item = usize> + '_ {
    (0..face.dim()).flat_map(move |k| [false, true].into_iter().filter_map(move |up| face.neighbor(c, k, up)))
}

/// Project `component` to the face, extend it past the `u` limits of the
/// window by continuation, and assemble the boundary.
pub fn maximal_domain<T: Scalar>(
    ctx: &Continuation,
    surface: &LevelSurface<T>,
    sigma: &SingularLocus<T>,
    component: &Component,
) -> Result<MaximalDomain<T>, DomainError> {
    if component.is_empty() {
        return Err(DomainError::EmptyComponent);
    }
    let grid = surface.grid();
    let d = grid.dim();
    let res = grid.res();
    let face = Grid::new(&grid.axes()[..d - 1], res);
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); face.cell_count()];
    for &k in &component.members {
        let c = grid.cell_coords(surface.cells()[k]);
        rows[face.cell_id(&c[..d - 1])].push(c[d - 1]);
    }
    for (f, r) in rows.iter_mut().enumerate() {
        r.sort_unstable();
        if r.windows(2).any(|w| w[1] != w[0] + 1) {
            return Err(DomainError::NotInjective {
                cell: face.cell_center::<f64>(f),
                rows: r.clone(),
            });
        }
    }
    let mut mask: Vec<bool> = rows.iter().map(|r| !r.is_empty()).collect();
    let mut extended: Vec<Option<T>> = vec![None; mask.len()];

    extend_past_window(ctx, grid, &face, &rows, &mut mask, &mut extended)?;

    // Facet connectivity.
    let total = mask.iter().filter(|m| **m).count();
    let start = (0..mask.len()).find(|&c| mask[c]).expect("nonempty mask");
    let mut seen = vec![false; mask.len()];
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    let mut reached = 1;
    while let Some(c) = queue.pop_front() {
        for nb in face_neighbors(&face, c) {
            if mask[nb] && !seen[nb] {
                seen[nb] = true;
                reached += 1;
                queue.push_back(nb);
            }
        }
    }
    if reached != total {
        return Err(DomainError::Disconnected { reached, total });
    }
    for g in &ctx.sol.gamma_samples {
        let base = &g[..d - 1];
        if !face.locate(base).iter().any(|&c| mask[c]) {
            return Err(DomainError::GammaNotMasked { point: base.to_vec() });
        }
    }

    let mut boundary = Vec::new();
    for c in 0..mask.len() {
        if !mask[c] {
            continue;
        }
        let center = face.cell_center::<T>(c);
        for k in 0..face.dim() {
            for up in [false, true] {
                let mut p = center.clone();
                let half = T::lit(0.5 * face.step(k));
                p[k] = if up { p[k] + half } else { p[k] - half };
                let kind = match face.neighbor(c, k, up) {
                    None => BoundaryKind::Box,
                    Some(nb) if !mask[nb] => BoundaryKind::Edge,
                    Some(_) => continue,
                };
                boundary.push(BoundaryPoint { point: p, kind });
            }
        }
    }
    let mut sigma_points = 0;
    for p in &sigma.points {
        let near = grid.locate(&p.point).into_iter().any(|cell| {
            grid.vertex_neighborhood(cell)
                .into_iter()
                .any(|nb| surface.ordinal(nb).is_some_and(|k| component.contains[k]))
        });
        if near {
            sigma_points += 1;
            boundary.push(BoundaryPoint {
                point: p.point[..d - 1].to_vec(),
                kind: BoundaryKind::Sigma,
            });
        }
    }

    Ok(MaximalDomain {
        face,
        mask,
        extended,
        boundary,
        sigma_points,
    })
}

/// Columns whose component cells reach the top or bottom of the window are
/// open: the sheet continues outside it. Their unmasked face neighbours are
/// admitted when continuation from the open cell reaches them with a value
/// beyond the window's `u` range.
fn extend_past_window<T: Scalar>(
    ctx: &Continuation,
    grid: &Grid,
    face: &Grid,
    rows: &[Vec<usize>],
    mask: &mut [bool],
    extended: &mut [Option<T>],
) -> Result<(), DomainError> {
    let d = grid.dim();
    let res = grid.res();
    let u_axis = grid.axes()[d - 1];
    let sol = ctx.sol;
    let gamma_positive = match sol.gamma_samples.first() {
        Some(g) => sol.value_u::<f64>(g)? > 0.0,
        None => return Ok(()),
    };

    let mut queue: VecDeque<(usize, T)> = VecDeque::new();
    for (f, r) in rows.iter().enumerate() {
        let (Some(&lo), Some(&hi)) = (r.first(), r.last()) else {
            continue;
        };
        if lo != 0 && hi != res - 1 {
            continue;
        }
        let seed = T::lit(grid.coordinate(d - 1, 0.5 * (lo + hi) as f64 + 0.5));
        let center = face.cell_center::<T>(f);
        let Ok(root) = solve_u(&sol.big_f, &sol.f_u, &center, seed, NewtonOptions::default()) else {
            continue;
        };
        if (root.f_u > T::zero()) == gamma_positive {
            queue.push_back((f, root.u));
        }
    }
    while let Some((c, u)) = queue.pop_front() {
        let from = face.cell_center::<T>(c);
        for nb in face_neighbors(face, c).collect::<Vec<_>>() {
            if mask[nb] {
                continue;
            }
            let to = face.cell_center::<T>(nb);
            let Ok(Verdict::Inside { u: v }) = ctx.along(&[from.clone(), to], u) else {
                continue;
            };
            if u_axis.contains(v.to_f64_lossy()) {
                continue;
            }
            mask[nb] = true;
            extended[nb] = Some(v);
            queue.push_back((nb, v));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, parse_image};
    use crate::integrals::ImplicitSolution;
    use crate::locus::{extract_singular_locus, extract_surface, split_component, SigmaOptions};
    use crate::problem::{InitialData, Interval, PhaseBox};

    struct Case {
        sol: ImplicitSolution,
        initial: InitialData,
        window: PhaseBox,
    }

    impl Case {
        fn new(f: &str, n: usize, h: &str, s_range: Vec<Interval>, window: PhaseBox) -> Self {
            let mut sol = ImplicitSolution::from_expr(n, parse_image("y1", n + 1).unwrap(), parse(f, n).unwrap());
            let initial = InitialData {
                h: parse(h, n).unwrap(),
                s_range,
            };
            sol.gamma_samples = initial.initial_set_samples(9).unwrap();
            Case { sol, initial, window }
        }

        fn domain(&self, res: usize) -> Result<MaximalDomain<f64>, DomainError> {
            let surface: LevelSurface<f64> = extract_surface(&self.sol.big_f, &self.window, res).unwrap();
            let sigma = extract_singular_locus(&self.sol, &surface, &self.window, SigmaOptions::default());
            let comp = split_component(&surface, &sigma, &self.sol.gamma_samples).unwrap();
            maximal_domain(
                &Continuation::new(&self.sol, &self.initial, &self.window),
                &surface,
                &sigma,
                &comp,
            )
        }
    }

    #[test]
    fn ode_half_line() {
        let case = Case::new(
            "t + 1/u - 1",
            0,
            "1",
            vec![],
            PhaseBox::new(Interval::new(-5.0, 2.0), vec![], Interval::new(-10.0, 10.0)),
        );
        let dom = case.domain(256).unwrap();
        let h = 7.0 / 256.0;
        let edges: Vec<f64> = dom.boundary_of(BoundaryKind::Edge).map(|p| p[0]).collect();
        assert_eq!(edges.len(), 1);
        assert!((edges[0] - 1.0).abs() <= h);
        assert!(dom.extended_count() > 0);
        assert!(dom.is_masked(&[-4.9]) && !dom.is_masked(&[1.5]));
    }

    #[test]
    fn constant_data_fills_face() {
        let case = Case::new(
            "u - 0.5",
            1,
            "0.5",
            vec![Interval::new(-0.1, 0.1)],
            PhaseBox::new(
                Interval::new(-1.0, 1.0),
                vec![Interval::new(-1.0, 1.0)],
                Interval::new(0.0, 1.0),
            ),
        );
        let dom = case.domain(16).unwrap();
        assert_eq!(dom.masked_count(), 256);
        assert!((dom.area() - 4.0).abs() < 1e-12);
        assert_eq!(dom.boundary_of(BoundaryKind::Edge).count(), 0);
        assert_eq!(dom.boundary_of(BoundaryKind::Box).count(), 64);
        let js = dom.to_json();
        assert_eq!(js["mask"][0], json!([0, 16]));
        assert_eq!(dom.summary_json()["boundary_point_count"], json!(0));
    }

    #[test]
    fn cap_domain() {
        let case = Case::new(
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
        let dom = case.domain(48).unwrap();
        let diag = dom.face().cell_diagonal();
        for p in dom.boundary_of(BoundaryKind::Edge) {
            let phi: f64 = 1.0 - p[0] * p[0] - p[1].powi(3);
            let grad = (4.0 * p[0] * p[0] + 9.0 * p[1].powi(4)).sqrt();
            assert!(phi.abs() / grad <= diag, "{p:?}");
        }
        for p in dom.boundary_of(BoundaryKind::Sigma) {
            assert!((1.0 - p[0] * p[0] - p[1].powi(3)).abs() < 1e-9);
        }
        let ctx = Continuation::new(&case.sol, &case.initial, &case.window);
        let v = dom.contains(&ctx, &[0.5, 0.5]).unwrap();
        assert!((v.value().unwrap() - 0.625f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn run_length_rows() {
        assert_eq!(run_lengths(&[false, true, true, false]), vec![1, 2, 1]);
        assert_eq!(run_lengths(&[true, true]), vec![0, 2]);
        assert_eq!(run_lengths(&[false]), vec![1]);
    }
}
