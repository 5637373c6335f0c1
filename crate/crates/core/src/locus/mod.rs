//! Discretized zero set `Σ = {F = 0}` and its fold locus
//! `σ = {F = 0, F_u = 0}` for one or two space-time variables plus `u`.
//!
//! [`extract_surface`] samples `F` on a uniform grid and keeps the cells
//! across which it changes sign through a genuine root. [`extract_singular_locus`]
//! polishes seeds where `F_u` also changes sign, and [`split_component`]
//! flood-fills the crossing cells from the initial set with the singular
//! cells removed.

mod component;
mod grid;
mod patch;
mod sigma;

use std::collections::HashMap;
use std::io::{self, Write};

use rayon::prelude::*;
use thiserror::Error;

use crate::expr::Expr;
use crate::problem::PhaseBox;
use crate::scalar::Scalar;

pub use component::{split_component, Component, ComponentError};
pub use grid::Grid;
pub use patch::{cell_patch, Patch};
pub use sigma::{extract_singular_locus, SigmaOptions, SigmaPoint, SingularLocus};

pub const MIN_RESOLUTION: usize = 16;
pub const DEFAULT_RESOLUTION_1D: usize = 1024;
pub const DEFAULT_RESOLUTION_2D: usize = 128;
/// Bisection depth of the root-versus-pole test on a sign-changing edge.
const POLE_BISECTIONS: usize = 20;

pub fn default_resolution(n: usize) -> usize {
    if n == 0 {
        DEFAULT_RESOLUTION_1D
    } else {
        DEFAULT_RESOLUTION_2D
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SurfaceError {
    #[error("resolution {0} is below the minimum of {MIN_RESOLUTION} cells per axis")]
    ResolutionTooLow(usize),
    #[error("surface extraction supports n = 0 or n = 1, got n = {0}")]
    UnsupportedDimension(usize),
    #[error("the box has an empty or unbounded axis")]
    DegenerateBox,
}

/// Crossing cells of `{F = 0}` on a uniform grid.
#[derive(Clone, Debug)]
pub struct LevelSurface<T> {
    grid: Grid,
    values: Vec<T>,
    cells: Vec<usize>,
    ordinal: HashMap<usize, usize>,
    patches: Vec<Patch<T>>,
    adjacency: Vec<Vec<usize>>,
    /// Vertices where `F` failed to evaluate.
    pub invalid_vertices: usize,
    /// Cells skipped because one of their vertices is invalid.
    pub excluded_cells: usize,
    /// Cells whose only sign changes come from poles of `F`.
    pub pole_cells: usize,
}

pub(crate) fn sign_changes<T: Scalar>(values: impl IntoIterator<Item = T>) -> bool {
    let (mut neg, mut pos) = (false, false);
    for v in values {
        if v < T::zero() {
            neg = true;
        } else {
            pos = true;
        }
    }
    neg && pos
}

enum CellClass {
    Excluded,
    Pole,
    Crossing,
}

/// Sample `f` over `window` with `res` cells per axis and collect the cells
/// crossing its zero set.
pub fn extract_surface<T: Scalar>(f: &Expr, window: &PhaseBox, res: usize) -> Result<LevelSurface<T>, SurfaceError> {
    if res < MIN_RESOLUTION {
        return Err(SurfaceError::ResolutionTooLow(res));
    }
    if window.n() > 1 {
        return Err(SurfaceError::UnsupportedDimension(window.n()));
    }
    if !window.has_volume() {
        return Err(SurfaceError::DegenerateBox);
    }
    let grid = Grid::new(window.axes(), res);
    let values: Vec<T> = (0..grid.vertex_count())
        .into_par_iter()
        .map(|id| f.at::<T>(&grid.vertex_point(id)).unwrap_or_else(|_| T::nan()))
        .collect();
    let invalid_vertices = values.iter().filter(|v| v.is_nan()).count();

    let classified: Vec<(usize, CellClass)> = (0..grid.cell_count())
        .into_par_iter()
        .filter_map(|id| classify(f, &grid, &values, id).map(|c| (id, c)))
        .collect();
    let mut cells = Vec::new();
    let (mut excluded_cells, mut pole_cells) = (0, 0);
    for (id, class) in classified {
        match class {
            CellClass::Excluded => excluded_cells += 1,
            CellClass::Pole => pole_cells += 1,
            CellClass::Crossing => cells.push(id),
        }
    }
    let ordinal: HashMap<usize, usize> = cells.iter().enumerate().map(|(k, &id)| (id, k)).collect();

    let patches: Vec<Patch<T>> = cells
        .par_iter()
        .map(|&id| {
            let vs = grid.cell_vertices(id);
            let corners: Vec<Vec<T>> = vs.iter().map(|&v| grid.vertex_point(v)).collect();
            let fv: Vec<T> = vs.iter().map(|&v| values[v]).collect();
            cell_patch(&corners, &fv)
        })
        .collect();

    let links: Vec<(usize, usize)> = cells
        .par_iter()
        .enumerate()
        .flat_map_iter(|(k, &id)| {
            let vs = grid.cell_vertices(id);
            let grid = &grid;
            let ordinal = &ordinal;
            let values = &values;
            (0..grid.dim()).filter_map(move |axis| {
                let other = *ordinal.get(&grid.neighbor(id, axis, true)?)?;
                let facet = vs
                    .iter()
                    .enumerate()
                    .filter(|(pos, _)| (pos >> axis) & 1 == 1)
                    .map(|(_, &v)| values[v]);
                sign_changes(facet).then_some((k, other))
            })
        })
        .collect();
    let mut adjacency = vec![Vec::new(); cells.len()];
    for (a, b) in links {
        adjacency[a].push(b);
        adjacency[b].push(a);
    }
    for list in &mut adjacency {
        list.sort_unstable();
    }

    Ok(LevelSurface {
        grid,
        values,
        cells,
        ordinal,
        patches,
        adjacency,
        invalid_vertices,
        excluded_cells,
        pole_cells,
    })
}

fn classify<T: Scalar>(f: &Expr, grid: &Grid, values: &[T], id: usize) -> Option<CellClass> {
    let vs = grid.cell_vertices(id);
    let fv: Vec<T> = vs.iter().map(|&v| values[v]).collect();
    if fv.iter().any(|v| v.is_nan()) {
        return Some(CellClass::Excluded);
    }
    if !sign_changes(fv.iter().copied()) {
        return None;
    }
    let d = grid.dim();
    for a in 0..vs.len() {
        for k in 0..d {
            if (a >> k) & 1 == 1 {
                continue;
            }
            let b = a | (1 << k);
            if (fv[a] < T::zero()) == (fv[b] < T::zero()) {
                continue;
            }
            let pa = grid.vertex_point::<T>(vs[a]);
            let pb = grid.vertex_point::<T>(vs[b]);
            if genuine_root(f, pa, pb, fv[a], fv[b]) {
                return Some(CellClass::Crossing);
            }
        }
    }
    Some(CellClass::Pole)
}

/// Bisect a sign change; a root shrinks `|F|`, a pole inflates it.
fn genuine_root<T: Scalar>(f: &Expr, mut pa: Vec<T>, mut pb: Vec<T>, fa: T, fb: T) -> bool {
    let bound = fa.abs().max(fb.abs());
    let neg_a = fa < T::zero();
    let half = T::lit(0.5);
    let mut mid = pa.clone();
    let mut fm = T::zero();
    for _ in 0..POLE_BISECTIONS {
        for ((m, a), b) in mid.iter_mut().zip(&pa).zip(&pb) {
            *m = (*a + *b) * half;
        }
        fm = match f.at(&mid) {
            Ok(v) => v,
            Err(_) => return false,
        };
        if (fm < T::zero()) == neg_a {
            pa.copy_from_slice(&mid);
        } else {
            pb.copy_from_slice(&mid);
        }
    }
    fm.abs() <= bound
}

impl<T: Scalar> LevelSurface<T> {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn resolution(&self) -> usize {
        self.grid.res()
    }

    /// Crossing cell ids in ascending order.
    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Position of a cell id in [`Self::cells`], if it crosses.
    pub fn ordinal(&self, cell: usize) -> Option<usize> {
        self.ordinal.get(&cell).copied()
    }

    pub fn patch(&self, ordinal: usize) -> &Patch<T> {
        &self.patches[ordinal]
    }

    pub fn neighbors(&self, ordinal: usize) -> &[usize] {
        &self.adjacency[ordinal]
    }

    pub fn vertex_value(&self, vertex: usize) -> T {
        self.values[vertex]
    }

    pub fn cell_values(&self, cell: usize) -> Vec<T> {
        self.grid.cell_vertices(cell).iter().map(|&v| self.values[v]).collect()
    }

    /// Crossing cells whose closure contains `p`, as ordinals.
    pub fn crossing_cells_at(&self, p: &[T]) -> Vec<usize> {
        self.grid
            .locate(p)
            .into_iter()
            .filter_map(|c| self.ordinal(c))
            .collect()
    }
}

/// Point cloud with header `t,x,u,kind`: one patch centroid per crossing
/// cell, then the σ points. The `x` column is empty when there is no space
/// variable.
pub fn write_point_cloud<T: Scalar>(
    surface: Option<&LevelSurface<T>>,
    sigma: Option<&SingularLocus<T>>,
    mut w: impl Write,
) -> io::Result<()> {
    writeln!(w, "t,x,u,kind")?;
    let row = |w: &mut dyn Write, p: &[T], kind: &str| -> io::Result<()> {
        let f = |v: T| v.to_f64_lossy().to_string();
        match p.len() {
            2 => writeln!(w, "{},,{},{kind}", f(p[0]), f(p[1])),
            _ => writeln!(w, "{},{},{},{kind}", f(p[0]), f(p[1]), f(p[2])),
        }
    };
    if let Some(s) = surface {
        for k in 0..s.len() {
            if let Some(c) = s.patch(k).centroid() {
                row(&mut w, &c, "surface")?;
            }
        }
    }
    if let Some(sig) = sigma {
        for p in &sig.points {
            row(
                &mut w,
                &p.point,
                if p.degenerate { "sigma-degenerate" } else { "sigma" },
            )?;
        }
    }
    Ok(())
}
