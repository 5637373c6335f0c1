//! Uniform lattice over a box: vertex/cell indexing and point location.

use crate::problem::Interval;
use crate::scalar::Scalar;

/// `res` cells per axis over `axes`. Axis 0 varies slowest.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    axes: Vec<Interval>,
    res: usize,
    step: Vec<f64>,
}

impl Grid {
    pub fn new(axes: &[Interval], res: usize) -> Self {
        let step = axes.iter().map(|a| a.width() / res as f64).collect();
        Grid {
            axes: axes.to_vec(),
            res,
            step,
        }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn res(&self) -> usize {
        self.res
    }

    pub fn axes(&self) -> &[Interval] {
        &self.axes
    }

    pub fn step(&self, axis: usize) -> f64 {
        self.step[axis]
    }

    pub fn vertex_count(&self) -> usize {
        (self.res + 1).pow(self.dim() as u32)
    }

    pub fn cell_count(&self) -> usize {
        self.res.pow(self.dim() as u32)
    }

    pub fn cell_diagonal(&self) -> f64 {
        self.step.iter().map(|h| h * h).sum::<f64>().sqrt()
    }

    fn coords_of(&self, mut id: usize, base: usize) -> Vec<usize> {
        let mut c = vec![0; self.dim()];
        for k in (0..self.dim()).rev() {
            c[k] = id % base;
            id /= base;
        }
        c
    }

    fn id_of(&self, c: &[usize], base: usize) -> usize {
        c.iter().fold(0, |acc, &v| acc * base + v)
    }

    pub fn vertex_coords(&self, id: usize) -> Vec<usize> {
        self.coords_of(id, self.res + 1)
    }

    pub fn vertex_id(&self, c: &[usize]) -> usize {
        self.id_of(c, self.res + 1)
    }

    pub fn cell_coords(&self, id: usize) -> Vec<usize> {
        self.coords_of(id, self.res)
    }

    pub fn cell_id(&self, c: &[usize]) -> usize {
        self.id_of(c, self.res)
    }

    pub fn coordinate(&self, axis: usize, index: f64) -> f64 {
        let a = self.axes[axis];
        if index >= self.res as f64 {
            return a.hi;
        }
        a.lo + self.step[axis] * index
    }

    pub fn vertex_point<T: Scalar>(&self, id: usize) -> Vec<T> {
        self.vertex_coords(id)
            .iter()
            .enumerate()
            .map(|(k, &i)| T::lit(self.coordinate(k, i as f64)))
            .collect()
    }

    pub fn cell_center<T: Scalar>(&self, id: usize) -> Vec<T> {
        self.cell_coords(id)
            .iter()
            .enumerate()
            .map(|(k, &i)| T::lit(self.coordinate(k, i as f64 + 0.5)))
            .collect()
    }

    /// Vertex ids of a cell; bit `k` of the position selects the upper
    /// vertex along axis `k`.
    pub fn cell_vertices(&self, id: usize) -> Vec<usize> {
        let c = self.cell_coords(id);
        let d = self.dim();
        let mut v = c.clone();
        (0..1usize << d)
            .map(|mask| {
                for k in 0..d {
                    v[k] = c[k] + ((mask >> k) & 1);
                }
                self.vertex_id(&v)
            })
            .collect()
    }

    /// Neighbour across the facet normal to `axis`, on the `upper` side.
    pub fn neighbor(&self, id: usize, axis: usize, upper: bool) -> Option<usize> {
        let mut c = self.cell_coords(id);
        if upper {
            if c[axis] + 1 >= self.res {
                return None;
            }
            c[axis] += 1;
        } else {
            if c[axis] == 0 {
                return None;
            }
            c[axis] -= 1;
        }
        Some(self.cell_id(&c))
    }

    /// Candidate indices along one axis of cells whose closure holds `v`.
    fn axis_cells(&self, axis: usize, v: f64) -> Vec<usize> {
        let a = self.axes[axis];
        let tol = 1e-12 * self.step[axis];
        if v < a.lo - tol || v > a.hi + tol {
            return Vec::new();
        }
        let r = ((v - a.lo) / self.step[axis]).max(0.0);
        let i = (r.floor() as usize).min(self.res - 1);
        let mut out = vec![i];
        let frac = r - i as f64;
        if frac * self.step[axis] <= tol && i > 0 {
            out.insert(0, i - 1);
        }
        if (1.0 - frac) * self.step[axis] <= tol && i + 1 < self.res {
            out.push(i + 1);
        }
        out
    }

    /// Every cell whose closure contains `p`, in ascending id order.
    pub fn locate<T: Scalar>(&self, p: &[T]) -> Vec<usize> {
        let per_axis: Vec<Vec<usize>> = p
            .iter()
            .enumerate()
            .map(|(k, v)| self.axis_cells(k, v.to_f64_lossy()))
            .collect();
        if per_axis.iter().any(|c| c.is_empty()) {
            return Vec::new();
        }
        let mut out = Vec::new();
        let mut pick = vec![0usize; p.len()];
        loop {
            let c: Vec<usize> = pick.iter().enumerate().map(|(k, &j)| per_axis[k][j]).collect();
            out.push(self.cell_id(&c));
            let mut k = p.len();
            loop {
                if k == 0 {
                    out.sort_unstable();
                    return out;
                }
                k -= 1;
                pick[k] += 1;
                if pick[k] < per_axis[k].len() {
                    break;
                }
                pick[k] = 0;
            }
        }
    }

    /// Cells sharing at least a vertex with `id`, itself included.
    pub fn vertex_neighborhood(&self, id: usize) -> Vec<usize> {
        let c = self.cell_coords(id);
        let d = self.dim();
        let mut out = Vec::new();
        for code in 0..3usize.pow(d as u32) {
            let mut n = Vec::with_capacity(d);
            let mut rest = code;
            let mut ok = true;
            for &ck in &c {
                let off = (rest % 3) as isize - 1;
                rest /= 3;
                let v = ck as isize + off;
                if v < 0 || v >= self.res as isize {
                    ok = false;
                    break;
                }
                n.push(v as usize);
            }
            if ok {
                out.push(self.cell_id(&n));
            }
        }
        out.sort_unstable();
        out
    }
}
