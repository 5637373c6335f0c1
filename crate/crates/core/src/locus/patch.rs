//! Piecewise-linear pieces of `{F = 0}` inside one cell: segments by
//! marching squares in 2-D, triangles by splitting the cube into six
//! tetrahedra in 3-D.

use crate::scalar::Scalar;

/// Flat list of simplices; each simplex has `dim` vertices of `dim`
/// coordinates.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Patch<T> {
    dim: usize,
    coords: Vec<T>,
}

impl<T: Scalar> Patch<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn simplex_count(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.coords.len() / (self.dim * self.dim)
        }
    }

    pub fn simplices(&self) -> impl Iterator<Item = &[T]> {
        self.coords.chunks(self.dim.max(1) * self.dim.max(1))
    }

    pub fn vertices(&self) -> impl Iterator<Item = &[T]> {
        self.coords.chunks(self.dim.max(1))
    }

    /// Average of all simplex vertices.
    pub fn centroid(&self) -> Option<Vec<T>> {
        if self.is_empty() {
            return None;
        }
        let mut c = vec![T::zero(); self.dim];
        let mut count = 0usize;
        for v in self.vertices() {
            for (ck, vk) in c.iter_mut().zip(v) {
                *ck = *ck + *vk;
            }
            count += 1;
        }
        let inv = T::one() / T::lit(count as f64);
        Some(c.into_iter().map(|v| v * inv).collect())
    }

    fn push(&mut self, p: &[T]) {
        self.coords.extend_from_slice(p);
    }
}

fn negative<T: Scalar>(v: T) -> bool {
    v < T::zero()
}

fn interpolate<T: Scalar>(pa: &[T], pb: &[T], fa: T, fb: T) -> Vec<T> {
    let w = fa / (fa - fb);
    pa.iter().zip(pb).map(|(a, b)| *a + w * (*b - *a)).collect()
}

/// Build the patch of one cell from its corner points and values, given in
/// the bit order of `Grid::cell_vertices`.
pub fn cell_patch<T: Scalar>(corners: &[Vec<T>], values: &[T]) -> Patch<T> {
    match corners.len() {
        4 => marching_square(corners, values),
        8 => marching_tetrahedra(corners, values),
        other => panic!("unsupported cell with {other} corners"),
    }
}

fn marching_square<T: Scalar>(p: &[Vec<T>], f: &[T]) -> Patch<T> {
    // Corners in cyclic order around the square.
    const RING: [usize; 4] = [0, 1, 3, 2];
    let mut patch = Patch {
        dim: 2,
        coords: Vec::new(),
    };
    let crossing: Vec<Option<Vec<T>>> = (0..4)
        .map(|e| {
            let (a, b) = (RING[e], RING[(e + 1) % 4]);
            (negative(f[a]) != negative(f[b])).then(|| interpolate(&p[a], &p[b], f[a], f[b]))
        })
        .collect();
    let hits: Vec<usize> = (0..4).filter(|&e| crossing[e].is_some()).collect();
    let mut segment = |e1: usize, e2: usize| {
        patch.push(crossing[e1].as_ref().unwrap());
        patch.push(crossing[e2].as_ref().unwrap());
    };
    match hits.len() {
        2 => segment(hits[0], hits[1]),
        4 => {
            let center = f.iter().fold(T::zero(), |s, v| s + *v) * T::lit(0.25);
            if negative(center) == negative(f[RING[0]]) {
                segment(0, 1);
                segment(2, 3);
            } else {
                segment(3, 0);
                segment(1, 2);
            }
        }
        _ => {}
    }
    patch
}

const TETS: [[usize; 4]; 6] = [
    [0, 1, 3, 7],
    [0, 3, 2, 7],
    [0, 2, 6, 7],
    [0, 6, 4, 7],
    [0, 4, 5, 7],
    [0, 5, 1, 7],
];

fn marching_tetrahedra<T: Scalar>(p: &[Vec<T>], f: &[T]) -> Patch<T> {
    let mut patch = Patch {
        dim: 3,
        coords: Vec::new(),
    };
    for tet in TETS {
        let (neg, pos): (Vec<usize>, Vec<usize>) = tet.iter().partition(|&&v| negative(f[v]));
        let cut = |a: usize, b: usize| interpolate(&p[a], &p[b], f[a], f[b]);
        match (neg.len(), pos.len()) {
            (1, 3) | (3, 1) => {
                let (lone, rest) = if neg.len() == 1 { (neg[0], &pos) } else { (pos[0], &neg) };
                for &r in rest.iter() {
                    patch.push(&cut(lone, r));
                }
            }
            (2, 2) => {
                let ac = cut(neg[0], pos[0]);
                let ad = cut(neg[0], pos[1]);
                let bd = cut(neg[1], pos[1]);
                let bc = cut(neg[1], pos[0]);
                for q in [&ac, &ad, &bd, &ac, &bd, &bc] {
                    patch.push(q);
                }
            }
            _ => {}
        }
    }
    patch
}
