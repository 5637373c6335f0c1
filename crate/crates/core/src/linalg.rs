//! Dense kernels for the tiny systems that show up here (at most 3×3).

use crate::scalar::Scalar;

/// Gaussian elimination with partial pivoting. `None` when singular.
pub fn solve<T: Scalar>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Option<Vec<T>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            a[i][col]
                .abs()
                .partial_cmp(&a[j][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if a[pivot][col] == T::zero() || !a[pivot][col].is_finite() {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor == T::zero() {
                continue;
            }
            for k in col..n {
                let v = a[col][k];
                a[row][k] = a[row][k] - factor * v;
            }
            b[row] = b[row] - factor * b[col];
        }
    }
    let mut x = vec![T::zero(); n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc = acc - a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Singular values of a wide matrix (rows ≤ columns), descending.
///
/// One-sided Jacobi: rows are rotated pairwise until mutually orthogonal,
/// after which their norms are the singular values.
pub fn singular_values<T: Scalar>(rows: &[Vec<T>]) -> Vec<T> {
    let mut m: Vec<Vec<T>> = rows.to_vec();
    let dot = |a: &[T], b: &[T]| a.iter().zip(b).fold(T::zero(), |s, (x, y)| s + *x * *y);
    let eps = T::epsilon();
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..m.len() {
            for q in p + 1..m.len() {
                let alpha = dot(&m[p], &m[p]);
                let beta = dot(&m[q], &m[q]);
                let gamma = dot(&m[p], &m[q]);
                if gamma.abs() <= eps * (alpha * beta).sqrt() || gamma == T::zero() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                for k in 0..m[p].len() {
                    let (a, b) = (m[p][k], m[q][k]);
                    m[p][k] = c * a - s * b;
                    m[q][k] = s * a + c * b;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut out: Vec<T> = m.iter().map(|r| dot(r, r).sqrt()).collect();
    out.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    out
}

pub fn min_singular_value<T: Scalar>(rows: &[Vec<T>]) -> T {
    singular_values(rows).last().copied().unwrap_or_else(T::zero)
}

pub fn norm<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |s, x| s + *x * *x).sqrt()
}

pub fn cross<T: Scalar>(a: &[T], b: &[T]) -> [T; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_pivoted_system() {
        let a = vec![vec![0.0f64, 2.0, 1.0], vec![1.0, 1.0, 0.0], vec![3.0, 0.0, 1.0]];
        let x = solve(a, vec![7.0, 3.0, 6.0]).unwrap();
        for (got, want) in x.iter().zip([1.0, 2.0, 3.0]) {
            assert!((got - want).abs() < 1e-14);
        }
        assert!(solve(vec![vec![1.0, 2.0], vec![2.0, 4.0]], vec![1.0, 2.0]).is_none());
    }

    #[test]
    fn singular_values_of_known_matrices() {
        let sv = singular_values(&[vec![3.0f64, 0.0, 0.0], vec![0.0, -2.0, 0.0]]);
        assert!((sv[0] - 3.0).abs() < 1e-14 && (sv[1] - 2.0).abs() < 1e-14);
        let dup = singular_values(&[vec![0.0f64, 0.0, 1.0], vec![0.0, 0.0, 1.0]]);
        assert!(dup[1] < 1e-15);
        // rows (0,0,1), (-u,1,-t): Gram determinant 1 + u^2.
        let (u, t) = (0.7f64, 0.4);
        let sv = singular_values(&[vec![0.0, 0.0, 1.0], vec![-u, 1.0, -t]]);
        assert!((sv[0] * sv[1] - (1.0f64 + u * u).sqrt()).abs() < 1e-13);
    }
}
