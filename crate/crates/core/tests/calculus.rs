mod common;

use charmax::{parse, Expr, Var};
use common::{expr, point, var};
use proptest::prelude::*;

fn shifted(e: &Expr, p: &[f64], k: usize, dx: f64) -> Option<f64> {
    let mut q = p.to_vec();
    q[k] += dx;
    e.at::<f64>(&q).ok()
}

fn central(e: &Expr, p: &[f64], k: usize, h: f64) -> Option<f64> {
    Some((shifted(e, p, k, h)? - shifted(e, p, k, -h)?) / (2.0 * h))
}

fn index(v: Var) -> usize {
    v.phase_index(1).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, max_global_rejects: 100_000, ..ProptestConfig::default() })]

    #[test]
    fn print_then_parse_is_identity(e in expr()) {
        let text = e.to_string();
        let back = parse(&text, 1).map_err(|err| TestCaseError::fail(format!("{text}: {err}")))?;
        prop_assert_eq!(back, e);
    }

    #[test]
    fn evaluation_is_pure(e in expr(), p in point()) {
        let first = e.at::<f64>(&p);
        let second = e.at::<f64>(&p);
        match (first, second) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a.to_bits(), b.to_bits()),
            (a, b) => prop_assert_eq!(a, b),
        }
    }

    /// Central differences at step 1e-5 agree with the symbolic derivative
    /// wherever the stencil is well conditioned.
    #[test]
    fn derivative_matches_central_difference(e in expr(), p in point(), v in var()) {
        let k = index(v);
        let f0 = e.at::<f64>(&p);
        prop_assume!(matches!(f0, Ok(f) if f.abs() < 1e3));
        let d = e.diff(v).at::<f64>(&p);
        prop_assume!(d.is_ok());
        let d = d.unwrap();
        let (Some(fd), Some(coarse)) = (central(&e, &p, k, 1e-5), central(&e, &p, k, 2e-5)) else {
            return Err(TestCaseError::reject("stencil leaves the domain"));
        };
        let scale = 1.0 + d.abs();
        // Truncation error of the stencil itself, estimated by step doubling.
        prop_assume!((coarse - fd).abs() <= 1e-7 * scale);
        prop_assert!((d - fd).abs() <= 1e-6 * scale, "d/d{v} {e} at {p:?}: {d} vs {fd}");
    }
}

#[test]
fn derivative_of_fold_function_in_u() {
    let f = parse("u - 1/(x - u*t + 1)", 1).unwrap();
    let fu = f.diff(Var::U);
    let mut points = vec![];
    for i in 0..10 {
        for j in 0..10 {
            points.push([0.1 * i as f64, -0.5 + 0.2 * j as f64, 0.3]);
        }
    }
    for p in points {
        let (t, x, u) = (p[0], p[1], p[2]);
        let exact = 1.0 - t / (x - u * t + 1.0).powi(2);
        let got: f64 = fu.at(&p).unwrap();
        assert!(
            (got - exact).abs() <= 1e-12 * (1.0 + exact.abs()),
            "{p:?}: {got} vs {exact}"
        );
    }
}
