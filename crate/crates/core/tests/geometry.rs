mod common;

use std::sync::OnceLock;

use charmax::locus::default_resolution;
use charmax::pipeline::{Analysis, Pipeline};
use charmax::Var;
use common::{load, EXAMPLES};
use proptest::prelude::*;

struct Case {
    pipeline: Pipeline,
    analysis: Analysis,
}

fn cases() -> &'static [Case] {
    static CASES: OnceLock<Vec<Case>> = OnceLock::new();
    CASES.get_or_init(|| {
        EXAMPLES
            .iter()
            .map(|name| {
                let pipeline = load(name);
                let analysis = pipeline.analyze(default_resolution(pipeline.n())).unwrap();
                Case { pipeline, analysis }
            })
            .collect()
    })
}

fn face_point(case: &Case, unit: &[f64]) -> Vec<f64> {
    let w = &case.pipeline.loaded.problem.window;
    (0..=case.pipeline.n())
        .map(|k| w.axis(k).lo + unit[k] * w.axis(k).width())
        .collect()
}

/// Whether every face cell within one cell diagonal of `q` has the same
/// mask value.
fn mask_uniform_near(case: &Case, q: &[f64]) -> Option<bool> {
    let domain = &case.analysis.domain;
    let face = domain.face();
    let reach = face.cell_diagonal();
    let ranges: Vec<(usize, usize)> = (0..face.dim())
        .map(|k| {
            let (lo, h) = (face.axes()[k].lo, face.step(k));
            let a = ((q[k] - reach - lo) / h).floor().max(0.0) as usize;
            let b = (((q[k] + reach - lo) / h).floor() as usize).min(face.res() - 1);
            (a, b)
        })
        .collect();
    let mut seen = None;
    let mut coords = vec![0; face.dim()];
    let mut visit = |c: &[usize]| {
        let m = domain.mask()[face.cell_id(c)];
        match seen {
            None => seen = Some(Some(m)),
            Some(Some(prev)) if prev != m => seen = Some(None),
            _ => {}
        }
    };
    if face.dim() == 1 {
        for i in ranges[0].0..=ranges[0].1 {
            visit(&[i]);
        }
    } else {
        for i in ranges[0].0..=ranges[0].1 {
            for j in ranges[1].0..=ranges[1].1 {
                coords[0] = i;
                coords[1] = j;
                visit(&coords);
            }
        }
    }
    seen.flatten()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 500, ..ProptestConfig::default() })]

    #[test]
    fn contains_agrees_with_mask(which in 0usize..4, unit in proptest::collection::vec(0.0f64..1.0, 2)) {
        let case = &cases()[which];
        let q = face_point(case, &unit);
        let ctx = case.pipeline.continuation();
        let verdict = case.analysis.domain.contains(&ctx, &q).unwrap();
        let Some(masked) = mask_uniform_near(case, &q) else {
            return Err(TestCaseError::reject("within one cell diagonal of the mask boundary"));
        };
        prop_assert_eq!(verdict.is_inside(), masked, "{} at {:?}: {}", EXAMPLES[which], q, verdict);
    }

    #[test]
    fn continued_values_solve_the_equation(which in 0usize..4, unit in proptest::collection::vec(0.0f64..1.0, 2)) {
        let case = &cases()[which];
        let p = &case.pipeline;
        let q = face_point(case, &unit);
        let verdict = case.analysis.domain.contains(&p.continuation(), &q).unwrap();
        let Some(u) = verdict.value() else {
            return Err(TestCaseError::reject("outside"));
        };
        let mut state = q.clone();
        state.push(u);
        let grad = p.solution.gradient::<f64>(&state).unwrap();
        let fu = grad[p.n() + 1];
        let mut x = vec![0.0; p.n() + 2];
        p.field.eval_into(&state, &mut x).unwrap();
        let lhs: f64 = (0..=p.n()).map(|k| x[k] * (-grad[k] / fu)).sum();
        let residual = lhs - x[p.n() + 1];
        prop_assert!(residual.abs() <= 1e-8, "{} at {:?}, u = {}: residual {}", EXAMPLES[which], q, u, residual);
    }
}

#[test]
fn refinement_keeps_reachable_cells_connected() {
    for name in EXAMPLES {
        let p = load(name);
        let coarse_res = default_resolution(p.n()) / 2;
        let coarse = p.analyze(coarse_res).unwrap();
        let fine = p.analyze(2 * coarse_res).unwrap();
        let (cg, fg) = (coarse.surface.grid(), fine.surface.grid());
        let reach = cg.cell_diagonal();
        let near_sigma = |c: &[f64]| {
            coarse
                .sigma
                .points
                .iter()
                .chain(&fine.sigma.points)
                .any(|s| s.point.iter().zip(c).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() <= reach)
        };
        let mut checked = 0;
        for &ord in &coarse.component.members {
            let cell = coarse.surface.cells()[ord];
            if near_sigma(&cg.cell_center::<f64>(cell)) {
                continue;
            }
            let base: Vec<usize> = cg.cell_coords(cell).iter().map(|c| 2 * c).collect();
            let children: Vec<usize> = (0..1usize << cg.dim())
                .map(|bits| {
                    let c: Vec<usize> = base.iter().enumerate().map(|(k, b)| b + ((bits >> k) & 1)).collect();
                    fg.cell_id(&c)
                })
                .collect();
            let on_surface: Vec<usize> = children.iter().filter_map(|&c| fine.surface.ordinal(c)).collect();
            assert!(
                !on_surface.is_empty(),
                "{name}: coarse cell {cell} has no fine surface cells"
            );
            assert!(
                on_surface.iter().any(|&o| fine.component.contains[o]),
                "{name}: coarse cell {cell} at {:?} lost at resolution {}",
                cg.cell_center::<f64>(cell),
                2 * coarse_res
            );
            checked += 1;
        }
        assert!(checked > 0, "{name}: nothing checked");
    }
}

#[test]
fn sigma_points_are_folds_of_the_surface() {
    for (case, name) in cases().iter().zip(EXAMPLES).skip(1) {
        let sol = &case.pipeline.solution;
        let fuu = sol.f_u.diff(Var::U);
        let mut folds = 0;
        for s in case.analysis.sigma.points.iter().filter(|s| !s.degenerate) {
            let p = &s.point;
            let curvature: f64 = fuu.at(p).unwrap();
            if curvature.abs() < 1e-6 {
                continue;
            }
            let g = sol.gradient::<f64>(p).unwrap();
            let norm = (g[0] * g[0] + g[1] * g[1]).sqrt();
            let discriminant = |side: f64| {
                let q = [p[0] + side * 1e-4 * g[0] / norm, p[1] + side * 1e-4 * g[1] / norm, p[2]];
                let (f, fu, fuu): (f64, f64, f64) =
                    (sol.value(&q).unwrap(), sol.value_u(&q).unwrap(), fuu.at(&q).unwrap());
                fu * fu - 2.0 * f * fuu
            };
            let (a, b) = (discriminant(1.0), discriminant(-1.0));
            assert!(a * b < 0.0, "{name}: no fold at {p:?}: {a} vs {b}");
            folds += 1;
        }
        if case
            .analysis
            .sigma
            .points
            .iter()
            .any(|s| fuu.at::<f64>(&s.point).unwrap().abs() >= 1e-6)
        {
            assert!(folds > 0, "{name}: no fold points checked");
        }
    }
}

#[test]
fn reciprocal_burgers_fold_is_the_parabola() {
    let case = &cases()[3];
    assert!(!case.analysis.sigma.is_empty());
    for s in &case.analysis.sigma.points {
        let [t, x, u] = [s.point[0], s.point[1], s.point[2]];
        assert!((t - (x + 1.0).powi(2) / 4.0).abs() <= 1e-8, "{:?}", s.point);
        assert!((u - 2.0 / (x + 1.0)).abs() <= 1e-8, "{:?}", s.point);
    }
}
