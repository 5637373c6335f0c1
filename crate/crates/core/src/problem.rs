//! Cauchy problem `α u_t + Σ a_k u_{x_k} = b`, `u(0, x) = h(x)`, its
//! computational window and the characteristic vector field.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use thiserror::Error;

use crate::expr::{parse, parse_image, EvalError, Expr, ParseError, Var};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(from = "[f64; 2]")]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl From<[f64; 2]> for Interval {
    fn from([lo, hi]: [f64; 2]) -> Self {
        Interval { lo, hi }
    }
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    /// `k`-th of `count` uniformly spaced points, endpoints included.
    pub fn lattice(&self, k: usize, count: usize) -> f64 {
        if count <= 1 {
            return 0.5 * (self.lo + self.hi);
        }
        if k + 1 == count {
            return self.hi;
        }
        self.lo + self.width() * (k as f64) / ((count - 1) as f64)
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.max(self.lo).min(self.hi)
    }
}

/// Axis-aligned window in `(t, x1..xn, u)`; axis order matches the state
/// layout.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseBox {
    axes: Vec<Interval>,
}

impl PhaseBox {
    pub fn new(t: Interval, x: Vec<Interval>, u: Interval) -> Self {
        let mut axes = Vec::with_capacity(x.len() + 2);
        axes.push(t);
        axes.extend(x);
        axes.push(u);
        PhaseBox { axes }
    }

    pub fn n(&self) -> usize {
        self.axes.len() - 2
    }

    pub fn axes(&self) -> &[Interval] {
        &self.axes
    }

    pub fn axis(&self, i: usize) -> Interval {
        self.axes[i]
    }

    pub fn t(&self) -> Interval {
        self.axes[0]
    }

    pub fn u(&self) -> Interval {
        self.axes[self.axes.len() - 1]
    }

    pub fn has_volume(&self) -> bool {
        self.axes
            .iter()
            .all(|a| a.hi > a.lo && a.lo.is_finite() && a.hi.is_finite())
    }

    pub fn contains<T: Scalar>(&self, p: &[T]) -> bool {
        self.contains_slack(p, 0.0)
    }

    /// Membership with every axis widened by `slack · width`.
    pub fn contains_slack<T: Scalar>(&self, p: &[T], slack: f64) -> bool {
        p.len() == self.axes.len()
            && self.axes.iter().zip(p).all(|(a, v)| {
                let v = v.to_f64_lossy();
                let pad = slack * a.width();
                v >= a.lo - pad && v <= a.hi + pad
            })
    }

    /// `count` uniform random points, reproducible for a given `seed`.
    pub fn random_points(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| self.axes.iter().map(|a| rng.gen_range(a.lo..=a.hi)).collect())
            .collect()
    }

    pub fn diagonal(&self) -> f64 {
        self.axes.iter().map(|a| a.width() * a.width()).sum::<f64>().sqrt()
    }
}

/// Coefficients of the quasi-linear equation plus the window `box`.
#[derive(Clone, Debug)]
pub struct Problem {
    pub n: usize,
    pub alpha: Expr,
    pub a: Vec<Expr>,
    pub b: Expr,
    pub window: PhaseBox,
}

/// Cauchy data `u(0, s) = h(s)` for `s` in `s_range`.
#[derive(Clone, Debug)]
pub struct InitialData {
    pub h: Expr,
    pub s_range: Vec<Interval>,
}

/// Components `(α, a_1..a_n, b)` in state order.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    components: Vec<Expr>,
}

/// A problem file after parsing and validation. `rho` and `f`, when present,
/// are the user-supplied first integrals and defining function.
#[derive(Clone, Debug)]
pub struct LoadedProblem {
    pub problem: Problem,
    pub initial: InitialData,
    pub rho: Option<Vec<Expr>>,
    pub f: Option<Expr>,
}

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("cannot read problem file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed problem file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("cannot parse `{field}`: {source}")]
    Expr {
        field: String,
        #[source]
        source: ParseError,
    },
    #[error("alpha vanishes at lattice point {point:?}")]
    AlphaVanishes { point: Vec<f64> },
    #[error("alpha cannot be evaluated at {point:?}: {source}")]
    AlphaUndefined {
        point: Vec<f64>,
        #[source]
        source: EvalError,
    },
    #[error("initial set leaves the box at {point:?}")]
    GammaOutsideBox { point: Vec<f64> },
    #[error("initial data cannot be evaluated: {0}")]
    Initial(#[from] EvalError),
}

impl ProblemError {
    /// I/O and syntax failures, as opposed to mathematical validation ones.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            ProblemError::Io(_) | ProblemError::Json(_) | ProblemError::Schema(_) | ProblemError::Expr { .. }
        )
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RangeSpec {
    One(Interval),
    Many(Vec<Interval>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BoxFile {
    t: Interval,
    #[serde(default)]
    x: Option<RangeSpec>,
    u: Interval,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    n: usize,
    alpha: String,
    #[serde(default)]
    a: Vec<String>,
    b: String,
    h: String,
    #[serde(default)]
    s_range: Option<RangeSpec>,
    #[serde(rename = "box")]
    window: BoxFile,
    #[serde(default)]
    rho: Option<Vec<String>>,
    #[serde(default)]
    f: Option<String>,
}

/// Lattice points per axis for the α check.
pub const ALPHA_LATTICE: usize = 17;
/// Default parameter range for the initial data.
pub const DEFAULT_S_RANGE: Interval = Interval { lo: -0.1, hi: 0.1 };

const ALPHA_ZERO: f64 = 1e-12;

pub fn load_problem(path: impl AsRef<Path>) -> Result<LoadedProblem, ProblemError> {
    let text = std::fs::read_to_string(path)?;
    problem_from_json(&text)
}

pub fn problem_from_json(text: &str) -> Result<LoadedProblem, ProblemError> {
    let file: ProblemFile = serde_json::from_str(text)?;
    let n = file.n;
    let expr = |field: &str, text: &str| {
        parse(text, n).map_err(|source| ProblemError::Expr {
            field: field.to_string(),
            source,
        })
    };

    if file.a.len() != n {
        return Err(ProblemError::Schema(format!(
            "`a` has {} entries, expected n = {n}",
            file.a.len()
        )));
    }
    let alpha = expr("alpha", &file.alpha)?;
    let a = file
        .a
        .iter()
        .enumerate()
        .map(|(k, s)| expr(&format!("a[{k}]"), s))
        .collect::<Result<Vec<_>, _>>()?;
    let b = expr("b", &file.b)?;
    let h = expr("h", &file.h)?;
    if h.mentions(Var::T) || h.mentions(Var::U) {
        return Err(ProblemError::Schema("`h` may depend on x only".into()));
    }

    let x_axes = axis_list(file.window.x, n, "box.x", None)?;
    let window = PhaseBox::new(file.window.t, x_axes, file.window.u);
    if !window.has_volume() {
        return Err(ProblemError::Schema("box must have positive volume".into()));
    }
    let s_range = axis_list(file.s_range, n, "s_range", Some(DEFAULT_S_RANGE))?;
    if s_range.iter().any(|r| !(r.hi >= r.lo)) {
        return Err(ProblemError::Schema("s_range must satisfy lo <= hi".into()));
    }

    let rho = match file.rho {
        None => None,
        Some(list) => {
            if list.len() != n + 1 {
                return Err(ProblemError::Schema(format!(
                    "`rho` has {} entries, expected n + 1 = {}",
                    list.len(),
                    n + 1
                )));
            }
            Some(
                list.iter()
                    .enumerate()
                    .map(|(k, s)| expr(&format!("rho[{k}]"), s))
                    .collect::<Result<Vec<_>, _>>()?,
            )
        }
    };
    let f = match file.f {
        None => None,
        Some(s) => Some(parse_image(&s, n + 1).map_err(|source| ProblemError::Expr {
            field: "f".into(),
            source,
        })?),
    };

    let problem = Problem { n, alpha, a, b, window };
    let initial = InitialData { h, s_range };
    problem.validate()?;
    initial.validate(&problem)?;
    Ok(LoadedProblem {
        problem,
        initial,
        rho,
        f,
    })
}

fn axis_list(
    spec: Option<RangeSpec>,
    n: usize,
    field: &str,
    default: Option<Interval>,
) -> Result<Vec<Interval>, ProblemError> {
    let list = match (spec, n) {
        (None, 0) => Vec::new(),
        (None, _) => match default {
            Some(d) => vec![d; n],
            None => return Err(ProblemError::Schema(format!("`{field}` is required for n = {n}"))),
        },
        (Some(RangeSpec::One(iv)), _) => vec![iv; n],
        (Some(RangeSpec::Many(list)), _) => list,
    };
    if list.len() != n {
        return Err(ProblemError::Schema(format!(
            "`{field}` has {} ranges, expected n = {n}",
            list.len()
        )));
    }
    Ok(list)
}

/// Visit every point of the `count^dim` lattice spanned by `axes`.
pub(crate) fn for_each_lattice_point(axes: &[Interval], count: usize, mut f: impl FnMut(&[f64]) -> bool) {
    let dim = axes.len();
    let mut idx = vec![0usize; dim];
    let mut p = vec![0.0; dim];
    loop {
        for d in 0..dim {
            p[d] = axes[d].lattice(idx[d], count);
        }
        if !f(&p) {
            return;
        }
        let mut d = 0;
        loop {
            if d == dim {
                return;
            }
            idx[d] += 1;
            if idx[d] < count {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

impl Problem {
    /// Sampled check that α is nowhere zero on the box lattice.
    pub fn validate(&self) -> Result<(), ProblemError> {
        if !self.window.has_volume() {
            return Err(ProblemError::Schema("box must have positive volume".into()));
        }
        let mut failure = None;
        for_each_lattice_point(self.window.axes(), ALPHA_LATTICE, |p| match self.alpha.at(p) {
            Ok(v) if v.abs() > ALPHA_ZERO => true,
            Ok(_) => {
                failure = Some(ProblemError::AlphaVanishes { point: p.to_vec() });
                false
            }
            Err(source) => {
                failure = Some(ProblemError::AlphaUndefined {
                    point: p.to_vec(),
                    source,
                });
                false
            }
        });
        failure.map_or(Ok(()), Err)
    }

    pub fn characteristic_field(&self) -> VectorField {
        let mut components = Vec::with_capacity(self.n + 2);
        components.push(self.alpha.clone());
        components.extend(self.a.iter().cloned());
        components.push(self.b.clone());
        VectorField { components }
    }

    /// `α ≡ 1`, `b ≡ 0` and every `a_k` a function of `u` alone.
    pub fn is_conservation_form(&self) -> bool {
        self.alpha.as_const() == Some(1.0)
            && self.b.as_const() == Some(0.0)
            && self.a.iter().all(|a| a.variables().iter().all(|v| *v == Var::U))
    }
}

impl InitialData {
    pub fn n(&self) -> usize {
        self.s_range.len()
    }

    /// `h` is defined on `s_range` and the initial set lies in the box,
    /// checked on a lattice.
    pub fn validate(&self, problem: &Problem) -> Result<(), ProblemError> {
        let mut failure = None;
        let mut state = vec![0.0; self.n() + 2];
        let check = |s: &[f64], state: &mut Vec<f64>| -> Result<(), ProblemError> {
            self.gamma_point_into(s, state)?;
            if !problem.window.contains(state) {
                return Err(ProblemError::GammaOutsideBox { point: state.clone() });
            }
            Ok(())
        };
        if self.n() == 0 {
            check(&[], &mut state)?;
            return Ok(());
        }
        for_each_lattice_point(&self.s_range, ALPHA_LATTICE, |s| match check(s, &mut state) {
            Ok(()) => true,
            Err(e) => {
                failure = Some(e);
                false
            }
        });
        failure.map_or(Ok(()), Err)
    }

    pub fn h_at<T: Scalar>(&self, s: &[T]) -> Result<T, EvalError> {
        let mut state = vec![T::zero(); s.len() + 2];
        state[1..=s.len()].copy_from_slice(s);
        self.h.at(&state)
    }

    /// Writes `(0, s, h(s))` into `out`.
    pub fn gamma_point_into<T: Scalar>(&self, s: &[T], out: &mut Vec<T>) -> Result<(), EvalError> {
        out.clear();
        out.push(T::zero());
        out.extend_from_slice(s);
        out.push(T::zero());
        let u = self.h.at(out)?;
        *out.last_mut().expect("nonempty") = u;
        Ok(())
    }

    pub fn gamma_point<T: Scalar>(&self, s: &[T]) -> Result<Vec<T>, EvalError> {
        let mut out = Vec::new();
        self.gamma_point_into(s, &mut out)?;
        Ok(out)
    }

    /// Uniform samples `(0, s, h(s))` of the initial set. For `n ≥ 2` the
    /// samples form a `count^n` lattice.
    pub fn initial_set_samples<T: Scalar>(&self, count: usize) -> Result<Vec<Vec<T>>, EvalError> {
        if self.n() == 0 {
            return Ok(vec![self.gamma_point(&[])?]);
        }
        let count = count.max(1);
        let mut out = Vec::new();
        let mut err = None;
        for_each_lattice_point(&self.s_range, count, |s| {
            let s: Vec<T> = s.iter().map(|&v| T::lit(v)).collect();
            match self.gamma_point(&s) {
                Ok(p) => {
                    out.push(p);
                    true
                }
                Err(e) => {
                    err = Some(e);
                    false
                }
            }
        });
        match err {
            Some(e) => Err(e),
            None => Ok(out),
        }
    }
}

impl VectorField {
    pub fn new(components: Vec<Expr>) -> Self {
        assert!(components.len() >= 2, "vector field needs t and u components");
        VectorField { components }
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn n(&self) -> usize {
        self.components.len() - 2
    }

    pub fn eval_into<T: Scalar>(&self, state: &[T], out: &mut [T]) -> Result<(), EvalError> {
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = c.at(state)?;
        }
        Ok(())
    }

    /// Symbolic Lie derivative `Xρ = α ρ_t + Σ a_k ρ_{x_k} + b ρ_u`.
    pub fn lie_derivative(&self, rho: &Expr) -> Expr {
        self.lie_terms(rho).into_iter().fold(Expr::Const(0.0), Expr::add)
    }

    /// The individual products `X_i · ∂_i ρ`, whose magnitudes give the
    /// relative scale of a residual.
    pub fn lie_terms(&self, rho: &Expr) -> Vec<Expr> {
        let n = self.n();
        self.components
            .iter()
            .enumerate()
            .map(|(i, c)| Expr::mul(c.clone(), rho.diff(Var::from_phase_index(i, n))))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BURGERS: &str = r#"{
        "n": 1, "alpha": "1", "a": ["u"], "b": "0", "h": "1/(x+1)",
        "box": { "t": [-0.5, 2.5], "x": [[-0.5, 2.5]], "u": [0.2, 3.0] }
    }"#;

    #[test]
    fn burgers_file_loads() {
        let lp = problem_from_json(BURGERS).unwrap();
        assert_eq!(lp.problem.n, 1);
        assert_eq!(lp.initial.s_range, vec![DEFAULT_S_RANGE]);
        assert!(lp.problem.is_conservation_form());
        let field = lp.problem.characteristic_field();
        let want: Vec<Expr> = ["1", "u", "0"].iter().map(|s| parse(s, 1).unwrap()).collect();
        assert_eq!(field.components(), want.as_slice());
    }

    #[test]
    fn vanishing_alpha_rejected() {
        // 17-point lattice on [-1, 1] contains t = 0.
        let text = BURGERS
            .replace(r#""alpha": "1""#, r#""alpha": "t""#)
            .replace(r#""t": [-0.5, 2.5]"#, r#""t": [-1.0, 1.0]"#);
        assert!(matches!(
            problem_from_json(&text),
            Err(ProblemError::AlphaVanishes { .. })
        ));
    }

    #[test]
    fn ode_case_loads() {
        let text = r#"{"n": 0, "alpha": "1", "b": "u^2", "h": "1",
            "box": {"t": [-5, 2], "u": [-10, 10]}}"#;
        let lp = problem_from_json(text).unwrap();
        let field = lp.problem.characteristic_field();
        assert_eq!(field.n(), 0);
        assert_eq!(field.components()[1], parse("u^2", 0).unwrap());
        let g: Vec<Vec<f64>> = lp.initial.initial_set_samples(1).unwrap();
        assert_eq!(g, vec![vec![0.0, 1.0]]);
    }

    #[test]
    fn cap_example_field_and_samples() {
        let text = r#"{"n": 1, "alpha": "u", "a": ["0"], "b": "-t", "h": "sqrt(1 - x^3)",
            "box": {"t": [-1.5, 1.5], "x": [[-1, 1.2]], "u": [-0.35, 1.55]}}"#;
        let lp = problem_from_json(text).unwrap();
        let field = lp.problem.characteristic_field();
        let want: Vec<Expr> = ["u", "0", "-t"].iter().map(|s| parse(s, 1).unwrap()).collect();
        assert_eq!(field.components(), want.as_slice());
        let g: Vec<Vec<f64>> = lp.initial.initial_set_samples(3).unwrap();
        assert_eq!(g.len(), 3);
        assert_eq!(g[0], vec![0.0, -0.1, 1.001f64.sqrt()]);
        assert_eq!(g[1], vec![0.0, 0.0, 1.0]);
        assert_eq!(g[2], vec![0.0, 0.1, 0.999f64.sqrt()]);
    }

    #[test]
    fn constant_data_samples() {
        let text = BURGERS.replace("1/(x+1)", "0.75");
        let lp = problem_from_json(&text).unwrap();
        let g: Vec<Vec<f64>> = lp.initial.initial_set_samples(7).unwrap();
        assert!(g.iter().all(|p| p[0] == 0.0 && p[2] == 0.75));
    }

    #[test]
    fn schema_errors_are_typed() {
        assert!(matches!(problem_from_json("{"), Err(ProblemError::Json(_))));
        let bad_expr = BURGERS.replace("1/(x+1)", "1/(x+");
        match problem_from_json(&bad_expr) {
            Err(ProblemError::Expr { field, .. }) => assert_eq!(field, "h"),
            other => panic!("{other:?}"),
        }
        let wrong_n = BURGERS.replace(r#""n": 1"#, r#""n": 2"#);
        assert!(problem_from_json(&wrong_n).unwrap_err().is_input_error());
        let flat = BURGERS.replace("[[-0.5, 2.5]]", "[-0.5, 2.5]");
        assert!(problem_from_json(&flat).is_ok());
        let empty = BURGERS.replace(r#""u": [0.2, 3.0]"#, r#""u": [1.0, 1.0]"#);
        assert!(matches!(problem_from_json(&empty), Err(ProblemError::Schema(_))));
    }

    #[test]
    fn gamma_outside_box() {
        let text = BURGERS.replace(r#""u": [0.2, 3.0]"#, r#""u": [0.2, 1.0]"#);
        assert!(matches!(
            problem_from_json(&text),
            Err(ProblemError::GammaOutsideBox { .. })
        ));
    }

    #[test]
    fn lie_derivative_of_burgers_integral() {
        let lp = problem_from_json(BURGERS).unwrap();
        let field = lp.problem.characteristic_field();
        let x_rho = field.lie_derivative(&parse("x - u*t", 1).unwrap());
        for p in [[0.3, 0.1, 1.7], [1.1, -0.4, 0.9]] {
            assert_eq!(x_rho.at(&p).unwrap(), 0.0);
        }
        let xt = field.lie_derivative(&parse("t", 1).unwrap());
        assert_eq!(xt.at(&[0.3, 0.1, 1.7]).unwrap(), 1.0);
    }
}
