//! First integrals of the characteristic field and the implicit solution
//! `F = f∘ρ` built from them.

use serde_json::json;
use thiserror::Error;

use crate::expr::{EvalError, Expr, Var};
use crate::linalg;
use crate::newton::{solve_u, NewtonOptions};
use crate::problem::{InitialData, PhaseBox, VectorField};
use crate::scalar::Scalar;

/// Tolerance for `|F|` on the initial set.
pub const GAMMA_TOL: f64 = 1e-10;
/// Lower bound for `|F_u|` on the initial set.
pub const GAMMA_FU_MIN: f64 = 1e-6;
/// Tolerance for the flow residual `|XF|` near the zero set.
pub const FLOW_TOL: f64 = 1e-8;
/// Smallest admissible singular value of the first-integral Jacobian.
pub const NONDEGENERACY_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    BuiltinConservation,
    UserSupplied,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FirstIntegralSet {
    pub rho: Vec<Expr>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegralError {
    #[error("a[{index}] depends on t or x; not a conservation law")]
    NotConservationForm { index: usize },
    #[error("defining function can only be constructed for built-in conservation integrals; supply `f`")]
    Unsupported,
    #[error("defining function: {0}")]
    BadDefiningFunction(String),
    #[error("F does not vanish on Γ: F = {value:e} at {point:?}")]
    NonzeroOnGamma { point: Vec<f64>, value: f64 },
    #[error("F_u vanishes on Γ: F_u = {value:e} at {point:?}")]
    DegenerateOnGamma { point: Vec<f64>, value: f64 },
    #[error("zero set of F is not invariant: XF = {value:e} at {point:?}")]
    FlowResidual { point: Vec<f64>, value: f64 },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Residual statistics of `Xρ` over a sample set.
#[derive(Clone, Debug)]
pub struct ResidualReport<T> {
    pub max_residual: T,
    pub mean_residual: T,
    pub worst_point: Option<Vec<T>>,
    pub pass: bool,
    pub evaluated: usize,
    /// Samples where `Xρ` could not be evaluated; excluded from the statistics.
    pub violations: Vec<(Vec<T>, EvalError)>,
}

impl<T: Scalar> ResidualReport<T> {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "max_residual": self.max_residual.to_f64_lossy(),
            "mean_residual": self.mean_residual.to_f64_lossy(),
            "worst_point": self.worst_point.as_ref().map(|p| p.iter().map(|v| v.to_f64_lossy()).collect::<Vec<_>>()),
            "pass": self.pass,
        })
    }
}

/// Checks `Xρ = 0` at every sample. A sample passes when
/// `|Xρ| ≤ tol · (1 + Σ|X_i ∂_iρ|)`.
pub fn verify_first_integral<T: Scalar>(
    field: &VectorField,
    rho: &Expr,
    samples: &[Vec<T>],
    tol: T,
) -> ResidualReport<T> {
    let terms = field.lie_terms(rho);
    let mut report = ResidualReport {
        max_residual: T::zero(),
        mean_residual: T::zero(),
        worst_point: None,
        pass: true,
        evaluated: 0,
        violations: Vec::new(),
    };
    let mut sum = T::zero();
    for p in samples {
        let values: Result<Vec<T>, EvalError> = terms.iter().map(|e| e.at(p)).collect();
        let values = match values {
            Ok(v) => v,
            Err(e) => {
                report.violations.push((p.clone(), e));
                continue;
            }
        };
        let residual = values.iter().fold(T::zero(), |s, v| s + *v).abs();
        let scale = values.iter().fold(T::zero(), |s, v| s + v.abs());
        if residual > tol * (T::one() + scale) {
            report.pass = false;
        }
        if report.worst_point.is_none() || residual > report.max_residual {
            report.max_residual = residual;
            report.worst_point = Some(p.clone());
        }
        sum = sum + residual;
        report.evaluated += 1;
    }
    if report.evaluated > 0 {
        report.mean_residual = sum / T::lit(report.evaluated as f64);
    }
    report
}

/// `(u, x_1 − a_1(u) t, …, x_n − a_n(u) t)` for `u_t + Σ a_k(u) u_{x_k} = 0`.
pub fn conservation_law_integrals(a: &[Expr]) -> Result<FirstIntegralSet, IntegralError> {
    let mut rho = vec![Expr::Var(Var::U)];
    for (k, ak) in a.iter().enumerate() {
        if ak.variables().iter().any(|v| *v != Var::U) {
            return Err(IntegralError::NotConservationForm { index: k });
        }
        rho.push(Expr::sub(
            Expr::Var(Var::X(k)),
            Expr::mul(ak.clone(), Expr::Var(Var::T)),
        ));
    }
    Ok(FirstIntegralSet {
        rho,
        provenance: Provenance::BuiltinConservation,
    })
}

#[derive(Clone, Debug)]
pub struct NondegeneracyReport<T> {
    pub nondegenerate: bool,
    pub min_singular_value: T,
    pub worst_point: Option<Vec<T>>,
    pub violations: Vec<(Vec<T>, EvalError)>,
}

impl FirstIntegralSet {
    pub fn n(&self) -> usize {
        self.rho.len() - 1
    }

    /// Rows `∇ρ_i` with respect to `(t, x, u)`.
    pub fn jacobian(&self) -> Vec<Vec<Expr>> {
        let n = self.n();
        self.rho.iter().map(|r| r.phase_gradient(n)).collect()
    }

    /// `dρ_1 ∧ … ∧ dρ_{n+1} ≠ 0`, measured by the smallest singular value of
    /// the Jacobian.
    pub fn check_nondegeneracy<T: Scalar>(&self, samples: &[Vec<T>]) -> NondegeneracyReport<T> {
        let jac = self.jacobian();
        let mut report = NondegeneracyReport {
            nondegenerate: true,
            min_singular_value: T::infinity(),
            worst_point: None,
            violations: Vec::new(),
        };
        for p in samples {
            let rows: Result<Vec<Vec<T>>, EvalError> =
                jac.iter().map(|row| row.iter().map(|e| e.at(p)).collect()).collect();
            match rows {
                Ok(rows) => {
                    let smin = linalg::min_singular_value(&rows);
                    if smin < report.min_singular_value {
                        report.min_singular_value = smin;
                        report.worst_point = Some(p.clone());
                    }
                    if !(smin >= T::lit(NONDEGENERACY_TOL)) {
                        report.nondegenerate = false;
                    }
                }
                Err(e) => {
                    report.nondegenerate = false;
                    report.violations.push((p.clone(), e));
                }
            }
        }
        report
    }
}

/// `f(y) = y_1 − h(y_2, …, y_{n+1})`, the defining function of
/// `ρ(Γ) = {(h(s), s)}` for the built-in conservation integrals.
pub fn defining_function_from_initial(initial: &InitialData, rho: &FirstIntegralSet) -> Result<Expr, IntegralError> {
    if rho.provenance != Provenance::BuiltinConservation {
        return Err(IntegralError::Unsupported);
    }
    let n = rho.n();
    if initial.n() != n {
        return Err(IntegralError::BadDefiningFunction(format!(
            "initial data has {} parameters, integrals expect {n}",
            initial.n()
        )));
    }
    let h_of_y = initial.h.substitute(&|v| match v {
        Var::X(k) => Some(Expr::Var(Var::Y(k + 1))),
        _ => None,
    });
    Ok(Expr::sub(Expr::Var(Var::Y(0)), h_of_y))
}

/// `F = f∘ρ` with its cached derivatives.
#[derive(Clone, Debug)]
pub struct ImplicitSolution {
    pub n: usize,
    pub f: Expr,
    pub big_f: Expr,
    pub f_u: Expr,
    /// `∇F` over `(t, x, u)`.
    pub grad: Vec<Expr>,
    /// `∇F_u` over `(t, x, u)`.
    pub grad_u: Vec<Expr>,
    pub gamma_samples: Vec<Vec<f64>>,
}

#[derive(Clone, Copy, Debug)]
pub struct BuildOptions {
    pub flow_samples: usize,
    pub seed: u64,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            flow_samples: 64,
            seed: 0x5eed,
        }
    }
}

impl ImplicitSolution {
    /// Assemble `F` from symbolic pieces without validation.
    pub fn from_expr(n: usize, f: Expr, big_f: Expr) -> Self {
        let f_u = big_f.diff(Var::U);
        let grad = big_f.phase_gradient(n);
        let grad_u = f_u.phase_gradient(n);
        ImplicitSolution {
            n,
            f,
            big_f,
            f_u,
            grad,
            grad_u,
            gamma_samples: Vec::new(),
        }
    }

    pub fn value<T: Scalar>(&self, p: &[T]) -> Result<T, EvalError> {
        self.big_f.at(p)
    }

    pub fn value_u<T: Scalar>(&self, p: &[T]) -> Result<T, EvalError> {
        self.f_u.at(p)
    }

    pub fn gradient<T: Scalar>(&self, p: &[T]) -> Result<Vec<T>, EvalError> {
        self.grad.iter().map(|e| e.at(p)).collect()
    }

    pub fn gradient_u<T: Scalar>(&self, p: &[T]) -> Result<Vec<T>, EvalError> {
        self.grad_u.iter().map(|e| e.at(p)).collect()
    }
}

/// Compose `F = f∘ρ` and check it vanishes on Γ, is nondegenerate in `u`
/// there, and has a flow-invariant zero set.
pub fn build_implicit_solution(
    field: &VectorField,
    window: &PhaseBox,
    rho: &FirstIntegralSet,
    f: &Expr,
    gamma: &[Vec<f64>],
    opts: BuildOptions,
) -> Result<ImplicitSolution, IntegralError> {
    let n = rho.n();
    for v in f.variables() {
        match v {
            Var::Y(k) if k <= n => {}
            other => {
                return Err(IntegralError::BadDefiningFunction(format!(
                    "`{other}` is not one of y1..y{}",
                    n + 1
                )))
            }
        }
    }
    let big_f = f.substitute(&|v| match v {
        Var::Y(k) => Some(rho.rho[k].clone()),
        _ => None,
    });
    let mut sol = ImplicitSolution::from_expr(n, f.clone(), big_f);
    sol.gamma_samples = gamma.to_vec();

    for p in gamma {
        let value: f64 = sol.value(p)?;
        if !(value.abs() <= GAMMA_TOL) {
            return Err(IntegralError::NonzeroOnGamma {
                point: p.clone(),
                value,
            });
        }
        let fu: f64 = sol.value_u(p)?;
        if !(fu.abs() >= GAMMA_FU_MIN) {
            return Err(IntegralError::DegenerateOnGamma {
                point: p.clone(),
                value: fu,
            });
        }
    }

    // Points on {F = 0}: random (t, x) with u polished by Newton.
    let terms = field.lie_terms(&sol.big_f);
    let candidates = window.random_points(opts.flow_samples * 8, opts.seed);
    let mut accepted = 0;
    for c in candidates {
        if accepted == opts.flow_samples {
            break;
        }
        let Ok(root) = solve_u(&sol.big_f, &sol.f_u, &c[..=n], c[n + 1], NewtonOptions::default()) else {
            continue;
        };
        let mut p = c[..=n].to_vec();
        p.push(root.u);
        if !window.contains(&p) || root.residual > 1e-6 {
            continue;
        }
        let Ok(values) = terms.iter().map(|e| e.at(&p)).collect::<Result<Vec<f64>, _>>() else {
            continue;
        };
        let residual = values.iter().sum::<f64>().abs();
        let scale: f64 = values.iter().map(|v| v.abs()).sum();
        if residual > FLOW_TOL * (1.0 + scale) {
            return Err(IntegralError::FlowResidual {
                point: p,
                value: residual,
            });
        }
        accepted += 1;
    }
    Ok(sol)
}
