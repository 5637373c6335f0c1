//! Maximal domains of single-valued analytic extension for first-order
//! quasi-linear PDEs
//!
//! ```text
//! α(t,x,u) u_t + Σ a_k(t,x,u) u_{x_k} = b(t,x,u),    u(0,x) = h(x)
//! ```
//!
//! Given first integrals `ρ` of the characteristic field and a defining
//! function `f` of `ρ(Γ)`, the implicit solution `F = f∘ρ` is extracted on a
//! grid, its fold locus `{F = 0, F_u = 0}` is polished by Newton, and the
//! component of the zero set that contains the initial set is projected to
//! the `(t, x)` window. Point queries are answered by continuation.
//!
//! Numerical kernels are generic over [`Scalar`] (`f32`, `f64`); the aliases
//! below fix them to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod characteristics;
pub mod conslaw;
pub mod domain;
pub mod expr;
pub mod integrals;
pub mod linalg;
pub mod locus;
pub mod newton;
pub mod pipeline;
pub mod problem;
pub mod scalar;

pub use expr::{parse, parse_image, Expr, Var};
pub use problem::{load_problem, InitialData, Interval, LoadedProblem, PhaseBox, Problem, VectorField};
pub use scalar::Scalar;

pub type CharacteristicCurve = characteristics::CharacteristicCurve<f64>;
pub type ResidualReport = integrals::ResidualReport<f64>;
pub type LevelSurface = locus::LevelSurface<f64>;
pub type SingularLocus = locus::SingularLocus<f64>;
pub type MaximalDomain = domain::MaximalDomain<f64>;
pub type Verdict = domain::Verdict<f64>;
pub type ConservationLaw = conslaw::ConservationLaw;
pub type Root = newton::Root<f64>;
