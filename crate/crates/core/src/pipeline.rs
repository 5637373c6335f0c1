//! End-to-end assembly: problem file → first integrals → implicit solution
//! → surface, fold locus, component and domain.

use std::path::Path;

use thiserror::Error;

use crate::conslaw::{ConsLawError, ConservationLaw};
use crate::domain::{maximal_domain, Continuation, DomainError, MaximalDomain};
use crate::integrals::{
    build_implicit_solution, conservation_law_integrals, defining_function_from_initial, verify_first_integral,
    BuildOptions, FirstIntegralSet, ImplicitSolution, IntegralError, NondegeneracyReport, ResidualReport,
};
use crate::locus::{
    extract_singular_locus, extract_surface, split_component, Component, ComponentError, LevelSurface, SigmaOptions,
    SingularLocus, SurfaceError,
};
use crate::problem::{load_problem, problem_from_json, LoadedProblem, ProblemError, VectorField};

/// Samples of the initial set per parameter axis.
pub const GAMMA_SAMPLES: usize = 33;
/// Tolerance on the relative first-integral residual `|Xρ|`.
pub const INTEGRAL_TOL: f64 = 1e-10;
pub const VERIFY_SAMPLES: usize = 1000;
pub const VERIFY_SEED: u64 = 20_240_917;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("no first integrals: the equation is not a conservation law and the file supplies no `rho`")]
    MissingIntegrals,
    #[error(transparent)]
    Integral(#[from] IntegralError),
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error(transparent)]
    Component(#[from] ComponentError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    ConsLaw(#[from] ConsLawError),
    #[error("not a scalar conservation law in one space variable")]
    NotConservationLaw,
}

impl PipelineError {
    /// Failures reading or parsing input, as opposed to mathematical ones.
    pub fn is_input_error(&self) -> bool {
        matches!(self, PipelineError::Problem(e) if e.is_input_error())
    }
}

#[derive(Clone, Debug)]
pub struct Pipeline {
    pub loaded: LoadedProblem,
    pub field: VectorField,
    pub integrals: FirstIntegralSet,
    pub solution: ImplicitSolution,
}

#[derive(Clone, Debug)]
pub struct VerifyReport {
    pub residuals: Vec<ResidualReport<f64>>,
    pub nondegeneracy: NondegeneracyReport<f64>,
}

impl VerifyReport {
    pub fn pass(&self) -> bool {
        self.residuals.iter().all(|r| r.pass && r.violations.is_empty()) && self.nondegeneracy.nondegenerate
    }
}

/// Every stage of a domain computation.
#[derive(Clone, Debug)]
pub struct Analysis {
    pub surface: LevelSurface<f64>,
    pub sigma: SingularLocus<f64>,
    pub component: Component,
    pub domain: MaximalDomain<f64>,
}

impl Pipeline {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        Self::from_loaded(load_problem(path)?)
    }

    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        Self::from_loaded(problem_from_json(text)?)
    }

    pub fn from_loaded(loaded: LoadedProblem) -> Result<Self, PipelineError> {
        let problem = &loaded.problem;
        let field = problem.characteristic_field();
        let integrals = match &loaded.rho {
            Some(rho) => FirstIntegralSet {
                rho: rho.clone(),
                provenance: crate::integrals::Provenance::UserSupplied,
            },
            None if problem.is_conservation_form() => conservation_law_integrals(&problem.a)?,
            None => return Err(PipelineError::MissingIntegrals),
        };
        let f = match &loaded.f {
            Some(f) => f.clone(),
            None => defining_function_from_initial(&loaded.initial, &integrals)?,
        };
        let gamma = loaded
            .initial
            .initial_set_samples::<f64>(GAMMA_SAMPLES)
            .map_err(ProblemError::from)?;
        let solution =
            build_implicit_solution(&field, &problem.window, &integrals, &f, &gamma, BuildOptions::default())?;
        Ok(Pipeline {
            loaded,
            field,
            integrals,
            solution,
        })
    }

    pub fn n(&self) -> usize {
        self.loaded.problem.n
    }

    pub fn continuation(&self) -> Continuation<'_> {
        Continuation::new(&self.solution, &self.loaded.initial, &self.loaded.problem.window)
    }

    /// First-integral residuals and nondegeneracy at random box points.
    pub fn verify(&self, samples: usize) -> VerifyReport {
        let points = self.loaded.problem.window.random_points(samples, VERIFY_SEED);
        VerifyReport {
            residuals: self
                .integrals
                .rho
                .iter()
                .map(|r| verify_first_integral(&self.field, r, &points, INTEGRAL_TOL))
                .collect(),
            nondegeneracy: self.integrals.check_nondegeneracy(&points),
        }
    }

    pub fn surface(&self, resolution: usize) -> Result<LevelSurface<f64>, PipelineError> {
        Ok(extract_surface(
            &self.solution.big_f,
            &self.loaded.problem.window,
            resolution,
        )?)
    }

    pub fn singular_locus(&self, surface: &LevelSurface<f64>) -> SingularLocus<f64> {
        extract_singular_locus(
            &self.solution,
            surface,
            &self.loaded.problem.window,
            SigmaOptions::default(),
        )
    }

    pub fn analyze(&self, resolution: usize) -> Result<Analysis, PipelineError> {
        let surface = self.surface(resolution)?;
        let sigma = self.singular_locus(&surface);
        let component = split_component(&surface, &sigma, &self.solution.gamma_samples)?;
        let domain = maximal_domain(&self.continuation(), &surface, &sigma, &component)?;
        Ok(Analysis {
            surface,
            sigma,
            component,
            domain,
        })
    }

    /// Closed-form view when the equation is `u_t + a(u) u_x = 0`.
    pub fn conservation_law(&self) -> Result<ConservationLaw, PipelineError> {
        let p = &self.loaded.problem;
        if p.n != 1 || !p.is_conservation_form() {
            return Err(PipelineError::NotConservationLaw);
        }
        Ok(ConservationLaw::new(p.a[0].clone(), self.loaded.initial.h.clone())?)
    }
}
