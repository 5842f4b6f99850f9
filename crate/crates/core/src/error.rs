//! Error taxonomy shared across the toolkit.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HjtError {
    /// A point failed a domain guard before evaluation.
    #[error("point lies outside the declared domain")]
    GuardViolation,

    /// Evaluation produced NaN or an infinity despite passing the guard.
    #[error("evaluation produced a non-finite value")]
    NonFinite,

    /// Inputs with inconsistent dimensions reached an operation.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A matrix solve met a condition estimate beyond the singular threshold.
    #[error("matrix is numerically singular")]
    NumericallySingular,

    /// The fiber Hessian of the Lagrangian is singular where a regular one
    /// was required (Legendre inversion, fiber seeding).
    #[error("fiber Hessian of the Lagrangian is singular at the sample")]
    SingularHessian,

    /// A degenerate force equation W·a = rhs admits no solution within
    /// tolerance: the right-hand side has a component outside the range of W.
    #[error("singular force equation is inconsistent (residual {residual:.3e})")]
    InconsistentSingularSystem { residual: f64 },

    /// The Cartan two-form failed to invert where a Poisson bracket or
    /// Hamiltonian vector field needed it.
    #[error("Cartan two-form is singular at the sample")]
    SingularOmega,

    /// Every lattice point of a verification grid was rejected by the guard.
    #[error("no grid point passes the domain guard")]
    EmptyGrid,

    /// Newton iteration failed to converge within the iteration budget.
    #[error("Newton iteration did not converge within {max_iter} steps (residual {residual:.3e})")]
    NewtonDiverged { max_iter: usize, residual: f64 },

    /// The fiber Jacobian of an integral family is singular at the seed, so
    /// the level set cannot be solved for velocities there.
    #[error("fiber Jacobian of the integral family is degenerate at the sample")]
    DegenerateFiberJacobian,

    /// An inertia tensor with a non-positive principal moment was supplied.
    #[error("inertia tensor must have positive principal moments")]
    SingularInertia,

    /// A matrix failed the algebra membership test (antisymmetry or
    /// trace-free condition) beyond tolerance.
    #[error("matrix does not lie in the expected Lie algebra")]
    NotInAlgebra,

    /// The origin was passed where a punctured space is required.
    #[error("point must be nonzero")]
    ZeroPoint,

    /// A null vector was passed where the metric requires g(v,v) != 0.
    #[error("vector is null for the metric")]
    NullVector,

    /// Integration aborted because the guard failed mid-trajectory.
    #[error("domain guard violated at integration step {0}")]
    GuardViolationAtStep(usize),
}

pub type Result<T> = std::result::Result<T, HjtError>;
