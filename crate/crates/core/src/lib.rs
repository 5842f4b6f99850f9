//! Numerical tangent- and cotangent-bundle Hamilton-Jacobi theory.
//!
//! From a Lagrangian L: TQ → ℝ or Hamiltonian H: T*Q → ℝ the crate builds
//! the associated geometric objects (Cartan forms θ_L and ω_L = −dθ_L, the
//! energy E_L, the dynamical second-order field, the Legendre map), and
//! verifies candidate vector fields X: Q → TQ and one-forms α: Q → T*Q
//! against the generalized and standard Hamilton-Jacobi problems:
//!
//! * generalized: TX ∘ X = Γ_L ∘ X, equivalently i(X)(X*ω_L) = d(X*E_L);
//! * standard: additionally X*ω_L = 0, so the image of X is Lagrangian
//!   and d(E_L ∘ X) = 0.
//!
//! Complete solutions are reconstructed from families of constants of the
//! motion by inverting the fibers, checked for transversality and
//! involutivity; singular Lagrangians, time-dependent systems lifted to
//! homogeneous autonomous ones, invariant systems on matrix Lie groups and
//! a magnetic-monopole system with its non-exact symplectic structure are
//! all handled by the same machinery.

pub mod dual;
pub mod dynamics;
pub mod error;
pub mod field;
pub mod foliations;
pub mod geometry;
pub mod grid;
pub mod hj_hamiltonian;
pub mod hj_lagrangian;
pub mod linalg;
pub mod systems;

pub use dual::{Dual, Real, D1, D2, D3};
pub use dynamics::{
    cartan_forms, cartan_omega_field, energy, fiber_inverse, hamiltonian_field, hamiltonian_rhs,
    integrate, lagrangian_sode, legendre, legendre_map, sode_rhs, theta_section,
    HamiltonianSystem, LagrangianSystem, SodeSolution, Trajectory,
};
pub use error::{HjtError, Result};
pub use field::{
    guard_all, guard_and, guard_from, Guard, MapField, RealMap, RealVecMap, ScalarField,
    ScalarFn, SectionField, SectionKind, VectorFn,
};
pub use geometry::{
    compose_scalar, differential_section, exterior_derivative, grad, hessian, interior_product,
    jacobian, oneform_differential_field, pullback_oneform, pullback_oneform_section,
    pullback_twoform, DiffConfig, DiffMode, FormMatrix, Hessian, TwoFormField,
};
pub use foliations::{
    build_complete_solution, fiber_independence, first_integral_residual,
    inverse_parameter_drift, involution_matrix, poisson_bracket, solve_leaf,
    transversality_check, IntegralFamily, LeafSolveConfig, TransversalityReport,
};
pub use grid::{AxisSpec, GridSpec};
pub use hj_hamiltonian::{
    associated_field, bridge_regularity_check, classical_hj_residual, hamiltonian_residual,
    legendre_bridge, matched_hamiltonian, projection_deviation_h, relatedness_residual, verify_h,
    CandidateOneForm, ClassicalHjReport,
};
pub use hj_lagrangian::{
    graph_map, hessian_relation_check, hj_oneform_residual, isotropy_consistency,
    projection_deviation, sode_residual, standard_checks, verify, CandidateVectorField,
    ChannelStats, ResidualReport, SampleResiduals, SodeResidual, StandardChecks, VerifyMode,
};
pub use linalg::Mat;
pub use systems::{registry, BuiltCandidate, CandidateSpec, SystemDescriptor};
