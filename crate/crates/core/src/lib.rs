//! Implicit constitutive relations for compressible fluids.
//!
//! The library evaluates, solves, and falsifies algebraic relations between
//! the density, its spatial gradient, and the Cauchy stress:
//!
//! - [`tensor3`]: symmetric 3x3 tensor algebra, invariants, and orthogonal
//!   sampling for isotropy checks;
//! - [`exprdsl`]: the expression language used to declare coefficient
//!   functions in configuration files;
//! - [`constitutive`]: relation families, tensor residuals, the explicit
//!   gradient-stress evaluator, and the isotropy (equivariance) check;
//! - [`solver`]: Newton solvers for the stress and its spherical branch,
//!   plus Simpson quadrature for hydrostatic integrals;
//! - [`hydrostatics`]: the half-space problem at rest under gravity —
//!   profiles, consistency checks, balance verification, CSV export;
//! - [`culling`]: classifying candidate relations against observations and
//!   reporting the surviving subset.
//!
//! All types are immutable values and every operation is a pure function of
//! its inputs, so independent evaluations can run concurrently.

#![forbid(unsafe_code)]

pub mod constitutive;
pub mod culling;
pub mod exprdsl;
pub mod hydrostatics;
pub mod solver;
pub mod tensor3;

pub use constitutive::{
    isotropy_check, isotropy_check_fn, korteweg_stress, CoefficientSet, ConstitutiveError,
    ConstitutiveRelation, KortewegParams,
};
pub use culling::{
    cull, generate_observation, CandidateSet, CullingError, CullingReport, Observation,
    ObservationData, StressSample, Verdict,
};
pub use exprdsl::{EvalContext, EvalError, Expr, ParseError, Var};
pub use hydrostatics::{
    consistency_on_profile, ideal_gas_profile, phi_from_density, verify_balances,
    write_profile_csv, BalanceReport, ConsistencyReport, HalfSpaceGrid, HydroError,
    HydrostaticSolution, DEFAULT_CONSISTENCY_TOL,
};
pub use solver::{
    integrate_profile, physical_branch, solve_spherical, solve_stress, NewtonSettings,
    RootReport, SolverError, SphericalRoots,
};
pub use tensor3::{
    invariants, matmul, outer, random_orthogonal, InvariantSet, Mat3, OrthogonalMatrix,
    SymTensor3, Vec3,
};
