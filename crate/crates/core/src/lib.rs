//! Numerical laboratory for eigenvalues of the polyharmonic Neumann problem
//! `(-Δ)^m u = μ ρ u` on intervals and boxes.
//!
//! The crate assembles H^m-conforming spline discretizations of the order-m
//! energy form and the ρ-weighted mass form, solves the resulting generalized
//! symmetric eigenproblems by shift-inverted block iteration, and provides the
//! surrounding machinery used to probe how the spectrum depends on the mass
//! density: a catalog of concentration densities, radial bump constructions,
//! annuli decompositions of the weighted measure, closed-form bound factors,
//! Weyl reference values, and sweep/rate-fit orchestration.

pub mod basis;
pub mod bounds;
pub mod bumps;
pub mod density;
pub mod discretization;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod gny;
pub mod linalg;
pub mod spectrum;

pub use bounds::{uniformity_verdict, weyl_reference, BoundKind, BoundReport, DensityFunctionals};
pub use bumps::{
    build_disjoint_family, cap_profile, log_profile, solve_profile, AnnularRegion, BumpProfile,
    CapProfile, LogProfile, Profile, RadialTestFunction,
};
pub use density::{Density, LpNorm, PieceRegion, Weight};
pub use discretization::{
    BoundaryCondition, DiscreteSpace, DofVector, MassAssembly, QuadratureRule,
    SymmetricSparseMatrix,
};
pub use error::CoreError;
pub use geometry::{unit_ball_volume, Annulus, Ball, BoundaryStrip, Domain, Region};
pub use gny::{decompose, inner_radius_bound, verify, Decomposition, MeasureSpace, VerifyReport};
pub use spectrum::{
    kernel_dimension, minmax_upper_bound, polynomial_kernel_dim, rayleigh_quotient,
    solve_generalized, solve_steklov, SolverConfig, Spectrum,
};
