//! Numerical laboratory for the free boundary problem `Δu = χ_{|∇u|≠0}` on
//! the unit half-ball with `u = 0` on the flat boundary.
//!
//! The crate provides structured grids and discrete operators, the
//! closed-form catalog of global solutions with classification, the weighted
//! two-phase monotonicity functional, blow-up rescaling with growth checkers,
//! a damped active-set finite-difference solver, and slope/cone analysis of
//! the touch between the free and the fixed boundary. The `fbtouch` binary
//! drives all of it from flat config files.

pub mod catalog;
pub mod config;
pub mod error;
pub mod field;
pub mod grid;
pub mod monotonicity;
pub mod regions;
pub mod scaling;
pub mod solver;
pub mod tangency;

pub use catalog::{classify, default_bumps, residual_check, GlobalSolution, SolutionKind, TestBump};
pub use error::{FbError, Result};
pub use field::{gradient, laplacian, sup_on_ball, ScalarField, VectorField};
pub use grid::{DomainKind, Grid, NodeIdx};
pub use monotonicity::{
    monotone_verdict, phi, split_directional, weighted_dirichlet, MonotonicityScan, Verdict,
};
pub use regions::{decompose_regions, RegionDecomposition, RegionLabel};
pub use config::{Config, SolveConfig};
pub use scaling::{
    dyadic_growth, hessian_bound_check, nondegeneracy_check, odd_reflect, patch_growth_check,
    quadratic_growth_check, rescale, DyadicGrowthReport, NondegeneracyOptions,
    NondegeneracyReport, PatchGrowthReport,
};
pub use solver::{
    contact_free_boundary, extract_free_boundary, free_boundary_points, solve, verify_membership,
    BoundaryData, MembershipVerdict, ProblemClass, ProblemClassVariant, ProblemSpec, SolveReport,
};
pub use tangency::{
    cone_exclusion, fit_modulus, slope_profile, synthetic_points, TangencyReport, EPS_TABLE,
};
